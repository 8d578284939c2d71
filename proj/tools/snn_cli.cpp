// Command-line front end: train, eval, diagnose, gen-data.
//
// Any option of the form --key=value that matches a config key overrides
// the loaded configuration, e.g. `snn train --config base.cfg --epochs=5
// --loss.kind=trt --out runs/a`.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snn/checkpoint.hpp"
#include "snn/config.hpp"
#include "snn/diagnostics.hpp"
#include "snn/io.hpp"
#include "snn/train.hpp"

namespace {

using namespace snn;

/// Fold leftover --key=value arguments into the config; anything else is a
/// usage error.
void apply_overrides(Config& cfg, const std::vector<std::string>& extras) {
  for (const std::string& arg : extras) {
    if (arg.rfind("--", 0) != 0)
      throw CLI::ParseError("unrecognized argument: " + arg, 1);
    const std::size_t eq = arg.find('=');
    if (eq == std::string::npos)
      throw CLI::ParseError("override must be --key=value: " + arg, 1);
    const std::string key = arg.substr(2, eq - 2);
    const auto& known = train_config_keys();
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw CLI::ParseError("unknown config key: " + key, 1);
    cfg.set(key, arg.substr(eq + 1));
  }
}

Config base_config(const std::string& config_path) {
  return config_path.empty() ? Config() : Config::load(config_path);
}

struct LoadedModel {
  TrainConfig cfg;
  Model model;
};

/// Rebuild a model from a checkpoint's config echo plus overrides.
LoadedModel model_from_checkpoint(const Checkpoint& ck, const std::vector<std::string>& extras) {
  Config cfg = Config::parse(ck.config_echo);
  apply_overrides(cfg, extras);
  LoadedModel lm{parse_train_config(cfg), {}};
  const DatasetSplit data = build_datasets(lm.cfg);
  lm.model.spec = make_dense_spec(lm.cfg, shape_size(data.train.feature_shape()),
                                  data.train.classes);
  Rng rng(lm.cfg.seed);
  lm.model.params = init_params(lm.model.spec, rng);
  lm.model.running = init_running(lm.model.spec);
  AdamState opt = init_adam(lm.model.params);
  restore_from_checkpoint(ck, lm.model, opt);
  return lm;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume_path, const std::vector<std::string>& extras) {
  std::optional<Checkpoint> resume;
  Config cfg;
  if (!resume_path.empty()) {
    resume = load_checkpoint(resume_path);
    cfg = Config::parse(resume->config_echo);
    if (!config_path.empty())
      throw CLI::ParseError("--config and --resume are mutually exclusive", 1);
  } else {
    cfg = base_config(config_path);
  }
  apply_overrides(cfg, extras);
  const TrainConfig tc = parse_train_config(cfg);
  const TrainResult result = run_training(tc, out_dir, resume);
  const MetricsRecord& last = result.history.empty() ? MetricsRecord{} : result.history.back();
  std::cout << "trained " << result.history.size() << " epoch(s); test_loss="
            << format_real(last.test_loss) << " test_acc=" << format_real(last.test_acc)
            << '\n';
  std::cout << "run directory: " << out_dir << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::vector<std::string>& extras) {
  const LoadedModel lm = model_from_checkpoint(load_checkpoint(ckpt_path), extras);
  const DatasetSplit data = build_datasets(lm.cfg);
  const auto [loss, acc] = evaluate(lm.model, data.test, lm.cfg.batch_size);
  std::cout << "test_loss=" << format_real(loss) << " test_acc=" << format_real(acc) << '\n';
  return 0;
}

int cmd_diagnose(const std::string& what, const std::string& ckpt_path,
                 const std::string& out_dir, std::size_t samples,
                 const std::string& gammas_arg, std::size_t grid, real span,
                 const std::vector<std::string>& extras) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  LoadedModel lm = model_from_checkpoint(ck, extras);
  const DatasetSplit data = build_datasets(lm.cfg);
  std::filesystem::create_directories(out_dir);

  const std::size_t n = std::min<std::size_t>(samples, data.train.count());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;

  if (what == "fisher") {
    Tensor probe({n, lm.cfg.T, shape_size(data.train.feature_shape())});
    const Tensor batch = assemble_batch(data.train, idx, lm.cfg.T);  // [T,B,F]
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < lm.cfg.T; ++t)
        for (std::size_t f = 0; f < probe.shape()[2]; ++f)
          probe[(s * lm.cfg.T + t) * probe.shape()[2] + f] =
              batch[(t * n + s) * probe.shape()[2] + f];
    const FisherProfile prof = fisher_profile(lm.model, probe, ck.epoch);
    write_file_atomic(out_dir + "/fisher.csv", fisher_csv({prof}));
    std::cout << "ic=" << format_real(prof.centroid) << " -> " << out_dir << "/fisher.csv\n";
  } else if (what == "tgrad") {
    std::vector<real> gammas;
    std::istringstream gs(gammas_arg);
    std::string tok;
    while (std::getline(gs, tok, ','))
      if (!tok.empty()) gammas.push_back(parse_real(tok, "--gammas"));
    if (gammas.empty()) gammas.push_back(lm.model.spec.lif.gamma);
    const Tensor input = assemble_batch(data.train, idx, lm.cfg.T);
    const std::vector<int> labels = gather_labels(data.train, idx);
    const auto rows = vanishing_probe(lm.model, input, labels, lm.cfg.loss, gammas);
    for (real g : gammas) {
      const std::string path = out_dir + "/tgrad_gamma" + format_real(g) + ".csv";
      write_file_atomic(path, probe_csv(rows, g));
      std::cout << "-> " << path << '\n';
    }
  } else if (what == "landscape") {
    const Tensor input = assemble_batch(data.train, idx, lm.cfg.T);
    const std::vector<int> labels = gather_labels(data.train, idx);
    LandscapeConfig lcfg;
    lcfg.ka = lcfg.kb = grid;
    lcfg.span = span;
    lcfg.seed_d1 = lm.cfg.seed * 2 + 1;
    lcfg.seed_d2 = lm.cfg.seed * 2 + 2;
    auto loss_fn = [&](const Model& m) {
      RunningStats running = m.running;
      ForwardOptions opts;
      opts.norm = NormMode::Inference;
      opts.update_running = false;
      const ForwardTrace trace = forward(m.spec, m.params, running, input, opts);
      return evaluate_loss(lm.cfg.loss, trace.outputs, labels, data.train.classes,
                           regularized_weights(m.spec, m.params))
          .total;
    };
    const LandscapeGrid lg = landscape_2d(lm.model, loss_fn, lcfg);
    write_file_atomic(out_dir + "/landscape.csv", landscape_csv(lg));
    std::cout << "-> " << out_dir << "/landscape.csv\n";
  } else if (what == "asfr") {
    const Tensor input = assemble_batch(data.train, idx, lm.cfg.T);
    RunningStats running = lm.model.running;
    ForwardOptions opts;
    opts.norm = NormMode::Inference;
    opts.update_running = false;
    const ForwardTrace trace = forward(lm.model.spec, lm.model.params, running, input, opts);
    std::vector<std::size_t> spiking;
    for (std::size_t i = 0; i + 1 < lm.model.spec.layers.size(); ++i) spiking.push_back(i);
    const auto rates = asfr(trace, lm.model.spec, spiking);
    write_file_atomic(out_dir + "/asfr.csv", asfr_csv(rates));
    std::cout << "-> " << out_dir << "/asfr.csv\n";
  } else {
    throw CLI::ParseError("diagnose expects fisher|tgrad|landscape|asfr", 1);
  }
  return 0;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir,
                 const std::vector<std::string>& extras) {
  Config cfg = base_config(config_path);
  apply_overrides(cfg, extras);
  const TrainConfig tc = parse_train_config(cfg);
  const DatasetSplit data = build_datasets(tc);
  std::filesystem::create_directories(out_dir);
  save_csv_images(out_dir + "/train.csv", data.train);
  save_csv_images(out_dir + "/test.csv", data.test);
  std::cout << "wrote " << data.train.count() << " train / " << data.test.count()
            << " test samples to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking-network training engine with temporal objectives"};
  app.require_subcommand(1);
  app.allow_extras();

  std::string config_path, out_dir = "run", resume_path, ckpt_path;
  std::string diag_what, gammas = "";
  std::size_t samples = 32, grid = 21;
  real span = 1.0;

  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->allow_extras();
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--out", out_dir, "run directory");
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->allow_extras();
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();

  CLI::App* diag = app.add_subcommand("diagnose", "fisher | tgrad | landscape | asfr");
  diag->allow_extras();
  diag->add_option("what", diag_what, "fisher|tgrad|landscape|asfr")->required();
  diag->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  diag->add_option("--out", out_dir, "output directory")->default_val("diag");
  diag->add_option("--samples", samples, "probe sample count");
  diag->add_option("--gammas", gammas, "comma-separated leak factors (tgrad)");
  diag->add_option("--grid", grid, "landscape grid extent (odd)");
  diag->add_option("--span", span, "landscape direction span");

  CLI::App* gen = app.add_subcommand("gen-data", "Emit the configured dataset as CSV");
  gen->allow_extras();
  gen->add_option("--config", config_path, "key=value config file");
  gen->add_option("--out", out_dir, "output directory")->default_val("data");

  try {
    app.parse(argc, argv);
    if (train->parsed())
      return cmd_train(config_path, out_dir, resume_path, train->remaining());
    if (eval->parsed()) return cmd_eval(ckpt_path, eval->remaining());
    if (diag->parsed())
      return cmd_diagnose(diag_what, ckpt_path, out_dir, samples, gammas, grid, span,
                          diag->remaining());
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir, gen->remaining());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) {
      std::cerr << "error: " << e.what() << '\n' << app.help() << '\n';
      return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
    }
    return app.exit(e);  // --help and friends
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

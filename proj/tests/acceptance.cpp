// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Each criterion carries its tolerance and wall-clock budget in code.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "fisher_oracle.hpp"
#include "gradcheck.hpp"
#include "probe_oracle.hpp"
#include "snn/checkpoint.hpp"
#include "snn/config.hpp"
#include "snn/diagnostics.hpp"
#include "snn/io.hpp"
#include "snn/train.hpp"

using namespace snn;

namespace {

struct CriterionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw CriterionFailure(msg);
}

std::string fmt(real v) { return format_real(v); }

real median(std::vector<real> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Config base_config() {
  Config cfg;
  cfg.set("metrics.timing", "false");
  return cfg;
}

// ---------------------------------------------------------------------------
// 1. Gradient oracle suite
// ---------------------------------------------------------------------------
std::string criterion_gradients() {
  std::size_t total_checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const snntest::GradCase c = snntest::random_case(seed * 1000);
    const auto report = snntest::gradcheck(c, 1e-6, 1e-6, 1e-9);
    require(report.failures == 0,
            "net " + std::to_string(seed) + ": " + std::to_string(report.failures) +
                " gradient(s) off, worst " + report.worst_name + " abs " +
                fmt(report.worst_abs));
    total_checked += report.checked;
  }
  return "20 nets, " + std::to_string(total_checked) + " parameter gradients vs central FD";
}

// ---------------------------------------------------------------------------
// 2. Regularizer correctness
// ---------------------------------------------------------------------------
std::string criterion_regularizer() {
  Rng rng(77);
  std::size_t tuples = 0, elements = 0;
  while (tuples < 1000) {
    const std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(4);
    const Tensor w = seeded_normal(rng, {rows, cols}, 0, 1.2);
    LossConfig cfg;
    cfg.lambda = 1e-6 + 1e-2 * static_cast<real>(rng.uniform());
    cfg.delta = 1e-2 + static_cast<real>(rng.uniform());
    cfg.epsilon = 1e-8 + 1e-3 * static_cast<real>(rng.uniform());
    const std::size_t t = 1 + rng.below(12);
    ++tuples;

    const auto grad = trt_regularizer_grad({&w}, t, cfg);
    for (std::size_t i = 0; i < w.size(); ++i) {
      // The penalty is elementwise-separable, so difference each element's
      // own scalar contribution, with a five-point stencil to keep the
      // truncation error negligible even where exp(delta*(t-1)) is large.
      const real h = 1e-6 * std::max(real(1), std::abs(w[i]));
      auto at = [&](real x) {
        Tensor probe = Tensor::from({1}, {x});
        return trt_regularizer({&probe}, t, cfg);
      };
      const real fd = (8 * (at(w[i] + h) - at(w[i] - h)) -
                       (at(w[i] + 2 * h) - at(w[i] - 2 * h))) /
                      (12 * h);
      const real diff = std::abs(grad[0][i] - fd);
      const real scale = std::max(std::abs(grad[0][i]), std::abs(fd));
      require(diff <= 1e-14 || diff <= 1e-8 * scale,
              "tuple " + std::to_string(tuples) + " element " + std::to_string(i) +
                  ": grad " + fmt(grad[0][i]) + " vs fd " + fmt(fd));
      ++elements;
    }

    // r(1) is exactly the plain L2 penalty.
    real sum_sq = 0;
    for (std::size_t i = 0; i < w.size(); ++i) sum_sq += w[i] * w[i];
    require(trt_regularizer({&w}, 1, cfg) == cfg.lambda * sum_sq,
            "r(1) is not exactly lambda * sum W^2");

    // Strictly decreasing in t for delta > 0 and nonzero weights.
    real prev = trt_regularizer({&w}, 1, cfg);
    for (std::size_t step = 2; step <= 8; ++step) {
      const real cur = trt_regularizer({&w}, step, cfg);
      require(cur < prev, "r(t) failed to decrease at t=" + std::to_string(step));
      prev = cur;
    }
  }
  return "1000 tuples, " + std::to_string(elements) + " FD-checked elements";
}

// ---------------------------------------------------------------------------
// 3. Temporal vanishing
// ---------------------------------------------------------------------------
std::string criterion_vanishing() {
  const std::size_t T = 30;
  NetworkSpec spec;
  spec.T = T;
  spec.input_shape = {2};
  spec.lif.gamma = 0.5;
  LayerSpec hid;
  hid.fan_in = 2;
  hid.fan_out = 2;
  spec.layers.push_back(hid);
  LayerSpec ro;
  ro.fan_in = 2;
  ro.fan_out = 2;
  ro.is_readout = true;
  spec.layers.push_back(ro);

  Parameters params;
  LayerParams h;
  h.weight = Tensor::from({2, 2}, {1, 0, 0, 1});
  h.bias = Tensor({2});
  LayerParams r;
  r.weight = Tensor::from({2, 2}, {0.7, -0.3, 0.4, 0.6});
  r.bias = Tensor({2});
  params.layers.push_back(h);
  params.layers.push_back(r);
  RunningStats running = init_running(spec);

  // Sub-threshold negative drive with a final pulse into the surrogate
  // support; membranes never spike and never enter the support before t=T.
  Tensor input({T, 1, 2});
  for (std::size_t t = 0; t + 1 < T; ++t) {
    input[t * 2 + 0] = -0.3;
    input[t * 2 + 1] = -0.25;
  }
  input[(T - 1) * 2 + 0] = 1.05;
  input[(T - 1) * 2 + 1] = 1.0;

  const ForwardTrace trace = forward(spec, params, running, input, {});
  for (std::size_t e = 0; e < trace.layers[0].s.size(); ++e)
    require(trace.layers[0].s[e] == 0, "trace is not quiescent");

  std::vector<Tensor> u_seq, s_seq;
  for (std::size_t t = 0; t < T; ++t) {
    Tensor ut({2}), st({2});
    for (std::size_t j = 0; j < 2; ++j) {
      ut[j] = trace.layers[0].u[t * 2 + j];
      st[j] = trace.layers[0].s[t * 2 + j];
    }
    u_seq.push_back(ut);
    s_seq.push_back(st);
  }
  const Tensor prod = xi_product(u_seq, s_seq, spec.lif);
  for (std::size_t j = 0; j < 2; ++j)
    require(std::abs(prod[j]) <= std::pow(real(0.5), real(T)),
            "xi product " + fmt(prod[j]) + " exceeds 0.5^30");

  const LossValue lv = sdt_ce_loss(trace.outputs, {0});
  TemporalComponents comps;
  backward_with_components(spec, params, trace, lv.output_grad, comps);
  require(comps.temporal_norm[0][0] > 0, "probe is vacuous: zero temporal gradient");
  require(comps.temporal_norm[0][0] < 1e-6 * comps.spatial_norm[0][T - 1],
          "grad_T(1)=" + fmt(comps.temporal_norm[0][0]) + " not below 1e-6 * grad_P(T)=" +
              fmt(comps.spatial_norm[0][T - 1]));

  const snntest::ProbeOracleResult oracle =
      snntest::probe_oracle(spec, params, trace, lv.output_grad);
  for (std::size_t t = 0; t < T; ++t) {
    const real dp = std::abs(comps.spatial_norm[0][t] - oracle.spatial_norm[t]);
    const real dt = std::abs(comps.temporal_norm[0][t] - oracle.temporal_norm[t]);
    const real sp = std::max(comps.spatial_norm[0][t], oracle.spatial_norm[t]);
    const real st = std::max(comps.temporal_norm[0][t], oracle.temporal_norm[t]);
    require(dp <= 1e-10 * std::max(sp, real(1e-30)) + 1e-30,
            "probe/oracle grad_P mismatch at t=" + std::to_string(t + 1));
    require(dt <= 1e-10 * std::max(st, real(1e-30)) + 1e-30,
            "probe/oracle grad_T mismatch at t=" + std::to_string(t + 1));
  }
  return "prod(xi)=" + fmt(prod[0]) + ", grad_T(1)/grad_P(T)=" +
         fmt(comps.temporal_norm[0][0] / comps.spatial_norm[0][T - 1]);
}

// ---------------------------------------------------------------------------
// 4. Objective equivalences
// ---------------------------------------------------------------------------
std::string criterion_equivalences() {
  Rng rng(88);
  for (int round = 0; round < 10; ++round) {
    const std::size_t T = 1 + rng.below(6), batch = 1 + rng.below(5);
    const std::size_t classes = 2 + rng.below(4);
    const Tensor outputs = seeded_normal(rng, {T, batch, classes}, 0, 1.5);
    std::vector<int> labels;
    for (std::size_t b = 0; b < batch; ++b)
      labels.push_back(static_cast<int>(rng.below(classes)));
    const Tensor w = seeded_normal(rng, {4, 4}, 0, 1);

    LossConfig trt_cfg;
    trt_cfg.kind = LossKind::Trt;
    trt_cfg.eta = 0;
    trt_cfg.lambda = 0;
    const LossValue a = trt_loss(outputs, labels, one_hot(labels, classes), {&w}, trt_cfg);
    LossConfig tet_cfg;
    tet_cfg.kind = LossKind::Tet;
    tet_cfg.mu = 0;
    const LossValue b = tet_loss(outputs, labels, tet_cfg);
    require(std::abs(a.total - b.total) <= 1e-12, "totals differ beyond 1e-12");
    for (std::size_t i = 0; i < a.output_grad.size(); ++i)
      require(std::abs(a.output_grad[i] - b.output_grad[i]) <= 1e-12,
              "output gradients differ beyond 1e-12");

    // Constant-in-time outputs collapse the averaged objective to one step.
    Tensor constant({T, batch, classes});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < batch * classes; ++i)
        constant[t * batch * classes + i] = outputs[i];
    const real averaged = sdt_ce_loss(constant, labels).total;
    Tensor first({batch, classes});
    for (std::size_t i = 0; i < batch * classes; ++i) first[i] = outputs[i];
    const real single = softmax_ce(first, labels).first;
    require(std::abs(averaged - single) <= 1e-12, "SDT constant-in-time mismatch");
  }
  return "10 random batches, totals and gradients within 1e-12";
}

// ---------------------------------------------------------------------------
// 5. Fisher / information centroid
// ---------------------------------------------------------------------------
std::string criterion_fisher() {
  // Brute-force agreement on a sub-1k-parameter network.
  Model m;
  m.spec.T = 5;
  m.spec.input_shape = {6};
  LayerSpec h;
  h.fan_in = 6;
  h.fan_out = 10;
  h.has_norm = true;
  m.spec.layers.push_back(h);
  LayerSpec ro;
  ro.fan_in = 10;
  ro.fan_out = 4;
  ro.is_readout = true;
  m.spec.layers.push_back(ro);
  Rng rng(91);
  m.params = init_params(m.spec, rng);
  m.running = init_running(m.spec);
  const Tensor inputs = seeded_normal(rng, {6, 5, 6}, 0.4, 0.8);
  for (std::size_t t = 1; t <= 5; ++t) {
    const real fast = fisher_trace(m, inputs, t);
    const real brute = snntest::fisher_oracle(m, inputs, t);
    require(std::abs(fast - brute) <= 1e-10 * std::max(std::abs(brute), real(1)),
            "fisher_trace " + fmt(fast) + " vs brute loop " + fmt(brute) + " at t=" +
                std::to_string(t));
  }

  // Exact centroid examples.
  require(information_centroid(std::vector<real>(10, 1.0)) == 5.5, "uniform centroid");
  require(information_centroid({0, 0, 1, 0}) == 3.0, "point-mass centroid");

  // Information concentrates earlier over training (median over 5 seeds).
  std::vector<real> first_ic, final_ic;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Config raw = base_config();
    raw.set("seed", std::to_string(seed));
    raw.set("epochs", "30");
    raw.set("batch_size", "64");
    raw.set("T", "10");
    raw.set("loss.kind", "trt");
    raw.set("net.hidden", "64");
    raw.set("synth.classes", "10");
    raw.set("synth.neurons", "40");
    raw.set("synth.count", "800");
    raw.set("synth.window", "10");
    raw.set("diag.cadence", "29");
    raw.set("diag.fisher_samples", "32");
    const TrainResult result = run_training(parse_train_config(raw), "");
    require(result.fisher.size() >= 2, "expected profiles at the first and final epochs");
    first_ic.push_back(result.fisher.front().centroid);
    final_ic.push_back(result.fisher.back().centroid);
  }
  const real med_first = median(first_ic), med_final = median(final_ic);
  require(med_final < med_first, "IC(final) median " + fmt(med_final) +
                                     " not below IC(epoch 1) median " + fmt(med_first));
  return "brute-force match; IC medians " + fmt(med_first) + " -> " + fmt(med_final);
}

// ---------------------------------------------------------------------------
// 6. Toy-scale method comparison
// ---------------------------------------------------------------------------
std::string criterion_comparison() {
  auto run_with = [&](std::uint64_t seed, const std::string& kind, bool noisy) {
    Config raw = base_config();
    raw.set("seed", std::to_string(seed));
    raw.set("epochs", noisy ? "50" : "30");
    raw.set("batch_size", noisy ? "32" : "64");
    raw.set("T", "10");
    raw.set("lr", noisy ? "0.002" : "0.001");
    raw.set("loss.kind", kind);
    raw.set("net.hidden", noisy ? "128" : "64");
    raw.set("synth.classes", "10");
    raw.set("synth.neurons", "40");
    if (noisy) {
      raw.set("synth.count", "400");
      raw.set("synth.window", "8");
      raw.set("synth.peak_rate", "0.4");
      raw.set("synth.base_rate", "0.1");
      raw.set("synth.noise", "0.15");
      raw.set("synth.label_noise", "0.2");
      raw.set("loss.lambda", "0.001");
    } else {
      raw.set("synth.count", "800");
      raw.set("synth.window", "10");
    }
    return run_training(parse_train_config(raw), "");
  };

  // The task itself is learnable under every objective.
  for (const std::string kind : {"sdt_ce", "tet", "trt"}) {
    const TrainResult clean = run_with(1, kind, false);
    require(clean.history.back().test_acc > 0.9,
            kind + " reached only " + fmt(clean.history.back().test_acc) +
                " on the clean task");
  }

  // Noisy-label comparison over 5 seeds.
  std::vector<real> sdt_acc, trt_acc, sdt_gap, trt_gap;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TrainResult sdt = run_with(seed, "sdt_ce", true);
    const TrainResult trt = run_with(seed, "trt", true);
    sdt_acc.push_back(sdt.history.back().test_acc);
    trt_acc.push_back(trt.history.back().test_acc);
    sdt_gap.push_back(sdt.history.back().test_loss - sdt.history.back().train_total);
    trt_gap.push_back(trt.history.back().test_loss - trt.history.back().train_total);
  }
  const real acc_s = median(sdt_acc), acc_t = median(trt_acc);
  const real gap_s = median(sdt_gap), gap_t = median(trt_gap);
  require(acc_t >= acc_s,
          "median accuracy: trt " + fmt(acc_t) + " < sdt " + fmt(acc_s));
  require(gap_t <= gap_s, "median gap: trt " + fmt(gap_t) + " > sdt " + fmt(gap_s));
  return "acc sdt=" + fmt(acc_s) + " trt=" + fmt(acc_t) + "; gap sdt=" + fmt(gap_s) +
         " trt=" + fmt(gap_t);
}

// ---------------------------------------------------------------------------
// 7. tdBN invariant
// ---------------------------------------------------------------------------
std::string criterion_tdbn() {
  Rng rng(93);
  const std::size_t T = 7, B = 9, C = 11;
  const Tensor x = seeded_normal(rng, {T, B, C}, 1.7, 2.4);
  const Tensor scale = Tensor::full({C}, 1);
  const Tensor shift = Tensor({C});
  NormRunning running{Tensor({C}), Tensor::full({C}, 1)};
  NormConfig cfg;
  const Tensor y = tdbn_forward(x, C, 1, scale, shift, running, cfg, true, false);
  real worst_mean = 0, worst_var = 0;
  for (std::size_t c = 0; c < C; ++c) {
    real mean = 0;
    for (std::size_t r = 0; r < T * B; ++r) mean += y[r * C + c];
    mean /= static_cast<real>(T * B);
    real var = 0;
    for (std::size_t r = 0; r < T * B; ++r) var += (y[r * C + c] - mean) * (y[r * C + c] - mean);
    var /= static_cast<real>(T * B);
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_var = std::max(worst_var, std::abs(var - 1));
  }
  require(worst_mean < 1e-6, "per-channel mean " + fmt(worst_mean));
  require(worst_var < 1e-5, "per-channel variance deviation " + fmt(worst_var));
  return "worst |mean|=" + fmt(worst_mean) + ", worst |var-1|=" + fmt(worst_var);
}

// ---------------------------------------------------------------------------
// 8. Determinism & persistence (through the CLI, two real processes)
// ---------------------------------------------------------------------------
std::string criterion_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       ("snn_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = SNN_CLI_PATH;
  const std::string common =
      " --seed=11 --epochs=4 --batch_size=32 --T=8 --synth.classes=6 --synth.neurons=24"
      " --synth.count=240 --net.hidden=24 --loss.kind=trt --metrics.timing=false"
      " > /dev/null 2>&1";

  auto sh = [&](const std::string& cmd) {
    require(std::system(cmd.c_str()) == 0, "command failed: " + cmd);
  };
  sh(cli + " train --out " + (dir / "a").string() + common);
  sh(cli + " train --out " + (dir / "b").string() + common);
  const std::string ma = read_file((dir / "a/metrics.csv").string());
  const std::string mb = read_file((dir / "b/metrics.csv").string());
  require(ma == mb, "metrics.csv differs between identical seeded runs");
  require(read_file((dir / "a/final.ckpt").string()) ==
              read_file((dir / "b/final.ckpt").string()),
          "final checkpoints differ between identical seeded runs");

  // Interrupt at epoch 2 and resume: the continuation must be bit-exact.
  sh(cli + " train --out " + (dir / "part").string() + " --stop_after=2" + common);
  sh(cli + " train --resume " + (dir / "part/last.ckpt").string() + " --stop_after=0 --out " +
     (dir / "resumed").string() + common);
  const Checkpoint full = load_checkpoint((dir / "a/final.ckpt").string());
  const Checkpoint resumed = load_checkpoint((dir / "resumed/final.ckpt").string());
  require(full.arrays.size() == resumed.arrays.size(), "resumed checkpoint array count");
  for (std::size_t i = 0; i < full.arrays.size(); ++i) {
    require(full.arrays[i].first == resumed.arrays[i].first &&
                full.arrays[i].second == resumed.arrays[i].second,
            "resumed state differs in " + full.arrays[i].first);
  }
  require(full.rng_state == resumed.rng_state && full.epoch == resumed.epoch,
          "resumed scalar state differs");

  // Last two metrics rows of the resumed run equal the uninterrupted ones.
  std::istringstream sa(ma);
  std::vector<std::string> rows_a;
  for (std::string line; std::getline(sa, line);) rows_a.push_back(line);
  std::istringstream sr(read_file((dir / "resumed/metrics.csv").string()));
  std::vector<std::string> rows_r;
  for (std::string line; std::getline(sr, line);) rows_r.push_back(line);
  require(rows_r.size() == 3, "resumed run should hold exactly epochs 3 and 4");
  require(rows_r[1] == rows_a[3] && rows_r[2] == rows_a[4],
          "resumed metrics rows differ from the uninterrupted run");
  fs::remove_all(dir);
  return "two processes byte-identical; resume continues bit-exactly";
}

// ---------------------------------------------------------------------------
// 9. Landscape / ASFR plumbing
// ---------------------------------------------------------------------------
std::string criterion_landscape_asfr() {
  Model m;
  m.spec.T = 4;
  m.spec.input_shape = {5};
  LayerSpec h;
  h.fan_in = 5;
  h.fan_out = 6;
  m.spec.layers.push_back(h);
  LayerSpec ro;
  ro.fan_in = 6;
  ro.fan_out = 3;
  ro.is_readout = true;
  m.spec.layers.push_back(ro);
  Rng rng(95);
  m.params = init_params(m.spec, rng);
  m.running = init_running(m.spec);
  const Tensor input = seeded_normal(rng, {4, 5, 5}, 0.4, 0.8);
  const std::vector<int> labels = {0, 1, 2, 0, 1};

  auto loss_fn = [&](const Model& model) {
    RunningStats running = model.running;
    ForwardOptions opts;
    opts.norm = NormMode::Inference;
    const ForwardTrace trace = forward(model.spec, model.params, running, input, opts);
    return sdt_ce_loss(trace.outputs, labels).total;
  };
  const real base = loss_fn(m);
  const Parameters saved = m.params;
  LandscapeConfig cfg;
  cfg.ka = cfg.kb = 7;
  cfg.span = 0.8;
  const LandscapeGrid grid = landscape_2d(m, loss_fn, cfg);
  require(grid.loss[3 * 7 + 3] == base, "landscape center differs from unperturbed loss");
  for (std::size_t l = 0; l < saved.layers.size(); ++l)
    require(m.params.layers[l].weight == saved.layers[l].weight,
            "parameters not restored bit-exactly");

  // Hand-built trace with a known spike count.
  ForwardTrace trace;
  trace.layers.resize(2);
  trace.layers[0].s = Tensor({4, 5, 6});
  for (std::size_t i = 0; i < trace.layers[0].s.size(); ++i)
    trace.layers[0].s[i] = (i % 4 == 0) ? 1.0 : 0.0;
  const auto rates = asfr(trace, m.spec, {0});
  require(rates[0].second == 0.25, "asfr " + fmt(rates[0].second) + " != 0.25 exactly");
  return "center loss " + fmt(base) + " exact; asfr exact";
}

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<std::string()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "gradient oracle suite", 60, criterion_gradients},
      {2, "regularizer correctness", 10, criterion_regularizer},
      {3, "temporal vanishing", 10, criterion_vanishing},
      {4, "objective equivalences", 10, criterion_equivalences},
      {5, "fisher trace and centroid trend", 300, criterion_fisher},
      {6, "toy-scale method comparison", 600, criterion_comparison},
      {7, "tdbn statistics invariant", 10, criterion_tdbn},
      {8, "determinism and persistence", 120, criterion_determinism},
      {9, "landscape and asfr plumbing", 10, criterion_landscape_asfr},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string note;
    bool ok = true;
    try {
      note = c.run();
    } catch (const std::exception& e) {
      ok = false;
      note = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && elapsed > c.budget_seconds) {
      ok = false;
      note = "over budget: " + std::to_string(elapsed) + "s > " +
             std::to_string(c.budget_seconds) + "s";
    }
    std::printf("[%d/9] %-34s %s  (%.1fs)  %s\n", c.id, c.name.c_str(),
                ok ? "PASS" : "FAIL", elapsed, note.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("RESULT: %d/9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}

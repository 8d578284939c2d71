#include "snn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "snn/io.hpp"
#include "snn/kernels.hpp"

namespace snn {

namespace {

constexpr double kPi = 3.14159265358979323846;

void adam_update_tensor(Tensor& p, const Tensor& g, Tensor& m, Tensor& v,
                        const AdamConfig& cfg, real lr, real bc1, real bc2) {
  if (p.empty()) return;
  if (g.shape() != p.shape() || m.shape() != p.shape() || v.shape() != p.shape())
    throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (real(1) - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (real(1) - cfg.beta2) * g[i] * g[i];
    const real m_hat = m[i] / bc1;
    const real v_hat = v[i] / bc2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

/// inputs [N,T,flatF] for the first n samples, for the Fisher probe.
Tensor fisher_inputs(const Dataset& data, std::size_t n, std::size_t T) {
  const std::size_t flat_f = shape_size(data.feature_shape());
  Tensor out({n, T, flat_f});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < flat_f; ++f) {
        const real v = data.temporal ? data.inputs[(s * T + t) * flat_f + f]
                                     : data.inputs[s * flat_f + f];
        out[(s * T + t) * flat_f + f] = v;
      }
  }
  return out;
}

}  // namespace

AdamState init_adam(const Parameters& params) {
  AdamState st;
  for (const LayerParams& lp : params.layers) {
    LayerParams zm, zv;
    zm.weight = Tensor(lp.weight.shape());
    zv.weight = Tensor(lp.weight.shape());
    zm.bias = Tensor(lp.bias.shape());
    zv.bias = Tensor(lp.bias.shape());
    if (!lp.norm_scale.empty()) {
      zm.norm_scale = Tensor(lp.norm_scale.shape());
      zv.norm_scale = Tensor(lp.norm_scale.shape());
      zm.norm_shift = Tensor(lp.norm_shift.shape());
      zv.norm_shift = Tensor(lp.norm_shift.shape());
    }
    st.m.push_back(std::move(zm));
    st.v.push_back(std::move(zv));
  }
  return st;
}

void adam_step(Parameters& params, const Gradients& grads, AdamState& state,
               const AdamConfig& cfg, real lr) {
  if (grads.layers.size() != params.layers.size() || state.m.size() != params.layers.size())
    throw std::invalid_argument("adam_step: layer count mismatch");
  state.step += 1;
  const real bc1 = real(1) - std::pow(cfg.beta1, static_cast<real>(state.step));
  const real bc2 = real(1) - std::pow(cfg.beta2, static_cast<real>(state.step));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    adam_update_tensor(params.layers[l].weight, grads.layers[l].weight, state.m[l].weight,
                       state.v[l].weight, cfg, lr, bc1, bc2);
    adam_update_tensor(params.layers[l].bias, grads.layers[l].bias, state.m[l].bias,
                       state.v[l].bias, cfg, lr, bc1, bc2);
    adam_update_tensor(params.layers[l].norm_scale, grads.layers[l].norm_scale,
                       state.m[l].norm_scale, state.v[l].norm_scale, cfg, lr, bc1, bc2);
    adam_update_tensor(params.layers[l].norm_shift, grads.layers[l].norm_shift,
                       state.m[l].norm_shift, state.v[l].norm_shift, cfg, lr, bc1, bc2);
  }
}

real cosine_lr(std::size_t epoch, std::size_t total_epochs, real base_lr, real min_lr) {
  if (total_epochs == 0) throw std::invalid_argument("cosine_lr: total_epochs must be positive");
  if (epoch > total_epochs) throw std::invalid_argument("cosine_lr: epoch out of range");
  const double phase = kPi * static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return min_lr + (base_lr - min_lr) * static_cast<real>((1.0 + std::cos(phase)) / 2.0);
}

std::string metrics_header() {
  return "epoch,lr,train_total,train_ce,train_mse,train_reg,test_loss,test_acc,ic,seconds";
}

std::string metrics_row(const MetricsRecord& r) {
  std::ostringstream os;
  os << r.epoch << ',' << format_real(r.lr) << ',' << format_real(r.train_total) << ','
     << format_real(r.train_ce) << ',' << format_real(r.train_mse) << ','
     << format_real(r.train_reg) << ',' << format_real(r.test_loss) << ','
     << format_real(r.test_acc) << ',' << (r.has_ic ? format_real(r.ic) : std::string())
     << ',' << format_real(r.seconds);
  return os.str();
}

Tensor assemble_batch(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t T) {
  const std::size_t flat_f = shape_size(data.feature_shape());
  const std::size_t batch = idx.size();
  Tensor out({T, batch, flat_f});
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t s = idx[b];
    for (std::size_t t = 0; t < T; ++t) {
      const real* src = data.temporal ? data.inputs.data() + (s * T + t) * flat_f
                                      : data.inputs.data() + s * flat_f;
      real* dst = out.data() + (t * batch + b) * flat_f;
      for (std::size_t f = 0; f < flat_f; ++f) dst[f] = src[f];
    }
  }
  return out;
}

std::vector<int> gather_labels(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<int> labels;
  labels.reserve(idx.size());
  for (std::size_t s : idx) labels.push_back(data.labels[s]);
  return labels;
}

NetworkSpec make_dense_spec(const TrainConfig& cfg, std::size_t in_features,
                            std::size_t classes) {
  NetworkSpec spec;
  spec.T = cfg.T;
  spec.lif = cfg.lif;
  spec.input_shape = {in_features};
  std::size_t prev = in_features;
  for (std::size_t width : cfg.hidden) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.fan_in = prev;
    l.fan_out = width;
    l.has_norm = cfg.net_norm;
    spec.layers.push_back(l);
    prev = width;
  }
  LayerSpec ro;
  ro.kind = LayerKind::Dense;
  ro.fan_in = prev;
  ro.fan_out = classes;
  ro.is_readout = true;
  spec.layers.push_back(ro);
  spec.validate();
  return spec;
}

EpochStats train_epoch(Model& model, const Dataset& train, const TrainConfig& cfg,
                       AdamState& opt, Rng& rng, real lr) {
  const std::size_t n = train.count();
  if (n == 0) throw std::invalid_argument("train_epoch: empty training set");
  const std::vector<std::size_t> order = shuffled_indices(n, rng);
  const AdamConfig adam_cfg{cfg.beta1, cfg.beta2, cfg.adam_eps};

  EpochStats stats;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
    const std::size_t stop = std::min(n, start + cfg.batch_size);
    const std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
    const Tensor input = assemble_batch(train, idx, cfg.T);
    const std::vector<int> labels = gather_labels(train, idx);

    ForwardOptions opts;  // training norm, spiking neurons, running stats on
    ForwardTrace trace;
    LossValue lv;
    try {
      trace = forward(model.spec, model.params, model.running, input, opts);
      lv = evaluate_loss(cfg.loss, trace.outputs, labels, train.classes,
                         regularized_weights(model.spec, model.params));
    } catch (const std::exception& e) {
      throw std::runtime_error("train_epoch aborted at batch " + std::to_string(batch_index) +
                               ": " + e.what());
    }
    if (!std::isfinite(lv.total))
      throw std::runtime_error("train_epoch aborted at batch " + std::to_string(batch_index) +
                               ": non-finite loss " + format_real(lv.total));

    Gradients grads = backward(model.spec, model.params, trace, lv.output_grad);
    for (std::size_t l = 0; l < lv.weight_grad.size(); ++l)
      for (std::size_t i = 0; i < lv.weight_grad[l].size(); ++i)
        grads.layers[l].weight[i] += lv.weight_grad[l][i];
    adam_step(model.params, grads, opt, adam_cfg, lr);

    const real w = static_cast<real>(stop - start);
    stats.total += lv.total * w;
    stats.ce += lv.ce * w;
    stats.mse += lv.mse * w;
    stats.reg += lv.reg * w;
  }
  const real inv_n = real(1) / static_cast<real>(n);
  stats.total *= inv_n;
  stats.ce *= inv_n;
  stats.mse *= inv_n;
  stats.reg *= inv_n;
  return stats;
}

std::pair<real, real> evaluate(const Model& model, const Dataset& test,
                               std::size_t batch_size) {
  const std::size_t n = test.count();
  if (n == 0) throw std::invalid_argument("evaluate: empty test set");
  RunningStats running = model.running;  // inference mode never writes these
  ForwardOptions opts;
  opts.norm = NormMode::Inference;
  opts.update_running = false;

  real loss_sum = 0;
  std::size_t correct = 0;
  const std::vector<std::size_t> order = iota_indices(n);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    const std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
    const Tensor input = assemble_batch(test, idx, model.spec.T);
    const std::vector<int> labels = gather_labels(test, idx);
    const ForwardTrace trace = forward(model.spec, model.params, running, input, opts);
    const LossValue lv = sdt_ce_loss(trace.outputs, labels);
    loss_sum += lv.total * static_cast<real>(stop - start);

    const Tensor mean_logits = reduce_mean(trace.outputs, 0);
    const std::size_t classes = mean_logits.shape()[1];
    for (std::size_t b = 0; b < idx.size(); ++b) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (mean_logits[b * classes + c] > mean_logits[b * classes + best]) best = c;
      if (static_cast<int>(best) == labels[b]) ++correct;
    }
  }
  return {loss_sum / static_cast<real>(n), static_cast<real>(correct) / static_cast<real>(n)};
}

DatasetSplit build_datasets(const TrainConfig& cfg) {
  DatasetSplit split;
  if (cfg.data_kind == "synth") {
    const Dataset all = synth_generate(cfg.synth, cfg.synth_count);
    split = split_dataset(all, cfg.split_ratio, cfg.split_seed);
  } else if (cfg.data_kind == "csv") {
    if (cfg.data_path.empty()) throw std::runtime_error("config: data.path required for csv data");
    if (!cfg.data_test_path.empty()) {
      split.train = load_csv_images(cfg.data_path);
      split.test = load_csv_images(cfg.data_test_path);
    } else {
      split = split_dataset(load_csv_images(cfg.data_path), cfg.split_ratio, cfg.split_seed);
    }
  } else if (cfg.data_kind == "events") {
    if (cfg.data_path.empty())
      throw std::runtime_error("config: data.path required for events data");
    if (!cfg.data_test_path.empty()) {
      split.train = load_event_dataset(cfg.data_path, cfg.T, cfg.events_out_h, cfg.events_out_w);
      split.test =
          load_event_dataset(cfg.data_test_path, cfg.T, cfg.events_out_h, cfg.events_out_w);
    } else {
      split = split_dataset(
          load_event_dataset(cfg.data_path, cfg.T, cfg.events_out_h, cfg.events_out_w),
          cfg.split_ratio, cfg.split_seed);
    }
  } else {
    throw std::runtime_error("config: unknown data.kind " + cfg.data_kind);
  }
  for (const Dataset* d : {&split.train, &split.test}) {
    if (d->temporal && d->inputs.shape()[1] != cfg.T)
      throw std::runtime_error("config: dataset time extent " +
                               std::to_string(d->inputs.shape()[1]) +
                               " differs from T=" + std::to_string(cfg.T));
  }
  if (cfg.label_noise > 0) {
    // Separate stream so noise does not perturb the split or training rng.
    Rng noise_rng(cfg.split_seed + 0x9E3779B97F4A7C15ull);
    inject_label_noise(split.train, cfg.label_noise, noise_rng);
  }
  return split;
}

Checkpoint make_checkpoint(const TrainConfig& cfg, const Model& model, const AdamState& opt,
                           std::size_t epoch, std::uint64_t rng_state) {
  Checkpoint ck;
  ck.config_echo = cfg.raw.echo();
  ck.epoch = epoch;
  ck.rng_state = rng_state;
  ck.adam_step = opt.step;
  auto push = [&ck](const std::string& name, const Tensor& t) {
    if (!t.empty()) ck.arrays.emplace_back(name, t);
  };
  for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    push(p + "weight", model.params.layers[l].weight);
    push(p + "bias", model.params.layers[l].bias);
    push(p + "norm_scale", model.params.layers[l].norm_scale);
    push(p + "norm_shift", model.params.layers[l].norm_shift);
    push(p + "run_mean", model.running.layers[l].mean);
    push(p + "run_var", model.running.layers[l].var);
    push("adam.m." + p + "weight", opt.m[l].weight);
    push("adam.v." + p + "weight", opt.v[l].weight);
    push("adam.m." + p + "bias", opt.m[l].bias);
    push("adam.v." + p + "bias", opt.v[l].bias);
    push("adam.m." + p + "norm_scale", opt.m[l].norm_scale);
    push("adam.v." + p + "norm_scale", opt.v[l].norm_scale);
    push("adam.m." + p + "norm_shift", opt.m[l].norm_shift);
    push("adam.v." + p + "norm_shift", opt.v[l].norm_shift);
  }
  return ck;
}

void restore_from_checkpoint(const Checkpoint& ck, Model& model, AdamState& opt) {
  auto pull = [&ck](const std::string& name, Tensor& t, bool required) {
    const Tensor* found = ck.find(name);
    if (!found) {
      if (required) throw std::runtime_error("checkpoint: missing array " + name);
      return;
    }
    if (!t.empty() && found->shape() != t.shape())
      throw std::runtime_error("checkpoint: array " + name + " has shape " +
                               found->shape_str() + ", model wants " + t.shape_str());
    t = *found;
  };
  opt.step = ck.adam_step;
  for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    pull(p + "weight", model.params.layers[l].weight, true);
    pull(p + "bias", model.params.layers[l].bias, true);
    pull(p + "norm_scale", model.params.layers[l].norm_scale, false);
    pull(p + "norm_shift", model.params.layers[l].norm_shift, false);
    pull(p + "run_mean", model.running.layers[l].mean, false);
    pull(p + "run_var", model.running.layers[l].var, false);
    pull("adam.m." + p + "weight", opt.m[l].weight, true);
    pull("adam.v." + p + "weight", opt.v[l].weight, true);
    pull("adam.m." + p + "bias", opt.m[l].bias, true);
    pull("adam.v." + p + "bias", opt.v[l].bias, true);
    pull("adam.m." + p + "norm_scale", opt.m[l].norm_scale, false);
    pull("adam.v." + p + "norm_scale", opt.v[l].norm_scale, false);
    pull("adam.m." + p + "norm_shift", opt.m[l].norm_shift, false);
    pull("adam.v." + p + "norm_shift", opt.v[l].norm_shift, false);
  }
}

TrainResult run_training(const TrainConfig& cfg, const std::string& run_dir,
                         const std::optional<Checkpoint>& resume) {
  const DatasetSplit data = build_datasets(cfg);
  const std::size_t in_features = shape_size(data.train.feature_shape());
  const NetworkSpec spec = make_dense_spec(cfg, in_features, data.train.classes);

  TrainResult result;
  result.model.spec = spec;
  result.model.running = init_running(spec);
  Rng rng(cfg.seed);
  AdamState opt;
  std::size_t start_epoch = 0;
  if (resume) {
    result.model.params = init_params(spec, rng);  // shapes, then overwritten
    opt = init_adam(result.model.params);
    restore_from_checkpoint(*resume, result.model, opt);
    rng.set_state(resume->rng_state);
    start_epoch = resume->epoch;
    if (start_epoch > cfg.epochs)
      throw std::runtime_error("resume: checkpoint epoch is past the configured total");
  } else {
    result.model.params = init_params(spec, rng);
    opt = init_adam(result.model.params);
  }

  const bool persist = !run_dir.empty();
  if (persist) {
    std::filesystem::create_directories(run_dir);
    write_file_atomic(run_dir + "/config.txt", cfg.raw.echo());
  }

  auto flush_files = [&]() {
    if (!persist) return;
    std::ostringstream metrics;
    metrics << metrics_header() << '\n';
    for (const MetricsRecord& r : result.history) metrics << metrics_row(r) << '\n';
    write_file_atomic(run_dir + "/metrics.csv", metrics.str());
    if (!result.fisher.empty())
      write_file_atomic(run_dir + "/fisher.csv", fisher_csv(result.fisher));
  };

  const std::size_t last_epoch =
      cfg.stop_after > 0 ? std::min(cfg.stop_after, cfg.epochs) : cfg.epochs;
  for (std::size_t epoch = start_epoch; epoch < last_epoch; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const real lr = cosine_lr(epoch, cfg.epochs, cfg.lr, cfg.min_lr);
    const EpochStats stats = train_epoch(result.model, data.train, cfg, opt, rng, lr);
    const auto [test_loss, test_acc] = evaluate(result.model, data.test, cfg.batch_size);

    MetricsRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_total = stats.total;
    rec.train_ce = stats.ce;
    rec.train_mse = stats.mse;
    rec.train_reg = stats.reg;
    rec.test_loss = test_loss;
    rec.test_acc = test_acc;

    const bool probe_now =
        cfg.diag_cadence > 0 &&
        (epoch % cfg.diag_cadence == 0 || epoch + 1 == cfg.epochs);
    if (probe_now) {
      const std::size_t n = std::min(cfg.fisher_samples, data.train.count());
      const Tensor probe = fisher_inputs(data.train, n, cfg.T);
      FisherProfile prof = fisher_profile(result.model, probe, epoch + 1);
      rec.has_ic = true;
      rec.ic = prof.centroid;
      result.fisher.push_back(std::move(prof));
    }

    const auto t1 = std::chrono::steady_clock::now();
    rec.seconds = cfg.metrics_timing
                      ? static_cast<real>(std::chrono::duration<double>(t1 - t0).count())
                      : real(0);
    result.history.push_back(rec);

    if (persist) {
      flush_files();
      save_checkpoint(run_dir + "/last.ckpt",
                      make_checkpoint(cfg, result.model, opt, epoch + 1, rng.state()));
    }
  }
  if (persist && last_epoch == cfg.epochs) {
    save_checkpoint(run_dir + "/final.ckpt",
                    make_checkpoint(cfg, result.model, opt, cfg.epochs, rng.state()));
  }
  return result;
}

}  // namespace snn

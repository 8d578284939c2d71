#include "snn/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "snn/io.hpp"
#include "snn/rng.hpp"

namespace snn {

namespace {

Tensor sample_slice(const Tensor& inputs, std::size_t n) {
  // inputs [N,T,feat...] -> [T,1,feat...], contiguous block copy.
  std::vector<std::size_t> shape = inputs.shape();
  const std::size_t block = inputs.size() / shape[0];
  std::vector<std::size_t> out_shape = {shape[1], 1};
  for (std::size_t d = 2; d < shape.size(); ++d) out_shape.push_back(shape[d]);
  Tensor out(out_shape);
  const real* p = inputs.data() + n * block;
  for (std::size_t i = 0; i < block; ++i) out[i] = p[i];
  return out;
}

real weight_grad_sq_norm(const Gradients& grads) {
  real acc = 0;
  for (const LayerParams& lp : grads.layers) {
    const real* p = lp.weight.data();
    for (std::size_t i = 0; i < lp.weight.size(); ++i) acc += p[i] * p[i];
  }
  return acc;
}

}  // namespace

real fisher_trace(const Model& model, const Tensor& inputs, std::size_t t_cut) {
  const std::size_t T = model.spec.T;
  if (t_cut < 1 || t_cut > T) throw std::invalid_argument("fisher_trace: t_cut out of range");
  if (inputs.rank() < 3 || inputs.shape()[0] == 0)
    throw std::invalid_argument("fisher_trace: empty sample");
  if (inputs.shape()[1] != T)
    throw std::invalid_argument("fisher_trace: inputs time extent differs from model T");
  const std::size_t n_samples = inputs.shape()[0];

  RunningStats running = model.running;
  ForwardOptions opts;
  opts.norm = NormMode::Inference;
  opts.neuron = NeuronMode::Spiking;
  opts.update_running = false;

  real total = 0;
  for (std::size_t n = 0; n < n_samples; ++n) {
    const Tensor input = sample_slice(inputs, n);
    const ForwardTrace trace = forward(model.spec, model.params, running, input, opts);
    const std::size_t classes = trace.outputs.shape()[2];

    // Mean output over the first t_cut steps and its softmax posterior.
    std::vector<real> z(classes, 0);
    for (std::size_t t = 0; t < t_cut; ++t)
      for (std::size_t c = 0; c < classes; ++c)
        z[c] += trace.outputs[(t * 1 + 0) * classes + c] / static_cast<real>(t_cut);
    real m = z[0];
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, z[c]);
    real lse = 0;
    for (std::size_t c = 0; c < classes; ++c) lse += std::exp(z[c] - m);
    lse = m + std::log(lse);
    std::vector<real> p(classes);
    for (std::size_t c = 0; c < classes; ++c) p[c] = std::exp(z[c] - lse);

    // Exact class expectation of ‖d log p_c / d W‖².
    for (std::size_t c = 0; c < classes; ++c) {
      Tensor dO(trace.outputs.shape());
      for (std::size_t t = 0; t < t_cut; ++t)
        for (std::size_t j = 0; j < classes; ++j) {
          const real e_cj = (j == c) ? real(1) : real(0);
          dO[t * classes + j] = (e_cj - p[j]) / static_cast<real>(t_cut);
        }
      const Gradients grads = backward(model.spec, model.params, trace, dO);
      total += p[c] * weight_grad_sq_norm(grads);
    }
  }
  return total / static_cast<real>(n_samples);
}

FisherProfile fisher_profile(const Model& model, const Tensor& inputs, std::size_t epoch) {
  FisherProfile profile;
  profile.epoch = epoch;
  for (std::size_t t = 1; t <= model.spec.T; ++t)
    profile.traces.push_back(fisher_trace(model, inputs, t));
  profile.centroid = information_centroid(profile.traces);
  return profile;
}

real information_centroid(const std::vector<real>& traces) {
  if (traces.empty()) throw std::invalid_argument("information_centroid: empty profile");
  real num = 0, den = 0;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    if (traces[t] < 0)
      throw std::invalid_argument("information_centroid: negative trace entry");
    num += static_cast<real>(t + 1) * traces[t];
    den += traces[t];
  }
  if (den <= 0) throw std::invalid_argument("information_centroid: all-zero profile");
  return num / den;
}

std::vector<ProbeRow> vanishing_probe(const Model& model, const Tensor& input,
                                      const std::vector<int>& labels, const LossConfig& loss,
                                      const std::vector<real>& gammas) {
  if (model.spec.T < 2) throw std::invalid_argument("vanishing_probe: needs T >= 2");
  std::vector<ProbeRow> rows;
  for (real gamma : gammas) {
    Model probe = model;
    probe.spec.lif.gamma = gamma;
    ForwardOptions opts;
    opts.norm = NormMode::Training;
    opts.update_running = false;
    const ForwardTrace trace = forward(probe.spec, probe.params, probe.running, input, opts);
    const std::size_t classes = trace.outputs.shape()[2];
    const LossValue lv = evaluate_loss(loss, trace.outputs, labels, classes,
                                       regularized_weights(probe.spec, probe.params));
    const TemporalComponents comps =
        temporal_grad_components(probe.spec, probe.params, trace, lv.output_grad);
    for (std::size_t i = 0; i + 1 < probe.spec.layers.size(); ++i) {
      real peak = 0;
      for (real v : comps.temporal_norm[i]) peak = std::max(peak, v);
      for (std::size_t t = 0; t < probe.spec.T; ++t) {
        ProbeRow row;
        row.gamma = gamma;
        row.layer = i;
        row.t = t + 1;
        row.grad_p = comps.spatial_norm[i][t];
        row.grad_t = comps.temporal_norm[i][t];
        row.vanished = row.grad_t < real(1e-6) * peak;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<std::pair<std::size_t, real>> asfr(const ForwardTrace& trace,
                                               const NetworkSpec& spec,
                                               const std::vector<std::size_t>& layers) {
  std::vector<std::pair<std::size_t, real>> rates;
  for (std::size_t i : layers) {
    if (i >= spec.layers.size() || spec.layers[i].is_readout)
      throw std::invalid_argument("asfr: layer " + std::to_string(i) + " is not a spiking layer");
    const Tensor& s = trace.layers[i].s;
    if (s.empty()) throw std::invalid_argument("asfr: trace holds no spikes for layer");
    real acc = 0;
    for (std::size_t e = 0; e < s.size(); ++e) acc += s[e];
    rates.emplace_back(i, acc / static_cast<real>(s.size()));
  }
  return rates;
}

namespace {

std::vector<Tensor> make_direction(const Model& model, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> dirs;
  for (std::size_t i = 0; i < model.params.layers.size(); ++i) {
    const Tensor& w = model.params.layers[i].weight;
    Tensor d = seeded_normal(rng, w.shape(), 0, 1);
    // Per-output-unit rescaling: each slice of d gets the norm of the
    // matching weight slice (row for dense, filter for conv).
    const std::size_t units = w.shape()[0];
    const std::size_t block = w.size() / units;
    for (std::size_t o = 0; o < units; ++o) {
      real wn = 0, dn = 0;
      for (std::size_t j = 0; j < block; ++j) {
        wn += w[o * block + j] * w[o * block + j];
        dn += d[o * block + j] * d[o * block + j];
      }
      wn = std::sqrt(wn);
      dn = std::sqrt(dn);
      const real s = (dn > 0) ? wn / dn : real(0);
      for (std::size_t j = 0; j < block; ++j) d[o * block + j] *= s;
    }
    dirs.push_back(std::move(d));
  }
  return dirs;
}

}  // namespace

LandscapeGrid landscape_2d(Model& model, const std::function<real(const Model&)>& loss_fn,
                           const LandscapeConfig& cfg) {
  if (cfg.ka % 2 == 0 || cfg.kb % 2 == 0 || cfg.ka == 0 || cfg.kb == 0)
    throw std::invalid_argument("landscape_2d: grid extents must be odd");
  LandscapeGrid grid;
  grid.cfg = cfg;
  grid.loss = Tensor({cfg.ka, cfg.kb});
  for (std::size_t i = 0; i < cfg.ka; ++i)
    grid.a_offsets.push_back(cfg.span * (real(2) * static_cast<real>(i) -
                                         static_cast<real>(cfg.ka - 1)) /
                             (cfg.ka > 1 ? static_cast<real>(cfg.ka - 1) : real(1)));
  for (std::size_t j = 0; j < cfg.kb; ++j)
    grid.b_offsets.push_back(cfg.span * (real(2) * static_cast<real>(j) -
                                         static_cast<real>(cfg.kb - 1)) /
                             (cfg.kb > 1 ? static_cast<real>(cfg.kb - 1) : real(1)));

  const std::vector<Tensor> d1 = make_direction(model, cfg.seed_d1);
  const std::vector<Tensor> d2 = make_direction(model, cfg.seed_d2);
  std::vector<Tensor> base;
  for (const LayerParams& lp : model.params.layers) base.push_back(lp.weight);

  for (std::size_t i = 0; i < cfg.ka; ++i) {
    for (std::size_t j = 0; j < cfg.kb; ++j) {
      const real a = grid.a_offsets[i];
      const real b = grid.b_offsets[j];
      for (std::size_t l = 0; l < base.size(); ++l) {
        Tensor& w = model.params.layers[l].weight;
        if (a == 0 && b == 0) {
          w = base[l];  // center point is the unperturbed model, bit-exact
        } else {
          const Tensor& w0 = base[l];
          for (std::size_t e = 0; e < w.size(); ++e)
            w[e] = w0[e] + a * d1[l][e] + b * d2[l][e];
        }
      }
      real value;
      try {
        value = loss_fn(model);
      } catch (const std::exception&) {
        value = std::numeric_limits<real>::quiet_NaN();
      }
      grid.loss[i * cfg.kb + j] = value;
    }
  }
  for (std::size_t l = 0; l < base.size(); ++l) model.params.layers[l].weight = base[l];
  return grid;
}

std::string fisher_csv(const std::vector<FisherProfile>& profiles) {
  std::ostringstream os;
  os << "epoch,t,i_t,ic\n";
  for (const FisherProfile& p : profiles)
    for (std::size_t t = 0; t < p.traces.size(); ++t)
      os << p.epoch << ',' << (t + 1) << ',' << format_real(p.traces[t]) << ','
         << format_real(p.centroid) << '\n';
  return os.str();
}

std::string probe_csv(const std::vector<ProbeRow>& rows, real gamma) {
  std::ostringstream os;
  os << "layer,t,grad_p,grad_t\n";
  for (const ProbeRow& r : rows) {
    if (r.gamma != gamma) continue;
    os << r.layer << ',' << r.t << ',' << format_real(r.grad_p) << ','
       << format_real(r.grad_t) << '\n';
  }
  return os.str();
}

std::string landscape_csv(const LandscapeGrid& grid) {
  std::ostringstream os;
  os << "a,b,loss\n";
  for (std::size_t i = 0; i < grid.cfg.ka; ++i)
    for (std::size_t j = 0; j < grid.cfg.kb; ++j)
      os << format_real(grid.a_offsets[i]) << ',' << format_real(grid.b_offsets[j]) << ','
         << format_real(grid.loss[i * grid.cfg.kb + j]) << '\n';
  return os.str();
}

std::string asfr_csv(const std::vector<std::pair<std::size_t, real>>& rates) {
  std::ostringstream os;
  os << "layer,rate\n";
  for (const auto& [layer, rate] : rates) os << layer << ',' << format_real(rate) << '\n';
  return os.str();
}

}  // namespace snn

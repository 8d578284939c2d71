#pragma once

// Brute-force reference for the Fisher trace: one forward and one backward
// per (sample, class), cotangents written out longhand, weights-only
// squared norm. No batching of samples or classes anywhere.

#include <cmath>
#include <vector>

#include "snn/diagnostics.hpp"

namespace snntest {

inline snn::real fisher_oracle(const snn::Model& model, const snn::Tensor& inputs,
                               std::size_t t_cut) {
  using namespace snn;
  const std::size_t n_samples = inputs.shape()[0];
  const std::size_t T = model.spec.T;
  const std::size_t in_f = inputs.shape()[2];
  real total = 0;
  for (std::size_t n = 0; n < n_samples; ++n) {
    Tensor input({T, 1, in_f});
    for (std::size_t i = 0; i < T * in_f; ++i) input[i] = inputs[n * T * in_f + i];
    RunningStats running = model.running;
    ForwardOptions opts;
    opts.norm = NormMode::Inference;
    opts.update_running = false;
    const ForwardTrace trace = forward(model.spec, model.params, running, input, opts);
    const std::size_t classes = trace.outputs.shape()[2];

    std::vector<real> z(classes, 0);
    for (std::size_t t = 0; t < t_cut; ++t)
      for (std::size_t c = 0; c < classes; ++c)
        z[c] += trace.outputs[t * classes + c] / static_cast<real>(t_cut);
    real m = z[0];
    for (real v : z) m = std::max(m, v);
    real denom = 0;
    for (real v : z) denom += std::exp(v - m);
    std::vector<real> p(classes);
    for (std::size_t c = 0; c < classes; ++c) p[c] = std::exp(z[c] - m) / denom;

    for (std::size_t c = 0; c < classes; ++c) {
      Tensor dO(trace.outputs.shape());
      for (std::size_t t = 0; t < t_cut; ++t)
        for (std::size_t j = 0; j < classes; ++j)
          dO[t * classes + j] =
              (((j == c) ? real(1) : real(0)) - p[j]) / static_cast<real>(t_cut);
      const Gradients g = backward(model.spec, model.params, trace, dO);
      real sq = 0;
      for (const LayerParams& lp : g.layers)
        for (std::size_t i = 0; i < lp.weight.size(); ++i) sq += lp.weight[i] * lp.weight[i];
      total += p[c] * sq;
    }
  }
  return total / static_cast<real>(n_samples);
}

}  // namespace snntest

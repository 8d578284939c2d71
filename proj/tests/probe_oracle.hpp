#pragma once

// Direct-loop oracle for the spatial/temporal gradient split of a
// two-layer dense network without normalization (hidden LIF + readout).
// Everything is recomputed from the cached trace with nested loops over
// future timesteps — independent of the reverse-time recursion inside
// backward().

#include <cmath>
#include <vector>

#include "snn/kernels.hpp"
#include "snn/network.hpp"

namespace snntest {

using namespace snn;

struct ProbeOracleResult {
  // Weight-shaped gradient contributions for the hidden layer, per t.
  std::vector<Tensor> spatial, temporal;
  std::vector<real> spatial_norm, temporal_norm;
};

inline ProbeOracleResult probe_oracle(const NetworkSpec& spec, const Parameters& params,
                                      const ForwardTrace& trace, const Tensor& dL_dO) {
  const std::size_t T = spec.T;
  const std::size_t batch = trace.batch;
  const std::size_t hidden = spec.layers[0].fan_out;
  const std::size_t in_f = spec.layers[0].fan_in;
  const std::size_t classes = spec.layers[1].fan_out;
  const Tensor& w_ro = params.layers[1].weight;  // [classes, hidden]
  const Tensor& u = trace.layers[0].u;
  const Tensor& s = trace.layers[0].s;
  const LifParams& lif = spec.lif;

  // Cotangent at the hidden spikes: dL/ds(t) = dL/dO(t) * W_ro.
  // g(t) folds in the surrogate; xi(t) is the one-step temporal factor.
  std::vector<std::vector<real>> g(T, std::vector<real>(batch * hidden, 0));
  std::vector<std::vector<real>> xi(T, std::vector<real>(batch * hidden, 0));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < hidden; ++h) {
        real cot = 0;
        for (std::size_t c = 0; c < classes; ++c)
          cot += dL_dO[(t * batch + b) * classes + c] * w_ro[c * hidden + h];
        const std::size_t e = (t * batch + b) * hidden + h;
        const real uu = u[e];
        g[t][b * hidden + h] = cot * surrogate_scalar(uu, lif);
        xi[t][b * hidden + h] = xi_scalar(uu, s[e], lif);
      }
  }

  ProbeOracleResult res;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<real> p_adj = g[t];
    std::vector<real> t_adj(batch * hidden, 0);
    // Temporal part: sum over future cotangents scaled by the running
    // product of xi factors from t to just before t'.
    for (std::size_t tp = t + 1; tp < T; ++tp) {
      for (std::size_t e = 0; e < batch * hidden; ++e) {
        real prod = 1;
        for (std::size_t k = t; k < tp; ++k) prod *= xi[k][e];
        t_adj[e] += g[tp][e] * prod;
      }
    }
    auto to_weight = [&](const std::vector<real>& adj) {
      Tensor dw({hidden, in_f});
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t h = 0; h < hidden; ++h)
          for (std::size_t f = 0; f < in_f; ++f)
            dw[h * in_f + f] +=
                adj[b * hidden + h] * trace.input[(t * batch + b) * in_f + f];
      return dw;
    };
    Tensor sp = to_weight(p_adj);
    Tensor tp = to_weight(t_adj);
    real spn = 0, tpn = 0;
    for (std::size_t i = 0; i < sp.size(); ++i) spn += sp[i] * sp[i];
    for (std::size_t i = 0; i < tp.size(); ++i) tpn += tp[i] * tp[i];
    res.spatial_norm.push_back(std::sqrt(spn));
    res.temporal_norm.push_back(std::sqrt(tpn));
    res.spatial.push_back(std::move(sp));
    res.temporal.push_back(std::move(tp));
  }
  return res;
}

}  // namespace snntest

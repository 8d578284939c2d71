#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "snn/network.hpp"
#include "snn/objectives.hpp"

namespace snn {

/// A network with everything needed to run it.
struct Model {
  NetworkSpec spec;
  Parameters params;
  RunningStats running;
};

/// Per-timestep Fisher-trace profile and its centroid for one epoch.
struct FisherProfile {
  std::size_t epoch = 0;
  std::vector<real> traces;  // I_t for t = 1..T
  real centroid = 0;
};

/// Squared-gradient trace of the model's own log posterior truncated at
/// timestep t_cut: the class expectation is taken exactly over the
/// softmax of the outputs averaged up to t_cut, gradients w.r.t. all
/// weight tensors. inputs is [N,T,features...]; each sample contributes
/// independently, so duplicating samples leaves the value unchanged.
real fisher_trace(const Model& model, const Tensor& inputs, std::size_t t_cut);

FisherProfile fisher_profile(const Model& model, const Tensor& inputs, std::size_t epoch);

/// sum_t t * I_t / sum_t I_t with t counted from 1. Errors on an all-zero
/// profile.
real information_centroid(const std::vector<real>& traces);

struct ProbeRow {
  real gamma;
  std::size_t layer;
  std::size_t t;  // 1-based
  real grad_p;    // ‖ spatial weight-gradient contribution ‖
  real grad_t;    // ‖ temporal weight-gradient contribution ‖
  bool vanished;  // grad_t below 1e-6 of this layer's peak grad_t
};

/// Spatial/temporal gradient-norm split per layer and timestep, repeated
/// for each requested leak factor gamma.
std::vector<ProbeRow> vanishing_probe(const Model& model, const Tensor& input,
                                      const std::vector<int>& labels, const LossConfig& loss,
                                      const std::vector<real>& gammas);

/// Mean spike count per neuron-timestep for each selected spiking layer.
std::vector<std::pair<std::size_t, real>> asfr(const ForwardTrace& trace,
                                               const NetworkSpec& spec,
                                               const std::vector<std::size_t>& layers);

struct LandscapeConfig {
  std::size_t ka = 21, kb = 21;  // odd so the grid centers at (0,0)
  real span = 1.0;
  std::uint64_t seed_d1 = 1, seed_d2 = 2;
};

struct LandscapeGrid {
  LandscapeConfig cfg;
  std::vector<real> a_offsets, b_offsets;
  Tensor loss;  // [ka,kb]; non-finite evaluations recorded as nan
};

/// Loss surface on the plane spanned by two filter-normalized random
/// directions through the current weights. Directions perturb weight
/// tensors only; each output unit's direction slice is rescaled to the
/// norm of the corresponding weight slice. The model's parameters are
/// restored bit-exactly before returning.
LandscapeGrid landscape_2d(Model& model, const std::function<real(const Model&)>& loss_fn,
                           const LandscapeConfig& cfg);

// CSV emission. Columns:
//   fisher:    epoch,t,i_t,ic
//   probe:     layer,t,grad_p,grad_t   (one file per gamma)
//   landscape: a,b,loss
//   asfr:      layer,rate
std::string fisher_csv(const std::vector<FisherProfile>& profiles);
std::string probe_csv(const std::vector<ProbeRow>& rows, real gamma);
std::string landscape_csv(const LandscapeGrid& grid);
std::string asfr_csv(const std::vector<std::pair<std::size_t, real>>& rates);

}  // namespace snn

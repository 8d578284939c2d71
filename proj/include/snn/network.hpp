#pragma once

#include <vector>

#include "snn/neuron.hpp"
#include "snn/rng.hpp"
#include "snn/tensor.hpp"

namespace snn {

enum class LayerKind { Dense, Conv2d };

/// One layer of the stack. Hidden layers are affine -> (optional
/// time-flattened batch norm) -> LIF; the readout layer is a plain affine
/// map evaluated per timestep, with no norm and no spiking.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  // dense
  std::size_t fan_in = 0, fan_out = 0;
  // conv2d
  std::size_t in_c = 0, out_c = 0, kernel = 0, stride = 1, pad = 0;
  bool has_norm = false;
  bool is_readout = false;
};

struct NormConfig {
  real eps = 1e-5;
  real momentum = 0.1;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  LifParams lif;
  std::size_t T = 1;
  std::vector<std::size_t> input_shape;  // per-sample, e.g. {F} or {C,H,W}
  NormConfig norm;

  void validate() const;
};

/// Resolved per-layer activation shapes, derived by walking input_shape
/// through the stack.
struct LayerShape {
  std::vector<std::size_t> in_shape, out_shape;  // per-sample
  std::size_t channels = 0, spatial = 0;         // norm view of the output
};
std::vector<LayerShape> plan_shapes(const NetworkSpec& spec);

struct LayerParams {
  Tensor weight;      // dense [out,in]; conv [oc,ic,k,k]
  Tensor bias;        // [out] / [oc]
  Tensor norm_scale;  // [channels] when has_norm, else empty
  Tensor norm_shift;
};

struct Parameters {
  std::vector<LayerParams> layers;
};
using Gradients = Parameters;  // same shapes, holds d(loss)/d(param)

struct NormRunning {
  Tensor mean, var;  // empty for layers without norm
};
struct RunningStats {
  std::vector<NormRunning> layers;
};

enum class NeuronMode { Spiking, Smoothed };
enum class NormMode { Training, Inference };

struct ForwardOptions {
  NormMode norm = NormMode::Training;
  NeuronMode neuron = NeuronMode::Spiking;
  bool update_running = true;  // only consulted in Training mode
};

/// Everything the backward pass consumes, cached per layer and timestep.
struct LayerTrace {
  Tensor x;                    // affine output before norm, [T,B,...]
  Tensor used_mean, used_var;  // statistics the norm actually applied
  Tensor u;                    // charged membrane potential, [T,B,...]
  Tensor s;                    // spikes (binary) or smoothed outputs
};

struct ForwardTrace {
  Tensor input;                   // [T,B,in...]
  std::vector<LayerTrace> layers; // readout layer stores only x
  Tensor outputs;                 // [T,B,n]
  ForwardOptions opts;
  std::size_t batch = 0;
};

/// Weight-space decomposition of each spiking layer's gradient into the
/// same-timestep (spatial) and through-time (temporal) cotangent parts.
/// spatial[i][t] + temporal[i][t] summed over t recovers backward()'s
/// weight gradient for layer i.
struct TemporalComponents {
  std::vector<std::vector<Tensor>> spatial, temporal;
  std::vector<std::vector<real>> spatial_norm, temporal_norm;  // Frobenius
};

/// Fan-in-scaled normal weights (std = sqrt(2/fan_in)), zero biases, unit
/// norm scales, zero shifts. Deterministic for a fixed rng state.
Parameters init_params(const NetworkSpec& spec, Rng& rng);

RunningStats init_running(const NetworkSpec& spec);

/// Batch norm over the flattened time*batch (and spatial) sample dimension.
/// Training mode standardizes with this batch's statistics and, when
/// update_running is set, folds them into the running estimates; inference
/// mode applies the running statistics. used_mean/used_var receive the
/// statistics actually applied.
Tensor tdbn_forward(const Tensor& x, std::size_t channels, std::size_t spatial,
                    const Tensor& scale, const Tensor& shift, NormRunning& running,
                    const NormConfig& cfg, bool training, bool update_running,
                    Tensor* used_mean = nullptr, Tensor* used_var = nullptr);

/// T-step forward pass. Layers run affine -> norm -> LIF with the membrane
/// starting at zero; the readout emits its affine output as O(t).
ForwardTrace forward(const NetworkSpec& spec, const Parameters& params,
                     RunningStats& running, const Tensor& input,
                     const ForwardOptions& opts);

/// Exact reverse-time accumulation of d(loss)/d(params) given the output
/// cotangents dL_dO [T,B,n]. The reset path participates in the temporal
/// Jacobian; the surrogate stands in for the spike derivative. On a trace
/// produce by the smoothed neuron mode this is the exact derivative of the
/// smoothed forward.
Gradients backward(const NetworkSpec& spec, const Parameters& params,
                   const ForwardTrace& trace, const Tensor& dL_dO);

/// backward() plus the per-(layer, timestep) spatial/temporal gradient
/// split used by the vanishing-gradient probe.
Gradients backward_with_components(const NetworkSpec& spec, const Parameters& params,
                                   const ForwardTrace& trace, const Tensor& dL_dO,
                                   TemporalComponents& comps);

TemporalComponents temporal_grad_components(const NetworkSpec& spec,
                                            const Parameters& params,
                                            const ForwardTrace& trace,
                                            const Tensor& dL_dO);

/// Weight tensors of all non-readout layers, the set the time-decaying
/// regularizer ranges over.
std::vector<const Tensor*> regularized_weights(const NetworkSpec& spec,
                                               const Parameters& params);

}  // namespace snn

#pragma once

#include <utility>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

enum class LossKind {
  SdtCe,   // cross-entropy on the time-averaged logits
  SdtMse,  // mean squared error on the time-averaged logits
  Tet,     // per-timestep CE blended with MSE toward a constant target
  Trt,     // per-timestep CE/MSE blend plus the time-decaying weight penalty
};

struct LossConfig {
  LossKind kind = LossKind::SdtCe;
  real eta = 0.05;      // CE/MSE blend weight (Trt)
  real mu = 0.0;        // CE/MSE blend weight (Tet)
  real lambda = 1e-5;   // penalty strength
  real delta = 0.25;    // penalty time-decay rate
  real epsilon = 1e-5;  // zero-weight safeguard inside the penalty
  real phi = 0.0;       // constant target of Tet's MSE term

  void validate() const;
};

/// Scalar loss with its bookkeeping split and the cotangents training
/// needs: per-timestep gradients w.r.t. the readout outputs, and (for the
/// weight penalty) an additive gradient per regularized weight tensor.
/// total always equals the weighted recombination of ce/mse/reg.
struct LossValue {
  real total = 0;
  real ce = 0;
  real mse = 0;
  real reg = 0;
  Tensor output_grad;               // [T,B,n]
  std::vector<Tensor> weight_grad;  // aligned with the regularized weights
};

Tensor one_hot(const std::vector<int>& labels, std::size_t classes);

/// Batch-mean cross entropy of logits [B,n] against integer labels, with
/// d(loss)/d(logits) = (softmax - onehot)/B.
std::pair<real, Tensor> softmax_ce(const Tensor& logits, const std::vector<int>& labels);

LossValue sdt_ce_loss(const Tensor& outputs, const std::vector<int>& labels);

LossValue sdt_mse_loss(const Tensor& outputs, const Tensor& onehot);

LossValue tet_loss(const Tensor& outputs, const std::vector<int>& labels,
                   const LossConfig& cfg);

/// r(t) = lambda * sum over weights of w^2 / (1 + (|w|+eps) * (exp(delta*(t-1)) - 1)).
/// t is 1-based; at t=1 (or delta=0) this is a plain L2 penalty, and for
/// delta>0 it decays monotonically toward zero as t grows.
real trt_regularizer(const std::vector<const Tensor*>& weights, std::size_t t,
                     const LossConfig& cfg);

/// Elementwise d r(t)/d w, one tensor per input weight tensor.
std::vector<Tensor> trt_regularizer_grad(const std::vector<const Tensor*>& weights,
                                         std::size_t t, const LossConfig& cfg);

LossValue trt_loss(const Tensor& outputs, const std::vector<int>& labels,
                   const Tensor& onehot, const std::vector<const Tensor*>& weights,
                   const LossConfig& cfg);

/// Dispatch on cfg.kind; builds the one-hot targets as needed.
LossValue evaluate_loss(const LossConfig& cfg, const Tensor& outputs,
                        const std::vector<int>& labels, std::size_t classes,
                        const std::vector<const Tensor*>& weights);

}  // namespace snn

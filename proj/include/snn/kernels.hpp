#pragma once

#include "snn/tensor.hpp"

namespace snn {

// Dense/conv/norm compute kernels. The default entry points parallelize
// with OpenMP over independent output elements only — every reduction runs
// sequentially inside one thread — so results are bit-identical to the
// serial reference implementations in snn::serial regardless of thread
// count. tests/test_kernels_parity.cpp pins that contract and
// tools/bench_kernels.cpp compares the two.

/// Standard matrix product: a[m×k] · b[k×n] -> [m×n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// a[m×k] · b[n×k]ᵀ -> [m×n]. Affine forward with row-major [out×in] weights.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// a[k×m]ᵀ · b[k×n] -> [m×n]. Weight gradients from stacked row cotangents.
Tensor matmul_tn(const Tensor& a, const Tensor& b);

/// Arithmetic mean along `axis`, removing it.
Tensor reduce_mean(const Tensor& x, std::size_t axis);

// 2D convolution over images flattened to rows: in [N,C,H,W],
// w [OC,IC,K,K], bias [OC] (may be empty), zero padding.
Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& bias,
                      std::size_t stride, std::size_t pad);
Tensor conv2d_input_grad(const Tensor& dout, const Tensor& w,
                         const std::vector<std::size_t>& in_shape,
                         std::size_t stride, std::size_t pad);
Tensor conv2d_weight_grad(const Tensor& dout, const Tensor& in,
                          const std::vector<std::size_t>& w_shape,
                          std::size_t stride, std::size_t pad);

// Per-channel statistics over x viewed as [rows, channels, spatial]:
// rows = flattened time*batch, spatial = 1 for dense features.
// Variance is the biased (1/N) estimator.
void bn_stats(const Tensor& x, std::size_t channels, std::size_t spatial,
              Tensor& mean, Tensor& var);

/// y = scale * (x - mean) / sqrt(var + eps) + shift, channelwise.
Tensor bn_apply(const Tensor& x, const Tensor& mean, const Tensor& var,
                const Tensor& scale, const Tensor& shift, real eps,
                std::size_t channels, std::size_t spatial);

/// Backward through bn_apply when mean/var were computed from this same x
/// (training mode): the statistics' dependence on x is differentiated too.
void bn_backward_train(const Tensor& dy, const Tensor& x, const Tensor& mean,
                       const Tensor& var, const Tensor& scale, real eps,
                       std::size_t channels, std::size_t spatial, Tensor& dx,
                       Tensor& dscale, Tensor& dshift);

/// Backward through bn_apply with frozen statistics (inference mode).
void bn_backward_eval(const Tensor& dy, const Tensor& x, const Tensor& mean,
                      const Tensor& var, const Tensor& scale, real eps,
                      std::size_t channels, std::size_t spatial, Tensor& dx,
                      Tensor& dscale, Tensor& dshift);

namespace serial {
// Plain-loop reference implementations, kept for parity tests and the
// kernel benchmark. Same contracts as the parallel versions above.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor reduce_mean(const Tensor& x, std::size_t axis);
Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& bias,
                      std::size_t stride, std::size_t pad);
Tensor conv2d_input_grad(const Tensor& dout, const Tensor& w,
                         const std::vector<std::size_t>& in_shape,
                         std::size_t stride, std::size_t pad);
Tensor conv2d_weight_grad(const Tensor& dout, const Tensor& in,
                          const std::vector<std::size_t>& w_shape,
                          std::size_t stride, std::size_t pad);
void bn_stats(const Tensor& x, std::size_t channels, std::size_t spatial,
              Tensor& mean, Tensor& var);
Tensor bn_apply(const Tensor& x, const Tensor& mean, const Tensor& var,
                const Tensor& scale, const Tensor& shift, real eps,
                std::size_t channels, std::size_t spatial);
}  // namespace serial

}  // namespace snn

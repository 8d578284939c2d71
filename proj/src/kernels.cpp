#include "snn/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace snn {

namespace {

// Below this many output elements the OpenMP fork costs more than the loop.
constexpr std::int64_t kParallelCutoff = 4096;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

struct ConvDims {
  std::size_t n, c, h, w, oc, k, oh, ow, stride, pad;
};

ConvDims conv_dims(const std::vector<std::size_t>& in_shape,
                   const std::vector<std::size_t>& w_shape, std::size_t stride,
                   std::size_t pad) {
  require(in_shape.size() == 4, "conv2d: input must be [N,C,H,W]");
  require(w_shape.size() == 4, "conv2d: weight must be [OC,IC,K,K]");
  require(stride >= 1, "conv2d: stride must be >= 1");
  ConvDims d{};
  d.n = in_shape[0];
  d.c = in_shape[1];
  d.h = in_shape[2];
  d.w = in_shape[3];
  d.oc = w_shape[0];
  d.k = w_shape[2];
  d.stride = stride;
  d.pad = pad;
  require(w_shape[1] == d.c, "conv2d: channel mismatch");
  require(w_shape[3] == d.k, "conv2d: kernel must be square");
  require(d.h + 2 * pad >= d.k && d.w + 2 * pad >= d.k, "conv2d: kernel larger than padded input");
  d.oh = (d.h + 2 * pad - d.k) / stride + 1;
  d.ow = (d.w + 2 * pad - d.k) / stride + 1;
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference kernels
// ---------------------------------------------------------------------------

namespace serial {

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: operands must be rank 2");
  require(a.shape()[1] == b.shape()[0], "matmul: inner extents disagree");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor c({m, n});
  const real* pa = a.data();
  const real* pb = b.data();
  real* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      real acc = 0;
      for (std::size_t l = 0; l < k; ++l) acc += pa[i * k + l] * pb[l * n + j];
      pc[i * n + j] = acc;
    }
  }
  check_finite(c, "matmul");
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul_nt: operands must be rank 2");
  require(a.shape()[1] == b.shape()[1], "matmul_nt: inner extents disagree");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  Tensor c({m, n});
  const real* pa = a.data();
  const real* pb = b.data();
  real* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      real acc = 0;
      for (std::size_t l = 0; l < k; ++l) acc += pa[i * k + l] * pb[j * k + l];
      pc[i * n + j] = acc;
    }
  }
  check_finite(c, "matmul_nt");
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul_tn: operands must be rank 2");
  require(a.shape()[0] == b.shape()[0], "matmul_tn: inner extents disagree");
  const std::size_t k = a.shape()[0], m = a.shape()[1], n = b.shape()[1];
  Tensor c({m, n});
  const real* pa = a.data();
  const real* pb = b.data();
  real* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      real acc = 0;
      for (std::size_t l = 0; l < k; ++l) acc += pa[l * m + i] * pb[l * n + j];
      pc[i * n + j] = acc;
    }
  }
  check_finite(c, "matmul_tn");
  return c;
}

Tensor reduce_mean(const Tensor& x, std::size_t axis) {
  require(axis < x.rank(), "reduce_mean: axis out of range");
  require(x.shape()[axis] > 0, "reduce_mean: zero extent along axis");
  std::size_t outer = 1, inner = 1;
  const std::size_t extent = x.shape()[axis];
  for (std::size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];
  std::vector<std::size_t> out_shape;
  for (std::size_t d = 0; d < x.rank(); ++d)
    if (d != axis) out_shape.push_back(x.shape()[d]);
  Tensor out(out_shape);
  const real* px = x.data();
  real* po = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      real acc = 0;
      for (std::size_t j = 0; j < extent; ++j) acc += px[(o * extent + j) * inner + i];
      po[o * inner + i] = acc / static_cast<real>(extent);
    }
  }
  check_finite(out, "reduce_mean");
  return out;
}

Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& bias,
                      std::size_t stride, std::size_t pad) {
  const ConvDims d = conv_dims(in.shape(), w.shape(), stride, pad);
  require(bias.empty() || bias.size() == d.oc, "conv2d: bias extent mismatch");
  Tensor out({d.n, d.oc, d.oh, d.ow});
  const real* pin = in.data();
  const real* pw = w.data();
  real* po = out.data();
  for (std::size_t img = 0; img < d.n; ++img) {
    for (std::size_t oc = 0; oc < d.oc; ++oc) {
      const real b = bias.empty() ? real(0) : bias[oc];
      for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
          real acc = b;
          for (std::size_t ic = 0; ic < d.c; ++ic) {
            for (std::size_t ky = 0; ky < d.k; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) -
                                        static_cast<std::ptrdiff_t>(d.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
              for (std::size_t kx = 0; kx < d.k; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) -
                                          static_cast<std::ptrdiff_t>(d.pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                acc += pin[((img * d.c + ic) * d.h + iy) * d.w + ix] *
                       pw[((oc * d.c + ic) * d.k + ky) * d.k + kx];
              }
            }
          }
          po[((img * d.oc + oc) * d.oh + oy) * d.ow + ox] = acc;
        }
      }
    }
  }
  check_finite(out, "conv2d_forward");
  return out;
}

Tensor conv2d_input_grad(const Tensor& dout, const Tensor& w,
                         const std::vector<std::size_t>& in_shape,
                         std::size_t stride, std::size_t pad) {
  const ConvDims d = conv_dims(in_shape, w.shape(), stride, pad);
  require(dout.shape() == std::vector<std::size_t>({d.n, d.oc, d.oh, d.ow}),
          "conv2d_input_grad: dout shape mismatch");
  Tensor din(in_shape);
  const real* pd = dout.data();
  const real* pw = w.data();
  real* pi = din.data();
  for (std::size_t img = 0; img < d.n; ++img) {
    for (std::size_t ic = 0; ic < d.c; ++ic) {
      for (std::size_t iy = 0; iy < d.h; ++iy) {
        for (std::size_t ix = 0; ix < d.w; ++ix) {
          real acc = 0;
          for (std::size_t oc = 0; oc < d.oc; ++oc) {
            for (std::size_t ky = 0; ky < d.k; ++ky) {
              const std::ptrdiff_t num_y = static_cast<std::ptrdiff_t>(iy + d.pad) -
                                           static_cast<std::ptrdiff_t>(ky);
              if (num_y < 0 || num_y % static_cast<std::ptrdiff_t>(d.stride)) continue;
              const std::size_t oy = static_cast<std::size_t>(num_y) / d.stride;
              if (oy >= d.oh) continue;
              for (std::size_t kx = 0; kx < d.k; ++kx) {
                const std::ptrdiff_t num_x = static_cast<std::ptrdiff_t>(ix + d.pad) -
                                             static_cast<std::ptrdiff_t>(kx);
                if (num_x < 0 || num_x % static_cast<std::ptrdiff_t>(d.stride)) continue;
                const std::size_t ox = static_cast<std::size_t>(num_x) / d.stride;
                if (ox >= d.ow) continue;
                acc += pd[((img * d.oc + oc) * d.oh + oy) * d.ow + ox] *
                       pw[((oc * d.c + ic) * d.k + ky) * d.k + kx];
              }
            }
          }
          pi[((img * d.c + ic) * d.h + iy) * d.w + ix] = acc;
        }
      }
    }
  }
  check_finite(din, "conv2d_input_grad");
  return din;
}

Tensor conv2d_weight_grad(const Tensor& dout, const Tensor& in,
                          const std::vector<std::size_t>& w_shape,
                          std::size_t stride, std::size_t pad) {
  const ConvDims d = conv_dims(in.shape(), w_shape, stride, pad);
  require(dout.shape() == std::vector<std::size_t>({d.n, d.oc, d.oh, d.ow}),
          "conv2d_weight_grad: dout shape mismatch");
  Tensor dw(w_shape);
  const real* pd = dout.data();
  const real* pin = in.data();
  real* pw = dw.data();
  for (std::size_t oc = 0; oc < d.oc; ++oc) {
    for (std::size_t ic = 0; ic < d.c; ++ic) {
      for (std::size_t ky = 0; ky < d.k; ++ky) {
        for (std::size_t kx = 0; kx < d.k; ++kx) {
          real acc = 0;
          for (std::size_t img = 0; img < d.n; ++img) {
            for (std::size_t oy = 0; oy < d.oh; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) -
                                        static_cast<std::ptrdiff_t>(d.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
              for (std::size_t ox = 0; ox < d.ow; ++ox) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) -
                                          static_cast<std::ptrdiff_t>(d.pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                acc += pd[((img * d.oc + oc) * d.oh + oy) * d.ow + ox] *
                       pin[((img * d.c + ic) * d.h + iy) * d.w + ix];
              }
            }
          }
          pw[((oc * d.c + ic) * d.k + ky) * d.k + kx] = acc;
        }
      }
    }
  }
  check_finite(dw, "conv2d_weight_grad");
  return dw;
}

void bn_stats(const Tensor& x, std::size_t channels, std::size_t spatial,
              Tensor& mean, Tensor& var) {
  require(channels > 0 && spatial > 0, "bn_stats: bad extents");
  require(x.size() % (channels * spatial) == 0, "bn_stats: size not divisible by channels*spatial");
  const std::size_t rows = x.size() / (channels * spatial);
  require(rows * spatial > 0, "bn_stats: zero flattened extent");
  mean = Tensor({channels});
  var = Tensor({channels});
  const real* px = x.data();
  const real inv_n = real(1) / static_cast<real>(rows * spatial);
  for (std::size_t c = 0; c < channels; ++c) {
    real sum = 0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s) sum += px[(r * channels + c) * spatial + s];
    const real mu = sum * inv_n;
    real sq = 0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s) {
        const real d = px[(r * channels + c) * spatial + s] - mu;
        sq += d * d;
      }
    mean[c] = mu;
    var[c] = sq * inv_n;
  }
}

Tensor bn_apply(const Tensor& x, const Tensor& mean, const Tensor& var,
                const Tensor& scale, const Tensor& shift, real eps,
                std::size_t channels, std::size_t spatial) {
  require(mean.size() == channels && var.size() == channels, "bn_apply: stats extent mismatch");
  require(scale.size() == channels && shift.size() == channels, "bn_apply: affine extent mismatch");
  Tensor y(x.shape());
  const std::size_t rows = x.size() / (channels * spatial);
  const real* px = x.data();
  real* py = y.data();
  for (std::size_t c = 0; c < channels; ++c) {
    const real inv_sigma = real(1) / std::sqrt(var[c] + eps);
    const real g = scale[c], b = shift[c], mu = mean[c];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (r * channels + c) * spatial + s;
        py[i] = g * (px[i] - mu) * inv_sigma + b;
      }
  }
  check_finite(y, "bn_apply");
  return y;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels: parallel over independent outputs, reductions in-thread.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul: operands must be rank 2");
  require(a.shape()[1] == b.shape()[0], "matmul: inner extents disagree");
  const std::int64_t m = static_cast<std::int64_t>(a.shape()[0]);
  const std::int64_t k = static_cast<std::int64_t>(a.shape()[1]);
  const std::int64_t n = static_cast<std::int64_t>(b.shape()[1]);
  Tensor c({static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  const real* pa = a.data();
  const real* pb = b.data();
  real* pc = c.data();
#pragma omp parallel for if (m * n * k > kParallelCutoff)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      real acc = 0;
      for (std::int64_t l = 0; l < k; ++l) acc += pa[i * k + l] * pb[l * n + j];
      pc[i * n + j] = acc;
    }
  }
  check_finite(c, "matmul");
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul_nt: operands must be rank 2");
  require(a.shape()[1] == b.shape()[1], "matmul_nt: inner extents disagree");
  const std::int64_t m = static_cast<std::int64_t>(a.shape()[0]);
  const std::int64_t k = static_cast<std::int64_t>(a.shape()[1]);
  const std::int64_t n = static_cast<std::int64_t>(b.shape()[0]);
  Tensor c({static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  const real* pa = a.data();
  const real* pb = b.data();
  real* pc = c.data();
#pragma omp parallel for if (m * n * k > kParallelCutoff)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      real acc = 0;
      for (std::int64_t l = 0; l < k; ++l) acc += pa[i * k + l] * pb[j * k + l];
      pc[i * n + j] = acc;
    }
  }
  check_finite(c, "matmul_nt");
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul_tn: operands must be rank 2");
  require(a.shape()[0] == b.shape()[0], "matmul_tn: inner extents disagree");
  const std::int64_t k = static_cast<std::int64_t>(a.shape()[0]);
  const std::int64_t m = static_cast<std::int64_t>(a.shape()[1]);
  const std::int64_t n = static_cast<std::int64_t>(b.shape()[1]);
  Tensor c({static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  const real* pa = a.data();
  const real* pb = b.data();
  real* pc = c.data();
#pragma omp parallel for if (m * n * k > kParallelCutoff)
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      real acc = 0;
      for (std::int64_t l = 0; l < k; ++l) acc += pa[l * m + i] * pb[l * n + j];
      pc[i * n + j] = acc;
    }
  }
  check_finite(c, "matmul_tn");
  return c;
}

Tensor reduce_mean(const Tensor& x, std::size_t axis) {
  require(axis < x.rank(), "reduce_mean: axis out of range");
  require(x.shape()[axis] > 0, "reduce_mean: zero extent along axis");
  std::size_t outer = 1, inner = 1;
  const std::size_t extent = x.shape()[axis];
  for (std::size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];
  std::vector<std::size_t> out_shape;
  for (std::size_t d = 0; d < x.rank(); ++d)
    if (d != axis) out_shape.push_back(x.shape()[d]);
  Tensor out(out_shape);
  const real* px = x.data();
  real* po = out.data();
  const std::int64_t total = static_cast<std::int64_t>(outer * inner);
#pragma omp parallel for if (total * static_cast<std::int64_t>(extent) > kParallelCutoff)
  for (std::int64_t oi = 0; oi < total; ++oi) {
    const std::size_t o = static_cast<std::size_t>(oi) / inner;
    const std::size_t i = static_cast<std::size_t>(oi) % inner;
    real acc = 0;
    for (std::size_t j = 0; j < extent; ++j) acc += px[(o * extent + j) * inner + i];
    po[oi] = acc / static_cast<real>(extent);
  }
  check_finite(out, "reduce_mean");
  return out;
}

Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& bias,
                      std::size_t stride, std::size_t pad) {
  const ConvDims d = conv_dims(in.shape(), w.shape(), stride, pad);
  require(bias.empty() || bias.size() == d.oc, "conv2d: bias extent mismatch");
  Tensor out({d.n, d.oc, d.oh, d.ow});
  const real* pin = in.data();
  const real* pw = w.data();
  real* po = out.data();
  const std::int64_t jobs = static_cast<std::int64_t>(d.n * d.oc);
#pragma omp parallel for if (jobs * static_cast<std::int64_t>(d.oh* d.ow* d.c* d.k* d.k) > kParallelCutoff)
  for (std::int64_t job = 0; job < jobs; ++job) {
    const std::size_t img = static_cast<std::size_t>(job) / d.oc;
    const std::size_t oc = static_cast<std::size_t>(job) % d.oc;
    const real b = bias.empty() ? real(0) : bias[oc];
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
      for (std::size_t ox = 0; ox < d.ow; ++ox) {
        real acc = b;
        for (std::size_t ic = 0; ic < d.c; ++ic) {
          for (std::size_t ky = 0; ky < d.k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) -
                                      static_cast<std::ptrdiff_t>(d.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
            for (std::size_t kx = 0; kx < d.k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) -
                                        static_cast<std::ptrdiff_t>(d.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
              acc += pin[((img * d.c + ic) * d.h + iy) * d.w + ix] *
                     pw[((oc * d.c + ic) * d.k + ky) * d.k + kx];
            }
          }
        }
        po[((img * d.oc + oc) * d.oh + oy) * d.ow + ox] = acc;
      }
    }
  }
  check_finite(out, "conv2d_forward");
  return out;
}

Tensor conv2d_input_grad(const Tensor& dout, const Tensor& w,
                         const std::vector<std::size_t>& in_shape,
                         std::size_t stride, std::size_t pad) {
  const ConvDims d = conv_dims(in_shape, w.shape(), stride, pad);
  require(dout.shape() == std::vector<std::size_t>({d.n, d.oc, d.oh, d.ow}),
          "conv2d_input_grad: dout shape mismatch");
  Tensor din(in_shape);
  const real* pd = dout.data();
  const real* pw = w.data();
  real* pi = din.data();
  const std::int64_t jobs = static_cast<std::int64_t>(d.n * d.c);
#pragma omp parallel for if (jobs * static_cast<std::int64_t>(d.h* d.w* d.oc* d.k* d.k) > kParallelCutoff)
  for (std::int64_t job = 0; job < jobs; ++job) {
    const std::size_t img = static_cast<std::size_t>(job) / d.c;
    const std::size_t ic = static_cast<std::size_t>(job) % d.c;
    for (std::size_t iy = 0; iy < d.h; ++iy) {
      for (std::size_t ix = 0; ix < d.w; ++ix) {
        real acc = 0;
        for (std::size_t oc = 0; oc < d.oc; ++oc) {
          for (std::size_t ky = 0; ky < d.k; ++ky) {
            const std::ptrdiff_t num_y = static_cast<std::ptrdiff_t>(iy + d.pad) -
                                         static_cast<std::ptrdiff_t>(ky);
            if (num_y < 0 || num_y % static_cast<std::ptrdiff_t>(d.stride)) continue;
            const std::size_t oy = static_cast<std::size_t>(num_y) / d.stride;
            if (oy >= d.oh) continue;
            for (std::size_t kx = 0; kx < d.k; ++kx) {
              const std::ptrdiff_t num_x = static_cast<std::ptrdiff_t>(ix + d.pad) -
                                           static_cast<std::ptrdiff_t>(kx);
              if (num_x < 0 || num_x % static_cast<std::ptrdiff_t>(d.stride)) continue;
              const std::size_t ox = static_cast<std::size_t>(num_x) / d.stride;
              if (ox >= d.ow) continue;
              acc += pd[((img * d.oc + oc) * d.oh + oy) * d.ow + ox] *
                     pw[((oc * d.c + ic) * d.k + ky) * d.k + kx];
            }
          }
        }
        pi[((img * d.c + ic) * d.h + iy) * d.w + ix] = acc;
      }
    }
  }
  check_finite(din, "conv2d_input_grad");
  return din;
}

Tensor conv2d_weight_grad(const Tensor& dout, const Tensor& in,
                          const std::vector<std::size_t>& w_shape,
                          std::size_t stride, std::size_t pad) {
  const ConvDims d = conv_dims(in.shape(), w_shape, stride, pad);
  require(dout.shape() == std::vector<std::size_t>({d.n, d.oc, d.oh, d.ow}),
          "conv2d_weight_grad: dout shape mismatch");
  Tensor dw(w_shape);
  const real* pd = dout.data();
  const real* pin = in.data();
  real* pw = dw.data();
  const std::int64_t jobs = static_cast<std::int64_t>(dw.size());
#pragma omp parallel for if (jobs * static_cast<std::int64_t>(d.n* d.oh* d.ow) > kParallelCutoff)
  for (std::int64_t job = 0; job < jobs; ++job) {
    const std::size_t kx = static_cast<std::size_t>(job) % d.k;
    const std::size_t ky = (static_cast<std::size_t>(job) / d.k) % d.k;
    const std::size_t ic = (static_cast<std::size_t>(job) / (d.k * d.k)) % d.c;
    const std::size_t oc = static_cast<std::size_t>(job) / (d.k * d.k * d.c);
    real acc = 0;
    for (std::size_t img = 0; img < d.n; ++img) {
      for (std::size_t oy = 0; oy < d.oh; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * d.stride + ky) -
                                  static_cast<std::ptrdiff_t>(d.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * d.stride + kx) -
                                    static_cast<std::ptrdiff_t>(d.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
          acc += pd[((img * d.oc + oc) * d.oh + oy) * d.ow + ox] *
                 pin[((img * d.c + ic) * d.h + iy) * d.w + ix];
        }
      }
    }
    pw[job] = acc;
  }
  check_finite(dw, "conv2d_weight_grad");
  return dw;
}

void bn_stats(const Tensor& x, std::size_t channels, std::size_t spatial,
              Tensor& mean, Tensor& var) {
  require(channels > 0 && spatial > 0, "bn_stats: bad extents");
  require(x.size() % (channels * spatial) == 0, "bn_stats: size not divisible by channels*spatial");
  const std::size_t rows = x.size() / (channels * spatial);
  require(rows * spatial > 0, "bn_stats: zero flattened extent");
  mean = Tensor({channels});
  var = Tensor({channels});
  const real* px = x.data();
  const real inv_n = real(1) / static_cast<real>(rows * spatial);
  const std::int64_t nc = static_cast<std::int64_t>(channels);
#pragma omp parallel for if (static_cast<std::int64_t>(x.size()) > kParallelCutoff)
  for (std::int64_t c = 0; c < nc; ++c) {
    real sum = 0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s)
        sum += px[(r * channels + static_cast<std::size_t>(c)) * spatial + s];
    const real mu = sum * inv_n;
    real sq = 0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s) {
        const real d = px[(r * channels + static_cast<std::size_t>(c)) * spatial + s] - mu;
        sq += d * d;
      }
    mean[static_cast<std::size_t>(c)] = mu;
    var[static_cast<std::size_t>(c)] = sq * inv_n;
  }
}

Tensor bn_apply(const Tensor& x, const Tensor& mean, const Tensor& var,
                const Tensor& scale, const Tensor& shift, real eps,
                std::size_t channels, std::size_t spatial) {
  require(mean.size() == channels && var.size() == channels, "bn_apply: stats extent mismatch");
  require(scale.size() == channels && shift.size() == channels, "bn_apply: affine extent mismatch");
  Tensor y(x.shape());
  const std::size_t rows = x.size() / (channels * spatial);
  const real* px = x.data();
  real* py = y.data();
  const std::int64_t nc = static_cast<std::int64_t>(channels);
#pragma omp parallel for if (static_cast<std::int64_t>(x.size()) > kParallelCutoff)
  for (std::int64_t ci = 0; ci < nc; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    const real inv_sigma = real(1) / std::sqrt(var[c] + eps);
    const real g = scale[c], b = shift[c], mu = mean[c];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (r * channels + c) * spatial + s;
        py[i] = g * (px[i] - mu) * inv_sigma + b;
      }
  }
  check_finite(y, "bn_apply");
  return y;
}

void bn_backward_train(const Tensor& dy, const Tensor& x, const Tensor& mean,
                       const Tensor& var, const Tensor& scale, real eps,
                       std::size_t channels, std::size_t spatial, Tensor& dx,
                       Tensor& dscale, Tensor& dshift) {
  require(dy.shape() == x.shape(), "bn_backward: dy/x shape mismatch");
  dx = Tensor(x.shape());
  dscale = Tensor({channels});
  dshift = Tensor({channels});
  const std::size_t rows = x.size() / (channels * spatial);
  const real n = static_cast<real>(rows * spatial);
  const real* px = x.data();
  const real* pdy = dy.data();
  real* pdx = dx.data();
  const std::int64_t nc = static_cast<std::int64_t>(channels);
#pragma omp parallel for if (static_cast<std::int64_t>(x.size()) > kParallelCutoff)
  for (std::int64_t ci = 0; ci < nc; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    const real inv_sigma = real(1) / std::sqrt(var[c] + eps);
    const real mu = mean[c];
    // sum_dy and sum_dy_xhat carry the statistics' own dependence on x.
    real sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (r * channels + c) * spatial + s;
        sum_dy += pdy[i];
        sum_dy_xhat += pdy[i] * (px[i] - mu) * inv_sigma;
      }
    dshift[c] = sum_dy;
    dscale[c] = sum_dy_xhat;
    const real g = scale[c];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (r * channels + c) * spatial + s;
        const real xhat = (px[i] - mu) * inv_sigma;
        pdx[i] = g * inv_sigma * (pdy[i] - sum_dy / n - xhat * sum_dy_xhat / n);
      }
  }
  check_finite(dx, "bn_backward_train");
}

void bn_backward_eval(const Tensor& dy, const Tensor& x, const Tensor& mean,
                      const Tensor& var, const Tensor& scale, real eps,
                      std::size_t channels, std::size_t spatial, Tensor& dx,
                      Tensor& dscale, Tensor& dshift) {
  require(dy.shape() == x.shape(), "bn_backward: dy/x shape mismatch");
  dx = Tensor(x.shape());
  dscale = Tensor({channels});
  dshift = Tensor({channels});
  const std::size_t rows = x.size() / (channels * spatial);
  const real* px = x.data();
  const real* pdy = dy.data();
  real* pdx = dx.data();
  const std::int64_t nc = static_cast<std::int64_t>(channels);
#pragma omp parallel for if (static_cast<std::int64_t>(x.size()) > kParallelCutoff)
  for (std::int64_t ci = 0; ci < nc; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    const real inv_sigma = real(1) / std::sqrt(var[c] + eps);
    const real mu = mean[c];
    const real g = scale[c];
    real sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t i = (r * channels + c) * spatial + s;
        sum_dy += pdy[i];
        sum_dy_xhat += pdy[i] * (px[i] - mu) * inv_sigma;
        pdx[i] = pdy[i] * g * inv_sigma;
      }
    dshift[c] = sum_dy;
    dscale[c] = sum_dy_xhat;
  }
  check_finite(dx, "bn_backward_eval");
}

}  // namespace snn

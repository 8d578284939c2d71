#include <doctest.h>

#include "snn/kernels.hpp"
#include "snn/neuron.hpp"
#include "snn/rng.hpp"

// The OpenMP kernels promise bit-identical results to the serial reference
// implementations: parallelism only ever splits independent outputs, never
// a reduction.

using namespace snn;

TEST_CASE("matmul family matches serial reference bit-for-bit") {
  Rng rng(31);
  for (int round = 0; round < 3; ++round) {
    const std::size_t m = 3 + rng.below(90);
    const std::size_t k = 3 + rng.below(90);
    const std::size_t n = 3 + rng.below(90);
    const Tensor a = seeded_normal(rng, {m, k}, 0, 1);
    const Tensor b = seeded_normal(rng, {k, n}, 0, 1);
    CHECK(matmul(a, b) == serial::matmul(a, b));
    const Tensor bt = seeded_normal(rng, {n, k}, 0, 1);
    CHECK(matmul_nt(a, bt) == serial::matmul_nt(a, bt));
    const Tensor at = seeded_normal(rng, {k, m}, 0, 1);
    CHECK(matmul_tn(at, b) == serial::matmul_tn(at, b));
  }
}

TEST_CASE("reduce_mean matches serial reference bit-for-bit") {
  Rng rng(32);
  const Tensor x = seeded_normal(rng, {16, 33, 7}, 0, 1);
  for (std::size_t axis = 0; axis < 3; ++axis)
    CHECK(reduce_mean(x, axis) == serial::reduce_mean(x, axis));
}

TEST_CASE("conv2d forward hand-computed cases") {
  // 3x3 input, 2x2 identity-diagonal kernel: out[y][x] = in[y][x] + in[y+1][x+1].
  const Tensor in = Tensor::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor k = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1});
  const Tensor bias = Tensor::from({1}, {0.5});
  const Tensor out = conv2d_forward(in, k, bias, 1, 0);
  CHECK(out == Tensor::from({1, 1, 2, 2}, {6.5, 8.5, 12.5, 14.5}));

  // Zero padding: the top-left window only overlaps in[0][0] * k[1][1].
  const Tensor padded = conv2d_forward(in, k, Tensor({1}), 1, 1);
  CHECK(padded.shape() == std::vector<std::size_t>{1, 1, 4, 4});
  CHECK(padded[0] == 1.0);
  CHECK(padded[5] == 6.0);  // interior (1,1) matches the unpadded corner

  // Stride 2 keeps a single window.
  const Tensor strided = conv2d_forward(in, k, Tensor({1}), 2, 0);
  CHECK(strided == Tensor::from({1, 1, 1, 1}, {6.0}));

  // Two input channels sum into the output channel.
  const Tensor in2 = Tensor::from({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  const Tensor k2 = Tensor::from({1, 2, 1, 1}, {1, 0.5});
  const Tensor out2 = conv2d_forward(in2, k2, Tensor({1}), 1, 0);
  CHECK(out2 == Tensor::from({1, 1, 2, 2}, {6, 12, 18, 24}));
}

TEST_CASE("conv2d forward and gradients match serial reference bit-for-bit") {
  Rng rng(33);
  const Tensor in = seeded_normal(rng, {6, 3, 11, 9}, 0, 1);
  const Tensor w = seeded_normal(rng, {4, 3, 3, 3}, 0, 1);
  const Tensor bias = seeded_normal(rng, {4}, 0, 1);
  for (std::size_t pad : {std::size_t(0), std::size_t(1)}) {
    const Tensor out = conv2d_forward(in, w, bias, 1, pad);
    CHECK(out == serial::conv2d_forward(in, w, bias, 1, pad));
    const Tensor dout = seeded_normal(rng, out.shape(), 0, 1);
    CHECK(conv2d_input_grad(dout, w, in.shape(), 1, pad) ==
          serial::conv2d_input_grad(dout, w, in.shape(), 1, pad));
    CHECK(conv2d_weight_grad(dout, in, w.shape(), 1, pad) ==
          serial::conv2d_weight_grad(dout, in, w.shape(), 1, pad));
  }
}

TEST_CASE("bn kernels match serial reference bit-for-bit") {
  Rng rng(34);
  const std::size_t channels = 17, spatial = 5;
  const Tensor x = seeded_normal(rng, {24, channels, spatial}, 0, 2);
  Tensor mp, vp, ms, vs;
  bn_stats(x, channels, spatial, mp, vp);
  serial::bn_stats(x, channels, spatial, ms, vs);
  CHECK(mp == ms);
  CHECK(vp == vs);
  const Tensor scale = seeded_normal(rng, {channels}, 1, 0.1);
  const Tensor shift = seeded_normal(rng, {channels}, 0, 0.1);
  CHECK(bn_apply(x, mp, vp, scale, shift, 1e-5, channels, spatial) ==
        serial::bn_apply(x, ms, vs, scale, shift, 1e-5, channels, spatial));
}

TEST_CASE("lif_step matches serial reference bit-for-bit") {
  Rng rng(35);
  LifParams p;
  const Tensor u = seeded_normal(rng, {8, 100}, 0.5, 0.7);
  const Tensor x = seeded_normal(rng, {8, 100}, 0.3, 0.7);
  const LifStepResult a = lif_step(u, x, p);
  const LifStepResult b = serial::lif_step(u, x, p);
  CHECK(a.u_pre == b.u_pre);
  CHECK(a.s == b.s);
  CHECK(a.u_post == b.u_post);
}

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "snn/neuron.hpp"
#include "snn/rng.hpp"
#include "test_util.hpp"

using namespace snn;

namespace {
const LifParams kDefault{0.5, 1.0, 0.0, 1.0};
}

TEST_CASE("heaviside is strict at the threshold") {
  const Tensor x = Tensor::from({3}, {0.0, 0.3, -2.0});
  const Tensor h = heaviside(x);
  CHECK(h[0] == 0);  // the boundary does not fire
  CHECK(h[1] == 1);
  CHECK(h[2] == 0);
}

TEST_CASE("lif_step hand-simulated charge, fire, reset") {
  // Charged exactly to threshold: no spike, potential kept.
  {
    const auto r = lif_step(Tensor::from({1}, {0.0}), Tensor::from({1}, {1.0}), kDefault);
    CHECK(r.u_pre[0] == 1.0);
    CHECK(r.s[0] == 0);
    CHECK(r.u_post[0] == 1.0);
  }
  // Above threshold: spike, hard reset.
  {
    const auto r = lif_step(Tensor::from({1}, {1.0}), Tensor::from({1}, {1.0}), kDefault);
    CHECK(r.u_pre[0] == 1.5);
    CHECK(r.s[0] == 1);
    CHECK(r.u_post[0] == 0.0);
  }
  // Quiescent neuron stays at rest.
  {
    const auto r = lif_step(Tensor::from({1}, {0.0}), Tensor::from({1}, {0.0}), kDefault);
    CHECK(r.u_pre[0] == 0.0);
    CHECK(r.s[0] == 0);
    CHECK(r.u_post[0] == 0.0);
  }
  CHECK_THROWS_AS(lif_step(Tensor({2}), Tensor({3}), kDefault), std::invalid_argument);
}

TEST_CASE("spike binarity and reset correctness on random traces") {
  Rng rng(41);
  LifParams p = kDefault;
  p.u_reset = 0.1;
  Tensor u_prev({4, 5});
  for (int t = 0; t < 20; ++t) {
    const Tensor x = seeded_normal(rng, {4, 5}, 0.4, 0.8);
    const auto r = lif_step(u_prev, x, p);
    for (std::size_t i = 0; i < r.s.size(); ++i) {
      CHECK((r.s[i] == 0 || r.s[i] == 1));
      if (r.s[i] == 1) CHECK(r.u_post[i] == p.u_reset);
      if (r.s[i] == 0) CHECK(r.u_post[i] == r.u_pre[i]);
    }
    u_prev = r.u_post;
  }
}

TEST_CASE("surrogate is a triangle of height 1/alpha with support alpha") {
  LifParams p = kDefault;
  CHECK(surrogate_grad(Tensor::from({1}, {1.0}), p)[0] == 1.0);   // peak at u_th
  CHECK(surrogate_grad(Tensor::from({1}, {1.5}), p)[0] == 0.5);
  CHECK(surrogate_grad(Tensor::from({1}, {2.0}), p)[0] == 0.0);   // edge of support
  CHECK(surrogate_grad(Tensor::from({1}, {-1.0}), p)[0] == 0.0);

  p.alpha = 2.0;
  CHECK(surrogate_grad(Tensor::from({1}, {1.0}), p)[0] == doctest::Approx(0.5));
  for (real u : {-1.01, 3.01, 5.0})
    CHECK(surrogate_grad(Tensor::from({1}, {u}), p)[0] == 0.0);
}

TEST_CASE("xi factor hand-evaluated") {
  const LifParams p = kDefault;
  // Far below threshold with no spike: collapses to gamma.
  CHECK(xi_factor(Tensor::from({1}, {-3.0}), Tensor::from({1}, {0.0}), p)[0] == 0.5);
  // Fired at the reset potential with dead surrogate: 0.5*(1-1-0) = 0.
  CHECK(xi_factor(Tensor::from({1}, {0.0}), Tensor::from({1}, {1.0}), p)[0] == 0.0);
  // u at threshold, silent: 0.5*(1 - 0 - 1*1) = 0.
  CHECK(xi_factor(Tensor::from({1}, {1.0}), Tensor::from({1}, {0.0}), p)[0] == 0.0);
  CHECK_THROWS_AS(xi_factor(Tensor({2}), Tensor({3}), p), std::invalid_argument);
}

TEST_CASE("xi_product geometric special case and single factor") {
  const LifParams p = kDefault;
  std::vector<Tensor> u_seq, s_seq;
  for (int t = 0; t < 10; ++t) {
    u_seq.push_back(Tensor::from({1}, {-2.0}));  // quiescent: xi = gamma
    s_seq.push_back(Tensor::from({1}, {0.0}));
  }
  const Tensor prod = xi_product(u_seq, s_seq, p);
  CHECK(prod[0] == doctest::Approx(9.765625e-4).epsilon(1e-12));  // 0.5^10

  const Tensor one = xi_product({u_seq[0]}, {s_seq[0]}, p);
  CHECK(one[0] == xi_factor(u_seq[0], s_seq[0], p)[0]);

  CHECK_THROWS_AS(xi_product({}, {}, p), std::invalid_argument);
}

TEST_CASE("xi_product matches a direct loop oracle on random bounded traces") {
  Rng rng(42);
  const LifParams p = kDefault;
  const std::size_t n = 40;
  std::vector<Tensor> u_seq, s_seq;
  real bound = 0;
  for (std::size_t t = 0; t < n; ++t) {
    Tensor u = seeded_normal(rng, {6}, 0.4, 0.5);
    Tensor s(u.shape());
    for (std::size_t i = 0; i < u.size(); ++i) s[i] = heaviside_scalar(u[i] - p.u_th);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const real inner = std::abs(1 - s[i] - u[i] * surrogate_scalar(u[i], p));
      bound = std::max(bound, inner);
    }
    u_seq.push_back(std::move(u));
    s_seq.push_back(std::move(s));
  }
  const Tensor prod = xi_product(u_seq, s_seq, p);

  // Oracle: plain elementwise loop over the trace.
  for (std::size_t i = 0; i < 6; ++i) {
    real acc = 1;
    for (std::size_t t = 0; t < n; ++t)
      acc *= xi_scalar(u_seq[t][i], s_seq[t][i], p);
    CHECK(prod[i] == doctest::Approx(acc).epsilon(1e-12));
    // Geometric decay bound from the factored form.
    CHECK(std::abs(prod[i]) <=
          std::pow(p.gamma * bound, static_cast<real>(n)) + 1e-300);
  }
}

TEST_CASE("smoothed spike is a C1 ramp whose derivative is the surrogate") {
  LifParams p = kDefault;
  p.alpha = 0.7;
  // Endpoint values.
  CHECK(smooth_spike_scalar(p.u_th - p.alpha, p) == 0.0);
  CHECK(smooth_spike_scalar(p.u_th + p.alpha, p) == 1.0);
  CHECK(smooth_spike_scalar(p.u_th, p) == doctest::Approx(0.5));
  // Monotone and within [0,1].
  real prev = -1;
  for (real u = -0.5; u <= 2.5; u += 0.01) {
    const real v = smooth_spike_scalar(u, p);
    CHECK(v >= 0);
    CHECK(v <= 1);
    CHECK(v >= prev);
    prev = v;
  }
  // Central differences of the ramp reproduce the triangle away from knots.
  const real h = 1e-6;
  for (real u : {0.5, 0.9, 1.1, 1.5, -0.2, 2.3}) {
    const real fd = (smooth_spike_scalar(u + h, p) - smooth_spike_scalar(u - h, p)) / (2 * h);
    CHECK(fd == doctest::Approx(surrogate_scalar(u, p)).epsilon(1e-6));
  }
}

TEST_CASE("lif params validation") {
  LifParams p = kDefault;
  p.gamma = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = kDefault;
  p.gamma = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = kDefault;
  p.alpha = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

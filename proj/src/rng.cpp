#include "snn/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace snn {

double Rng::normal() {
  // u1 in (0,1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  const double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Tensor seeded_normal(Rng& rng, std::vector<std::size_t> shape, real mean, real std_dev) {
  if (std_dev < 0) throw std::invalid_argument("seeded_normal: negative std");
  Tensor t(std::move(shape));
  real* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    p[i] = mean + std_dev * static_cast<real>(rng.normal());
  }
  check_finite(t, "seeded_normal");
  return t;
}

}  // namespace snn

#pragma once

#include <cstdint>

#include "snn/tensor.hpp"

namespace snn {

/// Deterministic PRNG with a single 64-bit word of state.
///
/// The integer stream is SplitMix64 (Steele, Lea & Flood's splittable
/// generator finalizer): state advances by the golden-gamma constant and is
/// scrambled by two xor-shift-multiply rounds. Gaussian draws use the
/// Box-Muller transform written out explicitly; none of the std::*
/// distributions are used because their output is implementation-defined.
/// Identical seeds therefore produce identical streams across runs, and the
/// whole generator state round-trips through a single u64 in checkpoints.
///
/// Single-owner: not safe to share one instance across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal draw. Consumes exactly two uniforms per call so the
  /// state stays a pure function of the number of calls.
  double normal();

  /// Uniform integer in [0, n) by rejection, bias-free.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

/// i.i.d. normal draws with the given mean/std. std must be >= 0;
/// std == 0 yields a constant tensor.
Tensor seeded_normal(Rng& rng, std::vector<std::size_t> shape, real mean, real std_dev);

}  // namespace snn

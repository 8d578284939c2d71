#pragma once

#include <cmath>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

/// Leaky integrate-and-fire neuron constants. gamma = 1/tau is the per-step
/// leak on the membrane potential; alpha sets both width and amplitude of
/// the triangular surrogate derivative.
struct LifParams {
  real gamma = 0.5;
  real u_th = 1.0;
  real u_reset = 0.0;
  real alpha = 1.0;

  void validate() const;
};

/// One timestep of the iterative LIF update.
/// u_pre is the charged potential before any reset, s the binary spike,
/// u_post the potential after the hard reset.
struct LifStepResult {
  Tensor u_pre;
  Tensor s;
  Tensor u_post;
};

/// 1 where x > 0, else 0. The threshold itself does not fire.
inline real heaviside_scalar(real x) { return x > 0 ? real(1) : real(0); }

/// Triangular surrogate for the spike derivative:
/// (1/alpha^2) * max(0, alpha - |u - u_th|). Peak value 1/alpha at u_th,
/// support (u_th - alpha, u_th + alpha).
inline real surrogate_scalar(real u, const LifParams& p) {
  const real t = p.alpha - std::abs(u - p.u_th);
  return t > 0 ? t / (p.alpha * p.alpha) : real(0);
}

/// C1 ramp from 0 to 1 over [u_th - alpha, u_th + alpha] whose derivative
/// is exactly surrogate_scalar. Used as the differentiable stand-in for the
/// spike function when gradient-checking the backward pass.
inline real smooth_spike_scalar(real u, const LifParams& p) {
  const real d = u - p.u_th;
  const real a = p.alpha;
  if (d <= -a) return real(0);
  if (d >= a) return real(1);
  if (d <= 0) {
    const real r = d + a;
    return r * r / (2 * a * a);
  }
  const real r = a - d;
  return real(1) - r * r / (2 * a * a);
}

/// One-step temporal Jacobian of the membrane recurrence with the reset
/// path folded in: gamma * (1 - s - (u - u_reset) * surrogate(u)).
/// Its running product over a trace governs how far gradients reach back
/// in time.
inline real xi_scalar(real u, real s, const LifParams& p) {
  return p.gamma * (real(1) - s - (u - p.u_reset) * surrogate_scalar(u, p));
}

Tensor heaviside(const Tensor& x);

/// u_pre = gamma * u_prev + x_in; s = heaviside(u_pre - u_th);
/// u_post = u_pre where silent, u_reset where fired.
LifStepResult lif_step(const Tensor& u_prev, const Tensor& x_in, const LifParams& p);

/// Same recurrence with the C1 ramp in place of the hard spike; s is
/// real-valued in [0,1] and the reset interpolates accordingly.
LifStepResult lif_step_smoothed(const Tensor& u_prev, const Tensor& x_in, const LifParams& p);

Tensor surrogate_grad(const Tensor& u, const LifParams& p);

Tensor smooth_spike(const Tensor& u, const LifParams& p);

/// Elementwise xi over matching (u, s) tensors.
Tensor xi_factor(const Tensor& u, const Tensor& s, const LifParams& p);

/// Elementwise product of xi over a whole trace, prod_t xi(u(t), s(t)).
/// The factor for a quiescent neuron is gamma, so the product decays
/// geometrically on silent traces.
Tensor xi_product(const std::vector<Tensor>& u_seq, const std::vector<Tensor>& s_seq,
                  const LifParams& p);

namespace serial {
LifStepResult lif_step(const Tensor& u_prev, const Tensor& x_in, const LifParams& p);
}

}  // namespace snn

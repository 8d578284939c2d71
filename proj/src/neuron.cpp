#include "snn/neuron.hpp"

#include <cstdint>
#include <stdexcept>

namespace snn {

void LifParams::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("LifParams: gamma must be in (0,1]");
  if (!(alpha > 0)) throw std::invalid_argument("LifParams: alpha must be positive");
}

Tensor heaviside(const Tensor& x) {
  Tensor out(x.shape());
  const real* px = x.data();
  real* po = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) po[i] = heaviside_scalar(px[i]);
  return out;
}

LifStepResult lif_step(const Tensor& u_prev, const Tensor& x_in, const LifParams& p) {
  if (u_prev.shape() != x_in.shape())
    throw std::invalid_argument("lif_step: u_prev and x_in shapes differ");
  LifStepResult r{Tensor(u_prev.shape()), Tensor(u_prev.shape()), Tensor(u_prev.shape())};
  const real* pu = u_prev.data();
  const real* px = x_in.data();
  real* pre = r.u_pre.data();
  real* ps = r.s.data();
  real* post = r.u_post.data();
  const std::int64_t n = static_cast<std::int64_t>(u_prev.size());
#pragma omp parallel for if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) {
    const real u = p.gamma * pu[i] + px[i];
    const real s = heaviside_scalar(u - p.u_th);
    pre[i] = u;
    ps[i] = s;
    post[i] = s > 0 ? p.u_reset : u;
  }
  check_finite(r.u_pre, "lif_step");
  return r;
}

LifStepResult lif_step_smoothed(const Tensor& u_prev, const Tensor& x_in, const LifParams& p) {
  if (u_prev.shape() != x_in.shape())
    throw std::invalid_argument("lif_step_smoothed: u_prev and x_in shapes differ");
  LifStepResult r{Tensor(u_prev.shape()), Tensor(u_prev.shape()), Tensor(u_prev.shape())};
  const real* pu = u_prev.data();
  const real* px = x_in.data();
  real* pre = r.u_pre.data();
  real* ps = r.s.data();
  real* post = r.u_post.data();
  const std::int64_t n = static_cast<std::int64_t>(u_prev.size());
#pragma omp parallel for if (n > 4096)
  for (std::int64_t i = 0; i < n; ++i) {
    const real u = p.gamma * pu[i] + px[i];
    const real s = smooth_spike_scalar(u, p);
    pre[i] = u;
    ps[i] = s;
    post[i] = (real(1) - s) * u + s * p.u_reset;
  }
  check_finite(r.u_pre, "lif_step_smoothed");
  return r;
}

Tensor surrogate_grad(const Tensor& u, const LifParams& p) {
  Tensor out(u.shape());
  const real* pu = u.data();
  real* po = out.data();
  for (std::size_t i = 0; i < u.size(); ++i) po[i] = surrogate_scalar(pu[i], p);
  return out;
}

Tensor smooth_spike(const Tensor& u, const LifParams& p) {
  Tensor out(u.shape());
  const real* pu = u.data();
  real* po = out.data();
  for (std::size_t i = 0; i < u.size(); ++i) po[i] = smooth_spike_scalar(pu[i], p);
  return out;
}

Tensor xi_factor(const Tensor& u, const Tensor& s, const LifParams& p) {
  if (u.shape() != s.shape()) throw std::invalid_argument("xi_factor: u and s shapes differ");
  Tensor out(u.shape());
  const real* pu = u.data();
  const real* ps = s.data();
  real* po = out.data();
  for (std::size_t i = 0; i < u.size(); ++i) po[i] = xi_scalar(pu[i], ps[i], p);
  return out;
}

Tensor xi_product(const std::vector<Tensor>& u_seq, const std::vector<Tensor>& s_seq,
                  const LifParams& p) {
  if (u_seq.empty()) throw std::invalid_argument("xi_product: empty trace");
  if (u_seq.size() != s_seq.size())
    throw std::invalid_argument("xi_product: trace lengths differ");
  Tensor out = Tensor::full(u_seq[0].shape(), real(1));
  real* po = out.data();
  for (std::size_t t = 0; t < u_seq.size(); ++t) {
    if (u_seq[t].shape() != out.shape() || s_seq[t].shape() != out.shape())
      throw std::invalid_argument("xi_product: inconsistent trace shapes");
    const real* pu = u_seq[t].data();
    const real* ps = s_seq[t].data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] *= xi_scalar(pu[i], ps[i], p);
  }
  check_finite(out, "xi_product");
  return out;
}

namespace serial {

LifStepResult lif_step(const Tensor& u_prev, const Tensor& x_in, const LifParams& p) {
  if (u_prev.shape() != x_in.shape())
    throw std::invalid_argument("lif_step: u_prev and x_in shapes differ");
  LifStepResult r{Tensor(u_prev.shape()), Tensor(u_prev.shape()), Tensor(u_prev.shape())};
  const real* pu = u_prev.data();
  const real* px = x_in.data();
  real* pre = r.u_pre.data();
  real* ps = r.s.data();
  real* post = r.u_post.data();
  for (std::size_t i = 0; i < u_prev.size(); ++i) {
    const real u = p.gamma * pu[i] + px[i];
    const real s = heaviside_scalar(u - p.u_th);
    pre[i] = u;
    ps[i] = s;
    post[i] = s > 0 ? p.u_reset : u;
  }
  check_finite(r.u_pre, "lif_step");
  return r;
}

}  // namespace serial

}  // namespace snn

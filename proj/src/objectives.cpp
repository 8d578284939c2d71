#include "snn/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "snn/kernels.hpp"

namespace snn {

namespace {

real sign_of(real w) { return w > 0 ? real(1) : (w < 0 ? real(-1) : real(0)); }

void check_outputs(const Tensor& outputs) {
  if (outputs.rank() != 3) throw std::invalid_argument("loss: outputs must be [T,B,n]");
  if (outputs.shape()[0] == 0) throw std::invalid_argument("loss: T must be >= 1");
  if (outputs.shape()[1] == 0) throw std::invalid_argument("loss: empty batch");
}

void check_onehot(const Tensor& onehot, std::size_t batch, std::size_t classes) {
  if (onehot.rank() != 2 || onehot.shape()[0] != batch || onehot.shape()[1] != classes)
    throw std::invalid_argument("loss: one-hot target shape mismatch");
  for (std::size_t b = 0; b < batch; ++b) {
    real row = 0;
    for (std::size_t i = 0; i < classes; ++i) row += onehot[b * classes + i];
    if (std::abs(row - real(1)) > real(1e-9))
      throw std::invalid_argument("loss: one-hot row " + std::to_string(b) +
                                  " does not sum to 1");
  }
}

/// Batch-mean MSE of logits [B,n] against per-sample targets (or a constant
/// when target is null): loss = (1/B) sum_b (1/n) sum_i (z - y)^2, and
/// d(loss)/dz = (2/n) (z - y) / B.
real mse_with_grad(const Tensor& logits, const Tensor* target, real constant, Tensor& grad) {
  const std::size_t batch = logits.shape()[0], n = logits.shape()[1];
  grad = Tensor(logits.shape());
  const real* pz = logits.data();
  const real* py = target ? target->data() : nullptr;
  real* pg = grad.data();
  real loss = 0;
  const real inv_bn = real(1) / static_cast<real>(batch * n);
  for (std::size_t i = 0; i < batch * n; ++i) {
    const real d = pz[i] - (py ? py[i] : constant);
    loss += d * d * inv_bn;
    pg[i] = 2 * d * inv_bn;
  }
  return loss;
}

Tensor slice_time(const Tensor& outputs, std::size_t t) {
  const std::size_t batch = outputs.shape()[1], n = outputs.shape()[2];
  Tensor out({batch, n});
  const real* p = outputs.data() + t * batch * n;
  for (std::size_t i = 0; i < batch * n; ++i) out[i] = p[i];
  return out;
}

}  // namespace

void LossConfig::validate() const {
  if (eta < 0 || eta > 1) throw std::invalid_argument("LossConfig: eta must be in [0,1]");
  if (mu < 0 || mu > 1) throw std::invalid_argument("LossConfig: mu must be in [0,1]");
  if (lambda < 0) throw std::invalid_argument("LossConfig: lambda must be >= 0");
  if (delta < 0) throw std::invalid_argument("LossConfig: delta must be >= 0");
  if (!(epsilon > 0)) throw std::invalid_argument("LossConfig: epsilon must be positive");
}

Tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
  Tensor out({labels.size(), classes});
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes)
      throw std::invalid_argument("one_hot: label " + std::to_string(labels[b]) +
                                  " out of range [0," + std::to_string(classes) + ")");
    out[b * classes + static_cast<std::size_t>(labels[b])] = 1;
  }
  return out;
}

std::pair<real, Tensor> softmax_ce(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_ce: logits must be [B,n]");
  const std::size_t batch = logits.shape()[0], n = logits.shape()[1];
  if (labels.size() != batch) throw std::invalid_argument("softmax_ce: label count mismatch");
  Tensor grad(logits.shape());
  const real* pz = logits.data();
  real* pg = grad.data();
  real loss = 0;
  const real inv_b = real(1) / static_cast<real>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= n)
      throw std::invalid_argument("softmax_ce: label " + std::to_string(labels[b]) +
                                  " out of range [0," + std::to_string(n) + ")");
    const real* z = pz + b * n;
    real m = z[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
    real sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(z[i] - m);
    const real lse = m + std::log(sum);
    loss += (lse - z[static_cast<std::size_t>(labels[b])]) * inv_b;
    for (std::size_t i = 0; i < n; ++i) {
      const real p = std::exp(z[i] - lse);
      pg[b * n + i] = (p - (static_cast<std::size_t>(labels[b]) == i ? real(1) : real(0))) * inv_b;
    }
  }
  check_finite(grad, "softmax_ce grad");
  return {loss, std::move(grad)};
}

LossValue sdt_ce_loss(const Tensor& outputs, const std::vector<int>& labels) {
  check_outputs(outputs);
  const std::size_t T = outputs.shape()[0], batch = outputs.shape()[1], n = outputs.shape()[2];
  const Tensor mean_logits = reduce_mean(outputs, 0);
  auto [loss, g] = softmax_ce(mean_logits, labels);
  LossValue lv;
  lv.ce = loss;
  lv.total = loss;
  lv.output_grad = Tensor({T, batch, n});
  const real inv_t = real(1) / static_cast<real>(T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < batch * n; ++i)
      lv.output_grad[t * batch * n + i] = g[i] * inv_t;
  return lv;
}

LossValue sdt_mse_loss(const Tensor& outputs, const Tensor& onehot) {
  check_outputs(outputs);
  const std::size_t T = outputs.shape()[0], batch = outputs.shape()[1], n = outputs.shape()[2];
  check_onehot(onehot, batch, n);
  const Tensor mean_logits = reduce_mean(outputs, 0);
  Tensor g;
  const real loss = mse_with_grad(mean_logits, &onehot, 0, g);
  LossValue lv;
  lv.mse = loss;
  lv.total = loss;
  lv.output_grad = Tensor({T, batch, n});
  const real inv_t = real(1) / static_cast<real>(T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < batch * n; ++i)
      lv.output_grad[t * batch * n + i] = g[i] * inv_t;
  return lv;
}

LossValue tet_loss(const Tensor& outputs, const std::vector<int>& labels,
                   const LossConfig& cfg) {
  check_outputs(outputs);
  cfg.validate();
  const std::size_t T = outputs.shape()[0], batch = outputs.shape()[1], n = outputs.shape()[2];
  LossValue lv;
  lv.output_grad = Tensor({T, batch, n});
  const real inv_t = real(1) / static_cast<real>(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor o_t = slice_time(outputs, t);
    auto [ce_t, gce] = softmax_ce(o_t, labels);
    Tensor gmse;
    const real mse_t = mse_with_grad(o_t, nullptr, cfg.phi, gmse);
    lv.ce += ce_t * inv_t;
    lv.mse += mse_t * inv_t;
    for (std::size_t i = 0; i < batch * n; ++i) {
      lv.output_grad[t * batch * n + i] =
          ((real(1) - cfg.mu) * gce[i] + cfg.mu * gmse[i]) * inv_t;
    }
  }
  lv.total = (real(1) - cfg.mu) * lv.ce + cfg.mu * lv.mse;
  return lv;
}

real trt_regularizer(const std::vector<const Tensor*>& weights, std::size_t t,
                     const LossConfig& cfg) {
  if (t < 1) throw std::invalid_argument("trt_regularizer: t is 1-based");
  // expm1 keeps E exactly zero at t=1 and for delta=0.
  const real e_term = std::expm1(cfg.delta * static_cast<real>(t - 1));
  real acc = 0;
  for (const Tensor* w : weights) {
    const real* pw = w->data();
    for (std::size_t i = 0; i < w->size(); ++i) {
      const real a = std::abs(pw[i]);
      acc += pw[i] * pw[i] / (real(1) + (a + cfg.epsilon) * e_term);
    }
  }
  return cfg.lambda * acc;
}

std::vector<Tensor> trt_regularizer_grad(const std::vector<const Tensor*>& weights,
                                         std::size_t t, const LossConfig& cfg) {
  if (t < 1) throw std::invalid_argument("trt_regularizer_grad: t is 1-based");
  const real e_term = std::expm1(cfg.delta * static_cast<real>(t - 1));
  std::vector<Tensor> grads;
  grads.reserve(weights.size());
  for (const Tensor* w : weights) {
    Tensor g(w->shape());
    const real* pw = w->data();
    real* pg = g.data();
    for (std::size_t i = 0; i < w->size(); ++i) {
      const real wi = pw[i];
      const real denom = real(1) + (std::abs(wi) + cfg.epsilon) * e_term;
      pg[i] = cfg.lambda *
              (2 * wi / denom - wi * wi * sign_of(wi) * e_term / (denom * denom));
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

LossValue trt_loss(const Tensor& outputs, const std::vector<int>& labels,
                   const Tensor& onehot, const std::vector<const Tensor*>& weights,
                   const LossConfig& cfg) {
  check_outputs(outputs);
  cfg.validate();
  const std::size_t T = outputs.shape()[0], batch = outputs.shape()[1], n = outputs.shape()[2];
  check_onehot(onehot, batch, n);
  LossValue lv;
  lv.output_grad = Tensor({T, batch, n});
  const real inv_t = real(1) / static_cast<real>(T);
  for (const Tensor* w : weights) lv.weight_grad.push_back(Tensor(w->shape()));
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor o_t = slice_time(outputs, t);
    auto [ce_t, gce] = softmax_ce(o_t, labels);
    Tensor gmse;
    const real mse_t = mse_with_grad(o_t, &onehot, 0, gmse);
    lv.ce += ce_t * inv_t;
    lv.mse += mse_t * inv_t;
    for (std::size_t i = 0; i < batch * n; ++i) {
      lv.output_grad[t * batch * n + i] =
          ((real(1) - cfg.eta) * gce[i] + cfg.eta * gmse[i]) * inv_t;
    }
    if (cfg.lambda != 0) {
      lv.reg += trt_regularizer(weights, t + 1, cfg) * inv_t;
      const std::vector<Tensor> rg = trt_regularizer_grad(weights, t + 1, cfg);
      for (std::size_t l = 0; l < weights.size(); ++l)
        for (std::size_t i = 0; i < rg[l].size(); ++i)
          lv.weight_grad[l][i] += rg[l][i] * inv_t;
    }
  }
  lv.total = (real(1) - cfg.eta) * lv.ce + cfg.eta * lv.mse + lv.reg;
  return lv;
}

LossValue evaluate_loss(const LossConfig& cfg, const Tensor& outputs,
                        const std::vector<int>& labels, std::size_t classes,
                        const std::vector<const Tensor*>& weights) {
  switch (cfg.kind) {
    case LossKind::SdtCe:
      return sdt_ce_loss(outputs, labels);
    case LossKind::SdtMse:
      return sdt_mse_loss(outputs, one_hot(labels, classes));
    case LossKind::Tet:
      return tet_loss(outputs, labels, cfg);
    case LossKind::Trt:
      return trt_loss(outputs, labels, one_hot(labels, classes), weights, cfg);
  }
  throw std::logic_error("evaluate_loss: unknown loss kind");
}

}  // namespace snn

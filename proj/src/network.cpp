#include "snn/network.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "snn/kernels.hpp"

namespace snn {

namespace {

std::size_t flat(const std::vector<std::size_t>& shape) { return shape_size(shape); }

Tensor col_sum(const Tensor& m) {
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  Tensor out({c});
  const real* pm = m.data();
  real* po = out.data();
  for (std::size_t j = 0; j < c; ++j) {
    real acc = 0;
    for (std::size_t i = 0; i < r; ++i) acc += pm[i * c + j];
    po[j] = acc;
  }
  return out;
}

void add_bias_rows(Tensor& x, const Tensor& bias) {
  const std::size_t c = bias.size();
  const std::size_t r = x.size() / c;
  real* px = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) px[i * c + j] += bias[j];
}

Tensor conv_bias_grad(const Tensor& dout) {
  const auto& s = dout.shape();  // [N,OC,OH,OW]
  Tensor db({s[1]});
  const real* pd = dout.data();
  for (std::size_t n = 0; n < s[0]; ++n)
    for (std::size_t oc = 0; oc < s[1]; ++oc) {
      real acc = db[oc];
      const std::size_t base = (n * s[1] + oc) * s[2] * s[3];
      for (std::size_t i = 0; i < s[2] * s[3]; ++i) acc += pd[base + i];
      db[oc] = acc;
    }
  return db;
}

real frobenius(const Tensor& t) {
  real acc = 0;
  const real* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) acc += p[i] * p[i];
  return std::sqrt(acc);
}

// Weight gradient and input cotangent of one affine layer, shared between
// the full backward and the per-timestep component split.
void affine_backward(const LayerSpec& layer, const LayerShape& shape,
                     const Tensor& dx, const Tensor& prev_act, std::size_t rows,
                     const Tensor& weight, Tensor* dweight, Tensor* dbias,
                     Tensor* dprev) {
  if (layer.kind == LayerKind::Dense) {
    Tensor dx2 = dx.reshaped({rows, layer.fan_out});
    Tensor prev2 = prev_act.reshaped({rows, layer.fan_in});
    if (dweight) *dweight = matmul_tn(dx2, prev2);
    if (dbias) *dbias = col_sum(dx2);
    if (dprev) *dprev = matmul(dx2, weight);
  } else {
    Tensor dx4 = dx.reshaped({rows, shape.out_shape[0], shape.out_shape[1], shape.out_shape[2]});
    std::vector<std::size_t> prev_shape = {rows, shape.in_shape[0], shape.in_shape[1],
                                           shape.in_shape[2]};
    Tensor prev4 = prev_act.reshaped(prev_shape);
    if (dweight)
      *dweight = conv2d_weight_grad(dx4, prev4, weight.shape(), layer.stride, layer.pad);
    if (dbias) *dbias = conv_bias_grad(dx4);
    if (dprev) *dprev = conv2d_input_grad(dx4, weight, prev_shape, layer.stride, layer.pad);
  }
}

}  // namespace

void NetworkSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("NetworkSpec: no layers");
  if (T < 1) throw std::invalid_argument("NetworkSpec: T must be >= 1");
  lif.validate();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool last = (i + 1 == layers.size());
    if (layers[i].is_readout != last)
      throw std::invalid_argument("NetworkSpec: exactly one readout layer, in last position");
  }
  const LayerSpec& ro = layers.back();
  if (ro.kind != LayerKind::Dense)
    throw std::invalid_argument("NetworkSpec: readout must be a dense layer");
  if (ro.has_norm) throw std::invalid_argument("NetworkSpec: readout carries no normalization");
  plan_shapes(*this);  // throws on non-conforming extents
}

std::vector<LayerShape> plan_shapes(const NetworkSpec& spec) {
  std::vector<LayerShape> plan;
  std::vector<std::size_t> cur = spec.input_shape;
  if (flat(cur) == 0) throw std::invalid_argument("NetworkSpec: empty input shape");
  for (const LayerSpec& l : spec.layers) {
    LayerShape ls;
    ls.in_shape = cur;
    if (l.kind == LayerKind::Dense) {
      if (l.fan_in == 0 || l.fan_out == 0)
        throw std::invalid_argument("NetworkSpec: dense layer extents must be positive");
      if (flat(cur) != l.fan_in)
        throw std::invalid_argument("NetworkSpec: dense fan_in " + std::to_string(l.fan_in) +
                                    " does not match incoming features " +
                                    std::to_string(flat(cur)));
      ls.out_shape = {l.fan_out};
      ls.channels = l.fan_out;
      ls.spatial = 1;
    } else {
      if (cur.size() != 3 || cur[0] != l.in_c)
        throw std::invalid_argument("NetworkSpec: conv layer expects [C,H,W] input with matching channels");
      if (l.out_c == 0 || l.kernel == 0 || l.stride == 0)
        throw std::invalid_argument("NetworkSpec: conv extents must be positive");
      if (cur[1] + 2 * l.pad < l.kernel || cur[2] + 2 * l.pad < l.kernel)
        throw std::invalid_argument("NetworkSpec: conv kernel larger than padded input");
      const std::size_t oh = (cur[1] + 2 * l.pad - l.kernel) / l.stride + 1;
      const std::size_t ow = (cur[2] + 2 * l.pad - l.kernel) / l.stride + 1;
      ls.out_shape = {l.out_c, oh, ow};
      ls.channels = l.out_c;
      ls.spatial = oh * ow;
    }
    cur = ls.out_shape;
    plan.push_back(std::move(ls));
  }
  return plan;
}

Parameters init_params(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  Parameters params;
  for (const LayerSpec& l : spec.layers) {
    LayerParams lp;
    if (l.kind == LayerKind::Dense) {
      const real std_dev = std::sqrt(real(2) / static_cast<real>(l.fan_in));
      lp.weight = seeded_normal(rng, {l.fan_out, l.fan_in}, 0, std_dev);
      lp.bias = Tensor({l.fan_out});
    } else {
      const real std_dev = std::sqrt(real(2) / static_cast<real>(l.in_c * l.kernel * l.kernel));
      lp.weight = seeded_normal(rng, {l.out_c, l.in_c, l.kernel, l.kernel}, 0, std_dev);
      lp.bias = Tensor({l.out_c});
    }
    if (l.has_norm) {
      const std::size_t c = (l.kind == LayerKind::Dense) ? l.fan_out : l.out_c;
      lp.norm_scale = Tensor::full({c}, real(1));
      lp.norm_shift = Tensor({c});
    }
    params.layers.push_back(std::move(lp));
  }
  return params;
}

RunningStats init_running(const NetworkSpec& spec) {
  RunningStats rs;
  for (const LayerSpec& l : spec.layers) {
    NormRunning nr;
    if (l.has_norm) {
      const std::size_t c = (l.kind == LayerKind::Dense) ? l.fan_out : l.out_c;
      nr.mean = Tensor({c});
      nr.var = Tensor::full({c}, real(1));
    }
    rs.layers.push_back(std::move(nr));
  }
  return rs;
}

Tensor tdbn_forward(const Tensor& x, std::size_t channels, std::size_t spatial,
                    const Tensor& scale, const Tensor& shift, NormRunning& running,
                    const NormConfig& cfg, bool training, bool update_running,
                    Tensor* used_mean, Tensor* used_var) {
  Tensor mean, var;
  if (training) {
    bn_stats(x, channels, spatial, mean, var);
    if (update_running) {
      for (std::size_t c = 0; c < channels; ++c) {
        running.mean[c] = (real(1) - cfg.momentum) * running.mean[c] + cfg.momentum * mean[c];
        running.var[c] = (real(1) - cfg.momentum) * running.var[c] + cfg.momentum * var[c];
      }
    }
  } else {
    mean = running.mean;
    var = running.var;
  }
  if (used_mean) *used_mean = mean;
  if (used_var) *used_var = var;
  return bn_apply(x, mean, var, scale, shift, cfg.eps, channels, spatial);
}

ForwardTrace forward(const NetworkSpec& spec, const Parameters& params,
                     RunningStats& running, const Tensor& input,
                     const ForwardOptions& opts) {
  spec.validate();
  if (params.layers.size() != spec.layers.size())
    throw std::invalid_argument("forward: params/spec layer count mismatch");
  const auto plan = plan_shapes(spec);

  if (input.rank() != spec.input_shape.size() + 2)
    throw std::invalid_argument("forward: input must be [T,B,features...]");
  if (input.shape()[0] != spec.T)
    throw std::invalid_argument("forward: input time extent differs from spec.T");
  const std::size_t batch = input.shape()[1];
  if (batch == 0) throw std::invalid_argument("forward: empty batch");
  for (std::size_t d = 0; d < spec.input_shape.size(); ++d) {
    if (input.shape()[d + 2] != spec.input_shape[d])
      throw std::invalid_argument("forward: input feature extents differ from spec");
  }
  check_finite(input, "forward input");

  ForwardTrace trace;
  trace.input = input;
  trace.opts = opts;
  trace.batch = batch;
  trace.layers.resize(spec.layers.size());

  const std::size_t rows = spec.T * batch;
  const bool training = opts.norm == NormMode::Training;
  const bool smoothed = opts.neuron == NeuronMode::Smoothed;
  const LifParams& lif = spec.lif;

  Tensor cur = input;  // [T,B,...]
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const LayerShape& ls = plan[i];
    LayerTrace& lt = trace.layers[i];

    // affine; activations live as [T,B,features...]
    std::vector<std::size_t> act_shape = {spec.T, batch};
    for (std::size_t d : ls.out_shape) act_shape.push_back(d);
    Tensor x;
    if (l.kind == LayerKind::Dense) {
      x = matmul_nt(cur.reshaped({rows, l.fan_in}), params.layers[i].weight);
      add_bias_rows(x, params.layers[i].bias);
    } else {
      x = conv2d_forward(cur.reshaped({rows, ls.in_shape[0], ls.in_shape[1], ls.in_shape[2]}),
                         params.layers[i].weight, params.layers[i].bias, l.stride, l.pad);
    }
    x = x.reshaped(act_shape);

    if (l.is_readout) {
      lt.x = x;
      trace.outputs = std::move(x);
      break;
    }
    lt.x = x;

    // time-flattened norm
    Tensor y;
    if (l.has_norm) {
      y = tdbn_forward(x, ls.channels, ls.spatial, params.layers[i].norm_scale,
                       params.layers[i].norm_shift, running.layers[i], spec.norm, training,
                       training && opts.update_running, &lt.used_mean, &lt.used_var);
    } else {
      y = x;
    }

    // LIF over the time axis; membrane starts at zero.
    const std::size_t width = flat(ls.out_shape) * batch;
    lt.u = Tensor(act_shape);
    lt.s = Tensor(act_shape);
    std::vector<real> u_post(width, real(0));
    const real* py = y.data();
    real* pu = lt.u.data();
    real* ps = lt.s.data();
    for (std::size_t t = 0; t < spec.T; ++t) {
      const std::size_t base = t * width;
      real* post = u_post.data();
      const std::int64_t n = static_cast<std::int64_t>(width);
#pragma omp parallel for if (n > 4096)
      for (std::int64_t e = 0; e < n; ++e) {
        const real u = lif.gamma * post[e] + py[base + e];
        real s_val;
        real next;
        if (smoothed) {
          s_val = smooth_spike_scalar(u, lif);
          next = (real(1) - s_val) * u + s_val * lif.u_reset;
        } else {
          s_val = heaviside_scalar(u - lif.u_th);
          next = s_val > 0 ? lif.u_reset : u;
        }
        pu[base + e] = u;
        ps[base + e] = s_val;
        post[e] = next;
      }
    }
    check_finite(lt.u, "forward membrane potentials (layer " + std::to_string(i) + ")");
    cur = lt.s;
  }
  check_finite(trace.outputs, "forward outputs");
  return trace;
}

namespace {

Gradients backward_impl(const NetworkSpec& spec, const Parameters& params,
                        const ForwardTrace& trace, const Tensor& dL_dO,
                        TemporalComponents* comps) {
  const auto plan = plan_shapes(spec);
  if (trace.layers.size() != spec.layers.size())
    throw std::invalid_argument("backward: trace/spec layer count mismatch");
  if (dL_dO.shape() != trace.outputs.shape())
    throw std::invalid_argument("backward: dL_dO shape differs from trace outputs");

  const std::size_t L = spec.layers.size();
  const std::size_t T = spec.T;
  const std::size_t batch = trace.batch;
  const std::size_t rows = T * batch;
  const bool train_norm = trace.opts.norm == NormMode::Training;
  const LifParams& lif = spec.lif;

  Gradients grads;
  grads.layers.resize(L);

  if (comps) {
    comps->spatial.assign(L, {});
    comps->temporal.assign(L, {});
    comps->spatial_norm.assign(L, {});
    comps->temporal_norm.assign(L, {});
  }

  // Readout: plain affine per timestep.
  const std::size_t ro = L - 1;
  const Tensor prev_ro = (L >= 2) ? trace.layers[ro - 1].s : trace.input;
  Tensor cot;  // cotangent at the spikes entering the current layer
  affine_backward(spec.layers[ro], plan[ro], dL_dO, prev_ro, rows, params.layers[ro].weight,
                  &grads.layers[ro].weight, &grads.layers[ro].bias, L >= 2 ? &cot : nullptr);

  for (std::size_t step = 0; step + 1 < L; ++step) {
    const std::size_t i = ro - 1 - step;
    const LayerSpec& l = spec.layers[i];
    const LayerShape& ls = plan[i];
    const LayerTrace& lt = trace.layers[i];
    const std::size_t width = flat(ls.out_shape) * batch;

    // Reverse-time adjoint of the membrane potential. lambda holds
    // dL/du(t+1); one step folds in the same-timestep surrogate path g(t)
    // and the through-time factor xi(t).
    Tensor dY(lt.u.shape());
    Tensor g_of_t, xi_lam_next;  // only materialized for the component split
    if (comps) {
      g_of_t = Tensor(lt.u.shape());
      xi_lam_next = Tensor(lt.u.shape());
    }
    {
      const real* pu = lt.u.data();
      const real* ps = lt.s.data();
      const real* pc = cot.data();
      real* pdy = dY.data();
      std::vector<real> lambda(width, real(0));
      for (std::size_t tt = 0; tt < T; ++tt) {
        const std::size_t t = T - 1 - tt;
        const std::size_t base = t * width;
        real* plam = lambda.data();
        const std::int64_t n = static_cast<std::int64_t>(width);
#pragma omp parallel for if (n > 4096)
        for (std::int64_t e = 0; e < n; ++e) {
          const real u = pu[base + e];
          const real s = ps[base + e];
          const real g = pc[base + e] * surrogate_scalar(u, lif);
          const real through = xi_scalar(u, s, lif) * plam[e];
          if (comps) {
            g_of_t.data()[base + e] = g;
            xi_lam_next.data()[base + e] = through;
          }
          plam[e] = g + through;
          pdy[base + e] = plam[e];
        }
      }
    }

    // Norm backward, then affine backward down to the previous layer.
    Tensor dX;
    if (l.has_norm) {
      Tensor dscale, dshift;
      if (train_norm) {
        bn_backward_train(dY, lt.x, lt.used_mean, lt.used_var, params.layers[i].norm_scale,
                          spec.norm.eps, ls.channels, ls.spatial, dX, dscale, dshift);
      } else {
        bn_backward_eval(dY, lt.x, lt.used_mean, lt.used_var, params.layers[i].norm_scale,
                         spec.norm.eps, ls.channels, ls.spatial, dX, dscale, dshift);
      }
      grads.layers[i].norm_scale = std::move(dscale);
      grads.layers[i].norm_shift = std::move(dshift);
    } else {
      dX = dY;
    }

    const Tensor& prev_act = (i > 0) ? trace.layers[i - 1].s : trace.input;
    Tensor next_cot;
    affine_backward(l, ls, dX, prev_act, rows, params.layers[i].weight, &grads.layers[i].weight,
                    &grads.layers[i].bias, i > 0 ? &next_cot : nullptr);

    if (comps) {
      auto push_component = [&](const Tensor& full, std::size_t t) {
        // One timestep's cotangent pushed through norm + affine on its own.
        Tensor dy_t(full.shape());
        const std::size_t base = t * width;
        for (std::size_t e = 0; e < width; ++e) dy_t.data()[base + e] = full.data()[base + e];
        Tensor dx_t;
        if (l.has_norm) {
          Tensor ds, dh;
          if (train_norm) {
            bn_backward_train(dy_t, lt.x, lt.used_mean, lt.used_var,
                              params.layers[i].norm_scale, spec.norm.eps, ls.channels,
                              ls.spatial, dx_t, ds, dh);
          } else {
            bn_backward_eval(dy_t, lt.x, lt.used_mean, lt.used_var, params.layers[i].norm_scale,
                             spec.norm.eps, ls.channels, ls.spatial, dx_t, ds, dh);
          }
        } else {
          dx_t = dy_t;
        }
        Tensor dw;
        affine_backward(l, ls, dx_t, prev_act, rows, params.layers[i].weight, &dw, nullptr,
                        nullptr);
        return dw;
      };
      comps->spatial[i].reserve(T);
      comps->temporal[i].reserve(T);
      for (std::size_t t = 0; t < T; ++t) {
        Tensor sp = push_component(g_of_t, t);
        Tensor tp = push_component(xi_lam_next, t);
        comps->spatial_norm[i].push_back(frobenius(sp));
        comps->temporal_norm[i].push_back(frobenius(tp));
        comps->spatial[i].push_back(std::move(sp));
        comps->temporal[i].push_back(std::move(tp));
      }
    }
    cot = std::move(next_cot);
  }
  return grads;
}

}  // namespace

Gradients backward(const NetworkSpec& spec, const Parameters& params,
                   const ForwardTrace& trace, const Tensor& dL_dO) {
  return backward_impl(spec, params, trace, dL_dO, nullptr);
}

Gradients backward_with_components(const NetworkSpec& spec, const Parameters& params,
                                   const ForwardTrace& trace, const Tensor& dL_dO,
                                   TemporalComponents& comps) {
  return backward_impl(spec, params, trace, dL_dO, &comps);
}

TemporalComponents temporal_grad_components(const NetworkSpec& spec, const Parameters& params,
                                            const ForwardTrace& trace, const Tensor& dL_dO) {
  TemporalComponents comps;
  backward_impl(spec, params, trace, dL_dO, &comps);
  return comps;
}

std::vector<const Tensor*> regularized_weights(const NetworkSpec& spec,
                                               const Parameters& params) {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i)
    out.push_back(&params.layers[i].weight);
  return out;
}

}  // namespace snn

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "pixsub/degrade.hpp"
#include "pixsub/formation.hpp"
#include "pixsub/image.hpp"
#include "pixsub/kernel.hpp"
#include "pixsub/tensor.hpp"

namespace pixsub {

// 3x3 convolution, stride 1, reflect padding 1. Weights are [out_c][in_c][3][3]
// row-major; grads accumulate into gw/gb until zero_grad().
struct Conv2d {
  int in_c = 0, out_c = 0;
  std::vector<double> w, b;
  std::vector<double> gw, gb;

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels)
      : in_c(in_channels),
        out_c(out_channels),
        w(static_cast<size_t>(out_channels) * in_channels * 9, 0.0),
        b(static_cast<size_t>(out_channels), 0.0),
        gw(w.size(), 0.0),
        gb(b.size(), 0.0) {}

  double& weight(int oc, int ic, int ky, int kx) {
    return w[((static_cast<size_t>(oc) * in_c + ic) * 3 + ky) * 3 + kx];
  }
  double weight(int oc, int ic, int ky, int kx) const {
    return w[((static_cast<size_t>(oc) * in_c + ic) * 3 + ky) * 3 + kx];
  }
  void zero_grad() {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
  }
};

inline Tensor conv2d_forward(const Conv2d& layer, const Tensor& x) {
  if (x.c != layer.in_c) throw DimensionError("conv2d: input channel mismatch");
  Tensor y(layer.out_c, x.h, x.w);

  std::vector<std::vector<int>> ry, rx;
  for (int d = -1; d <= 1; ++d) {
    ry.push_back(detail::reflect_table(x.h, d));
    rx.push_back(detail::reflect_table(x.w, d));
  }

  for (int oc = 0; oc < layer.out_c; ++oc) {
    double* dst = y.plane(oc);
    const double bias = layer.b[oc];
    for (size_t i = 0; i < y.plane_size(); ++i) dst[i] = bias;
    for (int ic = 0; ic < layer.in_c; ++ic) {
      const double* src = x.plane(ic);
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const double kw = layer.weight(oc, ic, ky, kx);
          if (kw == 0.0) continue;
          const std::vector<int>& ytab = ry[ky];
          const std::vector<int>& xtab = rx[kx];
          for (int yy = 0; yy < x.h; ++yy) {
            const double* srow = src + static_cast<size_t>(ytab[yy]) * x.w;
            double* drow = dst + static_cast<size_t>(yy) * x.w;
            for (int xx = 0; xx < x.w; ++xx) drow[xx] += kw * srow[xtab[xx]];
          }
        }
    }
  }
  return y;
}

// Accumulates parameter grads; writes the input grad into *gx when non-null.
inline void conv2d_backward(Conv2d& layer, const Tensor& x, const Tensor& gy, Tensor* gx) {
  if (x.c != layer.in_c || gy.c != layer.out_c || gy.h != x.h || gy.w != x.w)
    throw DimensionError("conv2d backward: shape mismatch");

  std::vector<std::vector<int>> ry, rx;
  for (int d = -1; d <= 1; ++d) {
    ry.push_back(detail::reflect_table(x.h, d));
    rx.push_back(detail::reflect_table(x.w, d));
  }

  if (gx) *gx = Tensor(x.c, x.h, x.w, 0.0);

  for (int oc = 0; oc < layer.out_c; ++oc) {
    const double* gsrc = gy.plane(oc);
    double gbias = 0.0;
    for (size_t i = 0; i < gy.plane_size(); ++i) gbias += gsrc[i];
    layer.gb[oc] += gbias;

    for (int ic = 0; ic < layer.in_c; ++ic) {
      const double* src = x.plane(ic);
      double* gdst = gx ? gx->plane(ic) : nullptr;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const std::vector<int>& ytab = ry[ky];
          const std::vector<int>& xtab = rx[kx];
          double acc = 0.0;
          const double kw = layer.weight(oc, ic, ky, kx);
          for (int yy = 0; yy < x.h; ++yy) {
            const double* srow = src + static_cast<size_t>(ytab[yy]) * x.w;
            const double* grow = gsrc + static_cast<size_t>(yy) * x.w;
            if (gdst) {
              double* gxrow = gdst + static_cast<size_t>(ytab[yy]) * x.w;
              for (int xx = 0; xx < x.w; ++xx) {
                acc += grow[xx] * srow[xtab[xx]];
                gxrow[xtab[xx]] += kw * grow[xx];
              }
            } else {
              for (int xx = 0; xx < x.w; ++xx) acc += grow[xx] * srow[xtab[xx]];
            }
          }
          layer.gw[((static_cast<size_t>(oc) * layer.in_c + ic) * 3 + ky) * 3 + kx] += acc;
        }
    }
  }
}

inline Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data)
    if (v < 0.0) v = 0.0;
  return y;
}

// Derivative taken as 0 at exactly 0.
inline Tensor relu_backward(const Tensor& pre, const Tensor& gy) {
  if (!pre.same_shape(gy)) throw DimensionError("relu backward: shape mismatch");
  Tensor gx = gy;
  for (size_t i = 0; i < gx.data.size(); ++i)
    if (pre.data[i] <= 0.0) gx.data[i] = 0.0;
  return gx;
}

// (c*r^2, h, w) -> (c, h*r, w*r); out(c,y,x) = in(c*r^2 + (y%r)*r + x%r, y/r, x/r).
inline Tensor pixel_shuffle(const Tensor& x, int r) {
  if (r < 1 || x.c % (r * r) != 0) throw DimensionError("pixel_shuffle: channels not divisible by r^2");
  Tensor y(x.c / (r * r), x.h * r, x.w * r);
  for (int oc = 0; oc < y.c; ++oc) {
    double* dst = y.plane(oc);
    for (int yy = 0; yy < y.h; ++yy)
      for (int xx = 0; xx < y.w; ++xx)
        dst[static_cast<size_t>(yy) * y.w + xx] =
            x.at(oc * r * r + (yy % r) * r + (xx % r), yy / r, xx / r);
  }
  return y;
}

inline Tensor pixel_unshuffle(const Tensor& x, int r) {
  if (r < 1 || x.h % r != 0 || x.w % r != 0)
    throw DimensionError("pixel_unshuffle: spatial dims not divisible by r");
  Tensor y(x.c * r * r, x.h / r, x.w / r);
  for (int ic = 0; ic < x.c; ++ic) {
    const double* src = x.plane(ic);
    for (int yy = 0; yy < x.h; ++yy)
      for (int xx = 0; xx < x.w; ++xx)
        y.at(ic * r * r + (yy % r) * r + (xx % r), yy / r, xx / r) =
            src[static_cast<size_t>(yy) * x.w + xx];
  }
  return y;
}

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

// Mean absolute error; subgradient sign(d)/count with sign(0) = 0.
inline LossResult l1_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw DimensionError("l1_loss: shape mismatch");
  LossResult res;
  res.grad = Tensor(pred.c, pred.h, pred.w, 0.0);
  const double inv = 1.0 / static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    res.loss += std::abs(d);
    if (d > 0.0)
      res.grad.data[i] = inv;
    else if (d < 0.0)
      res.grad.data[i] = -inv;
  }
  res.loss *= inv;
  return res;
}

// lambda * mean |decimate(k (x) pred) - lr|, with grad pulled back through the
// exact transposes of decimation and convolution.
inline LossResult formation_loss(const Tensor& pred, const Image& lr, const Kernel& k,
                                 ScaleFactor s, double lambda) {
  Image pred_img = tensor_to_image(pred);
  Image r = decimate(convolve(pred_img, k), s);
  if (!r.same_shape(lr)) throw DimensionError("formation_loss: LR shape mismatch");
  LossResult res;
  const double inv = 1.0 / static_cast<double>(r.data.size());
  for (size_t i = 0; i < r.data.size(); ++i) {
    const double d = r.data[i] - lr.data[i];
    res.loss += std::abs(d);
    r.data[i] = d > 0.0 ? lambda * inv : (d < 0.0 ? -lambda * inv : 0.0);
  }
  res.loss *= lambda * inv;
  res.grad = image_to_tensor(convolve_adjoint(zero_upsample(r, s), k));
  return res;
}

// Spec-level form: the penalty is always measured through the formation
// kernel (surrogate in bicubic mode), since that is the operator the
// substitution step will enforce.
inline LossResult formation_loss(const Tensor& pred, const Image& lr, const DegradeSpec& spec,
                                 double lambda) {
  return formation_loss(pred, lr, formation_kernel(spec), spec.scale, lambda);
}

// Moments per parameter vector (registration order) plus the optimizer
// hyperparameters themselves.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::int64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam update, in place.
inline void adam_step(const std::vector<std::vector<double>*>& params,
                      const std::vector<const std::vector<double>*>& grads, AdamState& state) {
  if (params.size() != grads.size()) throw DimensionError("adam: param/grad count mismatch");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    std::vector<double>& p = *params[i];
    const std::vector<double>& g = *grads[i];
    if (p.size() != g.size() || p.size() != state.m[i].size())
      throw DimensionError("adam: parameter size changed between steps");
    for (size_t j = 0; j < p.size(); ++j) {
      double& m = state.m[i][j];
      double& v = state.v[i][j];
      m = state.beta1 * m + (1.0 - state.beta1) * g[j];
      v = state.beta2 * v + (1.0 - state.beta2) * g[j] * g[j];
      p[j] -= state.lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
    }
  }
}

}  // namespace pixsub

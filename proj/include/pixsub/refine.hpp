#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "pixsub/degrade.hpp"
#include "pixsub/formation.hpp"
#include "pixsub/image.hpp"
#include "pixsub/kernel.hpp"
#include "pixsub/metrics.hpp"

namespace pixsub {

enum class RefinerKind { Bicubic, Ibp, GradPrior, ToyNet };

struct RefinerSpec {
  RefinerKind kind = RefinerKind::Bicubic;
  int iters = 10;
  double step = 1.0;
  double lambda_prior = 0.01;
  std::string weights_path;  // ToyNet only
};

// Stage-1 refiners see the LR observation and must upscale; later stages see
// an HR-sized substituted image and start from it directly.
inline Image refine_bicubic(const Image& input, ScaleFactor s, bool first_stage) {
  if (!first_stage) return input;
  return bicubic_resize(input, input.width * s.s, input.height * s.s);
}

struct IterResult {
  Image image;
  int iterations = 0;
  bool guard_tripped = false;
  double final_residual = 0.0;
};

namespace detail {

inline double data_mse(const Image& est, const Image& lr, const Kernel& k, ScaleFactor s) {
  return mse(decimate(convolve(est, k), s), lr);
}

// Run `update` up to `iters` times, watching the data residual. Three
// consecutive increases abort the loop and hand back the best iterate seen —
// a mis-tuned step then degrades gracefully instead of blowing up.
template <typename Update>
IterResult iterate_with_guard(Image init, const Image& lr, const Kernel& k, ScaleFactor s,
                              int iters, Update&& update) {
  IterResult res;
  Image cur = std::move(init);
  double cur_res = data_mse(cur, lr, k, s);
  Image best = cur;
  double best_res = cur_res;
  int growing = 0;
  for (int it = 0; it < iters; ++it) {
    update(cur);
    ++res.iterations;
    const double r = data_mse(cur, lr, k, s);
    if (r < best_res) {
      best = cur;
      best_res = r;
    }
    if (r > cur_res) {
      if (++growing >= 3) {
        res.image = std::move(best);
        res.guard_tripped = true;
        res.final_residual = best_res;
        return res;
      }
    } else {
      growing = 0;
    }
    cur_res = r;
  }
  res.image = std::move(cur);
  res.final_residual = cur_res;
  return res;
}

}  // namespace detail

// Iterative back-projection: re-degrade the estimate, lift the LR error back
// through the exact transpose of the degradation, add it on.
inline IterResult refine_ibp(const Image& init, const Image& lr, const Kernel& k, ScaleFactor s,
                             int iters, double step) {
  return detail::iterate_with_guard(init, lr, k, s, iters, [&](Image& cur) {
    Image e = lr;
    const Image sim = decimate(convolve(cur, k), s);
    for (size_t i = 0; i < e.data.size(); ++i) e.data[i] -= sim.data[i];
    const Image corr = convolve_adjoint(zero_upsample(e, s), k);
    for (size_t i = 0; i < cur.data.size(); ++i) cur.data[i] += step * corr.data[i];
  });
}

inline constexpr double kCharbonnierEps = 1e-3;

// Data term (sum of squared LR residuals) plus a Charbonnier penalty on
// forward-difference gradients.
inline double gradprior_objective(const Image& est, const Image& lr, const Kernel& k,
                                  ScaleFactor s, double lambda) {
  const Image sim = decimate(convolve(est, k), s);
  double data = 0.0;
  for (size_t i = 0; i < sim.data.size(); ++i) {
    const double d = sim.data[i] - lr.data[i];
    data += d * d;
  }
  double prior = 0.0;
  if (lambda != 0.0) {
    const double e2 = kCharbonnierEps * kCharbonnierEps;
    for (int c = 0; c < est.channels; ++c) {
      const double* p = est.plane(c);
      for (int y = 0; y < est.height; ++y)
        for (int x = 0; x < est.width; ++x) {
          const size_t i = static_cast<size_t>(y) * est.width + x;
          if (x + 1 < est.width) {
            const double d = p[i + 1] - p[i];
            prior += std::sqrt(d * d + e2);
          }
          if (y + 1 < est.height) {
            const double d = p[i + est.width] - p[i];
            prior += std::sqrt(d * d + e2);
          }
        }
    }
  }
  return data + lambda * prior;
}

// Exact gradient of gradprior_objective.
inline Image gradprior_gradient(const Image& est, const Image& lr, const Kernel& k, ScaleFactor s,
                                double lambda) {
  Image e = decimate(convolve(est, k), s);
  for (size_t i = 0; i < e.data.size(); ++i) e.data[i] -= lr.data[i];
  Image grad = convolve_adjoint(zero_upsample(e, s), k);
  for (double& v : grad.data) v *= 2.0;

  if (lambda != 0.0) {
    const double e2 = kCharbonnierEps * kCharbonnierEps;
    for (int c = 0; c < est.channels; ++c) {
      const double* p = est.plane(c);
      double* g = grad.plane(c);
      for (int y = 0; y < est.height; ++y)
        for (int x = 0; x < est.width; ++x) {
          const size_t i = static_cast<size_t>(y) * est.width + x;
          if (x + 1 < est.width) {
            const double d = p[i + 1] - p[i];
            const double w = lambda * d / std::sqrt(d * d + e2);
            g[i + 1] += w;
            g[i] -= w;
          }
          if (y + 1 < est.height) {
            const double d = p[i + est.width] - p[i];
            const double w = lambda * d / std::sqrt(d * d + e2);
            g[i + est.width] += w;
            g[i] -= w;
          }
        }
    }
  }
  return grad;
}

// Gradient descent on the regularized objective, same guard as IBP. With
// lambda = 0 each update is the IBP correction at twice the step size.
inline IterResult refine_gradprior(const Image& init, const Image& lr, const Kernel& k,
                                   ScaleFactor s, int iters, double step, double lambda) {
  return detail::iterate_with_guard(init, lr, k, s, iters, [&](Image& cur) {
    const Image grad = gradprior_gradient(cur, lr, k, s, lambda);
    for (size_t i = 0; i < cur.data.size(); ++i) cur.data[i] -= step * grad.data[i];
  });
}

// Convenience forms taking the degradation spec; the data operator is the
// formation kernel + decimation regardless of how the LR was really made.
inline IterResult refine_ibp(const Image& lr, const Image& init, const DegradeSpec& spec,
                             int iters, double step) {
  return refine_ibp(init, lr, formation_kernel(spec), spec.scale, iters, step);
}

inline IterResult refine_gradprior(const Image& lr, const Image& init, const DegradeSpec& spec,
                                   int iters, double step, double lambda) {
  return refine_gradprior(init, lr, formation_kernel(spec), spec.scale, iters, step, lambda);
}

}  // namespace pixsub

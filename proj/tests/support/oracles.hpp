#pragma once

// Matrix-form oracles for the linear image operators, plus a finite-difference
// gradient checker. Kept deliberately independent of the library internals:
// the reflection map below is a step-by-step fold rather than the library's
// closed form, and the operators are materialized as dense matrices.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "pixsub/image.hpp"
#include "pixsub/kernel.hpp"

namespace testsupport {

// Mirror (no edge repeat) into [0, n) by explicit folding.
inline int mirror_fold(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

// Dense matrix of same-size convolution with reflect padding on a w x h grid.
// Pixel (y,x) maps to row/column index y*w + x.
inline Mat convolve_matrix(int w, int h, const pixsub::Kernel& k) {
  Mat m(w * h, w * h);
  const int r = k.radius();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ti = 0; ti < k.size; ++ti)
        for (int tj = 0; tj < k.size; ++tj) {
          const int sy = mirror_fold(y + ti - r, h);
          const int sx = mirror_fold(x + tj - r, w);
          m.at(y * w + x, sy * w + sx) += k.tap(ti, tj);
        }
  return m;
}

// Dense selection matrix keeping every s-th sample (top-left phase).
inline Mat decimate_matrix(int w, int h, int s) {
  const int ow = w / s, oh = h / s;
  Mat m(ow * oh, w * h);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) m.at(y * ow + x, y * s * w + x * s) = 1.0;
  return m;
}

inline Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) t.at(c, r) = m.at(r, c);
  return t;
}

// Apply channel-wise; the output image is ow x oh.
inline pixsub::Image apply_to_image(const Mat& m, const pixsub::Image& img, int ow, int oh) {
  pixsub::Image out(ow, oh, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    for (int r = 0; r < m.rows; ++r) {
      double acc = 0.0;
      for (int j = 0; j < m.cols; ++j) acc += m.at(r, j) * src[j];
      dst[r] = acc;
    }
  }
  return out;
}

inline double dot(const pixsub::Image& a, const pixsub::Image& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

inline double max_abs_diff(const pixsub::Image& a, const pixsub::Image& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

// Central finite differences of a scalar function w.r.t. one parameter vector.
inline std::vector<double> fd_gradient(std::vector<double>& params,
                                       const std::function<double()>& f, double eps = 1e-6) {
  std::vector<double> g(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double hi = f();
    params[i] = saved - eps;
    const double lo = f();
    params[i] = saved;
    g[i] = (hi - lo) / (2.0 * eps);
  }
  return g;
}

// Worst relative disagreement, with an absolute floor so near-zero entries
// don't blow the ratio up.
inline double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(floor, std::abs(analytic[i]) + std::abs(numeric[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace testsupport

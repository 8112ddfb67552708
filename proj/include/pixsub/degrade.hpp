#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pixsub/image.hpp"
#include "pixsub/kernel.hpp"

namespace pixsub {

struct ScaleFactor {
  int s = 1;
  ScaleFactor() = default;
  explicit ScaleFactor(int v) : s(v) {
    if (v < 1 || v > 4) throw ConfigError("scale factor must be in {1,2,3,4}");
  }
};

enum class DegradeMode { GaussianDecimate, Bicubic };

// How LR observations are produced from HR ground truth. In gaussian mode the
// blur kernel is explicit (sigma defaults to 0.5*s, size to 2*ceil(3*sigma)+1);
// bicubic mode follows the usual dataset-generation protocol. noise_level is
// the std-dev of additive Gaussian noise as a fraction of the [0,1] range.
struct DegradeSpec {
  DegradeMode mode = DegradeMode::Bicubic;
  double sigma = 0.0;   // 0 = auto
  int kernel_size = 0;  // 0 = auto
  ScaleFactor scale{};
  double noise_level = 0.0;

  double effective_sigma() const { return sigma > 0.0 ? sigma : 0.5 * scale.s; }
  int effective_kernel_size() const {
    if (kernel_size > 0) return kernel_size;
    return std::max(3, 2 * static_cast<int>(std::ceil(3.0 * effective_sigma())) + 1);
  }
  Kernel blur_kernel() const { return gaussian_kernel(effective_sigma(), effective_kernel_size()); }
};

// Mirror index without repeating the edge sample; folds as often as needed.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

namespace detail {

// Reflected source index table for one tap offset.
inline std::vector<int> reflect_table(int n, int offset) {
  std::vector<int> t(n);
  for (int i = 0; i < n; ++i) t[i] = reflect_index(i + offset, n);
  return t;
}

}  // namespace detail

// Same-size convolution with reflect padding. Linear in the image.
inline Image convolve(const Image& img, const Kernel& k) {
  k.validate();
  if (k.size > 2 * std::min(img.width, img.height) + 1)
    throw DimensionError("kernel larger than image allows");

  const int r = k.radius();
  const int w = img.width, h = img.height;
  Image out(w, h, img.channels, 0.0);

  std::vector<std::vector<int>> ry, rx;
  for (int d = -r; d <= r; ++d) {
    ry.push_back(detail::reflect_table(h, d));
    rx.push_back(detail::reflect_table(w, d));
  }

  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    for (int ti = 0; ti < k.size; ++ti) {
      for (int tj = 0; tj < k.size; ++tj) {
        const double kw = k.tap(ti, tj);
        const std::vector<int>& ytab = ry[ti];
        const std::vector<int>& xtab = rx[tj];
        for (int y = 0; y < h; ++y) {
          const double* srow = src + static_cast<size_t>(ytab[y]) * w;
          double* drow = dst + static_cast<size_t>(y) * w;
          for (int x = 0; x < w; ++x) drow[x] += kw * srow[xtab[x]];
        }
      }
    }
  }
  return out;
}

// Exact transpose of convolve(., k): contributions are scattered back through
// the same reflected index map. Needed wherever a true adjoint matters
// (least-squares gradients, back-projection).
inline Image convolve_adjoint(const Image& img, const Kernel& k) {
  k.validate();
  if (k.size > 2 * std::min(img.width, img.height) + 1)
    throw DimensionError("kernel larger than image allows");

  const int r = k.radius();
  const int w = img.width, h = img.height;
  Image out(w, h, img.channels, 0.0);

  std::vector<std::vector<int>> ry, rx;
  for (int d = -r; d <= r; ++d) {
    ry.push_back(detail::reflect_table(h, d));
    rx.push_back(detail::reflect_table(w, d));
  }

  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    for (int ti = 0; ti < k.size; ++ti) {
      for (int tj = 0; tj < k.size; ++tj) {
        const double kw = k.tap(ti, tj);
        const std::vector<int>& ytab = ry[ti];
        const std::vector<int>& xtab = rx[tj];
        for (int y = 0; y < h; ++y) {
          double* drow = dst + static_cast<size_t>(ytab[y]) * w;
          const double* srow = src + static_cast<size_t>(y) * w;
          for (int x = 0; x < w; ++x) drow[xtab[x]] += kw * srow[x];
        }
      }
    }
  }
  return out;
}

// Keep every s-th sample, top-left phase: out(i,j) = in(i*s, j*s).
inline Image decimate(const Image& img, ScaleFactor s) {
  if (s.s == 1) return img;
  if (img.width % s.s != 0 || img.height % s.s != 0)
    throw DimensionError("image dimensions not divisible by scale factor");
  Image out(img.width / s.s, img.height / s.s, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        dst[static_cast<size_t>(y) * out.width + x] =
            src[static_cast<size_t>(y) * s.s * img.width + static_cast<size_t>(x) * s.s];
  }
  return out;
}

namespace detail {

inline double cubic_keys(double x) {
  // Keys cubic convolution kernel, a = -0.5.
  const double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct TapSet {
  int first = 0;
  std::vector<double> w;
};

// Per-output-sample source taps for one axis. Downscaling widens the kernel
// support by the inverse scale (antialias); source indices clamp at the
// edges; weights are normalized to sum 1.
inline std::vector<TapSet> cubic_taps(int in_n, int out_n) {
  const double scale = static_cast<double>(out_n) / in_n;
  const bool shrink = scale < 1.0;
  const double support = shrink ? 2.0 / scale : 2.0;

  std::vector<TapSet> taps(out_n);
  for (int i = 0; i < out_n; ++i) {
    const double u = (i + 0.5) / scale - 0.5;
    const int lo = static_cast<int>(std::ceil(u - support));
    const int hi = static_cast<int>(std::floor(u + support));
    TapSet t;
    t.first = std::clamp(lo, 0, in_n - 1);
    const int last = std::clamp(hi, 0, in_n - 1);
    t.w.assign(static_cast<size_t>(last - t.first) + 1, 0.0);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double arg = shrink ? scale * (u - j) : (u - j);
      const double wv = cubic_keys(arg);
      const int src = std::clamp(j, 0, in_n - 1);  // clamp-replicate at edges
      t.w[static_cast<size_t>(src - t.first)] += wv;
      sum += wv;
    }
    for (double& wv : t.w) wv /= sum;
    taps[i] = std::move(t);
  }
  return taps;
}

}  // namespace detail

// Separable cubic-convolution resize (a = -0.5), antialiased when shrinking.
inline Image bicubic_resize(const Image& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw DimensionError("bicubic output dimensions must be >= 1");

  const auto tx = detail::cubic_taps(img.width, out_w);
  const auto ty = detail::cubic_taps(img.height, out_h);

  Image out(out_w, out_h, img.channels);
  std::vector<double> tmp(static_cast<size_t>(img.height) * out_w);
  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    // horizontal pass
    for (int y = 0; y < img.height; ++y) {
      const double* srow = src + static_cast<size_t>(y) * img.width;
      double* drow = tmp.data() + static_cast<size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        const detail::TapSet& t = tx[x];
        double acc = 0.0;
        for (size_t j = 0; j < t.w.size(); ++j) acc += t.w[j] * srow[t.first + j];
        drow[x] = acc;
      }
    }
    // vertical pass
    double* dst = out.plane(c);
    for (int y = 0; y < out_h; ++y) {
      const detail::TapSet& t = ty[y];
      double* drow = dst + static_cast<size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (size_t j = 0; j < t.w.size(); ++j)
          acc += t.w[j] * tmp[(t.first + j) * static_cast<size_t>(out_w) + x];
        drow[x] = acc;
      }
    }
  }
  return out;
}

// Additive i.i.d. Gaussian noise, std-dev = level (fraction of full range),
// clamped back to [0,1]. Deterministic for a fixed seed.
inline Image add_noise(const Image& img, double level, std::uint64_t seed) {
  if (level < 0.0 || level > 0.1) throw ConfigError("noise level must be in [0, 0.1]");
  if (level == 0.0) return img;
  Image out = img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, level);
  for (double& v : out.data) v = std::clamp(v + dist(rng), 0.0, 1.0);
  return out;
}

// The full observation pipeline: blur+decimate (gaussian mode) or bicubic
// downscale, then noise.
inline Image degrade(const Image& img, const DegradeSpec& spec, std::uint64_t seed) {
  if (img.width % spec.scale.s != 0 || img.height % spec.scale.s != 0)
    throw DimensionError("HR dimensions not divisible by scale factor");
  Image lr;
  if (spec.mode == DegradeMode::GaussianDecimate) {
    lr = decimate(convolve(img, spec.blur_kernel()), spec.scale);
  } else {
    lr = bicubic_resize(img, img.width / spec.scale.s, img.height / spec.scale.s);
  }
  return add_noise(lr, spec.noise_level, seed);
}

}  // namespace pixsub

#pragma once

#include <cmath>
#include <vector>

#include "pixsub/image.hpp"

namespace pixsub {

// 2-D normalized convolution stencil. Odd side length, taps sum to 1.
struct Kernel {
  int size = 0;
  std::vector<double> taps;  // row-major size*size

  int radius() const { return size / 2; }
  double tap(int i, int j) const { return taps[static_cast<size_t>(i) * size + j]; }

  static Kernel make(int size, std::vector<double> taps) {
    Kernel k;
    k.size = size;
    k.taps = std::move(taps);
    k.validate();
    return k;
  }

  void validate() const {
    if (size < 1 || size % 2 == 0) throw ConfigError("kernel size must be odd and positive");
    if (taps.size() != static_cast<size_t>(size) * size)
      throw ConfigError("kernel tap count does not match size");
    double sum = 0.0;
    for (double t : taps) {
      if (!std::isfinite(t)) throw ConfigError("kernel taps must be finite");
      sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("kernel taps must sum to 1");
  }
};

inline Kernel identity_kernel() { return Kernel::make(1, {1.0}); }

// Isotropic Gaussian, taps normalized to sum 1.
inline Kernel gaussian_kernel(double sigma, int size) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian kernel needs sigma > 0");
  if (size < 3 || size % 2 == 0) throw ConfigError("gaussian kernel size must be odd and >= 3");

  Kernel k;
  k.size = size;
  k.taps.resize(static_cast<size_t>(size) * size);
  const int c = (size - 1) / 2;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double d2 = static_cast<double>((i - c) * (i - c) + (j - c) * (j - c));
      const double v = std::exp(-d2 * inv);
      k.taps[static_cast<size_t>(i) * size + j] = v;
      sum += v;
    }
  }
  for (double& t : k.taps) t /= sum;
  return k;
}

}  // namespace pixsub

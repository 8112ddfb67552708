#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "pixsub/image.hpp"

namespace pixsub {

inline double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("mse: images differ in shape");
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

// Peak-signal-to-noise ratio on the [0,1] range; +inf for identical images.
inline double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

inline Image shave(const Image& img, int border) {
  if (border < 0) throw DimensionError("shave: negative border");
  if (border == 0) return img;
  if (img.width <= 2 * border || img.height <= 2 * border)
    throw DimensionError("shave: border swallows the whole image");
  Image out(img.width - 2 * border, img.height - 2 * border, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        dst[static_cast<size_t>(y) * out.width + x] =
            src[static_cast<size_t>(y + border) * img.width + (x + border)];
  }
  return out;
}

namespace detail {

inline std::vector<double> ssim_window() {
  std::vector<double> g(11);
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    g[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-mode separable filtering of one plane: (h,w) -> (h-10, w-10).
inline std::vector<double> ssim_filter(const double* src, int w, int h,
                                       const std::vector<double>& g) {
  const int ow = w - 10, oh = h - 10;
  std::vector<double> tmp(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int j = 0; j < 11; ++j) acc += g[j] * src[static_cast<size_t>(y) * w + (x + j)];
      tmp[static_cast<size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int j = 0; j < 11; ++j) acc += g[j] * tmp[static_cast<size_t>(y + j) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

// Structural similarity: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1, windows fully inside the image. Multi-channel images
// average the per-window score across channels.
inline double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("ssim: images differ in shape");
  if (a.width < 11 || a.height < 11) throw DimensionError("ssim: image smaller than the window");

  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const auto g = detail::ssim_window();

  double total = 0.0;
  size_t count = 0;
  std::vector<double> prod(a.plane_size());
  for (int c = 0; c < a.channels; ++c) {
    const double* pa = a.plane(c);
    const double* pb = b.plane(c);

    auto mu_a = detail::ssim_filter(pa, a.width, a.height, g);
    auto mu_b = detail::ssim_filter(pb, a.width, a.height, g);
    for (size_t i = 0; i < prod.size(); ++i) prod[i] = pa[i] * pa[i];
    auto e_aa = detail::ssim_filter(prod.data(), a.width, a.height, g);
    for (size_t i = 0; i < prod.size(); ++i) prod[i] = pb[i] * pb[i];
    auto e_bb = detail::ssim_filter(prod.data(), a.width, a.height, g);
    for (size_t i = 0; i < prod.size(); ++i) prod[i] = pa[i] * pb[i];
    auto e_ab = detail::ssim_filter(prod.data(), a.width, a.height, g);

    for (size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double va = e_aa[i] - ma * ma;
      const double vb = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    count += mu_a.size();
  }
  return total / static_cast<double>(count);
}

enum class EvalProtocol { YChannelShaved, RgbFull };

struct MetricsReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
  EvalProtocol protocol = EvalProtocol::YChannelShaved;
};

// Standard SR scoring: either luma-only with a scale-wide border shaved off
// (the conventional benchmark protocol), or full-image RGB.
inline MetricsReport evaluate_sr(const Image& sr, const Image& hr, int scale,
                                 EvalProtocol protocol = EvalProtocol::YChannelShaved) {
  if (!sr.same_shape(hr)) throw DimensionError("evaluate_sr: images differ in shape");
  MetricsReport rep;
  rep.protocol = protocol;
  if (protocol == EvalProtocol::YChannelShaved) {
    const Image ys = shave(to_luma(sr), scale);
    const Image yh = shave(to_luma(hr), scale);
    rep.mse = mse(ys, yh);
    rep.psnr = rep.mse == 0.0 ? std::numeric_limits<double>::infinity()
                              : 10.0 * std::log10(1.0 / rep.mse);
    rep.ssim = ssim(ys, yh);
  } else {
    rep.mse = mse(sr, hr);
    rep.psnr = rep.mse == 0.0 ? std::numeric_limits<double>::infinity()
                              : 10.0 * std::log10(1.0 / rep.mse);
    rep.ssim = ssim(sr, hr);
  }
  return rep;
}

}  // namespace pixsub

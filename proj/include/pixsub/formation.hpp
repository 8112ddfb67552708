#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include "pixsub/degrade.hpp"
#include "pixsub/image.hpp"
#include "pixsub/kernel.hpp"

namespace pixsub {

// Kernel the hard constraint is enforced with. In gaussian mode this is the
// true degradation kernel; for bicubic-degraded inputs there is no single
// convolution kernel, so a Gaussian stand-in at the same scale is used.
inline Kernel formation_kernel(const DegradeSpec& spec) {
  if (spec.mode == DegradeMode::GaussianDecimate) return spec.blur_kernel();
  DegradeSpec surrogate = spec;
  surrogate.mode = DegradeMode::GaussianDecimate;
  return surrogate.blur_kernel();
}

// Transpose of decimate: LR samples land at (i*s, j*s), zeros elsewhere.
inline Image zero_upsample(const Image& lr, ScaleFactor s) {
  if (s.s == 1) return lr;
  Image out(lr.width * s.s, lr.height * s.s, lr.channels, 0.0);
  for (int c = 0; c < lr.channels; ++c) {
    const double* src = lr.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < lr.height; ++y)
      for (int x = 0; x < lr.width; ++x)
        dst[static_cast<size_t>(y) * s.s * out.width + static_cast<size_t>(x) * s.s] =
            src[static_cast<size_t>(y) * lr.width + x];
  }
  return out;
}

struct SubstitutionRecord {
  std::int64_t substituted_count = 0;
  std::int64_t expected_count = 0;
  double max_injected_delta = 0.0;
};

// Overwrite the blurred estimate at each decimation site with the observed LR
// sample. Pure copy — no arithmetic touches the substituted values, so the
// constraint holds bit-exactly and the operation is idempotent.
inline std::pair<Image, SubstitutionRecord> pixel_substitute(const Image& blurred, const Image& lr,
                                                             ScaleFactor s) {
  if (blurred.width != lr.width * s.s || blurred.height != lr.height * s.s)
    throw DimensionError("blurred image is not scale times the LR image");
  if (blurred.channels != lr.channels) throw DimensionError("channel count mismatch");

  Image out = blurred;
  SubstitutionRecord rec;
  rec.expected_count =
      static_cast<std::int64_t>(lr.width) * lr.height * lr.channels;
  for (int c = 0; c < lr.channels; ++c) {
    const double* src = lr.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < lr.height; ++y)
      for (int x = 0; x < lr.width; ++x) {
        double& site = dst[static_cast<size_t>(y) * s.s * out.width + static_cast<size_t>(x) * s.s];
        const double obs = src[static_cast<size_t>(y) * lr.width + x];
        const double delta = std::abs(site - obs);
        if (delta > rec.max_injected_delta) rec.max_injected_delta = delta;
        site = obs;
        ++rec.substituted_count;
      }
  }
  return {std::move(out), rec};
}

struct ResidualReport {
  double mse = 0.0;
  double psnr = std::numeric_limits<double>::infinity();
  double mse_8bit = 0.0;
  double psnr_8bit = std::numeric_limits<double>::infinity();
};

namespace detail {

inline ResidualReport residual_report(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("residual images differ in shape");
  ResidualReport rep;
  double acc = 0.0;
  double acc8 = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
    const double d8 = static_cast<double>(quantize_sample(a.data[i])) -
                      static_cast<double>(quantize_sample(b.data[i]));
    acc8 += d8 * d8;
  }
  rep.mse = acc / static_cast<double>(a.data.size());
  rep.mse_8bit = acc8 / static_cast<double>(a.data.size());
  if (rep.mse > 0.0) rep.psnr = 10.0 * std::log10(1.0 / rep.mse);
  if (rep.mse_8bit > 0.0) rep.psnr_8bit = 10.0 * std::log10(255.0 * 255.0 / rep.mse_8bit);
  return rep;
}

}  // namespace detail

// How far an HR estimate is from reproducing the observation when pushed
// through the noise-free formation model (blur + decimate, or bicubic).
inline ResidualReport constraint_residual(const Image& hr, const Image& lr,
                                          const DegradeSpec& spec) {
  DegradeSpec clean = spec;
  clean.noise_level = 0.0;
  return detail::residual_report(degrade(hr, clean, 0), lr);
}

// Same, but against an explicit blur kernel (cascades may override the one
// the degradation spec implies).
inline ResidualReport constraint_residual(const Image& hr, const Image& lr, const Kernel& k,
                                          ScaleFactor s) {
  return detail::residual_report(decimate(convolve(hr, k), s), lr);
}

// Residual of an image that already *is* a blurred estimate (e.g. the output
// of pixel substitution): only decimation stands between it and the
// observation. Zero, bit-exactly, right after substitution.
inline ResidualReport decimation_residual(const Image& blurred, const Image& lr, ScaleFactor s) {
  return detail::residual_report(decimate(blurred, s), lr);
}

}  // namespace pixsub

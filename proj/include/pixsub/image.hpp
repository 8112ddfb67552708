#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pixsub {

// Error taxonomy. The CLI maps these onto distinct exit codes, so keep the
// classification stable: config/usage problems, data problems, numeric
// failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : Error {          // unreadable / unwritable files
  using Error::Error;
};
struct FormatError : Error {      // unsupported or corrupt file contents
  using Error::Error;
};
struct DimensionError : Error {   // shape or divisibility violations
  using Error::Error;
};
struct DataError : Error {        // dataset-level problems (empty, mismatched)
  using Error::Error;
};
struct ConfigError : Error {      // bad keys, values, argument combinations
  using Error::Error;
};
struct NumericError : Error {     // divergence and other numeric failures
  using Error::Error;
};

struct PixelCoord {
  int x = 0;  // column, 0-based
  int y = 0;  // row, 0-based
};

// Planar floating-point pixel grid. Storage is channel-major: plane(c) is a
// contiguous height*width block of row-major samples. Values nominally live
// in [0,1]; intermediates may leave the range, file output clamps.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0) : width(w), height(h), channels(c) {
    if (w <= 0 || h <= 0 || (c != 1 && c != 3))
      throw DimensionError("bad image shape " + std::to_string(w) + "x" +
                           std::to_string(h) + "x" + std::to_string(c));
    data.assign(static_cast<size_t>(w) * h * c, fill);
  }

  size_t plane_size() const { return static_cast<size_t>(width) * height; }
  size_t size() const { return data.size(); }

  double* plane(int c) { return data.data() + plane_size() * c; }
  const double* plane(int c) const { return data.data() + plane_size() * c; }

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

inline std::uint8_t quantize_sample(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// Snap every sample to the 8-bit grid (round(v*255)/255). This is what a
// save/load round trip does to pixel values.
inline Image quantize8(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = quantize_sample(v) / 255.0;
  return out;
}

inline Image crop(const Image& img, int x0, int y0, int w, int h) {
  if (w < 1 || h < 1 || x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height)
    throw DimensionError("crop rectangle outside the image");
  Image out(w, h, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    double* dst = out.plane(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        dst[static_cast<size_t>(y) * w + x] =
            src[static_cast<size_t>(y0 + y) * img.width + (x0 + x)];
  }
  return out;
}

// BT.601 luma as used by the usual SR evaluation scripts. Inputs in [0,1],
// output in [16/255, 235/255]. Gray input passes through unchanged.
inline Image to_luma(const Image& img) {
  if (img.channels == 1) return img;
  Image y(img.width, img.height, 1);
  const double* r = img.plane(0);
  const double* g = img.plane(1);
  const double* b = img.plane(2);
  for (size_t i = 0; i < y.plane_size(); ++i)
    y.data[i] = (65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i] + 16.0) / 255.0;
  return y;
}

}  // namespace pixsub

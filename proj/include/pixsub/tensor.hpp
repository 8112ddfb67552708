#pragma once

#include <vector>

#include "pixsub/image.hpp"

namespace pixsub {

// CHW activation buffer. Batch size is always 1 here, so no N axis.
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), data(static_cast<size_t>(c_) * h_ * w_, fill) {
    if (c_ < 1 || h_ < 1 || w_ < 1) throw DimensionError("tensor dimensions must be positive");
  }

  size_t plane_size() const { return static_cast<size_t>(h) * w; }
  size_t size() const { return data.size(); }
  double* plane(int ch) { return data.data() + static_cast<size_t>(ch) * plane_size(); }
  const double* plane(int ch) const { return data.data() + static_cast<size_t>(ch) * plane_size(); }
  double& at(int ch, int y, int x) { return data[static_cast<size_t>(ch) * plane_size() + static_cast<size_t>(y) * w + x]; }
  double at(int ch, int y, int x) const { return data[static_cast<size_t>(ch) * plane_size() + static_cast<size_t>(y) * w + x]; }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

inline Tensor image_to_tensor(const Image& img) {
  Tensor t(img.channels, img.height, img.width);
  t.data = img.data;  // both are channel-major row-major
  return t;
}

inline Image tensor_to_image(const Tensor& t) {
  if (t.c != 1 && t.c != 3) throw DimensionError("tensor is not image-shaped");
  Image img(t.w, t.h, t.c);
  img.data = t.data;
  return img;
}

}  // namespace pixsub

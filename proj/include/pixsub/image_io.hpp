#pragma once

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "pixsub/image.hpp"

namespace pixsub {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline Image load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }

  std::vector<png_byte> interleaved;
  std::vector<png_bytep> rows;
  int width = 0, height = 0, channels = 0;

  // libpng reports errors via longjmp; translate to an exception after cleanup.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt or truncated PNG: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported bit depth (16-bit PNG): " + path);
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported format (alpha channel): " + path);
  }
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported channel count in " + path);
  }

  const size_t stride = static_cast<size_t>(width) * channels;
  interleaved.assign(stride * height, 0);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = interleaved.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(width, height, channels);
  for (int c = 0; c < channels; ++c) {
    double* dst = img.plane(c);
    for (size_t i = 0; i < img.plane_size(); ++i)
      dst[i] = interleaved[i * channels + c] / 255.0;
  }
  return img;
}

inline void save_png(const Image& img, const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png_create_info_struct failed");
  }

  std::vector<png_byte> interleaved(static_cast<size_t>(img.width) * img.height * img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    for (size_t i = 0; i < img.plane_size(); ++i)
      interleaved[i * img.channels + c] = quantize_sample(src[i]);
  }
  std::vector<png_bytep> rows(img.height);
  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) rows[y] = interleaved.data() + stride * y;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Binary PPM (P6) / PGM (P5), maxval 255 only.
inline Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  auto next_token = [&in, &path]() -> std::string {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
      if (ch == '#') {
        while ((ch = in.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw FormatError("truncated PNM header: " + path);
    return tok;
  };

  const std::string magic = next_token();
  int channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw FormatError("unsupported PNM magic '" + magic + "': " + path);

  const int width = std::stoi(next_token());
  const int height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (width <= 0 || height <= 0) throw FormatError("bad PNM dimensions: " + path);
  if (maxval != 255) throw FormatError("unsupported PNM maxval (want 255): " + path);
  // exactly one whitespace byte separates header and raster; next_token has
  // already consumed it.

  std::vector<unsigned char> raw(static_cast<size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw FormatError("truncated PNM raster: " + path);

  Image img(width, height, channels);
  for (int c = 0; c < channels; ++c) {
    double* dst = img.plane(c);
    for (size_t i = 0; i < img.plane_size(); ++i)
      dst[i] = raw[i * channels + c] / 255.0;
  }
  return img;
}

inline void save_pnm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  for (int c = 0; c < img.channels; ++c) {
    const double* src = img.plane(c);
    for (size_t i = 0; i < img.plane_size(); ++i)
      raw[i * img.channels + c] = quantize_sample(src[i]);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("short write: " + path);
}

inline bool ends_with_icase(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  for (size_t i = 0; i < suffix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) != suffix[i])
      return false;
  return true;
}

}  // namespace detail

// Format is detected from magic bytes, not the extension.
inline Image load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path);
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == '\x89' && magic[1] == 'P') return detail::load_png(path);
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) return detail::load_pnm(path);
  throw FormatError("unsupported image format: " + path);
}

// Samples are clamped to [0,1] and quantized to 8 bits. Target format follows
// the extension: .png, .ppm (color), .pgm (gray).
inline void save_image(const Image& img, const std::string& path) {
  using detail::ends_with_icase;
  if (ends_with_icase(path, ".png")) {
    detail::save_png(img, path);
  } else if (ends_with_icase(path, ".ppm")) {
    if (img.channels != 3) throw FormatError("PPM output requires a 3-channel image");
    detail::save_pnm(img, path);
  } else if (ends_with_icase(path, ".pgm")) {
    if (img.channels != 1) throw FormatError("PGM output requires a 1-channel image");
    detail::save_pnm(img, path);
  } else {
    throw FormatError("unsupported output extension: " + path);
  }
}

}  // namespace pixsub

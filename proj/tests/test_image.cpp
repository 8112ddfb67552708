#include <gtest/gtest.h>

#include <fstream>

#include "pixsub/image.hpp"
#include "pixsub/image_io.hpp"
#include "support/synth.hpp"

using namespace pixsub;
using testsupport::synth_image;
using testsupport::TempDir;

TEST(Image, ShapeValidation) {
  EXPECT_THROW(Image(0, 4, 3), DimensionError);
  EXPECT_THROW(Image(4, -1, 3), DimensionError);
  EXPECT_THROW(Image(4, 4, 2), DimensionError);
  EXPECT_THROW(Image(4, 4, 4), DimensionError);
  EXPECT_NO_THROW(Image(1, 1, 1));
  EXPECT_NO_THROW(Image(4, 4, 3));
}

TEST(Image, PlanarLayout) {
  Image img(3, 2, 3, 0.0);
  img.at(2, 1, 0) = 0.75;
  // plane 2 starts after two 3x2 planes
  EXPECT_EQ(img.data[2 * 6 + 1 * 3 + 0], 0.75);
  EXPECT_EQ(img.plane(2)[3], 0.75);
}

TEST(Image, QuantizeSample) {
  EXPECT_EQ(quantize_sample(0.0), 0);
  EXPECT_EQ(quantize_sample(1.0), 255);
  EXPECT_EQ(quantize_sample(-0.3), 0);
  EXPECT_EQ(quantize_sample(2.0), 255);
  // round-half-away at the midpoint: 0.5*255 = 127.5 -> 128
  EXPECT_EQ(quantize_sample(0.5), 128);
  EXPECT_EQ(quantize_sample(128.4 / 255.0), 128);
}

TEST(Image, Quantize8Idempotent) {
  const Image img = synth_image(9, 7, 3, 11);
  const Image q = quantize8(img);
  const Image qq = quantize8(q);
  EXPECT_EQ(q.data, qq.data);
  for (double v : q.data) EXPECT_DOUBLE_EQ(v, quantize_sample(v) / 255.0);
}

TEST(Image, CropContentAndBounds) {
  Image img(5, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) img.at(0, y, x) = 10.0 * y + x;
  const Image c = crop(img, 1, 2, 3, 2);
  ASSERT_EQ(c.width, 3);
  ASSERT_EQ(c.height, 2);
  EXPECT_EQ(c.at(0, 0, 0), 21.0);
  EXPECT_EQ(c.at(0, 1, 2), 33.0);
  EXPECT_THROW(crop(img, 3, 0, 3, 2), DimensionError);
  EXPECT_THROW(crop(img, -1, 0, 2, 2), DimensionError);
  EXPECT_THROW(crop(img, 0, 0, 0, 2), DimensionError);
}

TEST(Image, LumaReferenceValues) {
  // analytic BT.601: white -> 235/255, black -> 16/255, red -> 81.481/255
  Image px(1, 1, 3);
  px.at(0, 0, 0) = 1.0;
  px.at(1, 0, 0) = 1.0;
  px.at(2, 0, 0) = 1.0;
  EXPECT_NEAR(to_luma(px).data[0], 0.9215686274509803, 1e-15);
  px.data = {0.0, 0.0, 0.0};
  EXPECT_NEAR(to_luma(px).data[0], 0.06274509803921569, 1e-15);
  px.data = {1.0, 0.0, 0.0};
  EXPECT_NEAR(to_luma(px).data[0], 0.31953333333333334, 1e-15);
}

TEST(Image, LumaGrayPassthrough) {
  const Image g = synth_image(6, 5, 1, 3);
  EXPECT_EQ(to_luma(g).data, g.data);
}

TEST(ImageIo, PngRoundTripRgb) {
  TempDir tmp;
  const Image img = quantize8(synth_image(13, 9, 3, 42));
  save_image(img, tmp.file("a.png"));
  const Image back = load_image(tmp.file("a.png"));
  ASSERT_TRUE(back.same_shape(img));
  EXPECT_EQ(back.data, img.data);
}

TEST(ImageIo, PngRoundTripGray) {
  TempDir tmp;
  const Image img = quantize8(synth_image(7, 11, 1, 43));
  save_image(img, tmp.file("g.png"));
  const Image back = load_image(tmp.file("g.png"));
  ASSERT_TRUE(back.same_shape(img));
  EXPECT_EQ(back.data, img.data);
}

TEST(ImageIo, PpmAndPgmRoundTrip) {
  TempDir tmp;
  const Image rgb = quantize8(synth_image(8, 6, 3, 44));
  save_image(rgb, tmp.file("a.ppm"));
  EXPECT_EQ(load_image(tmp.file("a.ppm")).data, rgb.data);

  const Image gray = quantize8(synth_image(8, 6, 1, 45));
  save_image(gray, tmp.file("a.pgm"));
  EXPECT_EQ(load_image(tmp.file("a.pgm")).data, gray.data);
}

TEST(ImageIo, SaveClampsOutOfRange) {
  TempDir tmp;
  Image img(2, 1, 1);
  img.data = {-0.5, 1.5};
  save_image(img, tmp.file("c.png"));
  const Image back = load_image(tmp.file("c.png"));
  EXPECT_EQ(back.data[0], 0.0);
  EXPECT_EQ(back.data[1], 1.0);
}

TEST(ImageIo, MissingFileThrowsIoError) {
  EXPECT_THROW(load_image("/nonexistent/nowhere.png"), IoError);
}

TEST(ImageIo, CorruptFileThrowsFormatError) {
  TempDir tmp;
  {
    std::ofstream os(tmp.file("bad.png"), std::ios::binary);
    os << "not an image at all";
  }
  EXPECT_THROW(load_image(tmp.file("bad.png")), FormatError);
}

TEST(ImageIo, UnknownExtensionOnSave) {
  const Image img(2, 2, 1, 0.5);
  EXPECT_THROW(save_image(img, "/tmp/pixsub_bogus.xyz"), FormatError);
}

#include <gtest/gtest.h>

#include "firerisk/image.hpp"
#include "test_util.hpp"

namespace firerisk {
namespace {

TEST(ImageU8, RejectsWrongBufferLength) {
  EXPECT_THROW(ImageU8(2, 2, std::vector<std::uint8_t>(11)), ShapeError);
  EXPECT_THROW(ImageU8(0, 2), ShapeError);
}

TEST(U8ToFloat, MapsEndpointsAndMidpoint) {
  ImageU8 img(3, 1, std::vector<std::uint8_t>{255, 0, 128, 0, 0, 0, 0, 0, 0});
  const ImageF f = u8_to_float(img);
  EXPECT_EQ(f.space(), ColorSpace::SRGB);
  EXPECT_EQ(f.at(0, 0, 0), 1.0);
  EXPECT_EQ(f.at(1, 0, 0), 0.0);
  EXPECT_NEAR(f.at(2, 0, 0), 0.501961, 1e-6);
  EXPECT_DOUBLE_EQ(f.at(2, 0, 0), 128.0 / 255.0);
}

TEST(FloatToU8, ClampsAndRoundsHalfAwayFromZero) {
  ImageF f(3, 1, 3, ColorSpace::SRGB);
  f.at(0, 0, 0) = 1.0;
  f.at(0, 0, 1) = -0.2;
  f.at(0, 0, 2) = 0.5;  // 127.5 -> 128
  f.at(1, 0, 0) = 7.0;
  const ImageU8 u = float_to_u8(f);
  EXPECT_EQ(u.at(0, 0, 0), 255);
  EXPECT_EQ(u.at(0, 0, 1), 0);
  EXPECT_EQ(u.at(0, 0, 2), 128);
  EXPECT_EQ(u.at(1, 0, 0), 255);
}

TEST(FloatToU8, RejectsNonSrgbTag) {
  ImageF f(1, 1, 3, ColorSpace::YUV);
  EXPECT_THROW(float_to_u8(f), SpaceMismatchError);
}

TEST(FloatToU8, InvertsU8ToFloatForAllValues) {
  ImageU8 img(256, 1);
  for (int x = 0; x < 256; ++x)
    for (int c = 0; c < 3; ++c) img.at(c, 0, x) = static_cast<std::uint8_t>((x + 85 * c) % 256);
  EXPECT_EQ(float_to_u8(u8_to_float(img)), img);
}

TEST(Histogram, AllBlack) {
  const auto h = channel_histogram(ImageU8(2, 2));
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(h.bins[c][0], 4u);
    EXPECT_EQ(h.channel_total(c), 4u);
  }
}

TEST(Histogram, SinglePixel) {
  const auto h = channel_histogram(ImageU8(1, 1, std::vector<std::uint8_t>{10, 20, 30}));
  EXPECT_EQ(h.bins[0][10], 1u);
  EXPECT_EQ(h.bins[1][20], 1u);
  EXPECT_EQ(h.bins[2][30], 1u);
  EXPECT_EQ(h.channel_total(0), 1u);
}

TEST(Histogram, CountsMatchDirectTally) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto img = testing::random_u8_image(16, 16, seed);
    const auto h = channel_histogram(img);
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(h.channel_total(c), 256u);
      for (int v = 0; v < 256; v += 37) {
        std::uint64_t n = 0;
        for (int y = 0; y < 16; ++y)
          for (int x = 0; x < 16; ++x) n += img.at(c, y, x) == v;
        EXPECT_EQ(h.bins[c][v], n);
      }
    }
  }
}

TEST(Histogram, CsvLayout) {
  const auto csv = histogram_csv(channel_histogram(ImageU8(1, 1, std::vector<std::uint8_t>{10, 20, 30})));
  EXPECT_EQ(csv.rfind("channel,bin,count\nR,0,0\n", 0), 0u);
  EXPECT_NE(csv.find("R,10,1\n"), std::string::npos);
  EXPECT_NE(csv.find("G,20,1\n"), std::string::npos);
  EXPECT_NE(csv.find("B,30,1\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 256);
}

TEST(ColorSpaceNames, CaseInsensitive) {
  EXPECT_EQ(parse_color_space("LOG"), ColorSpace::PseudoLogRGB);
  EXPECT_EQ(parse_color_space("Linear"), ColorSpace::LinearRGB);
  EXPECT_EQ(parse_color_space("srgb"), ColorSpace::SRGB);
  EXPECT_EQ(parse_color_space("yuv"), ColorSpace::YUV);
  EXPECT_EQ(parse_color_space("lab"), ColorSpace::LAB);
  EXPECT_FALSE(parse_color_space("luv"));
}

} // namespace
} // namespace firerisk

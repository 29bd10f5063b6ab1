#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "firerisk/error.hpp"

namespace firerisk {

enum class ColorSpace { SRGB, LinearRGB, PseudoLogRGB, YUV, LAB };

inline std::string_view to_string(ColorSpace s) {
  switch (s) {
    case ColorSpace::SRGB: return "srgb";
    case ColorSpace::LinearRGB: return "linear";
    case ColorSpace::PseudoLogRGB: return "log";
    case ColorSpace::YUV: return "yuv";
    case ColorSpace::LAB: return "lab";
  }
  return "?";
}

/// Parses the CLI-facing names (case-insensitive).
inline std::optional<ColorSpace> parse_color_space(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto s : {ColorSpace::SRGB, ColorSpace::LinearRGB, ColorSpace::PseudoLogRGB,
                 ColorSpace::YUV, ColorSpace::LAB})
    if (lower == to_string(s)) return s;
  return std::nullopt;
}

inline std::ostream& operator<<(std::ostream& os, ColorSpace s) { return os << to_string(s); }

/// Interleaved 8-bit RGB, row-major.
class ImageU8 {
public:
  static constexpr int kChannels = 3;
  using value_type = std::uint8_t;

  ImageU8() = default;
  ImageU8(int width, int height, std::uint8_t fill = 0)
      : width_(checked_dim(width)), height_(checked_dim(height)),
        data_(static_cast<std::size_t>(width) * height * kChannels, fill) {}
  ImageU8(int width, int height, std::vector<std::uint8_t> data)
      : width_(checked_dim(width)), height_(checked_dim(height)), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width_) * height_ * kChannels)
      throw ShapeError("ImageU8: buffer length " + std::to_string(data_.size()) + " != " +
                       std::to_string(width_) + "x" + std::to_string(height_) + "x3");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return kChannels; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  std::uint8_t& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  std::uint8_t at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  friend bool operator==(const ImageU8&, const ImageU8&) = default;

private:
  static int checked_dim(int d) {
    if (d < 1) throw ShapeError("image dimensions must be >= 1, got " + std::to_string(d));
    return d;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Planar (channel-major) 64-bit float image tagged with its color space.
class ImageF {
public:
  using value_type = double;

  ImageF() = default;
  ImageF(int width, int height, int channels, ColorSpace space, double fill = 0.0)
      : width_(width), height_(height), channels_(channels), space_(space),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    if (width < 1 || height < 1 || channels < 1)
      throw ShapeError("ImageF: dimensions must be >= 1");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  ColorSpace space() const noexcept { return space_; }
  void set_space(ColorSpace s) noexcept { space_ = s; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> plane(int c) {
    return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * pixel_count(), pixel_count());
  }
  std::span<const double> plane(int c) const {
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * pixel_count(),
                                                  pixel_count());
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const ImageF&, const ImageF&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  ColorSpace space_ = ColorSpace::SRGB;
  std::vector<double> data_;
};

inline void require_space(const ImageF& img, ColorSpace expected, std::string_view op) {
  if (img.space() != expected)
    throw SpaceMismatchError(std::string(op) + ": expected " + std::string(to_string(expected)) +
                             " image, got " + std::string(to_string(img.space())));
}

inline ImageF u8_to_float(const ImageU8& img) {
  ImageF out(img.width(), img.height(), 3, ColorSpace::SRGB);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out.at(c, y, x) = img.at(c, y, x) / 255.0;
  return out;
}

/// Clamp to [0,1], scale by 255, round half away from zero.
inline std::uint8_t quantize_unit(double v) {
  const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::round(scaled));
}

inline ImageU8 float_to_u8(const ImageF& img) {
  require_space(img, ColorSpace::SRGB, "float_to_u8");
  if (img.channels() != 3) throw ShapeError("float_to_u8: expected 3 channels");
  ImageU8 out(img.width(), img.height());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out.at(c, y, x) = quantize_unit(img.at(c, y, x));
  return out;
}

struct Histogram {
  static constexpr std::array<std::string_view, 3> kLabels{"R", "G", "B"};
  std::array<std::array<std::uint64_t, 256>, 3> bins{};

  std::uint64_t channel_total(int c) const {
    std::uint64_t s = 0;
    for (auto v : bins[static_cast<std::size_t>(c)]) s += v;
    return s;
  }
};

inline Histogram channel_histogram(const ImageU8& img) {
  Histogram h;
  const auto px = img.data();
  for (std::size_t i = 0; i < px.size(); i += 3)
    for (std::size_t c = 0; c < 3; ++c) ++h.bins[c][px[i + c]];
  return h;
}

/// CSV with header `channel,bin,count`; one row per (channel, bin).
inline std::string histogram_csv(const Histogram& h) {
  std::string out = "channel,bin,count\n";
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t b = 0; b < 256; ++b) {
      out += Histogram::kLabels[c];
      out += ',' + std::to_string(b) + ',' + std::to_string(h.bins[c][b]) + '\n';
    }
  return out;
}

} // namespace firerisk

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "firerisk/error.hpp"
#include "firerisk/image.hpp"

namespace firerisk {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

inline Vec3 mul(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

inline Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

/// Adjugate inverse; throws on a singular matrix.
inline Mat3 inverse(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-300) throw DomainError("singular 3x3 matrix");
  const double inv = 1.0 / det;
  Mat3 r;
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv;
  return r;
}

/// Reference white tristimulus, Y normalized to 1.
struct WhitePoint {
  double X, Y, Z;

  /// From CIE xy chromaticity with Y = 1.
  static WhitePoint from_xy(double x, double y) { return {x / y, 1.0, (1.0 - x - y) / y}; }
  static WhitePoint d65() { return from_xy(0.3127, 0.3290); }
};

/// Linear RGB -> XYZ matrix and its inverse.
struct RgbXyzTransform {
  Mat3 forward;
  Mat3 inverse;

  /// Builds the matrix from primary chromaticities so that RGB (1,1,1)
  /// maps exactly onto `white`; each forward row sums to the white component.
  static RgbXyzTransform from_primaries(std::array<std::array<double, 2>, 3> xy, const WhitePoint& white) {
    Mat3 p;
    for (int c = 0; c < 3; ++c) {
      const double x = xy[c][0], y = xy[c][1];
      p[0][c] = x / y;
      p[1][c] = 1.0;
      p[2][c] = (1.0 - x - y) / y;
    }
    const Vec3 s = mul(firerisk::inverse(p), Vec3{white.X, white.Y, white.Z});
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m[r][c] = p[r][c] * s[c];
    return {m, firerisk::inverse(m)};
  }

  /// sRGB primaries (ITU-R BT.709) under D65.
  static RgbXyzTransform srgb_d65() {
    return from_primaries({{{0.64, 0.33}, {0.30, 0.60}, {0.15, 0.06}}}, WhitePoint::d65());
  }
};

namespace color_detail {

inline constexpr double kGammaKnee = 0.04045;
inline constexpr double kLinearKnee = 0.0031308;
// Slack for values a few ulps outside [0,1] produced by upstream arithmetic.
inline constexpr double kDomainSlack = 1e-9;

inline double checked_unit(double c, const char* op) {
  if (!std::isfinite(c) || c < -kDomainSlack || c > 1.0 + kDomainSlack) {
    std::ostringstream os;
    os.precision(17);
    os << op << ": value " << c << " outside [0,1]";
    throw DomainError(os.str());
  }
  return std::clamp(c, 0.0, 1.0);
}

// Gamma encode without domain checks; the linear segment extends below zero so
// out-of-gamut intermediates survive until the final clamp.
inline double encode_unchecked(double c) {
  if (c <= kLinearKnee) return 12.92 * c;
  return 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

inline double decode_unchecked(double c) {
  if (c <= kGammaKnee) return c / 12.92;
  return std::pow((c + 0.055) / 1.055, 2.4);
}

inline constexpr double kLabDelta = 6.0 / 29.0;
inline constexpr double kLabKnee = kLabDelta * kLabDelta * kLabDelta;

} // namespace color_detail

/// sRGB gamma decode of one value in [0,1].
inline double srgb_to_linear(double c) {
  return color_detail::decode_unchecked(color_detail::checked_unit(c, "srgb_to_linear"));
}

inline double linear_to_srgb(double c) {
  return color_detail::encode_unchecked(color_detail::checked_unit(c, "linear_to_srgb"));
}

/// CIELAB companding function.
inline double lab_f(double t) {
  using namespace color_detail;
  if (t > kLabKnee) return std::cbrt(t);
  return (1.0 / 3.0) * (29.0 / 6.0) * (29.0 / 6.0) * t + 4.0 / 29.0;
}

inline double lab_f_inverse(double f) {
  using namespace color_detail;
  if (f > kLabDelta) return f * f * f;
  return 3.0 * kLabDelta * kLabDelta * (f - 4.0 / 29.0);
}

// Per-pixel kernels. Inputs and outputs are (c0, c1, c2) of one pixel.

/// Y = 0.299R + 0.587G + 0.114B, U = 0.492(B - Y), V = 0.877(R - Y).
/// B - Y and R - Y are expanded with the luma weights summing to one so
/// that gray input gives exactly zero chroma.
inline Vec3 srgb_to_yuv(const Vec3& rgb) {
  const double r = rgb[0], g = rgb[1], b = rgb[2];
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  const double b_minus_y = 0.299 * (b - r) + 0.587 * (b - g);
  const double r_minus_y = 0.587 * (r - g) + 0.114 * (r - b);
  return {y, 0.492 * b_minus_y, 0.877 * r_minus_y};
}

/// Algebraic inverse of srgb_to_yuv, unclamped.
inline Vec3 yuv_to_srgb_unclamped(const Vec3& yuv) {
  const double r = yuv[0] + yuv[2] / 0.877;
  const double b = yuv[0] + yuv[1] / 0.492;
  const double g = (yuv[0] - 0.299 * r - 0.114 * b) / 0.587;
  return {r, g, b};
}

inline Vec3 srgb_to_lab(const Vec3& rgb, const WhitePoint& wp, const RgbXyzTransform& m) {
  const Vec3 lin{color_detail::decode_unchecked(rgb[0]), color_detail::decode_unchecked(rgb[1]),
                 color_detail::decode_unchecked(rgb[2])};
  const Vec3 xyz = mul(m.forward, lin);
  const double fx = lab_f(xyz[0] / wp.X), fy = lab_f(xyz[1] / wp.Y), fz = lab_f(xyz[2] / wp.Z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

/// LAB -> XYZ -> linear -> sRGB, unclamped.
inline Vec3 lab_to_srgb_unclamped(const Vec3& lab, const WhitePoint& wp, const RgbXyzTransform& m) {
  const double fy = (lab[0] + 16.0) / 116.0;
  const double fx = fy + lab[1] / 500.0;
  const double fz = fy - lab[2] / 200.0;
  const Vec3 xyz{wp.X * lab_f_inverse(fx), wp.Y * lab_f_inverse(fy), wp.Z * lab_f_inverse(fz)};
  const Vec3 lin = mul(m.inverse, xyz);
  return {color_detail::encode_unchecked(lin[0]), color_detail::encode_unchecked(lin[1]),
          color_detail::encode_unchecked(lin[2])};
}

namespace color_detail {

inline void require_rgb3(const ImageF& img, const char* op) {
  if (img.channels() != 3)
    throw UnsupportedConversionError(std::string(op) + ": expected 3 channels, got " +
                                     std::to_string(img.channels()));
}

template <class Fn>
ImageF map_pixels(const ImageF& in, ColorSpace out_space, Fn&& fn) {
  ImageF out(in.width(), in.height(), 3, out_space);
  const auto n = in.pixel_count();
  auto i0 = in.plane(0), i1 = in.plane(1), i2 = in.plane(2);
  auto o0 = out.plane(0), o1 = out.plane(1), o2 = out.plane(2);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = fn(Vec3{i0[i], i1[i], i2[i]});
    o0[i] = v[0];
    o1[i] = v[1];
    o2[i] = v[2];
  }
  return out;
}

template <class Fn>
ImageF map_values(const ImageF& in, ColorSpace out_space, Fn&& fn) {
  ImageF out = in;
  out.set_space(out_space);
  for (double& v : out.data()) v = fn(v);
  return out;
}

inline Vec3 clamp01(const Vec3& v) {
  return {std::clamp(v[0], 0.0, 1.0), std::clamp(v[1], 0.0, 1.0), std::clamp(v[2], 0.0, 1.0)};
}

} // namespace color_detail

inline ImageF srgb_to_linear(const ImageF& img) {
  require_space(img, ColorSpace::SRGB, "srgb_to_linear");
  return color_detail::map_values(img, ColorSpace::LinearRGB, [](double c) { return srgb_to_linear(c); });
}

inline ImageF linear_to_srgb(const ImageF& img) {
  require_space(img, ColorSpace::LinearRGB, "linear_to_srgb");
  return color_detail::map_values(img, ColorSpace::SRGB, [](double c) { return linear_to_srgb(c); });
}

inline ImageF srgb_to_yuv(const ImageF& img) {
  require_space(img, ColorSpace::SRGB, "srgb_to_yuv");
  color_detail::require_rgb3(img, "srgb_to_yuv");
  return color_detail::map_pixels(img, ColorSpace::YUV, [](const Vec3& v) { return srgb_to_yuv(v); });
}

inline ImageF yuv_to_srgb(const ImageF& img) {
  require_space(img, ColorSpace::YUV, "yuv_to_srgb");
  color_detail::require_rgb3(img, "yuv_to_srgb");
  return color_detail::map_pixels(img, ColorSpace::SRGB, [](const Vec3& v) {
    return color_detail::clamp01(yuv_to_srgb_unclamped(v));
  });
}

inline ImageF srgb_to_lab(const ImageF& img, const WhitePoint& wp = WhitePoint::d65(),
                          const RgbXyzTransform& m = RgbXyzTransform::srgb_d65()) {
  require_space(img, ColorSpace::SRGB, "srgb_to_lab");
  color_detail::require_rgb3(img, "srgb_to_lab");
  return color_detail::map_pixels(img, ColorSpace::LAB, [&](const Vec3& v) { return srgb_to_lab(v, wp, m); });
}

inline ImageF lab_to_srgb(const ImageF& img, const WhitePoint& wp = WhitePoint::d65(),
                          const RgbXyzTransform& m = RgbXyzTransform::srgb_d65()) {
  require_space(img, ColorSpace::LAB, "lab_to_srgb");
  color_detail::require_rgb3(img, "lab_to_srgb");
  return color_detail::map_pixels(img, ColorSpace::SRGB, [&](const Vec3& v) {
    return color_detail::clamp01(lab_to_srgb_unclamped(v, wp, m));
  });
}

inline ImageF linear_to_pseudolog(const ImageF& img) {
  require_space(img, ColorSpace::LinearRGB, "linear_to_pseudolog");
  return color_detail::map_values(img, ColorSpace::PseudoLogRGB, [](double c) {
    if (!(c >= 0.0)) throw DomainError("linear_to_pseudolog: negative value " + std::to_string(c));
    return std::log1p(c);
  });
}

inline ImageF pseudolog_to_linear(const ImageF& img) {
  require_space(img, ColorSpace::PseudoLogRGB, "pseudolog_to_linear");
  return color_detail::map_values(img, ColorSpace::LinearRGB, [](double c) { return std::expm1(c); });
}

/// Converts between any two tags. sRGB is the hub; LinearRGB <-> PseudoLogRGB
/// is a direct edge.
inline ImageF convert(const ImageF& img, ColorSpace target) {
  color_detail::require_rgb3(img, "convert");
  const ColorSpace src = img.space();
  if (src == target) return img;
  if (src == ColorSpace::LinearRGB && target == ColorSpace::PseudoLogRGB) return linear_to_pseudolog(img);
  if (src == ColorSpace::PseudoLogRGB && target == ColorSpace::LinearRGB) return pseudolog_to_linear(img);

  ImageF hub = [&] {
    switch (src) {
      case ColorSpace::SRGB: return img;
      case ColorSpace::LinearRGB: return linear_to_srgb(img);
      case ColorSpace::PseudoLogRGB: return linear_to_srgb(pseudolog_to_linear(img));
      case ColorSpace::YUV: return yuv_to_srgb(img);
      case ColorSpace::LAB: return lab_to_srgb(img);
    }
    throw UnsupportedConversionError("convert: unknown source space");
  }();
  switch (target) {
    case ColorSpace::SRGB: return hub;
    case ColorSpace::LinearRGB: return srgb_to_linear(hub);
    case ColorSpace::PseudoLogRGB: return linear_to_pseudolog(srgb_to_linear(hub));
    case ColorSpace::YUV: return srgb_to_yuv(hub);
    case ColorSpace::LAB: return srgb_to_lab(hub);
  }
  throw UnsupportedConversionError("convert: unknown target space");
}

/// How non-sRGB values are mapped to [0,1] for 8-bit rendering.
enum class DisplayNormalization {
  Fixed,   ///< the space's nominal range for in-gamut sRGB input
  MinMax,  ///< per-channel min/max of this image
  Clamp,   ///< values used as-is, clamped
};

inline std::optional<DisplayNormalization> parse_normalization(std::string_view s) {
  if (s == "fixed") return DisplayNormalization::Fixed;
  if (s == "minmax") return DisplayNormalization::MinMax;
  if (s == "clamp") return DisplayNormalization::Clamp;
  return std::nullopt;
}

/// Nominal per-channel [lo, hi] of each space over the sRGB gamut.
inline std::array<std::array<double, 2>, 3> nominal_range(ColorSpace s) {
  switch (s) {
    case ColorSpace::SRGB:
    case ColorSpace::LinearRGB: return {{{0, 1}, {0, 1}, {0, 1}}};
    case ColorSpace::PseudoLogRGB: {
      const double l2 = std::log(2.0);
      return {{{0, l2}, {0, l2}, {0, l2}}};
    }
    case ColorSpace::YUV: return {{{0, 1}, {-0.492 * 0.886, 0.492 * 0.886}, {-0.877 * 0.701, 0.877 * 0.701}}};
    case ColorSpace::LAB: return {{{0, 100}, {-128, 127}, {-128, 127}}};
  }
  return {};
}

/// Maps raw channel values to [0,1] and tags the result SRGB so it can be
/// quantized with float_to_u8. The result is a display encoding, not a
/// colorimetric sRGB image.
inline ImageF normalize_for_display(const ImageF& img, DisplayNormalization mode) {
  ImageF out = img;
  out.set_space(ColorSpace::SRGB);
  const auto fixed = nominal_range(img.space());
  for (int c = 0; c < img.channels(); ++c) {
    auto p = out.plane(c);
    double lo = 0, hi = 1;
    if (mode == DisplayNormalization::Fixed && c < 3) {
      lo = fixed[static_cast<std::size_t>(c)][0];
      hi = fixed[static_cast<std::size_t>(c)][1];
    } else if (mode == DisplayNormalization::MinMax) {
      const auto [mn, mx] = std::minmax_element(p.begin(), p.end());
      lo = *mn;
      hi = *mx;
    }
    const double span = hi - lo;
    for (double& v : p) v = std::clamp(span > 0 ? (v - lo) / span : 0.0, 0.0, 1.0);
  }
  return out;
}

} // namespace firerisk

#pragma once

// Convolutional block attention: channel attention from a shared two-layer
// MLP over average- and max-pooled channel descriptors, followed by spatial
// attention from a same-padded k x k convolution over the channel-wise mean
// and max maps.
//
//   Mc  = sigmoid(MLP(avgpool F) + MLP(maxpool F))        N x C
//   F'  = Mc (.) F
//   Ms  = sigmoid(conv([mean_c F'; max_c F']) + bias)     N x 1 x H x W
//   out = Ms (.) F'

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "firerisk/error.hpp"
#include "firerisk/rng.hpp"

namespace firerisk::cbam {

/// Dense N x C x H x W tensor of doubles, row-major.
class Tensor4 {
public:
  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, double fill = 0.0) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 1 || c < 1 || h < 1 || w < 1) throw ShapeError("Tensor4: all dims must be >= 1");
    data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }

  int n() const noexcept { return n_; }
  int c() const noexcept { return c_; }
  int h() const noexcept { return h_; }
  int w() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Tensor4& o) const noexcept {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

private:
  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * c_ + c) * h_ + y) * w_ + x;
  }
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

struct CbamParams {
  int channels = 0;
  int reduction = 16;
  int kernel = 7;
  std::vector<double> w1;  // hidden x channels
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // channels x hidden
  std::vector<double> b2;  // channels
  std::vector<double> conv;  // 2 x kernel x kernel (mean map, max map)
  double conv_bias = 0.0;

  int hidden() const noexcept { return reduction > 0 ? channels / reduction : 0; }

  void validate() const {
    if (channels < 1 || reduction < 1 || channels % reduction != 0)
      throw ConfigError("cbam: channels (" + std::to_string(channels) + ") must be divisible by reduction (" +
                        std::to_string(reduction) + ")");
    if (kernel < 1 || kernel % 2 == 0)
      throw ConfigError("cbam: spatial kernel size must be odd, got " + std::to_string(kernel));
    const auto hd = static_cast<std::size_t>(hidden()), c = static_cast<std::size_t>(channels),
               k = static_cast<std::size_t>(kernel);
    if (w1.size() != hd * c || b1.size() != hd || w2.size() != c * hd || b2.size() != c ||
        conv.size() != 2 * k * k)
      throw ShapeError("cbam: parameter buffer sizes do not match (C, r, k)");
  }

  friend bool operator==(const CbamParams&, const CbamParams&) = default;
};

struct CbamGrads {
  Tensor4 input;
  std::vector<double> w1, b1, w2, b2, conv;
  double conv_bias = 0.0;
};

struct ChannelCache {
  std::vector<double> avg, max;         // N x C pooled descriptors
  std::vector<std::size_t> argmax;      // N x C, flat y*W+x of the max
  std::vector<double> pre_avg, pre_max; // N x hidden, before ReLU
  std::vector<double> attention;        // Mc, N x C
};

struct SpatialCache {
  std::vector<double> pooled;      // N x 2 x H x W (mean, max over channels)
  std::vector<int> argmax;         // N x H x W channel index of the max
  std::vector<double> attention;   // Ms, N x H x W
};

struct ForwardCache {
  Tensor4 input;
  Tensor4 refined;  // F' = Mc (.) F
  ChannelCache channel;
  SpatialCache spatial;
  CbamParams params;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Glorot-uniform weights, zero biases.
inline CbamParams init_params(Rng& rng, int channels, int reduction, int kernel) {
  CbamParams p;
  p.channels = channels;
  p.reduction = reduction;
  p.kernel = kernel;
  if (channels < 1 || reduction < 1 || channels % reduction != 0 || kernel < 1 || kernel % 2 == 0) {
    p.validate();  // throws the descriptive ConfigError
  }
  const int hd = p.hidden();
  const auto fill = [&rng](std::vector<double>& v, std::size_t n, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    v.resize(n);
    for (double& x : v) x = rng.uniform(-a, a);
  };
  fill(p.w1, static_cast<std::size_t>(hd) * channels, channels, hd);
  p.b1.assign(static_cast<std::size_t>(hd), 0.0);
  fill(p.w2, static_cast<std::size_t>(channels) * hd, hd, channels);
  p.b2.assign(static_cast<std::size_t>(channels), 0.0);
  const double k2 = static_cast<double>(kernel) * kernel;
  fill(p.conv, static_cast<std::size_t>(2 * kernel * kernel), 2 * k2, k2);
  p.conv_bias = 0.0;
  return p;
}

namespace detail {

// out[c] = W2 * relu(W1 v + b1) + b2; stores W1 v + b1 in pre.
inline void mlp(const CbamParams& p, const double* v, double* pre, double* out) {
  const int C = p.channels, hd = p.hidden();
  for (int j = 0; j < hd; ++j) {
    double s = p.b1[j];
    for (int c = 0; c < C; ++c) s += p.w1[static_cast<std::size_t>(j) * C + c] * v[c];
    pre[j] = s;
  }
  for (int c = 0; c < C; ++c) {
    double s = p.b2[c];
    for (int j = 0; j < hd; ++j) s += p.w2[static_cast<std::size_t>(c) * hd + j] * std::max(pre[j], 0.0);
    out[c] = s;
  }
}

} // namespace detail

/// Channel attention Mc (N x C) for input `f`.
inline ChannelCache channel_attention(const Tensor4& f, const CbamParams& p) {
  p.validate();
  if (f.c() != p.channels)
    throw ShapeError("channel_attention: tensor has " + std::to_string(f.c()) + " channels, params expect " +
                     std::to_string(p.channels));
  const int N = f.n(), C = f.c(), H = f.h(), W = f.w(), hd = p.hidden();
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  ChannelCache cc;
  cc.avg.assign(static_cast<std::size_t>(N) * C, 0.0);
  cc.max.assign(static_cast<std::size_t>(N) * C, 0.0);
  cc.argmax.assign(static_cast<std::size_t>(N) * C, 0);
  cc.pre_avg.assign(static_cast<std::size_t>(N) * hd, 0.0);
  cc.pre_max.assign(static_cast<std::size_t>(N) * hd, 0.0);
  cc.attention.assign(static_cast<std::size_t>(N) * C, 0.0);

  const auto data = f.data();
  std::vector<double> out_avg(static_cast<std::size_t>(C)), out_max(static_cast<std::size_t>(C));
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* plane = data.data() + (static_cast<std::size_t>(n) * C + c) * hw;
      double sum = 0.0, best = plane[0];
      std::size_t best_i = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        sum += plane[i];
        if (plane[i] > best) {  // strict: first max in row-major order wins
          best = plane[i];
          best_i = i;
        }
      }
      const std::size_t nc = static_cast<std::size_t>(n) * C + c;
      cc.avg[nc] = sum / static_cast<double>(hw);
      cc.max[nc] = best;
      cc.argmax[nc] = best_i;
    }
    const std::size_t base = static_cast<std::size_t>(n) * C, hbase = static_cast<std::size_t>(n) * hd;
    detail::mlp(p, &cc.avg[base], &cc.pre_avg[hbase], out_avg.data());
    detail::mlp(p, &cc.max[base], &cc.pre_max[hbase], out_max.data());
    for (int c = 0; c < C; ++c) cc.attention[base + c] = sigmoid(out_avg[c] + out_max[c]);
  }
  return cc;
}

/// Spatial attention Ms (N x H x W) for the channel-refined input.
inline SpatialCache spatial_attention(const Tensor4& f, const CbamParams& p) {
  if (p.kernel < 1 || p.kernel % 2 == 0)
    throw ConfigError("cbam: spatial kernel size must be odd, got " + std::to_string(p.kernel));
  if (p.conv.size() != static_cast<std::size_t>(2 * p.kernel * p.kernel))
    throw ShapeError("spatial_attention: conv kernel buffer has wrong size");
  const int N = f.n(), C = f.c(), H = f.h(), W = f.w(), K = p.kernel, pad = (K - 1) / 2;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  SpatialCache sc;
  sc.pooled.assign(static_cast<std::size_t>(N) * 2 * hw, 0.0);
  sc.argmax.assign(static_cast<std::size_t>(N) * hw, 0);
  sc.attention.assign(static_cast<std::size_t>(N) * hw, 0.0);

  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double sum = 0.0, best = f.at(n, 0, y, x);
        int best_c = 0;
        for (int c = 0; c < C; ++c) {
          const double v = f.at(n, c, y, x);
          sum += v;
          if (v > best) {
            best = v;
            best_c = c;
          }
        }
        const std::size_t pix = static_cast<std::size_t>(y) * W + x;
        sc.pooled[(static_cast<std::size_t>(n) * 2 + 0) * hw + pix] = sum / C;
        sc.pooled[(static_cast<std::size_t>(n) * 2 + 1) * hw + pix] = best;
        sc.argmax[static_cast<std::size_t>(n) * hw + pix] = best_c;
      }

  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double z = p.conv_bias;
        for (int ch = 0; ch < 2; ++ch)
          for (int i = 0; i < K; ++i) {
            const int yy = y + i - pad;
            if (yy < 0 || yy >= H) continue;
            for (int j = 0; j < K; ++j) {
              const int xx = x + j - pad;
              if (xx < 0 || xx >= W) continue;
              z += p.conv[(static_cast<std::size_t>(ch) * K + i) * K + j] *
                   sc.pooled[(static_cast<std::size_t>(n) * 2 + ch) * hw + static_cast<std::size_t>(yy) * W + xx];
            }
          }
        sc.attention[static_cast<std::size_t>(n) * hw + static_cast<std::size_t>(y) * W + x] = sigmoid(z);
      }
  return sc;
}

/// Full module: returns the attended feature map and the cache for backward.
inline std::pair<Tensor4, ForwardCache> cbam_forward(const Tensor4& f, const CbamParams& p) {
  ForwardCache cache;
  cache.params = p;
  cache.input = f;
  cache.channel = channel_attention(f, p);

  const int N = f.n(), C = f.c(), H = f.h(), W = f.w();
  cache.refined = f;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double m = cache.channel.attention[static_cast<std::size_t>(n) * C + c];
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) cache.refined.at(n, c, y, x) *= m;
    }
  cache.spatial = spatial_attention(cache.refined, p);

  Tensor4 out = cache.refined;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          out.at(n, c, y, x) *= cache.spatial.attention[static_cast<std::size_t>(n) * hw + static_cast<std::size_t>(y) * W + x];
  return {std::move(out), std::move(cache)};
}

/// Gradients of sum(upstream (.) out) with respect to the input and every
/// parameter. Max pooling routes its gradient to the recorded argmax.
inline CbamGrads cbam_backward(const ForwardCache& cache, const Tensor4& upstream) {
  const Tensor4& f = cache.input;
  if (!upstream.same_shape(f)) throw ShapeError("cbam_backward: upstream gradient shape mismatch");
  const CbamParams& p = cache.params;
  const int N = f.n(), C = f.c(), H = f.h(), W = f.w(), hd = p.hidden(), K = p.kernel, pad = (K - 1) / 2;
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  const auto& ms = cache.spatial.attention;
  const auto& mc = cache.channel.attention;

  CbamGrads g;
  g.input = Tensor4(N, C, H, W);
  g.w1.assign(p.w1.size(), 0.0);
  g.b1.assign(p.b1.size(), 0.0);
  g.w2.assign(p.w2.size(), 0.0);
  g.b2.assign(p.b2.size(), 0.0);
  g.conv.assign(p.conv.size(), 0.0);

  // out = Ms * F'  ->  dF' (direct) and dMs.
  Tensor4 d_refined(N, C, H, W);
  std::vector<double> dz_spatial(static_cast<std::size_t>(N) * hw, 0.0);
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t pix = static_cast<std::size_t>(n) * hw + static_cast<std::size_t>(y) * W + x;
        double dms = 0.0;
        for (int c = 0; c < C; ++c) {
          d_refined.at(n, c, y, x) = upstream.at(n, c, y, x) * ms[pix];
          dms += upstream.at(n, c, y, x) * cache.refined.at(n, c, y, x);
        }
        dz_spatial[pix] = dms * ms[pix] * (1.0 - ms[pix]);
      }

  // Spatial conv backward.
  std::vector<double> d_pooled(static_cast<std::size_t>(N) * 2 * hw, 0.0);
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double dz = dz_spatial[static_cast<std::size_t>(n) * hw + static_cast<std::size_t>(y) * W + x];
        g.conv_bias += dz;
        for (int ch = 0; ch < 2; ++ch)
          for (int i = 0; i < K; ++i) {
            const int yy = y + i - pad;
            if (yy < 0 || yy >= H) continue;
            for (int j = 0; j < K; ++j) {
              const int xx = x + j - pad;
              if (xx < 0 || xx >= W) continue;
              const std::size_t kidx = (static_cast<std::size_t>(ch) * K + i) * K + j;
              const std::size_t pidx =
                  (static_cast<std::size_t>(n) * 2 + ch) * hw + static_cast<std::size_t>(yy) * W + xx;
              g.conv[kidx] += dz * cache.spatial.pooled[pidx];
              d_pooled[pidx] += dz * p.conv[kidx];
            }
          }
      }

  // Channel-wise mean / max pooling backward into F'.
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * W + x;
        const double d_mean = d_pooled[(static_cast<std::size_t>(n) * 2 + 0) * hw + pix] / C;
        const double d_max = d_pooled[(static_cast<std::size_t>(n) * 2 + 1) * hw + pix];
        for (int c = 0; c < C; ++c) d_refined.at(n, c, y, x) += d_mean;
        d_refined.at(n, cache.spatial.argmax[static_cast<std::size_t>(n) * hw + pix], y, x) += d_max;
      }

  // F' = Mc * F  ->  dF (direct) and dMc.
  std::vector<double> dz_channel(static_cast<std::size_t>(N) * C, 0.0);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const std::size_t nc = static_cast<std::size_t>(n) * C + c;
      double dmc = 0.0;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          g.input.at(n, c, y, x) = d_refined.at(n, c, y, x) * mc[nc];
          dmc += d_refined.at(n, c, y, x) * f.at(n, c, y, x);
        }
      dz_channel[nc] = dmc * mc[nc] * (1.0 - mc[nc]);
    }

  // Shared MLP backward, once per pooled branch.
  std::vector<double> d_hidden(static_cast<std::size_t>(hd)), d_vec(static_cast<std::size_t>(C));
  for (int n = 0; n < N; ++n) {
    const double* dz = &dz_channel[static_cast<std::size_t>(n) * C];
    for (int branch = 0; branch < 2; ++branch) {
      const auto& pre = branch == 0 ? cache.channel.pre_avg : cache.channel.pre_max;
      const auto& vec = branch == 0 ? cache.channel.avg : cache.channel.max;
      const double* h = &pre[static_cast<std::size_t>(n) * hd];
      const double* v = &vec[static_cast<std::size_t>(n) * C];
      for (int c = 0; c < C; ++c) {
        g.b2[c] += dz[c];
        for (int j = 0; j < hd; ++j) g.w2[static_cast<std::size_t>(c) * hd + j] += dz[c] * std::max(h[j], 0.0);
      }
      for (int j = 0; j < hd; ++j) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += p.w2[static_cast<std::size_t>(c) * hd + j] * dz[c];
        d_hidden[j] = h[j] > 0.0 ? s : 0.0;
        g.b1[j] += d_hidden[j];
        for (int c = 0; c < C; ++c) g.w1[static_cast<std::size_t>(j) * C + c] += d_hidden[j] * v[c];
      }
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int j = 0; j < hd; ++j) s += p.w1[static_cast<std::size_t>(j) * C + c] * d_hidden[j];
        d_vec[c] = s;
      }
      for (int c = 0; c < C; ++c) {
        const std::size_t nc = static_cast<std::size_t>(n) * C + c;
        if (branch == 0) {
          const double share = d_vec[c] / static_cast<double>(hw);
          for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) g.input.at(n, c, y, x) += share;
        } else {
          const std::size_t am = cache.channel.argmax[nc];
          g.input.at(n, c, static_cast<int>(am / W), static_cast<int>(am % W)) += d_vec[c];
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_coordinate;
  std::size_t coordinates_checked = 0;
};

/// Relative error with a floor on the denominator: both values below the
/// floor are compared on an absolute scale.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double weighted_output(const Tensor4& f, const CbamParams& p, const Tensor4& upstream) {
  const auto out = cbam_forward(f, p).first;
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * upstream.data()[i];
  return s;
}

/// Central differences over every input coordinate and every parameter,
/// compared against cbam_backward.
inline GradCheckResult check_gradients(const Tensor4& f, const CbamParams& p, const Tensor4& upstream,
                                       double eps = 1e-5) {
  const auto [out, cache] = cbam_forward(f, p);
  const CbamGrads g = cbam_backward(cache, upstream);
  GradCheckResult r;
  const auto record = [&](const std::string& name, std::size_t i, double analytic, double numeric) {
    const double e = relative_error(analytic, numeric);
    ++r.coordinates_checked;
    if (e >= r.max_rel_error) {
      r.max_rel_error = e;
      r.worst_coordinate = name + "[" + std::to_string(i) + "]";
    }
  };

  Tensor4 x = f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + eps;
    const double lp = weighted_output(x, p, upstream);
    x.data()[i] = orig - eps;
    const double lm = weighted_output(x, p, upstream);
    x.data()[i] = orig;
    record("input", i, g.input.data()[i], (lp - lm) / (2 * eps));
  }

  CbamParams q = p;
  const auto sweep = [&](const std::string& name, std::vector<double>& buf, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const double orig = buf[i];
      buf[i] = orig + eps;
      const double lp = weighted_output(f, q, upstream);
      buf[i] = orig - eps;
      const double lm = weighted_output(f, q, upstream);
      buf[i] = orig;
      record(name, i, grad[i], (lp - lm) / (2 * eps));
    }
  };
  sweep("w1", q.w1, g.w1);
  sweep("b1", q.b1, g.b1);
  sweep("w2", q.w2, g.w2);
  sweep("b2", q.b2, g.b2);
  sweep("conv", q.conv, g.conv);
  const double orig = q.conv_bias;
  q.conv_bias = orig + eps;
  const double lp = weighted_output(f, q, upstream);
  q.conv_bias = orig - eps;
  const double lm = weighted_output(f, q, upstream);
  q.conv_bias = orig;
  record("conv_bias", 0, g.conv_bias, (lp - lm) / (2 * eps));
  return r;
}

// ---------------------------------------------------------------------------
// Flat binary parameter file
//
//   bytes 0..3   "CBAM"
//   u32          format version (1)
//   u64 x 3      channels, reduction, kernel
//   f64 ...      w1, b1, w2, b2, conv, conv_bias
//
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes = 8) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t& pos, int bytes = 8) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw ShapeError("cbam params: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

} // namespace detail

inline std::vector<std::uint8_t> serialize_params(const CbamParams& p) {
  p.validate();
  std::vector<std::uint8_t> out{'C', 'B', 'A', 'M'};
  detail::put_u64(out, 1, 4);
  detail::put_u64(out, static_cast<std::uint64_t>(p.channels));
  detail::put_u64(out, static_cast<std::uint64_t>(p.reduction));
  detail::put_u64(out, static_cast<std::uint64_t>(p.kernel));
  for (const auto* buf : {&p.w1, &p.b1, &p.w2, &p.b2, &p.conv})
    for (double v : *buf) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  detail::put_u64(out, std::bit_cast<std::uint64_t>(p.conv_bias));
  return out;
}

inline CbamParams deserialize_params(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "CBAM", 4) != 0) throw ShapeError("cbam params: bad magic");
  std::size_t pos = 4;
  if (detail::get_u64(in, pos, 4) != 1) throw ShapeError("cbam params: unsupported format version");
  CbamParams p;
  const auto dim = [&] {
    const auto v = detail::get_u64(in, pos);
    if (v == 0 || v > (1u << 20)) throw ShapeError("cbam params: implausible dimension " + std::to_string(v));
    return static_cast<int>(v);
  };
  p.channels = dim();
  p.reduction = dim();
  p.kernel = dim();
  if (p.channels % p.reduction != 0 || p.kernel % 2 == 0) throw ConfigError("cbam params: invalid (C, r, k)");
  const auto hd = static_cast<std::size_t>(p.hidden()), c = static_cast<std::size_t>(p.channels),
             k = static_cast<std::size_t>(p.kernel);
  const auto read = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (double& x : v) x = std::bit_cast<double>(detail::get_u64(in, pos));
  };
  read(p.w1, hd * c);
  read(p.b1, hd);
  read(p.w2, c * hd);
  read(p.b2, c);
  read(p.conv, 2 * k * k);
  p.conv_bias = std::bit_cast<double>(detail::get_u64(in, pos));
  if (pos != in.size()) throw ShapeError("cbam params: trailing bytes");
  return p;
}

} // namespace firerisk::cbam

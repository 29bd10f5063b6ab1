#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "firerisk/cbam.hpp"

namespace firerisk::cbam {
namespace {

Tensor4 random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4 t(n, c, h, w);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

CbamParams random_params(int c, int r, int k, std::uint64_t seed) {
  Rng rng(seed);
  CbamParams p = init_params(rng, c, r, k);
  // Nonzero biases so every parameter gets exercised.
  for (auto* buf : {&p.b1, &p.b2})
    for (double& v : *buf) v = rng.uniform(-0.2, 0.2);
  p.conv_bias = rng.uniform(-0.2, 0.2);
  return p;
}

// Straight transcription of the block definition, no shared code with the
// library beyond the parameter struct.
Tensor4 reference_forward(const Tensor4& f, const CbamParams& p) {
  const int N = f.n(), C = f.c(), H = f.h(), W = f.w(), hd = p.hidden(), K = p.kernel;
  const auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const auto mlp = [&](const std::vector<double>& v) {
    std::vector<double> hdn(hd), out(C);
    for (int j = 0; j < hd; ++j) {
      double s = p.b1[j];
      for (int c = 0; c < C; ++c) s += p.w1[j * C + c] * v[c];
      hdn[j] = std::max(0.0, s);
    }
    for (int c = 0; c < C; ++c) {
      double s = p.b2[c];
      for (int j = 0; j < hd; ++j) s += p.w2[c * hd + j] * hdn[j];
      out[c] = s;
    }
    return out;
  };
  Tensor4 out(N, C, H, W);
  for (int n = 0; n < N; ++n) {
    std::vector<double> avg(C, 0.0), mx(C, -1e300);
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          avg[c] += f.at(n, c, y, x) / (H * W);
          mx[c] = std::max(mx[c], f.at(n, c, y, x));
        }
    const auto a = mlp(avg), b = mlp(mx);
    Tensor4 fp(1, C, H, W);
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) fp.at(0, c, y, x) = f.at(n, c, y, x) * sig(a[c] + b[c]);
    Tensor4 pooled(1, 2, H, W);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double s = 0, m = -1e300;
        for (int c = 0; c < C; ++c) {
          s += fp.at(0, c, y, x);
          m = std::max(m, fp.at(0, c, y, x));
        }
        pooled.at(0, 0, y, x) = s / C;
        pooled.at(0, 1, y, x) = m;
      }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double z = p.conv_bias;
        for (int ch = 0; ch < 2; ++ch)
          for (int dy = 0; dy < K; ++dy)
            for (int dx = 0; dx < K; ++dx) {
              const int yy = y + dy - K / 2, xx = x + dx - K / 2;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              z += p.conv[(ch * K + dy) * K + dx] * pooled.at(0, ch, yy, xx);
            }
        const double ms = sig(z);
        for (int c = 0; c < C; ++c) out.at(n, c, y, x) = fp.at(0, c, y, x) * ms;
      }
  }
  return out;
}

TEST(Cbam, MatchesReferenceForward) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = random_tensor(2, 8, 6, 7, seed);
    const auto p = random_params(8, 4, seed % 2 ? 3 : 7, seed + 100);
    const auto out = cbam_forward(f, p).first;
    const auto ref = reference_forward(f, p);
    ASSERT_TRUE(out.same_shape(f));
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out.data()[i], ref.data()[i], 1e-12);
  }
}

TEST(Cbam, ZeroInputGivesHalfAttention) {
  Rng rng(1);
  auto p = init_params(rng, 4, 2, 3);
  const Tensor4 f(1, 4, 5, 5, 0.0);
  const auto cc = channel_attention(f, p);
  for (double a : cc.attention) EXPECT_DOUBLE_EQ(a, 0.5);
  const auto sc = spatial_attention(f, p);
  for (double a : sc.attention) EXPECT_DOUBLE_EQ(a, 0.5);
}

TEST(Cbam, ZeroWeightsGiveConstantAttention) {
  CbamParams p = random_params(4, 2, 3, 3);
  std::fill(p.w1.begin(), p.w1.end(), 0.0);
  std::fill(p.b1.begin(), p.b1.end(), 0.0);
  std::fill(p.w2.begin(), p.w2.end(), 0.0);
  std::fill(p.b2.begin(), p.b2.end(), 0.0);
  std::fill(p.conv.begin(), p.conv.end(), 0.0);
  p.conv_bias = 0.0;
  const auto f = random_tensor(2, 4, 5, 5, 4);
  const auto out = cbam_forward(f, p).first;
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_DOUBLE_EQ(out.data()[i], 0.25 * f.data()[i]);
}

TEST(Cbam, AttentionInUnitIntervalAndOutputBounded) {
  const auto f = random_tensor(3, 16, 8, 8, 5);
  const auto p = random_params(16, 4, 7, 6);
  const auto [out, cache] = cbam_forward(f, p);
  for (double a : cache.channel.attention) {
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
  for (double a : cache.spatial.attention) {
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_LE(std::abs(out.data()[i]), std::abs(f.data()[i]));
}

TEST(Cbam, BatchItemsAreIndependent) {
  const auto f = random_tensor(3, 4, 5, 6, 7);
  const auto p = random_params(4, 2, 3, 8);
  Tensor4 swapped = f;
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) std::swap(swapped.at(0, c, y, x), swapped.at(2, c, y, x));
  const auto a = cbam_forward(f, p).first, b = cbam_forward(swapped, p).first;
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) {
        EXPECT_EQ(a.at(0, c, y, x), b.at(2, c, y, x));
        EXPECT_EQ(a.at(1, c, y, x), b.at(1, c, y, x));
      }
}

TEST(Cbam, ZeroUpstreamGivesZeroGradients) {
  const auto f = random_tensor(2, 4, 5, 5, 9);
  const auto p = random_params(4, 2, 3, 10);
  const auto [out, cache] = cbam_forward(f, p);
  const auto g = cbam_backward(cache, Tensor4(2, 4, 5, 5, 0.0));
  for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
  for (const auto* buf : {&g.w1, &g.b1, &g.w2, &g.b2, &g.conv})
    for (double v : *buf) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.conv_bias, 0.0);
}

TEST(Cbam, FiniteDifferenceAgreement) {
  const auto f = random_tensor(2, 4, 5, 5, 11);
  const auto p = random_params(4, 2, 3, 12);
  const auto up = random_tensor(2, 4, 5, 5, 13);
  const auto r = check_gradients(f, p, up);
  const std::size_t expected = f.size() + p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size() + p.conv.size() + 1;
  EXPECT_EQ(r.coordinates_checked, expected);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_coordinate;
}

TEST(Cbam, FiniteDifferenceAgreementLargeKernel) {
  const auto f = random_tensor(1, 8, 6, 6, 14);
  const auto p = random_params(8, 8, 7, 15);
  const auto up = random_tensor(1, 8, 6, 6, 16);
  const auto r = check_gradients(f, p, up);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_coordinate;
}

TEST(Cbam, RelativeErrorFloor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 2e-9), 1e-9 / 1e-6);
}

TEST(Cbam, InitParamsShapesAndDeterminism) {
  Rng a(7), b(7);
  const auto p = init_params(a, 16, 16, 7);
  EXPECT_EQ(p.hidden(), 1);
  EXPECT_EQ(p.w1.size(), 16u);
  EXPECT_EQ(p.w2.size(), 16u);
  EXPECT_EQ(p.conv.size(), 98u);
  for (double v : p.b1) EXPECT_EQ(v, 0.0);
  for (double v : p.b2) EXPECT_EQ(v, 0.0);
  const double bound = std::sqrt(6.0 / 17.0);
  for (double v : p.w1) EXPECT_LE(std::abs(v), bound);
  EXPECT_EQ(p, init_params(b, 16, 16, 7));
}

TEST(Cbam, ConfigErrors) {
  Rng rng(1);
  EXPECT_THROW(init_params(rng, 10, 4, 7), ConfigError);
  EXPECT_THROW(init_params(rng, 8, 4, 4), ConfigError);
  auto p = init_params(rng, 8, 4, 3);
  p.w1.pop_back();
  EXPECT_THROW(p.validate(), ShapeError);
  const auto good = init_params(rng, 8, 4, 3);
  EXPECT_THROW(cbam_forward(Tensor4(1, 4, 3, 3), good), ShapeError);
}

TEST(Cbam, SerializationRoundTrip) {
  const auto p = random_params(8, 2, 5, 20);
  const auto bytes = serialize_params(p);
  EXPECT_EQ(bytes.size(), 4 + 4 + 24 + 8 * (p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size() + p.conv.size() + 1));
  EXPECT_EQ(deserialize_params(bytes), p);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_params(bad), Error);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(deserialize_params(bad), Error);
}

TEST(Cbam, ForwardIsDeterministic) {
  const auto f = random_tensor(2, 4, 5, 5, 21);
  const auto p = random_params(4, 2, 3, 22);
  EXPECT_EQ(cbam_forward(f, p).first, cbam_forward(f, p).first);
}

} // namespace
} // namespace firerisk::cbam

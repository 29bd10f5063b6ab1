#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>

#include "firerisk/codec.hpp"
#include "firerisk/riskmap.hpp"
#include "firerisk/rng.hpp"
#include "oracles.hpp"

namespace firerisk {
namespace {

using oracle::brute_hull;

TEST(ConvexHull, MatchesBruteForce) {
  Rng rng(123);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = rng.uniform_int(1, 12);
    std::vector<Point2> pts;
    for (std::int64_t i = 0; i < n; ++i)
      pts.push_back({static_cast<double>(rng.uniform_int(0, 6)), static_cast<double>(rng.uniform_int(0, 6))});
    const auto h = convex_hull(pts);
    ASSERT_EQ(h.vertices, brute_hull(pts)) << "trial " << trial;
    ASSERT_EQ(h.degenerate, h.vertices.size() < 3);
  }
}

TEST(ConvexHull, ConvexContainingAndOrderFree) {
  Rng rng(321);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Point2> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    const auto h = convex_hull(pts).vertices;
    const std::size_t n = h.size();
    for (std::size_t i = 0; i < n; ++i) ASSERT_GT(cross(h[i], h[(i + 1) % n], h[(i + 2) % n]), 0.0);
    for (const auto& p : pts)
      for (std::size_t i = 0; i < n; ++i) ASSERT_GE(cross(h[i], h[(i + 1) % n], p), -1e-12);
    const double area = polygon_area(h).px2;
    for (std::size_t i = 0; i + 2 < n; ++i) ASSERT_GE(area, std::abs(cross(h[0], h[i + 1], h[i + 2])) / 2);
    std::vector<Point2> shuffled = pts;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 7, shuffled.end());
    ASSERT_EQ(convex_hull(shuffled).vertices, h);
  }
}

TEST(ConvexHull, SquareWithInteriorAndEdgePoints) {
  const std::vector<Point2> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.5, 0}, {1, 1}};
  const auto h = convex_hull(pts);
  EXPECT_EQ(h.vertices, (std::vector<Point2>{{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  EXPECT_FALSE(h.degenerate);
  EXPECT_DOUBLE_EQ(polygon_area(h.vertices).px2, 1.0);
  EXPECT_GT(signed_area(h.vertices), 0.0);
}

TEST(ConvexHull, DegenerateInputs) {
  EXPECT_THROW(convex_hull(std::vector<Point2>{}), DomainError);
  const auto one = convex_hull(std::vector<Point2>{{3, 4}, {3, 4}});
  EXPECT_TRUE(one.degenerate);
  EXPECT_EQ(one.vertices.size(), 1u);
  const auto line = convex_hull(std::vector<Point2>{{0, 0}, {2, 2}, {1, 1}});
  EXPECT_TRUE(line.degenerate);
  EXPECT_EQ(line.vertices, (std::vector<Point2>{{0, 0}, {2, 2}}));
  const auto a = polygon_area(line.vertices);
  EXPECT_TRUE(a.degenerate);
  EXPECT_EQ(a.px2, 0.0);
}

TEST(PolygonArea, KnownShapes) {
  const std::vector<Point2> tri{{0, 0}, {4, 0}, {0, 3}};
  EXPECT_DOUBLE_EQ(polygon_area(tri).px2, 6.0);
  std::vector<Point2> cw(tri.rbegin(), tri.rend());
  EXPECT_DOUBLE_EQ(signed_area(cw), -6.0);
  EXPECT_DOUBLE_EQ(polygon_area(cw).px2, 6.0);
  const GeoRef geo{45.0, 7.0, 0.5, 0.25};
  EXPECT_DOUBLE_EQ(polygon_area(tri, geo).m2, 6.0 * 0.125);
}

// Union-find over all same-class pairs.
std::vector<std::vector<std::size_t>> uf_clusters(const std::vector<Detection>& d, double r) {
  std::vector<std::size_t> parent(d.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      const auto a = d[i].bbox.center(), b = d[j].bbox.center();
      if (d[i].class_id == d[j].class_id && std::hypot(a.x - b.x, a.y - b.y) <= r) parent[find(i)] = find(j);
    }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < d.size(); ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [_, g] : groups) out.push_back(g);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Clustering, MatchesUnionFind) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Detection> d;
    const auto n = rng.uniform_int(1, 30);
    for (std::int64_t i = 0; i < n; ++i) {
      const double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
      d.push_back({1, rng.uniform_int(1, 2), {x, y, x + 4, y + 4}, rng.uniform()});
    }
    const double r = rng.uniform(5, 30);
    auto got = cluster_detections(d, r);
    for (std::size_t k = 1; k < got.size(); ++k) ASSERT_LT(got[k - 1].front(), got[k].front());
    std::sort(got.begin(), got.end());
    ASSERT_EQ(got, uf_clusters(d, r)) << "trial " << trial;
  }
  EXPECT_THROW(cluster_detections(std::vector<Detection>{}, 0.0), ConfigError);
}

std::vector<Detection> ten_in_square() {
  std::vector<Detection> d;
  const auto at = [&](double cx, double cy) { d.push_back({1, 3, {cx - 1, cy - 1, cx + 1, cy + 1}, 0.5}); };
  at(0, 0), at(10, 0), at(10, 10), at(0, 10);
  for (int i = 1; i <= 6; ++i) at(i, 5);
  return d;
}

TEST(RiskScore, HandExample) {
  const auto polys = build_risk_polygons(ten_in_square(), {{{3, 0.8}}}, GeoRef{}, 8.0);
  ASSERT_EQ(polys.size(), 1u);
  EXPECT_DOUBLE_EQ(polys[0].area_m2, 100.0);
  EXPECT_NEAR(polys[0].score, 0.8 * 10 / 100.0, 1e-15);
  EXPECT_EQ(polys[0].members.size(), 10u);
}

TEST(RiskScore, FourCornerSquare) {
  std::vector<Detection> d;
  for (auto [x, y] : {std::pair{0.0, 0.0}, std::pair{10.0, 0.0}, std::pair{10.0, 10.0}, std::pair{0.0, 10.0}})
    d.push_back({1, 2, {x - 2, y - 2, x + 2, y + 2}, 0.6});
  const auto polys = build_risk_polygons(d, {{{2, 2.0}}}, GeoRef{}, 10.0);
  ASSERT_EQ(polys.size(), 1u);
  EXPECT_NEAR(polys[0].score, 0.08, 1e-15);
  EXPECT_NEAR(polys[0].mean_confidence, 0.6, 1e-15);
  EXPECT_TRUE(build_risk_polygons(std::vector<Detection>{}, {}, GeoRef{}, 10.0).empty());
}

TEST(RiskScore, LinearInWeightAndInverseInPixelArea) {
  const auto base = build_risk_polygons(ten_in_square(), {{{3, 0.8}}}, GeoRef{}, 8.0)[0].score;
  EXPECT_NEAR(build_risk_polygons(ten_in_square(), {{{3, 2.4}}}, GeoRef{}, 8.0)[0].score, 3 * base, 1e-15);
  EXPECT_NEAR(build_risk_polygons(ten_in_square(), {{{3, 0.8}}}, GeoRef{0, 0, 2.0, 0.5}, 8.0)[0].score, base, 1e-15);
  EXPECT_NEAR(build_risk_polygons(ten_in_square(), {{{3, 0.8}}}, GeoRef{0, 0, 2.0, 2.0}, 8.0)[0].score, base / 4, 1e-15);
  EXPECT_THROW(build_risk_polygons(ten_in_square(), {{{1, 0.8}}}, GeoRef{}, 8.0), ConfigError);
}

TEST(RiskScore, DegenerateClustersScoreZero) {
  std::vector<Detection> d{{1, 1, {0, 0, 2, 2}, 0.9}, {1, 1, {3, 0, 5, 2}, 0.8}, {1, 2, {50, 50, 52, 52}, 0.7}};
  const auto polys = build_risk_polygons(d, {{{1, 1.0}, {2, 1.0}}}, GeoRef{}, 5.0);
  ASSERT_EQ(polys.size(), 2u);
  for (const auto& p : polys) {
    EXPECT_TRUE(p.degenerate);
    EXPECT_EQ(p.score, 0.0);
  }
  const auto gj = geojson(polys, GeoRef{});
  EXPECT_EQ(gj["features"][0]["geometry"]["type"], "LineString");
  EXPECT_EQ(gj["features"][1]["geometry"]["type"], "Point");
}

TEST(RiskColor, Ramp) {
  EXPECT_EQ(risk_color(0.0), (Rgb8{0, 255, 0}));
  EXPECT_EQ(risk_color(0.5), (Rgb8{255, 255, 0}));
  EXPECT_EQ(risk_color(1.0), (Rgb8{255, 0, 0}));
  EXPECT_EQ(risk_color(7.0), (Rgb8{255, 0, 0}));
}

ImageU8 hand_overlay() {
  // 8x8 gray 100, square hull (2,2)-(6,6) at max score: interior pixel
  // centers blend 0.6*100 + 0.4*color, then the edges are drawn solid red.
  ImageU8 img(8, 8, 100);
  for (int y = 2; y <= 5; ++y)
    for (int x = 2; x <= 5; ++x) {
      img.at(0, y, x) = 162;
      img.at(1, y, x) = 60;
      img.at(2, y, x) = 60;
    }
  for (int i = 2; i <= 6; ++i)
    for (auto [x, y] : {std::pair{i, 2}, std::pair{6, i}, std::pair{i, 6}, std::pair{2, i}}) {
      img.at(0, y, x) = 255;
      img.at(1, y, x) = 0;
      img.at(2, y, x) = 0;
    }
  return img;
}

RiskPolygon square_poly() {
  RiskPolygon p;
  p.hull = {{2, 2}, {6, 2}, {6, 6}, {2, 6}};
  p.class_id = 1;
  p.score = 3.0;
  p.area_px2 = p.area_m2 = 16;
  return p;
}

TEST(Overlay, MatchesHandComputedImageAndGolden) {
  const std::vector<RiskPolygon> polys{square_poly()};
  const auto res = render_overlay(ImageU8(8, 8, 100), polys);
  EXPECT_TRUE(res.warnings.empty());
  EXPECT_EQ(res.image, hand_overlay());
  const std::string golden = std::string(FIRERISK_FIXTURES) + "/overlay_golden.png";
  if (std::getenv("FIRERISK_REGEN_GOLDEN")) save_png(golden, hand_overlay());
  EXPECT_EQ(load_image(golden), res.image);
}

TEST(Overlay, TriangleGoldenAndUntouchedOutside) {
  RiskPolygon tri;
  tri.hull = {{1, 1}, {8, 2}, {3, 8}};
  tri.class_id = 1;
  tri.score = 0.5;
  RiskPolygon low = tri;
  low.hull = {{6, 6}, {9, 6}, {9, 9}};
  low.score = 0.25;
  const std::vector<RiskPolygon> polys{tri, low};
  ImageU8 src(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) src.at(c, y, x) = static_cast<std::uint8_t>(20 * x + 7 * y + 30 * c);
  const auto res = render_overlay(src, polys);
  const std::string golden = std::string(FIRERISK_FIXTURES) + "/overlay_triangle_golden.png";
  if (std::getenv("FIRERISK_REGEN_GOLDEN")) save_png(golden, res.image);
  EXPECT_EQ(load_image(golden), res.image);
  EXPECT_EQ(res.image.at(0, 9, 0), src.at(0, 9, 0));
  EXPECT_EQ(res.image.at(2, 0, 9), src.at(2, 0, 9));
  // Highest score is pure red on the edge; the half-score polygon is yellow.
  EXPECT_EQ(res.image.at(0, 1, 1), 255);
  EXPECT_EQ(res.image.at(1, 1, 1), 0);
  EXPECT_EQ(res.image.at(1, 6, 9), 255);
  EXPECT_EQ(render_overlay(src, std::vector<RiskPolygon>{}).image, src);
}

TEST(Overlay, OutOfBoundsPolygonWarnsAndClips) {
  auto p = square_poly();
  p.hull = {{-3, -3}, {4, -3}, {4, 4}, {-3, 4}};
  const std::vector<RiskPolygon> polys{p};
  const auto res = render_overlay(ImageU8(8, 8, 100), polys);
  ASSERT_EQ(res.warnings.size(), 1u);
  EXPECT_EQ(res.image.at(1, 7, 7), 100);
  EXPECT_EQ(res.image.at(0, 4, 0), 255);
}

TEST(GeoJson, CoordinatesRoundTrip) {
  const GeoRef geo{52.37, 4.89, 0.05, 0.05};
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Point2 p{rng.uniform(0, 4000), rng.uniform(0, 3000)};
    const auto ll = geo.to_lonlat(p);
    const auto q = geo.to_pixel(ll[0], ll[1]);
    // Degrees near 50 carry ~1e-14 absolute precision, i.e. ~1e-8 px here.
    ASSERT_NEAR(q.x, p.x, 1e-6);
    ASSERT_NEAR(q.y, p.y, 1e-6);
  }
  const std::vector<RiskPolygon> polys{square_poly()};
  const auto parsed = nlohmann::json::parse(export_geojson(polys, geo, {{1, "alive_tree"}}));
  EXPECT_EQ(parsed["type"], "FeatureCollection");
  const auto& f = parsed["features"][0];
  EXPECT_EQ(f["properties"]["class"], "alive_tree");
  const auto& ring = f["geometry"]["coordinates"][0];
  ASSERT_EQ(ring.size(), 5u);
  EXPECT_EQ(ring[0], ring[4]);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto ll = geo.to_lonlat(polys[0].hull[i]);
    EXPECT_NEAR(ring[i][0].get<double>(), ll[0], 1e-9);
    EXPECT_NEAR(ring[i][1].get<double>(), ll[1], 1e-9);
  }
  // North is up: larger pixel y means smaller latitude.
  EXPECT_GT(ring[0][1].get<double>(), ring[2][1].get<double>());
  EXPECT_THROW(geojson(polys, GeoRef{95, 0, 1, 1}), ConfigError);
  EXPECT_TRUE(geojson(std::vector<RiskPolygon>{}, geo)["features"].empty());
}

} // namespace
} // namespace firerisk

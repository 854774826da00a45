#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vdet/common.hpp"
#include "vdet/geo.hpp"
#include "vdet/ingest.hpp"

using namespace vdet;

namespace {

// Brute force: densify each segment and take the closest sample.
Projection densified_projection(const Corridor& c, GeoPoint p, int steps) {
  Projection best{0.0, std::numeric_limits<double>::infinity()};
  const auto v = c.vertices();
  const auto cum = c.cum_chainage();
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const GeoPoint q{v[i].x + t * (v[i + 1].x - v[i].x), v[i].y + t * (v[i + 1].y - v[i].y)};
      const double d = distance(p, q);
      if (d < best.offset) best = {cum[i] + t * (cum[i + 1] - cum[i]), d};
    }
  return best;
}

// Vincenty inverse on WGS84, metres.
double vincenty(LatLon a, LatLon b) {
  const double A = kWgs84A, f = kWgs84F, B = A * (1 - f);
  const double L = deg2rad(b.lon - a.lon);
  const double U1 = std::atan((1 - f) * std::tan(deg2rad(a.lat))), U2 = std::atan((1 - f) * std::tan(deg2rad(b.lat)));
  const double sU1 = std::sin(U1), cU1 = std::cos(U1), sU2 = std::sin(U2), cU2 = std::cos(U2);
  double lambda = L, prev = 0.0, sS = 0, cS = 0, sigma = 0, ca2 = 0, c2m = 0;
  for (int it = 0; it < 200; ++it) {
    const double sl = std::sin(lambda), cl = std::cos(lambda);
    sS = std::hypot(cU2 * sl, cU1 * sU2 - sU1 * cU2 * cl);
    if (sS == 0.0) return 0.0;
    cS = sU1 * sU2 + cU1 * cU2 * cl;
    sigma = std::atan2(sS, cS);
    const double sa = cU1 * cU2 * sl / sS;
    ca2 = 1 - sa * sa;
    c2m = ca2 != 0.0 ? cS - 2 * sU1 * sU2 / ca2 : 0.0;
    const double C = f / 16 * ca2 * (4 + f * (4 - 3 * ca2));
    prev = lambda;
    lambda = L + (1 - C) * f * sa * (sigma + C * sS * (c2m + C * cS * (-1 + 2 * c2m * c2m)));
    if (std::abs(lambda - prev) < 1e-13) break;
  }
  const double u2 = ca2 * (A * A - B * B) / (B * B);
  const double k1 = 1 + u2 / 16384 * (4096 + u2 * (-768 + u2 * (320 - 175 * u2)));
  const double k2 = u2 / 1024 * (256 + u2 * (-128 + u2 * (74 - 47 * u2)));
  const double ds = k2 * sS * (c2m + k2 / 4 * (cS * (-1 + 2 * c2m * c2m) - k2 / 6 * c2m * (-3 + 4 * sS * sS) * (-3 + 4 * c2m * c2m)));
  return B * k1 * (sigma - ds);
}

}  // namespace

TEST(Headings, NormalizeAndArc) {
  EXPECT_DOUBLE_EQ(normalize_heading(-90.0), 270.0);
  EXPECT_DOUBLE_EQ(normalize_heading(720.0), 0.0);
  EXPECT_DOUBLE_EQ(shortest_arc(350.0, 10.0), 20.0);
  EXPECT_DOUBLE_EQ(shortest_arc(10.0, 350.0), -20.0);
  EXPECT_DOUBLE_EQ(shortest_arc(0.0, 180.0), 180.0);
  EXPECT_DOUBLE_EQ(shortest_arc(180.0, 0.0), 180.0);
}

TEST(Headings, CircularMeanWrapsNorth) {
  const double h[] = {350.0, 10.0};
  EXPECT_NEAR(*circular_mean(h), 0.0, 1e-9);
  const double opposite[] = {90.0, 270.0};
  EXPECT_FALSE(circular_mean(opposite).has_value());
}

TEST(Seeds, DerivedStreamsDiffer) {
  EXPECT_EQ(derive_seed(7, 1), derive_seed(7, 1));
  EXPECT_NE(derive_seed(7, 1), derive_seed(7, 2));
  EXPECT_NE(derive_seed(7, 1, 0), derive_seed(7, 1, 1));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (unsigned threads : {1u, 2u, 5u}) {
    std::vector<int> hits(1003, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 1003);
  }
}

TEST(Corridor, RejectsDegenerateInput) {
  EXPECT_THROW(Corridor(Direction::eastbound, {{0, 0}}), std::invalid_argument);
  EXPECT_THROW(Corridor(Direction::eastbound, {{0, 0}, {0, 0}}), std::invalid_argument);
}

TEST(Corridor, ProjectionMatchesDensifiedSearch) {
  const Corridor c(Direction::eastbound, {{0, 0}, {1000, 0}, {1700, 400}, {2500, 350}, {3600, 900}});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(-200.0, 3800.0), uy(-400.0, 1300.0);
  for (int i = 0; i < 300; ++i) {
    const GeoPoint p{ux(rng), uy(rng)};
    const auto got = c.project(p);
    const auto ref = densified_projection(c, p, 20000);
    EXPECT_NEAR(got.offset, ref.offset, 0.05) << p.x << "," << p.y;
    EXPECT_LE(got.offset, ref.offset + 1e-9);
    // Chainage only defined where the nearest point is unique; compare the
    // recovered position instead.
    EXPECT_NEAR(distance(c.point_at(got.chainage), p), got.offset, 1e-6);
  }
}

TEST(Corridor, ChainageOfVerticesIsCumulativeLength) {
  const Corridor c(Direction::westbound, {{0, 0}, {300, 400}, {300, 1000}});
  EXPECT_DOUBLE_EQ(c.length(), 1100.0);
  EXPECT_DOUBLE_EQ(c.project({300, 400}).chainage, 500.0);
  EXPECT_DOUBLE_EQ(c.project({310, 700}).chainage, 800.0);
  EXPECT_DOUBLE_EQ(c.project({310, 700}).offset, 10.0);
}

TEST(Detectors, PlacedEverySpacingFromOrigin) {
  const auto c = test::straight_corridor(Direction::eastbound, 1100.0);
  const auto d = place_detectors(c, kDefaultDetectorSpacing);
  ASSERT_EQ(d.size(), 11u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d[i].id, static_cast<int>(i));
    EXPECT_DOUBLE_EQ(d[i].chainage, 110.0 * static_cast<double>(i));
  }
  EXPECT_EQ(place_detectors(test::straight_corridor(Direction::eastbound, 1099.0), 110.0).size(), 10u);
}

TEST(Detectors, NearestBreaksTiesLow) {
  const auto d = place_detectors(test::straight_corridor(Direction::eastbound, 1100.0), 110.0);
  EXPECT_EQ(nearest_detector(d, 55.0).id, 0);
  EXPECT_EQ(nearest_detector(d, 55.1).id, 1);
  EXPECT_EQ(nearest_detector(d, -10.0).id, 0);
  EXPECT_EQ(nearest_detector(d, 5000.0).id, 10);
}

TEST(Projection, CentroidMapsToOrigin) {
  const LatLon pts[] = {{30.40, -91.30}, {30.45, -91.10}, {30.50, -90.90}};
  const LocalProjection proj(centroid(pts));
  const auto g = proj.forward(centroid(pts));
  EXPECT_DOUBLE_EQ(g.x, 0.0);
  EXPECT_DOUBLE_EQ(g.y, 0.0);
}

TEST(Projection, RoundTripBelowTenthOfYard) {
  const LocalProjection proj({30.45, -91.15});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int i = 0; i < 500; ++i) {
    const LatLon p{30.45 + u(rng), -91.15 + u(rng)};
    const auto g = proj.forward(p);
    const auto back = proj.forward(proj.inverse(g));
    EXPECT_LT(distance(g, back), 0.1);
    const auto ll = proj.inverse(g);
    EXPECT_NEAR(ll.lat, p.lat, 1e-12);
    EXPECT_NEAR(ll.lon, p.lon, 1e-12);
  }
}

TEST(Projection, DistancesAgreeWithVincenty) {
  const LatLon o{30.45, -91.15};
  const LocalProjection proj(o);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.15, 0.15);  // about 10 miles
  for (int i = 0; i < 200; ++i) {
    const LatLon p{o.lat + u(rng), o.lon + u(rng)};
    const double planar = std::hypot(proj.forward(p).x, proj.forward(p).y);
    const double geodesic = vincenty(o, p) / kMetersPerYard;
    EXPECT_NEAR(planar, geodesic, std::max(1.0, 1e-3 * geodesic));
  }
  // Small-angle limit: one millidegree of latitude.
  const double dy = proj.forward({o.lat + 1e-3, o.lon}).y;
  EXPECT_NEAR(dy, vincenty(o, {o.lat + 1e-3, o.lon}) / kMetersPerYard, 1e-4);
}

TEST(Projection, RejectsInvalidCoordinates) {
  const LocalProjection proj({30.45, -91.15});
  EXPECT_THROW(proj.forward({91.0, 0.0}), OutOfBounds);
  EXPECT_THROW(proj.forward({std::nan(""), 0.0}), OutOfBounds);
  EXPECT_THROW(proj.forward({40.0, -91.15}), OutOfBounds);
}

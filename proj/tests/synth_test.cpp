#include <gtest/gtest.h>

#include "support.hpp"
#include "vdet/synth.hpp"

using namespace vdet;

namespace {

ScenarioConfig small_scenario(std::uint64_t seed) {
  ScenarioConfig c = paper_preset(seed);
  c.n_vehicles = 600;
  c.days = 1.0;
  c.n_incidents = 40;
  return c;
}

}  // namespace

TEST(Apportion, PaperIncidentMarginals) {
  const auto c = paper_preset();
  const auto kinds = apportion(256, c.kind_mix);
  std::map<IncidentKind, int> k(kinds.begin(), kinds.end());
  EXPECT_EQ(k[IncidentKind::stalled_vehicle], 200);
  EXPECT_EQ(k[IncidentKind::accident], 48);
  EXPECT_EQ(k[IncidentKind::other], 8);
  const auto dirs = apportion(256, c.direction_mix);
  std::map<Direction, int> d(dirs.begin(), dirs.end());
  EXPECT_EQ(d[Direction::westbound], 153);
  EXPECT_EQ(d[Direction::eastbound], 103);
  const auto lanes = apportion(256, c.lanes_mix);
  std::map<int, int> l(lanes.begin(), lanes.end());
  EXPECT_EQ(l[1], 242);
  EXPECT_EQ(l[2], 14);
}

TEST(Apportion, LargestRemainderSumsExactly) {
  const std::map<int, double> shares{{0, 1.0 / 3}, {1, 1.0 / 3}, {2, 1.0 / 3}};
  const auto a = apportion(10, shares);
  EXPECT_EQ(a[0].second + a[1].second + a[2].second, 10);
  EXPECT_EQ(a[0].second, 4);
  const std::map<int, double> bad{{0, 0.5}, {1, 0.4}};
  EXPECT_THROW(apportion(10, bad), std::invalid_argument);
}

TEST(Scenario, GeneratedIncidentsHaveExactMarginals) {
  auto c = paper_preset(3);
  c.n_vehicles = 50;
  const auto b = generate_scenario(c);
  ASSERT_EQ(b.incidents.size(), 256u);
  const auto s = incident_summary(b.incidents);
  EXPECT_EQ(s.by_kind.at(IncidentKind::stalled_vehicle), 200u);
  EXPECT_EQ(s.by_kind.at(IncidentKind::accident), 48u);
  EXPECT_EQ(s.by_direction.at(Direction::westbound), 153u);
  EXPECT_EQ(s.by_lanes_closed.at(2), 14u);
  for (const auto& inc : b.incidents) {
    EXPECT_GE(inc.duration(), 5 * 60.0);
    EXPECT_LE(inc.duration(), 240 * 60.0);
  }
}

TEST(Scenario, DeterministicAcrossThreads) {
  const auto a = generate_scenario(small_scenario(7), 1);
  const auto b = generate_scenario(small_scenario(7), 3);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    ASSERT_EQ(a.points[i].vehicle_id, b.points[i].vehicle_id);
    ASSERT_TRUE(test::same_bits(a.points[i].t, b.points[i].t));
    ASSERT_TRUE(test::same_bits(a.points[i].pos.x, b.points[i].pos.x));
    ASSERT_TRUE(test::same_bits(a.points[i].speed, b.points[i].speed));
  }
  EXPECT_EQ(a.ground_truth.size(), b.ground_truth.size());
  const auto c = generate_scenario(small_scenario(8), 1);
  EXPECT_TRUE(a.points.size() != c.points.size() || a.points[0].t != c.points[0].t);
}

TEST(Scenario, PointsAreValidFixes) {
  const auto b = generate_scenario(small_scenario(2));
  ASSERT_FALSE(b.points.empty());
  for (const auto& p : b.points) {
    EXPECT_GE(p.speed, 0.0);
    EXPECT_GE(p.heading, 0.0);
    EXPECT_LT(p.heading, 360.0);
  }
  EXPECT_EQ(b.corridors.size(), 2u);
  EXPECT_EQ(b.corridors[0].direction(), Direction::eastbound);
  EXPECT_NEAR(b.corridors[0].length(), 30 * kYardsPerMile, 1.0);
}

TEST(Scenario, RejectsInvalidConfig) {
  auto c = paper_preset();
  c.speed_drop = 1.5;
  EXPECT_THROW(generate_scenario(c), std::invalid_argument);
  c = paper_preset();
  c.fix_interval = 30.0;
  EXPECT_THROW(generate_scenario(c), std::invalid_argument);
}

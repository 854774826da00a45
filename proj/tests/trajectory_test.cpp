#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "vdet/trajectory.hpp"

using namespace vdet;

namespace {

RawPoint fix(double t, double x = 0.0, double speed = 60.0, double heading = 90.0, std::string v = "v1") {
  return RawPoint{std::move(v), t, {x, 0.0}, speed, heading};
}

std::vector<double> times_of(const Trip& t) {
  std::vector<double> out;
  for (const auto& p : t.points) out.push_back(p.t);
  return out;
}

Trip eastbound_trip(std::vector<RawPoint> pts) {
  Trip t;
  t.trip_id = "trip";
  t.vehicle_id = "v1";
  t.direction = Direction::eastbound;
  t.points = std::move(pts);
  return t;
}

}  // namespace

TEST(Segmentation, ExactGapBoundaryDoesNotSplit) {
  // Gaps: 10, 900 (kept), 901 (split), 5.
  std::vector<RawPoint> pts{fix(0), fix(10), fix(910), fix(1811), fix(1816)};
  const auto r = segment_trips(pts, 900.0);
  ASSERT_EQ(r.trips.size(), 2u);
  EXPECT_EQ(times_of(r.trips[0]), (std::vector<double>{0, 10, 910}));
  EXPECT_EQ(times_of(r.trips[1]), (std::vector<double>{1811, 1816}));
  EXPECT_EQ(r.trips[0].trip_id, "v1#0");
  EXPECT_EQ(r.trips[1].trip_id, "v1#1");
}

TEST(Segmentation, SingletonFragmentsDropped) {
  std::vector<RawPoint> pts{fix(0), fix(1000), fix(1010), fix(3000)};
  const auto r = segment_trips(pts, 900.0);
  ASSERT_EQ(r.trips.size(), 1u);
  EXPECT_EQ(times_of(r.trips[0]), (std::vector<double>{1000, 1010}));
  EXPECT_EQ(r.dropped_short, 2u);
}

TEST(Segmentation, SortsAndSkipsDuplicateTimestamps) {
  std::vector<RawPoint> pts{fix(20), fix(0), fix(10), fix(10)};
  const auto r = segment_trips(pts, 900.0);
  ASSERT_EQ(r.trips.size(), 1u);
  EXPECT_EQ(times_of(r.trips[0]), (std::vector<double>{0, 10, 20}));
  EXPECT_EQ(r.duplicate_timestamps, 1u);
}

TEST(Segmentation, RejectsMixedVehicles) {
  std::vector<RawPoint> pts{fix(0), fix(1, 0, 60, 90, "v2")};
  EXPECT_THROW(segment_trips(pts), std::invalid_argument);
}

TEST(Segmentation, FuzzAgainstReferenceSplitter) {
  std::mt19937_64 rng(2024);
  const double gaps[] = {0.0, 1.0, 12.0, 899.0, 899.999, 900.0, 900.001, 901.0, 5000.0};
  for (int run = 0; run < 1000; ++run) {
    const int n = static_cast<int>(rng() % 40);
    std::vector<double> times;
    double t = 1.6e9;
    for (int i = 0; i < n; ++i) {
      times.push_back(t);
      t += gaps[rng() % std::size(gaps)];
    }
    std::vector<RawPoint> pts;
    for (double x : times) pts.push_back(fix(x));
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto got = segment_trips(pts, 900.0);
    const auto ref = test::reference_split(times, 900.0);
    ASSERT_EQ(got.trips.size(), ref.trips.size()) << "run " << run;
    for (std::size_t k = 0; k < ref.trips.size(); ++k) EXPECT_EQ(times_of(got.trips[k]), ref.trips[k]);
    EXPECT_EQ(got.dropped_short, ref.dropped);
    EXPECT_EQ(got.duplicate_timestamps, ref.duplicates);
  }
}

TEST(Direction, CircularMeanOfHeadings) {
  std::vector<RawPoint> east{fix(0, 0, 60, 80), fix(1, 0, 60, 100), fix(2, 0, 60, 95)};
  EXPECT_EQ(infer_direction(east), Direction::eastbound);
  std::vector<RawPoint> west{fix(0, 0, 60, 265), fix(1, 0, 60, 280)};
  EXPECT_EQ(infer_direction(west), Direction::westbound);
  std::vector<RawPoint> wrap{fix(0, 0, 60, 355), fix(1, 0, 60, 200), fix(2, 0, 60, 300)};
  EXPECT_EQ(infer_direction(wrap), Direction::westbound);
  std::vector<RawPoint> north{fix(0, 0, 60, 0), fix(1, 0, 60, 180)};
  EXPECT_THROW(infer_direction(north), AmbiguousDirection);
}

TEST(CorridorFilter, KeepsPointsWithinOffset) {
  const auto c = test::straight_corridor(Direction::eastbound, 1000.0);
  std::vector<RawPoint> pts{fix(0, 10), fix(1, 20), fix(2, 30)};
  pts[1].pos.y = 50.0;
  pts[2].pos.y = 50.5;
  const auto kept = filter_corridor(pts, c, 50.0);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[1].t, 1.0);
}

TEST(Interpolation, ConstantSpeedPassIntervals) {
  const auto c = test::straight_corridor(Direction::eastbound, 40 * 110.0);
  const auto d = place_detectors(c, 110.0);
  std::mt19937_64 rng(3);
  for (double mph : {20.0, 45.0, 65.0, 80.0}) {
    const double v = mph_to_yps(mph);
    std::vector<RawPoint> pts;
    double t = 1.6e9 + 0.37;
    while (v * (t - 1.6e9) < 2150.0) {
      pts.push_back(fix(t, 5.0 + v * (t - 1.6e9), mph));
      t += 4.0 + static_cast<double>(rng() % 2000) / 100.0;
    }
    pts.push_back(fix(t, 5.0 + v * (t - 1.6e9), mph));
    const auto traj = interpolate_to_detectors(eastbound_trip(pts), c, d);
    ASSERT_GE(traj.passes.size(), 18u);
    EXPECT_EQ(traj.first_detector(), 1);
    for (std::size_t k = 1; k < traj.passes.size(); ++k) {
      EXPECT_EQ(traj.passes[k].detector_id, traj.passes[k - 1].detector_id + 1);
      EXPECT_NEAR(traj.passes[k].pass_time - traj.passes[k - 1].pass_time, 110.0 / v, 1e-6);
      EXPECT_DOUBLE_EQ(traj.passes[k].speed, mph);
    }
  }
}

TEST(Interpolation, PiecewiseLinearSpeedProfile) {
  const auto c = test::straight_corridor(Direction::eastbound, 30 * 110.0);
  const auto d = place_detectors(c, 110.0);
  // Speed linear in chainage between fixes at irregular positions.
  auto profile = [](double x) { return x < 1500.0 ? 60.0 - 0.01 * x : 45.0 + 0.004 * (x - 1500.0); };
  std::vector<double> xs{3.0, 250.0, 600.0, 1100.0, 1500.0, 1900.0, 2600.0, 3290.0};
  std::vector<RawPoint> pts;
  for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back(fix(1000.0 + 10.0 * static_cast<double>(i), xs[i], profile(xs[i])));
  const auto traj = interpolate_to_detectors(eastbound_trip(pts), c, d);
  ASSERT_EQ(traj.passes.size(), 29u);
  for (const auto& p : traj.passes) EXPECT_NEAR(p.speed, profile(110.0 * p.detector_id), 1e-9) << p.detector_id;
}

TEST(Interpolation, HeadingFollowsShortestArc) {
  const auto c = test::straight_corridor(Direction::eastbound, 1000.0);
  const auto d = place_detectors(c, 110.0);
  std::vector<RawPoint> pts{fix(0, 100, 60, 350), fix(10, 320, 60, 30)};
  const auto traj = interpolate_to_detectors(eastbound_trip(pts), c, d);
  ASSERT_EQ(traj.passes.size(), 2u);
  EXPECT_NEAR(traj.passes[0].heading, 350.0 + 40.0 * 10.0 / 220.0, 1e-9);
  EXPECT_NEAR(traj.passes[1].heading, 350.0 + 40.0 * 120.0 / 220.0 - 360.0, 1e-9);
}

TEST(Interpolation, SmallBacktrackAbsorbedLargeRejected) {
  const auto c = test::straight_corridor(Direction::eastbound, 2000.0);
  const auto d = place_detectors(c, 110.0);
  std::vector<RawPoint> jitter{fix(0, 0), fix(10, 500), fix(20, 480), fix(30, 1000)};
  const auto traj = interpolate_to_detectors(eastbound_trip(jitter), c, d);
  ASSERT_EQ(traj.passes.size(), 10u);
  for (std::size_t k = 1; k < traj.passes.size(); ++k) EXPECT_GT(traj.passes[k].pass_time, traj.passes[k - 1].pass_time);

  std::vector<RawPoint> reversal{fix(0, 0), fix(10, 800), fix(20, 500), fix(30, 1000)};
  EXPECT_THROW(interpolate_to_detectors(eastbound_trip(reversal), c, d), NoisyTrip);
}

TEST(Interpolation, WestboundChainageRunsBackwardInX) {
  const auto c = test::straight_corridor(Direction::westbound, 1100.0);
  const auto d = place_detectors(c, 110.0);
  Trip t = eastbound_trip({fix(0, 1050, 50, 270), fix(60, 60, 50, 270)});
  t.direction = Direction::westbound;
  const auto traj = interpolate_to_detectors(t, c, d);
  EXPECT_EQ(traj.first_detector(), 1);
  EXPECT_EQ(traj.last_detector(), 9);
  EXPECT_EQ(traj.direction, Direction::westbound);
}

TEST(Interpolation, DirectionMismatchRejected) {
  const auto c = test::straight_corridor(Direction::westbound, 1100.0);
  const auto d = place_detectors(c, 110.0);
  EXPECT_THROW(interpolate_to_detectors(eastbound_trip({fix(0, 0), fix(10, 500)}), c, d), std::invalid_argument);
}

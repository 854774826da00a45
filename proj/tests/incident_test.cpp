#include <gtest/gtest.h>

#include "support.hpp"
#include "vdet/incident.hpp"

using namespace vdet;

namespace {

constexpr double kStart = 1630080000.0;

Incident incident_at(double x, Direction d = Direction::eastbound, std::string id = "e1") {
  Incident inc;
  inc.event_id = std::move(id);
  inc.start_time = kStart;
  inc.clear_time = kStart + 1800.0;
  inc.pos = {x, 10.0};
  inc.direction = d;
  return inc;
}

// Trajectory over detectors [0, 40] whose pass at detector `at` is at time t.
DetectorTrajectory passing(std::string id, int at, double t, int first = 0) {
  auto tr = test::constant_trajectory(std::move(id), Direction::eastbound, first, 40, 0.0, 60.0);
  const double shift = t - tr.pass_at(at)->pass_time;
  for (auto& p : tr.passes) p.pass_time += shift;
  return tr;
}

}  // namespace

TEST(Window, BoundaryVerdicts) {
  const LabelConfig cfg;
  const double eps = 1e-6;
  EXPECT_EQ(classify_window(kStart - 7201.0, kStart, cfg), WindowVerdict::outside);
  EXPECT_EQ(classify_window(kStart - 7200.0, kStart, cfg), WindowVerdict::outside);
  EXPECT_EQ(classify_window(kStart - 7200.0 + eps, kStart, cfg), WindowVerdict::normal);
  EXPECT_EQ(classify_window(kStart - 1.0, kStart, cfg), WindowVerdict::normal);
  EXPECT_EQ(classify_window(kStart, kStart, cfg), WindowVerdict::affected);
  EXPECT_EQ(classify_window(kStart + 900.0, kStart, cfg), WindowVerdict::affected);
  EXPECT_EQ(classify_window(kStart + 901.0, kStart, cfg), WindowVerdict::outside);
}

TEST(Labeling, FixtureOffsetsProduceExpectedLabels) {
  const DetectorGrid grid(test::straight_corridor(Direction::eastbound, 60 * 110.0), 110.0);
  const auto ev = match_event_detector(incident_at(30 * 110.0 + 20.0), grid, 50.0);
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->detector_id, 30);
  EXPECT_DOUBLE_EQ(ev->offset, 10.0);

  const double offsets[] = {-7201.0, -7200.0 + 1e-6, -1.0, 0.0, 900.0, 901.0};
  std::vector<DetectorTrajectory> trajs;
  for (std::size_t i = 0; i < std::size(offsets); ++i) trajs.push_back(passing("t" + std::to_string(i), 30, kStart + offsets[i]));

  const std::vector<EventDetector> events{*ev};
  const auto r = label_trajectories(events, trajs);
  std::map<std::string, std::string> got;
  for (const auto& s : r.samples) got[s.trip_id] = std::string(to_string(s.label));
  for (const auto& d : r.discarded) got[d.trip_id] = "discard";
  const std::map<std::string, std::string> want{{"t0", "discard"}, {"t1", "normal"},   {"t2", "normal"},
                                                {"t3", "affected"}, {"t4", "affected"}, {"t5", "discard"}};
  EXPECT_EQ(got, want);
  EXPECT_EQ(r.pairs_examined, 6u);
  EXPECT_EQ(r.affected, 2u);
  EXPECT_EQ(r.normal, 2u);
  for (const auto& s : r.samples) EXPECT_DOUBLE_EQ(s.coincide_time, trajs[std::stoul(s.trip_id.substr(1))].pass_at(30)->pass_time);
}

TEST(Labeling, RequiresSixteenUpstreamDetectors) {
  const DetectorGrid grid(test::straight_corridor(Direction::eastbound, 60 * 110.0), 110.0);
  const std::vector<EventDetector> events{*match_event_detector(incident_at(30 * 110.0), grid, 50.0)};
  std::vector<DetectorTrajectory> trajs{passing("enough", 30, kStart + 10, 14), passing("short", 30, kStart + 10, 15)};
  const auto r = label_trajectories(events, trajs);
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.samples[0].trip_id, "enough");
  ASSERT_EQ(r.discarded.size(), 1u);
  EXPECT_EQ(r.discarded[0].reason, "insufficient_upstream");
}

TEST(Labeling, IgnoresOtherDirectionAndMissingDetector) {
  const DetectorGrid grid(test::straight_corridor(Direction::eastbound, 60 * 110.0), 110.0);
  const std::vector<EventDetector> events{*match_event_detector(incident_at(30 * 110.0), grid, 50.0)};
  auto west = passing("west", 30, kStart);
  west.direction = Direction::westbound;
  auto early = test::constant_trajectory("early", Direction::eastbound, 0, 20, kStart, 60.0);
  const std::vector<DetectorTrajectory> trajs{west, early};
  const auto r = label_trajectories(events, trajs);
  EXPECT_EQ(r.pairs_examined, 0u);
  EXPECT_TRUE(r.samples.empty());
}

TEST(Labeling, ThreadCountDoesNotChangeOutput) {
  const DetectorGrid grid(test::straight_corridor(Direction::eastbound, 60 * 110.0), 110.0);
  std::vector<EventDetector> events;
  for (int e = 0; e < 12; ++e) {
    auto inc = incident_at((20 + 2 * e) * 110.0, Direction::eastbound, "e" + std::to_string(e));
    inc.start_time += 600.0 * e;
    events.push_back(*match_event_detector(inc, grid, 50.0));
  }
  std::vector<DetectorTrajectory> trajs;
  for (int i = 0; i < 200; ++i) trajs.push_back(passing("t" + std::to_string(i), 30, kStart - 8000.0 + 60.0 * i));
  const auto a = label_trajectories(events, trajs, {}, 1);
  const auto b = label_trajectories(events, trajs, {}, 4);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].trip_id, b.samples[i].trip_id);
    EXPECT_EQ(a.samples[i].event_id, b.samples[i].event_id);
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
  }
  EXPECT_EQ(a.multiplicity, b.multiplicity);
}

TEST(EventMatching, OffCorridorAndMissingGridDiscarded) {
  const std::vector<DetectorGrid> grids{DetectorGrid(test::straight_corridor(Direction::eastbound, 1100.0), 110.0)};
  auto far = incident_at(500.0, Direction::eastbound, "far");
  far.pos.y = 60.0;
  const std::vector<Incident> incs{incident_at(500.0), far, incident_at(500.0, Direction::westbound, "wb")};
  const auto r = match_event_detectors(incs, grids, 50.0);
  ASSERT_EQ(r.matched.size(), 1u);
  EXPECT_EQ(r.matched[0].detector_id, 5);
  ASSERT_EQ(r.discarded.size(), 2u);
  EXPECT_EQ(r.discarded[0].reason, "off_corridor");
  EXPECT_EQ(r.discarded[1].reason, "no_grid_for_direction");
}

TEST(IncidentSummary, DurationBinsAndMarginals) {
  std::vector<Incident> incs;
  for (double minutes : {5.0, 14.9, 15.0, 44.0, 95.0}) {
    auto i = incident_at(0.0);
    i.clear_time = i.start_time + 60.0 * minutes;
    incs.push_back(i);
  }
  incs[1].kind = IncidentKind::accident;
  incs[2].direction = Direction::westbound;
  incs[3].lanes_closed = 2;
  const auto s = incident_summary(incs);
  EXPECT_EQ(s.total, 5u);
  EXPECT_EQ(s.duration_bins, (std::vector<std::size_t>{2, 1, 1, 0, 0, 0, 1}));
  EXPECT_EQ(s.by_kind.at(IncidentKind::accident), 1u);
  EXPECT_EQ(s.by_kind.at(IncidentKind::other), 4u);
  EXPECT_EQ(s.by_direction.at(Direction::westbound), 1u);
  EXPECT_EQ(s.by_lanes_closed.at(2), 1u);
}

TEST(IncidentValidation, RejectsInvertedTimes) {
  auto i = incident_at(0.0);
  i.clear_time = i.start_time - 1.0;
  EXPECT_THROW(validate(i), std::invalid_argument);
}

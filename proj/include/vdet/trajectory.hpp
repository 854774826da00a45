#pragma once

// Raw GPS fixes -> corridor filtering -> trips -> detector-based trajectories.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/geo.hpp"

namespace vdet {

struct RawPoint {
  std::string vehicle_id;
  double t = 0.0;  // epoch seconds
  GeoPoint pos;
  double speed = 0.0;    // mph
  double heading = 0.0;  // degrees, [0,360)
};

struct Trip {
  std::string trip_id;
  std::string vehicle_id;
  std::optional<Direction> direction;  // set by infer_direction
  std::vector<RawPoint> points;
};

struct DetectorPass {
  int detector_id = 0;
  double pass_time = 0.0;
  double speed = 0.0;
  double heading = 0.0;
};

struct DetectorTrajectory {
  std::string trip_id;
  Direction direction = Direction::eastbound;
  std::vector<DetectorPass> passes;  // travel order, contiguous detector ids

  bool empty() const { return passes.empty(); }
  int first_detector() const { return passes.front().detector_id; }
  int last_detector() const { return passes.back().detector_id; }

  const DetectorPass* pass_at(int detector_id) const {
    if (passes.empty() || detector_id < first_detector() || detector_id > last_detector()) return nullptr;
    return &passes[static_cast<std::size_t>(detector_id - first_detector())];
  }
};

inline constexpr double kDefaultTripGap = 900.0;         // s
inline constexpr double kDefaultMaxOffset = 50.0;        // yd
inline constexpr double kDefaultBackwardTolerance = 0.05;

struct AmbiguousDirection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoisyTrip : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------

/// Keeps points whose projection offset is <= max_offset, in input order.
inline std::vector<RawPoint> filter_corridor(std::span<const RawPoint> points, const Corridor& corridor,
                                             double max_offset) {
  std::vector<RawPoint> out;
  for (const auto& p : points)
    if (corridor.project(p.pos).offset <= max_offset) out.push_back(p);
  return out;
}

/// Same, accepting a point that lies near any of the given corridors.
inline std::vector<RawPoint> filter_corridor(std::span<const RawPoint> points, std::span<const Corridor> corridors,
                                             double max_offset) {
  std::vector<RawPoint> out;
  for (const auto& p : points) {
    const bool near = std::any_of(corridors.begin(), corridors.end(),
                                  [&](const Corridor& c) { return c.project(p.pos).offset <= max_offset; });
    if (near) out.push_back(p);
  }
  return out;
}

/// Groups points by vehicle id (map order = sorted ids, input order within).
inline std::map<std::string, std::vector<RawPoint>> group_by_vehicle(std::span<const RawPoint> points) {
  std::map<std::string, std::vector<RawPoint>> out;
  for (const auto& p : points) out[p.vehicle_id].push_back(p);
  return out;
}

struct SegmentResult {
  std::vector<Trip> trips;
  std::size_t duplicate_timestamps = 0;
  std::size_t dropped_short = 0;  // points in fragments with fewer than 2 fixes
};

/// Splits one vehicle's points wherever the gap between successive fixes is
/// strictly greater than `gap`. Fragments with fewer than 2 points are dropped.
inline SegmentResult segment_trips(std::vector<RawPoint> points, double gap = kDefaultTripGap) {
  SegmentResult out;
  if (points.empty()) return out;
  const std::string vehicle = points.front().vehicle_id;
  for (const auto& p : points)
    if (p.vehicle_id != vehicle) throw std::invalid_argument("segment_trips: points from more than one vehicle");

  std::stable_sort(points.begin(), points.end(), [](const RawPoint& a, const RawPoint& b) { return a.t < b.t; });

  std::vector<RawPoint> current;
  auto flush = [&] {
    if (current.size() >= 2) {
      Trip trip;
      trip.vehicle_id = vehicle;
      trip.trip_id = vehicle + "#" + std::to_string(out.trips.size());
      trip.points = std::move(current);
      out.trips.push_back(std::move(trip));
    } else {
      out.dropped_short += current.size();
    }
    current.clear();
  };

  for (auto& p : points) {
    if (!current.empty()) {
      const double dt = p.t - current.back().t;
      if (dt == 0.0) {
        ++out.duplicate_timestamps;
        continue;
      }
      if (dt > gap) flush();
    }
    current.push_back(std::move(p));
  }
  flush();
  return out;
}

/// Circular mean of headings: east-pointing mean -> eastbound, west-pointing
/// -> westbound. A mean on the north/south axis is ambiguous.
inline Direction infer_direction(std::span<const RawPoint> points) {
  if (points.empty()) throw AmbiguousDirection("infer_direction: no points");
  HeadingSum sum;
  for (const auto& p : points) sum.add(p.heading);
  const double tol = 1e-9 * static_cast<double>(points.size());
  if (std::abs(sum.east) <= tol) throw AmbiguousDirection("infer_direction: mean heading on the north-south axis");
  return sum.east > 0.0 ? Direction::eastbound : Direction::westbound;
}

/// Resamples a trip at every detector whose chainage lies inside the trip's
/// chainage span. Time and speed are linear in chainage between the two
/// bracketing fixes; heading follows the shortest arc. Chainage regressions
/// (GPS jitter) are absorbed by using the running maximum; a regression larger
/// than backward_tolerance * span rejects the trip.
inline DetectorTrajectory interpolate_to_detectors(const Trip& trip, const Corridor& corridor,
                                                   std::span<const VirtualDetector> detectors,
                                                   double backward_tolerance = kDefaultBackwardTolerance) {
  if (!trip.direction) throw std::invalid_argument("interpolate_to_detectors: trip direction not set");
  if (*trip.direction != corridor.direction())
    throw std::invalid_argument("interpolate_to_detectors: trip and corridor directions differ");
  if (trip.points.size() < 2) throw std::invalid_argument("interpolate_to_detectors: trip has fewer than 2 points");

  DetectorTrajectory out;
  out.trip_id = trip.trip_id;
  out.direction = *trip.direction;

  const std::size_t n = trip.points.size();
  std::vector<double> ch(n);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    ch[i] = corridor.project(trip.points[i].pos).chainage;
    lo = std::min(lo, ch[i]);
    hi = std::max(hi, ch[i]);
  }
  const double span = hi - lo;

  // Monotone envelope and largest regression below it.
  std::vector<double> env(n);
  double regression = 0.0;
  env[0] = ch[0];
  for (std::size_t i = 1; i < n; ++i) {
    env[i] = std::max(env[i - 1], ch[i]);
    regression = std::max(regression, env[i] - ch[i]);
  }
  if (span > 0.0 && regression > backward_tolerance * span)
    throw NoisyTrip("trip " + trip.trip_id + " moves backward beyond tolerance");
  if (!(env[n - 1] > env[0])) return out;

  auto first = std::lower_bound(detectors.begin(), detectors.end(), env[0],
                                [](const VirtualDetector& d, double c) { return d.chainage < c; });
  std::size_t j = 1;  // env[j-1] < D <= env[j]
  for (auto it = first; it != detectors.end() && it->chainage <= env[n - 1]; ++it) {
    const double d = it->chainage;
    if (it->direction != out.direction)
      throw std::invalid_argument("interpolate_to_detectors: detector direction differs from trip");
    DetectorPass pass;
    pass.detector_id = it->id;
    if (d == env[0]) {
      const auto& p = trip.points[0];
      pass.pass_time = p.t;
      pass.speed = p.speed;
      pass.heading = normalize_heading(p.heading);
    } else {
      while (env[j] < d) ++j;
      std::size_t i = j - 1;
      while (i > 0 && env[i - 1] == env[i]) --i;  // earliest fix at the envelope level
      // Fixes between i and j sit at or below env[i]; bracket is (i, j).
      const auto& a = trip.points[i];
      const auto& b = trip.points[j];
      const double f = (d - env[i]) / (env[j] - env[i]);
      pass.pass_time = a.t + f * (b.t - a.t);
      pass.speed = a.speed + f * (b.speed - a.speed);
      pass.heading = normalize_heading(a.heading + f * shortest_arc(a.heading, b.heading));
    }
    out.passes.push_back(pass);
  }
  return out;
}

}  // namespace vdet

#pragma once

// Linear referencing on a planar corridor polyline (units: yards) and the
// fixed-spacing virtual detector grid placed along it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "vdet/common.hpp"

namespace vdet {

struct GeoPoint {
  double x = 0.0;  // easting, yd
  double y = 0.0;  // northing, yd

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline double distance(GeoPoint a, GeoPoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Projection {
  double chainage = 0.0;  // yd along the corridor from its first vertex
  double offset = 0.0;    // perpendicular distance to the polyline, yd
};

/// One direction of travel. Vertices are ordered in the travel direction so
/// chainage grows downstream.
class Corridor {
 public:
  Corridor(Direction direction, std::vector<GeoPoint> vertices) : direction_(direction), vertices_(std::move(vertices)) {
    if (vertices_.size() < 2) throw std::invalid_argument("corridor needs at least 2 vertices");
    cum_.reserve(vertices_.size());
    cum_.push_back(0.0);
    for (std::size_t i = 1; i < vertices_.size(); ++i) {
      const double seg = distance(vertices_[i - 1], vertices_[i]);
      if (!std::isfinite(seg)) throw std::invalid_argument("corridor vertex is not finite");
      if (seg == 0.0) throw std::invalid_argument("corridor has consecutive duplicate vertices");
      cum_.push_back(cum_.back() + seg);
    }
  }

  Direction direction() const { return direction_; }
  std::span<const GeoPoint> vertices() const { return vertices_; }
  std::span<const double> cum_chainage() const { return cum_; }
  double length() const { return cum_.back(); }

  /// Point on the polyline at `chainage` (clamped to [0, length]).
  GeoPoint point_at(double chainage) const {
    chainage = std::clamp(chainage, 0.0, length());
    auto it = std::upper_bound(cum_.begin(), cum_.end(), chainage);
    std::size_t seg = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
    if (seg >= vertices_.size() - 1) seg = vertices_.size() - 2;
    const double len = cum_[seg + 1] - cum_[seg];
    const double t = (chainage - cum_[seg]) / len;
    const GeoPoint a = vertices_[seg], b = vertices_[seg + 1];
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
  }

  /// Closest point over all segments; ties keep the lowest chainage.
  Projection project(GeoPoint p) const {
    Projection best{0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i + 1 < vertices_.size(); ++i) {
      const GeoPoint a = vertices_[i], b = vertices_[i + 1];
      const double dx = b.x - a.x, dy = b.y - a.y;
      const double len2 = dx * dx + dy * dy;
      double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
      t = std::clamp(t, 0.0, 1.0);
      const double qx = a.x + t * dx, qy = a.y + t * dy;
      const double d = std::hypot(p.x - qx, p.y - qy);
      if (d < best.offset) best = {cum_[i] + t * (cum_[i + 1] - cum_[i]), d};
    }
    return best;
  }

 private:
  Direction direction_;
  std::vector<GeoPoint> vertices_;
  std::vector<double> cum_;
};

inline Corridor build_corridor(Direction direction, std::vector<GeoPoint> vertices) {
  return Corridor(direction, std::move(vertices));
}

inline Projection project_point(const Corridor& corridor, GeoPoint p) { return corridor.project(p); }

struct VirtualDetector {
  int id = 0;
  Direction direction = Direction::eastbound;
  double chainage = 0.0;
  GeoPoint position;
};

inline constexpr double kDefaultDetectorSpacing = 110.0;  // yd, 1/16 mile

/// Detectors at 0, spacing, 2*spacing, ... <= corridor length.
inline std::vector<VirtualDetector> place_detectors(const Corridor& corridor, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw std::invalid_argument("detector spacing must be positive");
  const double length = corridor.length();
  // Guard against L/spacing landing a hair under an integer.
  const auto count = static_cast<std::size_t>(std::floor(length / spacing * (1.0 + 1e-12))) + 1;
  std::vector<VirtualDetector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double ch = std::min(static_cast<double>(i) * spacing, length);
    out.push_back({static_cast<int>(i), corridor.direction(), ch, corridor.point_at(ch)});
  }
  return out;
}

/// Detector with minimum |chainage - query|; ties go to the lower id.
/// Detectors must be sorted by chainage (as produced by place_detectors).
inline const VirtualDetector& nearest_detector(std::span<const VirtualDetector> detectors, double chainage) {
  if (detectors.empty()) throw std::invalid_argument("nearest_detector: empty detector list");
  auto it = std::lower_bound(detectors.begin(), detectors.end(), chainage,
                             [](const VirtualDetector& d, double c) { return d.chainage < c; });
  if (it == detectors.end()) return detectors.back();
  if (it == detectors.begin()) return *it;
  const auto prev = std::prev(it);
  return (chainage - prev->chainage) <= (it->chainage - chainage) ? *prev : *it;
}

/// A direction's corridor together with its detector grid.
struct DetectorGrid {
  Corridor corridor;
  std::vector<VirtualDetector> detectors;
  double spacing;

  DetectorGrid(Corridor c, double spacing_yd)
      : corridor(std::move(c)), detectors(place_detectors(corridor, spacing_yd)), spacing(spacing_yd) {}

  Direction direction() const { return corridor.direction(); }
};

}  // namespace vdet

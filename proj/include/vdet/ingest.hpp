#pragma once

// WGS84 latitude/longitude <-> local planar yards. Equirectangular about a
// reference point using the ellipsoid's meridional (M) and prime-vertical (N)
// radii of curvature at the reference latitude.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "vdet/geo.hpp"

namespace vdet {

inline constexpr double kWgs84A = 6378137.0;
inline constexpr double kWgs84F = 1.0 / 298.257223563;
inline constexpr double kMetersPerYard = 0.9144;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct OutOfBounds : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class LocalProjection {
 public:
  /// Points farther than max_radius_yd from the reference are rejected.
  explicit LocalProjection(LatLon origin, double max_radius_yd = 500.0 * kYardsPerMile)
      : origin_(origin), max_radius_(max_radius_yd) {
    check_latlon(origin);
    if (std::abs(origin.lat) > 80.0) throw OutOfBounds("projection origin latitude beyond +-80 degrees");
    const double e2 = kWgs84F * (2.0 - kWgs84F);
    const double s = std::sin(deg2rad(origin.lat));
    const double w = 1.0 - e2 * s * s;
    meridional_ = kWgs84A * (1.0 - e2) / std::pow(w, 1.5);
    prime_vertical_ = kWgs84A / std::sqrt(w);
    yd_per_deg_lat_ = deg2rad(1.0) * meridional_ / kMetersPerYard;
    yd_per_deg_lon_ = deg2rad(1.0) * prime_vertical_ * std::cos(deg2rad(origin.lat)) / kMetersPerYard;
  }

  static void check_latlon(LatLon p) {
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || std::abs(p.lat) > 90.0 || std::abs(p.lon) > 180.0)
      throw OutOfBounds("coordinate (" + std::to_string(p.lat) + ", " + std::to_string(p.lon) + ") is not a valid WGS84 position");
  }

  GeoPoint forward(LatLon p) const {
    check_latlon(p);
    double dlon = p.lon - origin_.lon;
    if (dlon > 180.0) dlon -= 360.0;
    if (dlon < -180.0) dlon += 360.0;
    const GeoPoint g{dlon * yd_per_deg_lon_, (p.lat - origin_.lat) * yd_per_deg_lat_};
    if (std::hypot(g.x, g.y) > max_radius_)
      throw OutOfBounds("coordinate (" + std::to_string(p.lat) + ", " + std::to_string(p.lon) +
                        ") lies too far from the projection origin");
    return g;
  }

  LatLon inverse(GeoPoint g) const {
    LatLon p{origin_.lat + g.y / yd_per_deg_lat_, origin_.lon + g.x / yd_per_deg_lon_};
    if (p.lon > 180.0) p.lon -= 360.0;
    if (p.lon < -180.0) p.lon += 360.0;
    return p;
  }

  LatLon origin() const { return origin_; }
  double yards_per_degree_lat() const { return yd_per_deg_lat_; }
  double yards_per_degree_lon() const { return yd_per_deg_lon_; }

  nlohmann::ordered_json to_json() const {
    return {{"method", "equirectangular_wgs84"},
            {"origin_lat", origin_.lat},
            {"origin_lon", origin_.lon},
            {"meridional_radius_m", meridional_},
            {"prime_vertical_radius_m", prime_vertical_},
            {"yards_per_degree_lat", yd_per_deg_lat_},
            {"yards_per_degree_lon", yd_per_deg_lon_}};
  }

 private:
  LatLon origin_;
  double max_radius_;
  double meridional_ = 0.0, prime_vertical_ = 0.0;
  double yd_per_deg_lat_ = 0.0, yd_per_deg_lon_ = 0.0;
};

/// Mean of the given vertices; the reference point for a corridor's plane.
inline LatLon centroid(std::span<const LatLon> pts) {
  if (pts.empty()) throw std::invalid_argument("centroid of an empty point set");
  LatLon c;
  for (const auto& p : pts) {
    c.lat += p.lat;
    c.lon += p.lon;
  }
  c.lat /= static_cast<double>(pts.size());
  c.lon /= static_cast<double>(pts.size());
  return c;
}

}  // namespace vdet

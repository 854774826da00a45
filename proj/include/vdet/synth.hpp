#pragma once

// Seeded synthetic scenario: a straight two-direction corridor, Poisson
// vehicle departures with GPS fixes at jittered intervals, lane-closing
// incidents that slow traffic in an upstream queue, hourly rain flags and the
// ground-truth affected/normal labels implied by the window rules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdet/common.hpp"
#include "vdet/detector_db.hpp"
#include "vdet/features.hpp"
#include "vdet/geo.hpp"
#include "vdet/incident.hpp"
#include "vdet/ingest.hpp"
#include "vdet/trajectory.hpp"

namespace vdet {

struct ScenarioConfig {
  double corridor_length_mi = 30.0;
  double vertex_spacing_mi = 5.0;
  double direction_gap_yd = 20.0;  // EB and WB centrelines
  LatLon origin{30.45, -91.15};

  int n_vehicles = 4800;
  double days = 3.0;
  double start_epoch = 1630040400.0;  // 2021-08-27 00:00 local (UTC-5)
  double tz_offset_hours = -5.0;
  double westbound_share = 0.5;

  double fix_interval = 12.0;  // mean s; drawn uniformly from [fix_interval/3, 5*fix_interval/3], capped at 30
  double base_speed_mean = 65.0;
  double base_speed_std = 5.0;
  double speed_noise = 0.5;  // mph, fix-level measurement noise
  double peak_slowdown = 4.0;
  double rain_slowdown = 5.0;
  double trip_length_mean_mi = 5.0;
  double trip_length_std_mi = 1.5;
  double lateral_noise_yd = 3.0;
  double heading_noise_deg = 1.5;
  double queue_heading_noise_deg = 6.0;

  int n_incidents = 256;
  std::map<IncidentKind, double> kind_mix{{IncidentKind::stalled_vehicle, 200.0 / 256.0},
                                          {IncidentKind::accident, 48.0 / 256.0},
                                          {IncidentKind::other, 8.0 / 256.0}};
  std::map<Direction, double> direction_mix{{Direction::westbound, 153.0 / 256.0}, {Direction::eastbound, 103.0 / 256.0}};
  std::map<int, double> lanes_mix{{1, 242.0 / 256.0}, {2, 14.0 / 256.0}};
  double duration_median_min = 35.0;
  double duration_sigma = 0.6;

  double speed_drop = 0.5;
  double queue_length_yd = 880.0;
  double queue_clear_lag_s = 600.0;

  double rain_fraction = 0.11;
  double dwell_fraction = 0.05;
  double lead_in_fraction = 0.1;

  double detector_spacing = kDefaultDetectorSpacing;
  LabelConfig labels{};
  std::uint64_t seed = 1;
};

/// Desk-scale configuration tuned toward the reference corpus shape.
inline ScenarioConfig paper_preset(std::uint64_t seed = 1) {
  ScenarioConfig c;
  c.seed = seed;
  return c;
}

struct GroundTruth {
  std::string trip_id;
  std::string event_id;
  Label label = Label::normal;
};

struct ScenarioBundle {
  ScenarioConfig config;
  std::vector<Corridor> corridors;  // EB, WB
  std::vector<RawPoint> points;     // planar, vehicle order then time
  std::vector<Incident> incidents;
  WeatherFlags weather;
  std::vector<GroundTruth> ground_truth;  // sorted by (event_id, trip_id)
  std::size_t trips = 0;                  // trips the generator intended (>= 2 on-corridor fixes)
};

/// Largest-remainder apportionment of n items; ties go to earlier keys.
template <class K>
std::vector<std::pair<K, int>> apportion(int n, const std::map<K, double>& shares) {
  double total = 0.0;
  for (const auto& [k, s] : shares) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("scenario: proportions must lie in [0, 1]");
    total += s;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("scenario: proportions must sum to 1");
  std::vector<std::pair<K, int>> out;
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (const auto& [k, s] : shares) {
    const double q = s * n;
    const int f = static_cast<int>(std::floor(q + 1e-9));
    out.push_back({k, f});
    rem.push_back({q - f, out.size() - 1});
    used += f;
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < n; ++i, ++used) out[rem[i % rem.size()].second].second += 1;
  return out;
}

inline void validate(const ScenarioConfig& c) {
  if (c.n_vehicles < 1) throw std::invalid_argument("scenario: n_vehicles must be >= 1");
  if (c.n_incidents < 0) throw std::invalid_argument("scenario: n_incidents must be >= 0");
  if (!(c.corridor_length_mi > 0.0) || !(c.vertex_spacing_mi > 0.0)) throw std::invalid_argument("scenario: corridor lengths must be positive");
  if (!(c.days > 0.0)) throw std::invalid_argument("scenario: days must be positive");
  if (!(c.fix_interval > 0.0 && c.fix_interval < 30.0)) throw std::invalid_argument("scenario: fix_interval mean must be in (0, 30) s");
  if (!(c.speed_drop >= 0.0 && c.speed_drop <= 1.0)) throw std::invalid_argument("scenario: speed_drop must be in [0, 1]");
  for (double p : {c.rain_fraction, c.dwell_fraction, c.lead_in_fraction, c.westbound_share})
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("scenario: fractions must be in [0, 1]");
  if (!(c.base_speed_mean > 0.0) || c.base_speed_std < 0.0) throw std::invalid_argument("scenario: invalid base speed");
  if (!(c.trip_length_mean_mi > 0.0)) throw std::invalid_argument("scenario: trip length must be positive");
  if (c.queue_length_yd < 0.0) throw std::invalid_argument("scenario: queue_length must be >= 0");
}

inline std::vector<Corridor> scenario_corridors(const ScenarioConfig& c) {
  const double L = c.corridor_length_mi * kYardsPerMile;
  const int segs = std::max(1, static_cast<int>(std::ceil(c.corridor_length_mi / c.vertex_spacing_mi - 1e-9)));
  std::vector<GeoPoint> eb, wb;
  for (int i = 0; i <= segs; ++i) {
    const double x = -L / 2.0 + L * i / segs;
    eb.push_back({x, -c.direction_gap_yd / 2.0});
    wb.push_back({-x, c.direction_gap_yd / 2.0});
  }
  return {Corridor(Direction::eastbound, eb), Corridor(Direction::westbound, wb)};
}

namespace detail {

inline double normal(Rng& rng, double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng); }

struct QueueZone {
  Direction direction;
  double lo, hi;        // chainage
  double start, until;  // active time
};

/// Noise-free state of one emitted fix, kept for ground truth.
struct TrueFix {
  double t, s, speed, heading;
  bool on_corridor;
};

struct VehicleOutput {
  std::vector<RawPoint> points;
  std::vector<std::vector<TrueFix>> trips;  // on-corridor fixes split at dwells
  Direction direction = Direction::eastbound;
};

inline VehicleOutput simulate_vehicle(const ScenarioConfig& c, const std::vector<Corridor>& corridors, std::size_t v,
                                      double depart, const std::vector<QueueZone>& zones, const WeatherFlags& weather) {
  Rng rng(derive_seed(c.seed, 1, v));
  VehicleOutput out;
  out.direction = uniform01(rng) < c.westbound_share ? Direction::westbound : Direction::eastbound;
  const Corridor& cor = corridors[out.direction == Direction::eastbound ? 0 : 1];
  const double L = cor.length();
  const double course = out.direction == Direction::eastbound ? 90.0 : 270.0;
  const std::string vid = "V" + std::to_string(100000 + v);

  double len = std::clamp(normal(rng, c.trip_length_mean_mi, c.trip_length_std_mi), 1.5, 12.0) * kYardsPerMile;
  len = std::min(len, L);
  const double s0 = uniform01(rng) * (L - len);
  const double s_end = s0 + len;
  const double vb = std::clamp(normal(rng, c.base_speed_mean, c.base_speed_std), 45.0, 80.0);
  const bool dwell = uniform01(rng) < c.dwell_fraction;
  const double dwell_at = s0 + len * (0.3 + 0.4 * uniform01(rng));
  const double dwell_for = 960.0 + std::floor(840.0 * uniform01(rng));
  const bool lead_in = uniform01(rng) < c.lead_in_fraction;

  auto fix_gap = [&] {
    const double lo = c.fix_interval / 3.0, hi = std::min(30.0, 5.0 * c.fix_interval / 3.0);
    return std::max(1.0, std::round(lo + (hi - lo) * uniform01(rng)));
  };
  auto emit = [&](double t, double s, double lateral, double speed, double heading, bool on) {
    const GeoPoint base = cor.point_at(s);
    // Left normal of the travel direction (straight corridor: constant).
    const auto verts = cor.vertices();
    const double dx = verts[1].x - verts[0].x, dy = verts[1].y - verts[0].y, n = std::hypot(dx, dy);
    const GeoPoint p{base.x - dy / n * lateral, base.y + dx / n * lateral};
    out.points.push_back({vid, t, p, std::max(0.0, speed), normalize_heading(heading)});
    if (on) out.trips.back().push_back({t, s, std::max(0.0, speed), normalize_heading(heading), true});
  };

  double t = std::floor(depart);
  if (lead_in) {
    const double side = uniform01(rng) < 0.5 ? 1.0 : -1.0;
    for (int k = 2; k >= 1; --k) {
      const double tk = t - 12.0 * k;
      const GeoPoint base = cor.point_at(s0);
      const auto verts = cor.vertices();
      const double dx = verts[1].x - verts[0].x, dy = verts[1].y - verts[0].y, n = std::hypot(dx, dy);
      const double lat = side * (150.0 * k + 100.0);
      out.points.push_back({vid, tk, {base.x - dy / n * lat, base.y + dx / n * lat}, 25.0, normalize_heading(course + side * 45.0)});
    }
  }

  out.trips.emplace_back();
  double s = s0, fluct = 0.0, next_fix = t;
  bool dwelled = false;
  bool in_queue = false;
  for (int guard = 0; guard < 200000; ++guard) {
    // Current speed.
    in_queue = false;
    for (const auto& z : zones)
      if (z.direction == out.direction && t >= z.start && t <= z.until && s >= z.lo && s <= z.hi) {
        in_queue = true;
        break;
      }
    double speed = vb + fluct;
    if (classify_period(t, c.tz_offset_hours) == Period::peak) speed -= c.peak_slowdown;
    if (weather.rain_at(t).value_or(false)) speed -= c.rain_slowdown;
    if (in_queue) speed *= 1.0 - c.speed_drop * (0.8 + 0.4 * uniform01(rng));
    speed = std::max(speed, 3.0);

    const bool last = s >= s_end;
    if (t >= next_fix || last) {
      const double hn = in_queue ? c.queue_heading_noise_deg : c.heading_noise_deg;
      const double lateral = std::clamp(normal(rng, 0.0, c.lateral_noise_yd), -15.0, 15.0);
      emit(t, std::min(s, s_end), lateral, speed + normal(rng, 0.0, c.speed_noise), course + normal(rng, 0.0, hn), true);
      next_fix = t + fix_gap();
    }
    if (last) break;
    if (dwell && !dwelled && s >= dwell_at) {
      dwelled = true;
      if (!out.trips.back().empty() && out.trips.back().back().t != t) {
        const double lateral = std::clamp(normal(rng, 0.0, c.lateral_noise_yd), -15.0, 15.0);
        emit(t, s, lateral, speed, course, true);
      }
      t += dwell_for;
      next_fix = t;
      out.trips.emplace_back();
      continue;
    }
    s += mph_to_yps(speed);
    t += 1.0;
    fluct = 0.98 * fluct + normal(rng, 0.0, 0.4);
  }
  std::erase_if(out.trips, [](const auto& tr) { return tr.size() < 2; });
  return out;
}

}  // namespace detail

/// Pass time at chainage d by linear interpolation between bracketing fixes.
inline std::optional<double> ground_truth_pass_time(const std::vector<detail::TrueFix>& fixes, double d) {
  if (fixes.size() < 2 || d < fixes.front().s || d > fixes.back().s) return std::nullopt;
  if (d == fixes.front().s) return fixes.front().t;
  for (std::size_t j = 1; j < fixes.size(); ++j)
    if (fixes[j].s >= d) {
      const auto& a = fixes[j - 1];
      const auto& b = fixes[j];
      return a.t + (d - a.s) / (b.s - a.s) * (b.t - a.t);
    }
  return std::nullopt;
}

inline ScenarioBundle generate_scenario(const ScenarioConfig& cfg, unsigned threads = 1) {
  validate(cfg);
  ScenarioBundle b;
  b.config = cfg;
  b.corridors = scenario_corridors(cfg);
  const double T0 = cfg.start_epoch, T1 = cfg.start_epoch + cfg.days * 86400.0;

  // Weather: one-hour blocks.
  {
    Rng rng(derive_seed(cfg.seed, 3));
    std::vector<WeatherFlags::Interval> iv;
    for (double t = T0; t < T1; t += 3600.0) iv.push_back({t, std::min(t + 3600.0, T1), uniform01(rng) < cfg.rain_fraction});
    b.weather = WeatherFlags(std::move(iv));
  }

  // Incidents with exactly apportioned marginals.
  {
    Rng rng(derive_seed(cfg.seed, 2));
    const int n = cfg.n_incidents;
    std::vector<IncidentKind> kinds;
    for (auto [k, m] : apportion(n, cfg.kind_mix)) kinds.insert(kinds.end(), static_cast<std::size_t>(m), k);
    std::vector<Direction> dirs;
    for (auto [d, m] : apportion(n, cfg.direction_mix)) dirs.insert(dirs.end(), static_cast<std::size_t>(m), d);
    std::vector<int> lanes;
    for (auto [l, m] : apportion(n, cfg.lanes_mix)) {
      if (l < 1) throw std::invalid_argument("scenario: lanes_closed keys must be >= 1");
      lanes.insert(lanes.end(), static_cast<std::size_t>(m), l);
    }
    std::shuffle(kinds.begin(), kinds.end(), rng);
    std::shuffle(dirs.begin(), dirs.end(), rng);
    std::shuffle(lanes.begin(), lanes.end(), rng);
    for (int i = 0; i < n; ++i) {
      Incident inc;
      char id[16];
      std::snprintf(id, sizeof id, "INC%04d", i + 1);
      inc.event_id = id;
      inc.kind = kinds[static_cast<std::size_t>(i)];
      inc.direction = dirs[static_cast<std::size_t>(i)];
      inc.lanes_closed = lanes[static_cast<std::size_t>(i)];
      const double lo = T0 + cfg.labels.pre_window, hi = T1 - cfg.labels.post_window - 3600.0;
      inc.start_time = std::floor(lo + (std::max(hi, lo) - lo) * uniform01(rng));
      const double dur = std::clamp(cfg.duration_median_min * std::exp(cfg.duration_sigma * detail::normal(rng, 0.0, 1.0)), 5.0, 240.0);
      inc.clear_time = inc.start_time + std::round(dur * 60.0);
      const Corridor& cor = b.corridors[inc.direction == Direction::eastbound ? 0 : 1];
      const double ch = cor.length() * (0.02 + 0.96 * uniform01(rng));
      inc.pos = cor.point_at(ch);
      b.incidents.push_back(inc);
    }
  }

  std::vector<detail::QueueZone> zones;
  if (cfg.speed_drop > 0.0)
    for (const auto& inc : b.incidents) {
      const Corridor& cor = b.corridors[inc.direction == Direction::eastbound ? 0 : 1];
      const double ch = cor.project(inc.pos).chainage;
      zones.push_back({inc.direction, ch - cfg.queue_length_yd, ch, inc.start_time, inc.clear_time + cfg.queue_clear_lag_s});
    }

  // Poisson departures: uniform order statistics over the window.
  std::vector<double> departs(static_cast<std::size_t>(cfg.n_vehicles));
  {
    Rng rng(derive_seed(cfg.seed, 4));
    for (auto& d : departs) d = T0 + uniform01(rng) * (T1 - T0);
    std::sort(departs.begin(), departs.end());
  }

  std::vector<detail::VehicleOutput> veh(departs.size());
  parallel_for(departs.size(), threads, [&](std::size_t v) {
    veh[v] = detail::simulate_vehicle(cfg, b.corridors, v, departs[v], zones, b.weather);
  });

  struct TrueTrip {
    std::string id;
    Direction dir;
    const std::vector<detail::TrueFix>* fixes;
  };
  std::vector<TrueTrip> trips;
  for (std::size_t v = 0; v < veh.size(); ++v) {
    b.points.insert(b.points.end(), veh[v].points.begin(), veh[v].points.end());
    for (std::size_t k = 0; k < veh[v].trips.size(); ++k)
      trips.push_back({"V" + std::to_string(100000 + v) + "#" + std::to_string(k), veh[v].direction, &veh[v].trips[k]});
  }
  b.trips = trips.size();

  // Ground truth from the generator's own fixes and the window rules.
  const double sp = cfg.detector_spacing;
  for (const auto& inc : b.incidents) {
    const Corridor& cor = b.corridors[inc.direction == Direction::eastbound ? 0 : 1];
    const auto dets = place_detectors(cor, sp);
    const int E = nearest_detector(dets, cor.project(inc.pos).chainage).id;
    const double dE = dets[static_cast<std::size_t>(E)].chainage;
    for (const auto& tr : trips) {
      if (tr.dir != inc.direction) continue;
      const auto pt = ground_truth_pass_time(*tr.fixes, dE);
      if (!pt) continue;
      const auto verdict = classify_window(*pt, inc.start_time, cfg.labels);
      if (verdict == WindowVerdict::outside) continue;
      const auto first = std::lower_bound(dets.begin(), dets.end(), tr.fixes->front().s,
                                          [](const VirtualDetector& d, double c) { return d.chainage < c; });
      if (E - cfg.labels.upstream_required < first->id) continue;
      b.ground_truth.push_back({tr.id, inc.event_id, verdict == WindowVerdict::affected ? Label::affected : Label::normal});
    }
  }
  std::sort(b.ground_truth.begin(), b.ground_truth.end(),
            [](const auto& x, const auto& y) { return std::tie(x.event_id, x.trip_id) < std::tie(y.event_id, y.trip_id); });
  return b;
}

inline nlohmann::ordered_json to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["corridor_length_mi"] = c.corridor_length_mi;
  j["vertex_spacing_mi"] = c.vertex_spacing_mi;
  j["origin_lat"] = c.origin.lat;
  j["origin_lon"] = c.origin.lon;
  j["n_vehicles"] = c.n_vehicles;
  j["days"] = c.days;
  j["start_epoch"] = c.start_epoch;
  j["tz_offset_hours"] = c.tz_offset_hours;
  j["fix_interval"] = c.fix_interval;
  j["base_speed_mean"] = c.base_speed_mean;
  j["base_speed_std"] = c.base_speed_std;
  j["trip_length_mean_mi"] = c.trip_length_mean_mi;
  j["n_incidents"] = c.n_incidents;
  auto& km = j["kind_mix"];
  for (const auto& [k, v] : c.kind_mix) km[std::string(to_string(k))] = v;
  auto& dm = j["direction_mix"];
  for (const auto& [k, v] : c.direction_mix) dm[std::string(to_string(k))] = v;
  auto& lm = j["lanes_mix"];
  for (const auto& [k, v] : c.lanes_mix) lm[std::to_string(k)] = v;
  j["speed_drop"] = c.speed_drop;
  j["queue_length_yd"] = c.queue_length_yd;
  j["queue_clear_lag_s"] = c.queue_clear_lag_s;
  j["rain_fraction"] = c.rain_fraction;
  j["dwell_fraction"] = c.dwell_fraction;
  j["lead_in_fraction"] = c.lead_in_fraction;
  j["seed"] = c.seed;
  return j;
}

}  // namespace vdet

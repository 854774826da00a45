#pragma once

// Readers and writers for every file exchanged between pipeline stages.
// Geographic inputs (lat/lon columns) are projected through a LocalProjection;
// planar inputs (x_yd/y_yd columns) are taken as is.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vdet/detector_db.hpp"
#include "vdet/features.hpp"
#include "vdet/geo.hpp"
#include "vdet/incident.hpp"
#include "vdet/ingest.hpp"
#include "vdet/io/csv.hpp"
#include "vdet/metrics.hpp"
#include "vdet/synth.hpp"
#include "vdet/trajectory.hpp"

namespace vdet::io {

namespace detail {

inline Direction direction_field(const CsvReader& r, std::size_t col) {
  try {
    return parse_direction(r.field(col));
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
}

/// Position columns of a file: geographic or planar.
struct PositionColumns {
  bool geographic = false;
  std::size_t a = 0, b = 0;  // lat,lon or x,y

  explicit PositionColumns(const CsvReader& r) {
    if (r.has("lat") && r.has("lon")) {
      geographic = true;
      a = r.column("lat");
      b = r.column("lon");
    } else if (r.has("x_yd") && r.has("y_yd")) {
      a = r.column("x_yd");
      b = r.column("y_yd");
    } else {
      r.fail("expected lat,lon or x_yd,y_yd columns");
    }
  }

  GeoPoint read(const CsvReader& r, const LocalProjection* proj) const {
    if (!geographic) return {r.number(a), r.number(b)};
    if (!proj) r.fail("geographic coordinates need a projection (corridor file in lat/lon)");
    try {
      return proj->forward({r.number(a), r.number(b)});
    } catch (const OutOfBounds& e) {
      r.fail(e.what());
    }
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Corridor

struct CorridorFile {
  bool geographic = false;
  std::map<Direction, std::vector<LatLon>> latlon;
  std::map<Direction, std::vector<GeoPoint>> planar;

  /// Projection about the mean of all geographic vertices.
  std::optional<LocalProjection> projection() const {
    if (!geographic) return std::nullopt;
    std::vector<LatLon> all;
    for (const auto& [d, v] : latlon) all.insert(all.end(), v.begin(), v.end());
    return LocalProjection(centroid(all));
  }

  std::vector<Corridor> corridors(const LocalProjection* proj) const {
    std::vector<Corridor> out;
    if (geographic) {
      for (const auto& [d, pts] : latlon) {
        std::vector<GeoPoint> v;
        for (const auto& p : pts) v.push_back(proj->forward(p));
        out.emplace_back(d, std::move(v));
      }
    } else {
      for (const auto& [d, pts] : planar) out.emplace_back(d, pts);
    }
    return out;
  }
};

inline CorridorFile read_corridor(const std::string& path) {
  CsvReader r(path);
  const auto cd = r.column("direction"), cs = r.column("seq");
  const detail::PositionColumns pos(r);
  std::map<Direction, std::map<long long, std::pair<double, double>>> rows;
  while (r.next()) {
    const Direction d = detail::direction_field(r, cd);
    const long long seq = r.integer(cs);
    if (!rows[d].emplace(seq, std::pair{r.number(pos.a), r.number(pos.b)}).second)
      r.fail("duplicate seq " + std::to_string(seq) + " for " + std::string(to_string(d)));
  }
  if (rows.empty()) throw ParseError(path + ": no corridor vertices");
  CorridorFile f;
  f.geographic = pos.geographic;
  for (const auto& [d, m] : rows)
    for (const auto& [seq, ab] : m) {
      if (f.geographic) {
        LocalProjection::check_latlon({ab.first, ab.second});
        f.latlon[d].push_back({ab.first, ab.second});
      } else {
        f.planar[d].push_back({ab.first, ab.second});
      }
    }
  return f;
}

inline void write_corridor(const std::string& path, std::span<const Corridor> corridors, const LocalProjection* proj) {
  CsvWriter w(path, proj ? std::initializer_list<std::string_view>{"direction", "seq", "lat", "lon"}
                         : std::initializer_list<std::string_view>{"direction", "seq", "x_yd", "y_yd"});
  for (const auto& c : corridors) {
    const auto v = c.vertices();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (proj) {
        const auto ll = proj->inverse(v[i]);
        w.row(to_string(c.direction()), i, ll.lat, ll.lon);
      } else {
        w.row(to_string(c.direction()), i, v[i].x, v[i].y);
      }
    }
  }
  w.close();
}

inline void write_detector_grid(const std::string& path, std::span<const DetectorGrid> grids) {
  CsvWriter w(path, {"detector_id", "direction", "chainage_yd", "x_yd", "y_yd"});
  for (const auto& g : grids)
    for (const auto& d : g.detectors) w.row(d.id, to_string(d.direction), d.chainage, d.position.x, d.position.y);
  w.close();
}

// ---------------------------------------------------------------------------
// Raw trajectories

inline std::vector<RawPoint> read_trajectories(const std::string& path, const LocalProjection* proj) {
  CsvReader r(path);
  const auto cv = r.column("vehicle_id"), ct = r.column("timestamp"), csp = r.column("speed_mph"), ch = r.column("heading_deg");
  const detail::PositionColumns pos(r);
  std::vector<RawPoint> out;
  while (r.next()) {
    RawPoint p;
    p.vehicle_id = r.str(cv);
    if (p.vehicle_id.empty()) r.fail("empty vehicle_id");
    p.t = r.timestamp(ct);
    p.pos = pos.read(r, proj);
    p.speed = r.number(csp);
    p.heading = r.number(ch);
    if (p.speed < 0.0) r.fail("negative speed");
    if (p.heading < 0.0 || p.heading >= 360.0) r.fail("heading outside [0, 360)");
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_trajectories(const std::string& path, std::span<const RawPoint> points, const LocalProjection* proj) {
  CsvWriter w(path, proj ? std::initializer_list<std::string_view>{"vehicle_id", "timestamp", "lat", "lon", "speed_mph", "heading_deg"}
                         : std::initializer_list<std::string_view>{"vehicle_id", "timestamp", "x_yd", "y_yd", "speed_mph", "heading_deg"});
  for (const auto& p : points) {
    if (proj) {
      const auto ll = proj->inverse(p.pos);
      w.row(p.vehicle_id, p.t, ll.lat, ll.lon, p.speed, p.heading);
    } else {
      w.row(p.vehicle_id, p.t, p.pos.x, p.pos.y, p.speed, p.heading);
    }
  }
  w.close();
}

// ---------------------------------------------------------------------------
// Incidents

inline std::vector<Incident> read_incidents(const std::string& path, const LocalProjection* proj) {
  CsvReader r(path);
  const auto ce = r.column("event_id"), cs = r.column("start_time"), cc = r.column("clear_time"), cd = r.column("direction"),
             cl = r.column("lanes_closed"), ck = r.column("kind");
  const detail::PositionColumns pos(r);
  std::vector<Incident> out;
  std::set<std::string> ids;
  while (r.next()) {
    Incident inc;
    inc.event_id = r.str(ce);
    if (!ids.insert(inc.event_id).second) r.fail("duplicate event_id " + inc.event_id);
    inc.start_time = r.timestamp(cs);
    inc.clear_time = r.timestamp(cc);
    inc.pos = pos.read(r, proj);
    inc.direction = detail::direction_field(r, cd);
    inc.lanes_closed = static_cast<int>(r.integer(cl));
    try {
      inc.kind = parse_incident_kind(r.field(ck));
      validate(inc);
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
    out.push_back(std::move(inc));
  }
  return out;
}

inline void write_incidents(const std::string& path, std::span<const Incident> incidents, const LocalProjection* proj) {
  CsvWriter w(path, proj ? std::initializer_list<std::string_view>{"event_id", "start_time", "clear_time", "lat", "lon", "direction",
                                                                    "lanes_closed", "kind"}
                         : std::initializer_list<std::string_view>{"event_id", "start_time", "clear_time", "x_yd", "y_yd",
                                                                    "direction", "lanes_closed", "kind"});
  for (const auto& i : incidents) {
    double a = i.pos.x, b = i.pos.y;
    if (proj) {
      const auto ll = proj->inverse(i.pos);
      a = ll.lat;
      b = ll.lon;
    }
    w.row(i.event_id, i.start_time, i.clear_time, a, b, to_string(i.direction), i.lanes_closed, to_string(i.kind));
  }
  w.close();
}

// ---------------------------------------------------------------------------
// Weather

inline WeatherFlags read_weather(const std::string& path) {
  CsvReader r(path);
  const auto cs = r.column("start_time"), ce = r.column("end_time"), cr = r.column("rain");
  std::vector<WeatherFlags::Interval> iv;
  while (r.next()) {
    const auto rain = r.integer(cr);
    if (rain != 0 && rain != 1) r.fail("rain must be 0 or 1");
    iv.push_back({r.timestamp(cs), r.timestamp(ce), rain == 1});
  }
  try {
    return WeatherFlags(std::move(iv));
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_weather(const std::string& path, const WeatherFlags& w) {
  CsvWriter out(path, {"start_time", "end_time", "rain"});
  for (const auto& iv : w.intervals()) out.row(iv.start, iv.end, iv.rain ? 1 : 0);
  out.close();
}

// ---------------------------------------------------------------------------
// Detector trajectories (one file per direction)

inline void write_detector_trajectories(const std::string& path, std::span<const DetectorTrajectory> trajs) {
  CsvWriter w(path, {"trip_id", "detector_id", "pass_time", "speed_mph", "heading_deg"});
  for (const auto& t : trajs)
    for (const auto& p : t.passes) w.row(t.trip_id, p.detector_id, p.pass_time, p.speed, p.heading);
  w.close();
}

inline std::vector<DetectorTrajectory> read_detector_trajectories(const std::string& path, Direction direction) {
  CsvReader r(path);
  const auto ct = r.column("trip_id"), cd = r.column("detector_id"), cp = r.column("pass_time"), cs = r.column("speed_mph"),
             ch = r.column("heading_deg");
  std::vector<DetectorTrajectory> out;
  while (r.next()) {
    const std::string id = r.str(ct);
    if (out.empty() || out.back().trip_id != id) {
      out.push_back({id, direction, {}});
    }
    auto& t = out.back();
    const DetectorPass p{static_cast<int>(r.integer(cd)), r.timestamp(cp), r.number(cs), r.number(ch)};
    if (!t.passes.empty() && p.detector_id != t.passes.back().detector_id + 1)
      r.fail("detector ids of trip " + id + " are not contiguous");
    t.passes.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detector database

inline void write_detector_db(const std::string& path, std::span<const DetectorDB> dbs) {
  CsvWriter w(path, {"direction", "detector_id", "period", "count", "mean_speed", "std_speed", "mean_heading"});
  for (const auto& db : dbs)
    for (const auto& [key, s] : db.cells())
      w.row(to_string(db.direction()), s.detector_id, to_string(s.period), s.count, s.mean_speed,
            s.std_speed ? fmt(*s.std_speed) : std::string(), s.mean_heading);
  w.close();
}

inline std::map<Direction, DetectorDB> read_detector_db(const std::string& path) {
  CsvReader r(path);
  const auto cd = r.column("direction"), ci = r.column("detector_id"), cp = r.column("period"), cc = r.column("count"),
             cm = r.column("mean_speed"), cs = r.column("std_speed"), ch = r.column("mean_heading");
  std::map<Direction, std::map<DetectorDB::Key, DetectorStats>> cells;
  while (r.next()) {
    DetectorStats s;
    const Direction d = detail::direction_field(r, cd);
    s.detector_id = static_cast<int>(r.integer(ci));
    try {
      s.period = parse_period(r.field(cp));
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
    const auto count = r.integer(cc);
    if (count < 0) r.fail("negative count");
    s.count = static_cast<std::size_t>(count);
    s.mean_speed = r.number(cm);
    if (!r.field(cs).empty()) s.std_speed = r.number(cs);
    s.mean_heading = r.number(ch);
    if (!cells[d].emplace(DetectorDB::Key{s.detector_id, s.period}, s).second) r.fail("duplicate detector/period cell");
  }
  std::map<Direction, DetectorDB> out;
  for (auto& [d, c] : cells) out.emplace(d, DetectorDB(d, std::move(c)));
  return out;
}

// ---------------------------------------------------------------------------
// Matched samples, ground truth

inline void write_samples(const std::string& path, std::span<const MatchedSample> samples) {
  CsvWriter w(path, {"trip_id", "event_id", "event_detector_id", "label", "coincide_time"});
  for (const auto& s : samples) w.row(s.trip_id, s.event_id, s.event_detector_id, to_string(s.label), s.coincide_time);
  w.close();
}

inline std::vector<MatchedSample> read_samples(const std::string& path) {
  CsvReader r(path);
  const auto ct = r.column("trip_id"), ce = r.column("event_id"), cd = r.column("event_detector_id"), cl = r.column("label"),
             cc = r.column("coincide_time");
  std::vector<MatchedSample> out;
  while (r.next()) {
    MatchedSample s;
    s.trip_id = r.str(ct);
    s.event_id = r.str(ce);
    s.event_detector_id = static_cast<int>(r.integer(cd));
    try {
      s.label = parse_label(r.field(cl));
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
    s.coincide_time = r.timestamp(cc);
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_ground_truth(const std::string& path, std::span<const GroundTruth> rows) {
  CsvWriter w(path, {"trip_id", "event_id", "label"});
  for (const auto& g : rows) w.row(g.trip_id, g.event_id, to_string(g.label));
  w.close();
}

inline std::vector<GroundTruth> read_ground_truth(const std::string& path) {
  CsvReader r(path);
  const auto ct = r.column("trip_id"), ce = r.column("event_id"), cl = r.column("label");
  std::vector<GroundTruth> out;
  while (r.next()) {
    GroundTruth g{r.str(ct), r.str(ce), Label::normal};
    try {
      g.label = parse_label(r.field(cl));
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset

inline void write_dataset(const std::string& path, const Dataset& d) {
  std::vector<std::string> header{"trip_id", "event_id"};
  header.insert(header.end(), d.feature_names().begin(), d.feature_names().end());
  header.push_back("target");
  CsvWriter w(path, header);
  auto& os = w.stream();
  for (std::size_t i = 0; i < d.rows(); ++i) {
    os << d.trip_ids()[i] << ',' << d.event_ids()[i];
    for (double v : d.row(i)) os << ',' << fmt(v);
    os << ',' << d.target(i) << '\n';
  }
  w.close();
}

/// Reads a feature dataset; columns must be the standard feature layout.
inline Dataset read_dataset(const std::string& path) {
  CsvReader r(path);
  const auto ct = r.column("trip_id"), ce = r.column("event_id"), cy = r.column("target");
  std::vector<std::size_t> cols;
  for (const auto& n : feature_names()) cols.push_back(r.column(n));
  Dataset d = empty_feature_dataset();
  std::vector<double> x(cols.size());
  while (r.next()) {
    for (std::size_t c = 0; c < cols.size(); ++c) x[c] = r.number(cols[c]);
    const auto y = r.integer(cy);
    if (y != 0 && y != 1) r.fail("target must be 0 or 1");
    d.append(x, static_cast<int>(y), r.str(ct), r.str(ce));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Metrics

inline void write_roc(const std::string& path, const RocCurve& c) {
  CsvWriter w(path, {"threshold", "far", "recall"});
  for (const auto& p : c.points) w.row(p.threshold, p.far, p.recall);
  w.close();
}

}  // namespace vdet::io

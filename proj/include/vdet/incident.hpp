#pragma once

// Incident records, event-detector matching, affected/normal labeling of
// detector trajectories and the incident attribute summary.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <iterator>
#include <vector>

#include "json.hpp"

#include "vdet/common.hpp"
#include "vdet/geo.hpp"
#include "vdet/trajectory.hpp"

namespace vdet {

enum class IncidentKind { accident, stalled_vehicle, other };

inline std::string_view to_string(IncidentKind k) {
  switch (k) {
    case IncidentKind::accident: return "accident";
    case IncidentKind::stalled_vehicle: return "stalled_vehicle";
    default: return "other";
  }
}

inline IncidentKind parse_incident_kind(std::string_view s) {
  if (s == "accident") return IncidentKind::accident;
  if (s == "stalled_vehicle") return IncidentKind::stalled_vehicle;
  if (s == "other") return IncidentKind::other;
  throw std::invalid_argument("unknown incident kind '" + std::string(s) + "'");
}

struct Incident {
  std::string event_id;
  double start_time = 0.0;
  double clear_time = 0.0;
  GeoPoint pos;
  Direction direction = Direction::eastbound;
  int lanes_closed = 1;
  IncidentKind kind = IncidentKind::other;

  double duration() const { return clear_time - start_time; }
};

inline void validate(const Incident& inc) {
  if (inc.clear_time < inc.start_time) throw std::invalid_argument("incident " + inc.event_id + ": clear_time before start_time");
  if (inc.lanes_closed < 1) throw std::invalid_argument("incident " + inc.event_id + ": lanes_closed must be >= 1");
}

enum class Label { affected, normal };

inline std::string_view to_string(Label l) { return l == Label::affected ? "affected" : "normal"; }

inline Label parse_label(std::string_view s) {
  if (s == "affected") return Label::affected;
  if (s == "normal") return Label::normal;
  throw std::invalid_argument("unknown label '" + std::string(s) + "'");
}

struct MatchedSample {
  std::string trip_id;
  std::string event_id;
  int event_detector_id = 0;
  Label label = Label::normal;
  double coincide_time = 0.0;
};

struct LabelConfig {
  double pre_window = 7200.0;   // s before start -> normal
  double post_window = 900.0;   // s after start -> affected
  int upstream_required = 16;   // contiguous detectors upstream of the event detector
};

// ---------------------------------------------------------------------------

struct EventDetector {
  Incident incident;
  int detector_id = 0;
  double offset = 0.0;
};

struct IncidentDiscard {
  std::string event_id;
  std::string reason;
};

struct EventMatchResult {
  std::vector<EventDetector> matched;
  std::vector<IncidentDiscard> discarded;
};

/// Event detector of one incident: nearest detector on its direction's grid.
/// Empty when the incident lies farther than max_offset from the corridor.
inline std::optional<EventDetector> match_event_detector(const Incident& inc, const DetectorGrid& grid, double max_offset) {
  if (grid.direction() != inc.direction) throw std::invalid_argument("match_event_detector: grid direction differs from incident");
  const Projection pr = grid.corridor.project(inc.pos);
  if (pr.offset > max_offset) return std::nullopt;
  return EventDetector{inc, nearest_detector(grid.detectors, pr.chainage).id, pr.offset};
}

inline EventMatchResult match_event_detectors(std::span<const Incident> incidents, std::span<const DetectorGrid> grids,
                                              double max_offset) {
  EventMatchResult out;
  for (const auto& inc : incidents) {
    const auto grid = std::find_if(grids.begin(), grids.end(), [&](const DetectorGrid& g) { return g.direction() == inc.direction; });
    if (grid == grids.end()) {
      out.discarded.push_back({inc.event_id, "no_grid_for_direction"});
      continue;
    }
    if (auto m = match_event_detector(inc, *grid, max_offset))
      out.matched.push_back(std::move(*m));
    else
      out.discarded.push_back({inc.event_id, "off_corridor"});
  }
  return out;
}

struct PairDiscard {
  std::string event_id;
  std::string trip_id;
  std::string reason;  // outside_window | insufficient_upstream
};

struct LabelResult {
  std::vector<MatchedSample> samples;    // sorted by (event_id, trip_id)
  std::vector<PairDiscard> discarded;    // sorted by (event_id, trip_id)
  std::size_t pairs_examined = 0;        // same-direction pairs whose trajectory holds the event detector
  std::size_t affected = 0;
  std::size_t normal = 0;
  std::size_t trajectories_with_samples = 0;
  std::size_t trajectories_affected = 0;  // distinct trajectories with >= 1 affected sample
  std::map<std::size_t, std::size_t> multiplicity;  // samples-per-trajectory -> trajectory count
};

enum class WindowVerdict { normal, affected, outside };

/// Affected window is closed [start, start+post]; normal window is
/// (start-pre, start).
inline WindowVerdict classify_window(double coincide_time, double start_time, const LabelConfig& cfg) {
  const double dt = coincide_time - start_time;
  if (dt >= 0.0 && dt <= cfg.post_window) return WindowVerdict::affected;
  if (dt < 0.0 && dt > -cfg.pre_window) return WindowVerdict::normal;
  return WindowVerdict::outside;
}

inline LabelResult label_trajectories(std::span<const EventDetector> events, std::span<const DetectorTrajectory> trajectories,
                                      const LabelConfig& cfg = {}, unsigned threads = 1) {
  struct PerEvent {
    std::vector<MatchedSample> samples;
    std::vector<PairDiscard> discarded;
    std::size_t pairs = 0;
  };
  std::vector<PerEvent> per(events.size());

  parallel_for(events.size(), threads, [&](std::size_t e) {
    const auto& ev = events[e];
    auto& out = per[e];
    const int E = ev.detector_id;
    for (const auto& traj : trajectories) {
      if (traj.direction != ev.incident.direction) continue;
      const DetectorPass* at = traj.pass_at(E);
      if (!at) continue;
      ++out.pairs;
      const auto verdict = classify_window(at->pass_time, ev.incident.start_time, cfg);
      if (verdict == WindowVerdict::outside) {
        out.discarded.push_back({ev.incident.event_id, traj.trip_id, "outside_window"});
        continue;
      }
      if (E - cfg.upstream_required < traj.first_detector()) {
        out.discarded.push_back({ev.incident.event_id, traj.trip_id, "insufficient_upstream"});
        continue;
      }
      out.samples.push_back({traj.trip_id, ev.incident.event_id, E,
                             verdict == WindowVerdict::affected ? Label::affected : Label::normal, at->pass_time});
    }
  });

  LabelResult r;
  for (auto& p : per) {
    r.pairs_examined += p.pairs;
    std::move(p.samples.begin(), p.samples.end(), std::back_inserter(r.samples));
    std::move(p.discarded.begin(), p.discarded.end(), std::back_inserter(r.discarded));
  }
  auto by_ids = [](const auto& a, const auto& b) { return std::tie(a.event_id, a.trip_id) < std::tie(b.event_id, b.trip_id); };
  std::stable_sort(r.samples.begin(), r.samples.end(), by_ids);
  std::stable_sort(r.discarded.begin(), r.discarded.end(), by_ids);

  std::map<std::string, std::pair<std::size_t, bool>> per_traj;
  for (const auto& s : r.samples) {
    (s.label == Label::affected ? r.affected : r.normal) += 1;
    auto& t = per_traj[s.trip_id];
    ++t.first;
    t.second = t.second || s.label == Label::affected;
  }
  r.trajectories_with_samples = per_traj.size();
  for (const auto& [id, t] : per_traj) {
    ++r.multiplicity[t.first];
    if (t.second) ++r.trajectories_affected;
  }
  return r;
}

// ---------------------------------------------------------------------------

struct IncidentSummary {
  std::size_t total = 0;
  std::vector<std::size_t> duration_bins;  // bin i covers [15i, 15(i+1)) minutes
  std::map<IncidentKind, std::size_t> by_kind;
  std::map<Direction, std::size_t> by_direction;
  std::map<int, std::size_t> by_lanes_closed;
};

inline constexpr double kDurationBinSeconds = 900.0;

inline IncidentSummary incident_summary(std::span<const Incident> incidents) {
  IncidentSummary s;
  for (auto k : {IncidentKind::accident, IncidentKind::stalled_vehicle, IncidentKind::other}) s.by_kind[k] = 0;
  for (auto d : {Direction::eastbound, Direction::westbound}) s.by_direction[d] = 0;
  for (const auto& inc : incidents) {
    ++s.total;
    const auto bin = static_cast<std::size_t>(std::floor(std::max(0.0, inc.duration()) / kDurationBinSeconds));
    if (s.duration_bins.size() <= bin) s.duration_bins.resize(bin + 1, 0);
    ++s.duration_bins[bin];
    ++s.by_kind[inc.kind];
    ++s.by_direction[inc.direction];
    ++s.by_lanes_closed[inc.lanes_closed];
  }
  return s;
}

inline nlohmann::ordered_json to_json(const IncidentSummary& s) {
  nlohmann::ordered_json j;
  j["total"] = s.total;
  auto bins = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < s.duration_bins.size(); ++i)
    bins.push_back({{"from_min", 15 * i}, {"to_min", 15 * (i + 1)}, {"count", s.duration_bins[i]}});
  j["duration_minutes"] = bins;
  for (const auto& [k, n] : s.by_kind) j["by_kind"][std::string(to_string(k))] = n;
  for (const auto& [d, n] : s.by_direction) j["by_direction"][std::string(to_string(d))] = n;
  for (const auto& [l, n] : s.by_lanes_closed) j["by_lanes_closed"][std::to_string(l)] = n;
  return j;
}

}  // namespace vdet

#pragma once

// Historical per-detector traffic database split by peak / off-peak period.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/trajectory.hpp"

namespace vdet {

enum class Period { peak, offpeak };

inline std::string_view to_string(Period p) { return p == Period::peak ? "peak" : "offpeak"; }

inline Period parse_period(std::string_view s) {
  if (s == "peak") return Period::peak;
  if (s == "offpeak") return Period::offpeak;
  throw std::invalid_argument("unknown period '" + std::string(s) + "'");
}

/// Peak iff local time of day is in [06:00,10:00) or [15:00,19:00).
inline Period classify_period(double t, double tz_offset_hours) {
  double sod = std::fmod(t + tz_offset_hours * kSecondsPerHour, 86400.0);
  if (sod < 0.0) sod += 86400.0;
  const double h = sod / kSecondsPerHour;
  const bool peak = (h >= 6.0 && h < 10.0) || (h >= 15.0 && h < 19.0);
  return peak ? Period::peak : Period::offpeak;
}

struct DetectorStats {
  int detector_id = 0;
  Period period = Period::offpeak;
  std::size_t count = 0;
  double mean_speed = 0.0;
  std::optional<double> std_speed;  // sample std; empty when count < 2
  double mean_heading = 0.0;
};

struct HistoricalSpeed {
  DetectorStats stats;
  bool fallback = false;  // true when the direction-wide period mean was used
};

class DetectorDB {
 public:
  using Key = std::pair<int, Period>;

  DetectorDB(Direction direction, std::map<Key, DetectorStats> cells)
      : direction_(direction), cells_(std::move(cells)) {
    for (Period p : {Period::peak, Period::offpeak}) {
      std::size_t n = 0;
      double weighted = 0.0;
      HeadingSum heading;
      for (const auto& [key, s] : cells_) {
        if (key.second != p) continue;
        n += s.count;
        weighted += static_cast<double>(s.count) * s.mean_speed;
        HeadingSum h;
        h.add(s.mean_heading);
        h.east *= static_cast<double>(s.count);
        h.north *= static_cast<double>(s.count);
        heading += h;
      }
      if (n > 0) {
        DetectorStats w;
        w.detector_id = -1;
        w.period = p;
        w.count = n;
        w.mean_speed = weighted / static_cast<double>(n);
        w.mean_heading = heading.mean().value_or(0.0);
        wide_[p == Period::peak ? 0 : 1] = w;
      }
    }
  }

  Direction direction() const { return direction_; }
  const std::map<Key, DetectorStats>& cells() const { return cells_; }

  const DetectorStats* find(int detector_id, Period period) const {
    auto it = cells_.find({detector_id, period});
    return it == cells_.end() ? nullptr : &it->second;
  }

  /// Pass-weighted mean over every cell of the period.
  const std::optional<DetectorStats>& direction_wide(Period period) const {
    return wide_[period == Period::peak ? 0 : 1];
  }

  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& [k, s] : cells_) n += s.count;
    return n;
  }

 private:
  Direction direction_;
  std::map<Key, DetectorStats> cells_;
  std::optional<DetectorStats> wide_[2];
};

namespace detail {

struct CellSamples {
  std::vector<double> speeds;
  std::vector<double> headings;
};

inline DetectorStats summarize_cell(int id, Period period, const CellSamples& c) {
  DetectorStats s;
  s.detector_id = id;
  s.period = period;
  s.count = c.speeds.size();
  double sum = 0.0;
  for (double v : c.speeds) sum += v;
  s.mean_speed = sum / static_cast<double>(s.count);
  if (s.count >= 2) {
    double ss = 0.0;
    for (double v : c.speeds) ss += (v - s.mean_speed) * (v - s.mean_speed);
    s.std_speed = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  s.mean_heading = circular_mean(c.headings).value_or(0.0);
  return s;
}

}  // namespace detail

/// Aggregates passes per (detector, period). Contributions are gathered in
/// trajectory order before any arithmetic, so every thread count produces
/// bit-identical statistics.
inline DetectorDB build_db(Direction direction, std::span<const DetectorTrajectory> trajectories,
                           double tz_offset_hours, unsigned threads = 1) {
  using Key = DetectorDB::Key;
  const std::size_t n = trajectories.size();
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));

  std::vector<std::map<Key, detail::CellSamples>> partial(workers);
  parallel_for(workers, workers, [&](std::size_t w) {
    const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
    auto& cells = partial[w];
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& traj = trajectories[i];
      if (traj.direction != direction) throw std::invalid_argument("build_db: trajectory " + traj.trip_id + " has the wrong direction");
      for (const auto& p : traj.passes) {
        auto& c = cells[{p.detector_id, classify_period(p.pass_time, tz_offset_hours)}];
        c.speeds.push_back(p.speed);
        c.headings.push_back(p.heading);
      }
    }
  });

  // Concatenate chunks in order: equivalent to a serial scan.
  std::map<Key, detail::CellSamples> merged;
  for (auto& cells : partial)
    for (auto& [key, c] : cells) {
      auto& m = merged[key];
      m.speeds.insert(m.speeds.end(), c.speeds.begin(), c.speeds.end());
      m.headings.insert(m.headings.end(), c.headings.begin(), c.headings.end());
    }

  std::map<Key, DetectorStats> stats;
  for (const auto& [key, c] : merged) stats.emplace(key, detail::summarize_cell(key.first, key.second, c));
  return DetectorDB(direction, std::move(stats));
}

struct EmptyDatabase : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The cell itself when it has at least 2 passes, otherwise the direction-wide
/// mean for the same period (flagged).
inline HistoricalSpeed lookup_historical(const DetectorDB& db, int detector_id, Period period) {
  if (const auto* cell = db.find(detector_id, period); cell && cell->count >= 2) return {*cell, false};
  const auto& wide = db.direction_wide(period);
  if (!wide)
    throw EmptyDatabase("detector database has no " + std::string(to_string(period)) + " observations for " +
                        std::string(to_string(db.direction())));
  DetectorStats s = *wide;
  s.detector_id = detector_id;
  s.std_speed.reset();
  return {s, true};
}

}  // namespace vdet

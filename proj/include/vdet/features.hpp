#pragma once

// Feature vectors for (trajectory, event detector) samples.
//
// Layout, in travel order, with E the event detector and R = E - gap the
// vehicle reference position:
//
//   ... [set 1: R-11..R-8] [set 2: R-7..R-4] [set 3: R-3..R] (R+1 .. E-1) E
//
// Set 3 holds the vehicle's immediate position, set 1 is farthest upstream.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/dataset.hpp"
#include "vdet/detector_db.hpp"
#include "vdet/incident.hpp"
#include "vdet/trajectory.hpp"

namespace vdet {

inline constexpr int kDetectorsPerSet = 4;
inline constexpr int kDetectorSets = 3;
inline constexpr int kFeatureCount = kDetectorSets * 4 + 2;

struct SetFeatures {
  double mean_speed = 0.0;
  double std_speed = 0.0;
  double hist_mean_speed = 0.0;
  double heading_change = 0.0;
};

struct FeatureVector {
  std::array<SetFeatures, kDetectorSets> sets;  // sets[0] = set 1 (farthest upstream)
  int peak = 0;
  int rain = 0;

  std::array<double, kFeatureCount> to_array() const {
    std::array<double, kFeatureCount> a{};
    std::size_t k = 0;
    for (const auto& s : sets) {
      a[k++] = s.mean_speed;
      a[k++] = s.std_speed;
      a[k++] = s.hist_mean_speed;
      a[k++] = s.heading_change;
    }
    a[k++] = peak;
    a[k++] = rain;
    return a;
  }
};

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = {"ms1", "ss1", "hs1", "hc1", "ms2", "ss2", "hs2",
                                                 "hc2", "ms3", "ss3", "hs3", "hc3", "peak", "rain"};
  return names;
}

inline std::vector<bool> feature_binary_mask() {
  std::vector<bool> mask(kFeatureCount, false);
  mask[kFeatureCount - 2] = mask[kFeatureCount - 1] = true;
  return mask;
}

inline Dataset empty_feature_dataset() { return Dataset(feature_names(), feature_binary_mask()); }

/// Rain indicator over non-overlapping [start, end) intervals.
class WeatherFlags {
 public:
  struct Interval {
    double start = 0.0;
    double end = 0.0;
    bool rain = false;
  };

  WeatherFlags() = default;
  explicit WeatherFlags(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
    std::sort(intervals_.begin(), intervals_.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < intervals_.size(); ++i) {
      if (!(intervals_[i].end > intervals_[i].start)) throw std::invalid_argument("weather interval with end <= start");
      if (i > 0 && intervals_[i].start < intervals_[i - 1].end) throw std::invalid_argument("overlapping weather intervals");
    }
  }

  std::optional<bool> rain_at(double t) const {
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), t, [](double v, const Interval& iv) { return v < iv.start; });
    if (it == intervals_.begin()) return std::nullopt;
    --it;
    if (t < it->end) return it->rain;
    return std::nullopt;
  }

  const std::vector<Interval>& intervals() const { return intervals_; }

 private:
  std::vector<Interval> intervals_;
};

struct FeatureConfig {
  int downstream_gap = 4;  // detectors between R and E (440 yd at 110 yd spacing)
  double tz_offset_hours = -5.0;
};

struct FeatureWarnings {
  std::size_t missing_weather = 0;
  std::size_t historical_fallbacks = 0;
};

/// Detector ids of set s (0-based, 0 = farthest upstream), in travel order.
inline std::array<int, kDetectorsPerSet> set_detectors(int event_detector, int set, const FeatureConfig& cfg = {}) {
  const int r = event_detector - cfg.downstream_gap;
  const int last = r - (kDetectorSets - 1 - set) * kDetectorsPerSet;  // nearest-to-vehicle detector of the set
  std::array<int, kDetectorsPerSet> ids{};
  for (int i = 0; i < kDetectorsPerSet; ++i) ids[static_cast<std::size_t>(i)] = last - (kDetectorsPerSet - 1) + i;
  return ids;
}

inline double mean_abs_heading_change(std::span<const double> headings) {
  if (headings.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < headings.size(); ++i) sum += std::abs(shortest_arc(headings[i - 1], headings[i]));
  return sum / static_cast<double>(headings.size() - 1);
}

inline FeatureVector extract_features(const MatchedSample& sample, const DetectorTrajectory& traj, const DetectorDB& db,
                                      const WeatherFlags& weather, const FeatureConfig& cfg = {},
                                      FeatureWarnings* warnings = nullptr) {
  if (traj.trip_id != sample.trip_id) throw std::invalid_argument("extract_features: trajectory does not match sample");
  const int r = sample.event_detector_id - cfg.downstream_gap;
  const DetectorPass* at_r = traj.pass_at(r);
  if (!at_r) throw std::runtime_error("extract_features: trajectory " + traj.trip_id + " lacks the reference detector pass");

  const Period period = classify_period(at_r->pass_time, cfg.tz_offset_hours);
  FeatureVector fv;
  for (int s = 0; s < kDetectorSets; ++s) {
    std::array<double, kDetectorsPerSet> speeds{}, headings{};
    double hist = 0.0;
    const auto ids = set_detectors(sample.event_detector_id, s, cfg);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const DetectorPass* p = traj.pass_at(ids[i]);
      if (!p)
        throw std::runtime_error("extract_features: trajectory " + traj.trip_id + " lacks a pass at detector " +
                                 std::to_string(ids[i]));
      speeds[i] = p->speed;
      headings[i] = p->heading;
      const auto h = lookup_historical(db, ids[i], period);
      if (h.fallback && warnings) ++warnings->historical_fallbacks;
      hist += h.stats.mean_speed;
    }
    auto& f = fv.sets[static_cast<std::size_t>(s)];
    double sum = 0.0;
    for (double v : speeds) sum += v;
    f.mean_speed = sum / kDetectorsPerSet;
    double ss = 0.0;
    for (double v : speeds) ss += (v - f.mean_speed) * (v - f.mean_speed);
    f.std_speed = std::sqrt(ss / (kDetectorsPerSet - 1));
    f.hist_mean_speed = hist / kDetectorsPerSet;
    f.heading_change = mean_abs_heading_change(headings);
  }
  fv.peak = period == Period::peak ? 1 : 0;
  const auto rain = weather.rain_at(at_r->pass_time);
  if (!rain && warnings) ++warnings->missing_weather;
  fv.rain = rain.value_or(false) ? 1 : 0;
  return fv;
}

struct DatasetBuild {
  Dataset data;
  std::vector<ColumnSummary> summary;
  FeatureWarnings warnings;
};

/// One row per sample (input order), target 1 for affected. `trajectories`
/// maps trip_id to its detector trajectory; `dbs` holds one database per
/// direction.
inline DatasetBuild build_dataset(std::span<const MatchedSample> samples,
                                  const std::map<std::string, const DetectorTrajectory*>& trajectories,
                                  const std::map<Direction, DetectorDB>& dbs, const WeatherFlags& weather,
                                  const FeatureConfig& cfg = {}) {
  DatasetBuild out{empty_feature_dataset(), {}, {}};
  out.data.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = trajectories.find(s.trip_id);
    if (it == trajectories.end()) throw std::runtime_error("build_dataset: unknown trajectory " + s.trip_id);
    const auto& traj = *it->second;
    auto db = dbs.find(traj.direction);
    if (db == dbs.end()) throw std::runtime_error("build_dataset: no detector database for " + std::string(to_string(traj.direction)));
    const auto fv = extract_features(s, traj, db->second, weather, cfg, &out.warnings).to_array();
    out.data.append(fv, s.label == Label::affected ? 1 : 0, s.trip_id, s.event_id);
  }
  out.summary = summarize_columns(out.data);
  return out;
}

}  // namespace vdet

#pragma once

// Fixtures and independent reference implementations shared by the tests.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "vdet/common.hpp"
#include "vdet/geo.hpp"
#include "vdet/incident.hpp"
#include "vdet/trajectory.hpp"

namespace vdet::test {

/// Straight corridor along +x (EB) or -x (WB) of the given length in yards.
inline Corridor straight_corridor(Direction d, double length) {
  if (d == Direction::eastbound) return Corridor(d, {{0.0, 0.0}, {length, 0.0}});
  return Corridor(d, {{length, 0.0}, {0.0, 0.0}});
}

/// Detector trajectory passing detectors [first, last] at constant speed.
inline DetectorTrajectory constant_trajectory(std::string id, Direction d, int first, int last, double t0, double mph,
                                              double heading = 90.0) {
  DetectorTrajectory t;
  t.trip_id = std::move(id);
  t.direction = d;
  for (int k = first; k <= last; ++k)
    t.passes.push_back({k, t0 + (k - first) * kDefaultDetectorSpacing / mph_to_yps(mph), mph, heading});
  return t;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("vdet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

/// Wilcoxon-Mann-Whitney statistic by explicit pair enumeration.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

/// Trip partition of sorted times by a single forward scan: returns the
/// retained trips as lists of times, plus dropped and duplicate counts.
struct ReferenceSplit {
  std::vector<std::vector<double>> trips;
  std::size_t dropped = 0;
  std::size_t duplicates = 0;
};

inline ReferenceSplit reference_split(const std::vector<double>& times, double gap) {
  ReferenceSplit r;
  std::vector<double> cur;
  double last = 0.0;
  bool have = false;
  auto close = [&] {
    if (cur.size() >= 2) r.trips.push_back(cur);
    else r.dropped += cur.size();
    cur.clear();
  };
  for (double t : times) {
    if (have && t == last) {
      ++r.duplicates;
      continue;
    }
    if (have && t - last > gap) close();
    cur.push_back(t);
    last = t;
    have = true;
  }
  close();
  return r;
}

}  // namespace vdet::test

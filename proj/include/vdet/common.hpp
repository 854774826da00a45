#pragma once

// Shared vocabulary: travel direction, angle helpers, seeded RNG streams and
// a small deterministic parallel_for.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace vdet {

enum class Direction { eastbound, westbound };

inline std::string_view to_string(Direction d) {
  return d == Direction::eastbound ? "EB" : "WB";
}

inline Direction parse_direction(std::string_view s) {
  if (s == "EB" || s == "eastbound" || s == "E") return Direction::eastbound;
  if (s == "WB" || s == "westbound" || s == "W") return Direction::westbound;
  throw std::invalid_argument("unknown direction '" + std::string(s) + "'");
}

inline constexpr double kYardsPerMile = 1760.0;
inline constexpr double kSecondsPerHour = 3600.0;

/// mph -> yards per second
inline constexpr double mph_to_yps(double mph) { return mph * kYardsPerMile / kSecondsPerHour; }

// ---------------------------------------------------------------------------
// Angles. Headings are compass degrees (0 = north, 90 = east), kept in [0,360).

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline double normalize_heading(double deg) {
  double h = std::fmod(deg, 360.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h = 0.0;
  return h;
}

/// Signed shortest arc from `from` to `to`, in (-180, 180].
inline double shortest_arc(double from, double to) {
  double d = std::fmod(to - from, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

/// Vector sum of unit headings; the circular mean is atan2(east, north).
struct HeadingSum {
  double east = 0.0;
  double north = 0.0;

  void add(double heading_deg) {
    east += std::sin(deg2rad(heading_deg));
    north += std::cos(deg2rad(heading_deg));
  }
  HeadingSum& operator+=(const HeadingSum& o) {
    east += o.east;
    north += o.north;
    return *this;
  }
  /// Empty when the resultant vanishes (no defined mean).
  std::optional<double> mean() const {
    if (std::hypot(east, north) < 1e-12) return std::nullopt;
    return normalize_heading(rad2deg(std::atan2(east, north)));
  }
};

inline std::optional<double> circular_mean(std::span<const double> headings) {
  HeadingSum s;
  for (double h : headings) s.add(h);
  return s.mean();
}

// ---------------------------------------------------------------------------
// Seeding. Every randomized component derives an independent stream from
// (seed, a, b) so results never depend on scheduling.

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

/// Uniform double in [0,1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// ---------------------------------------------------------------------------

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1U : hw;
}

/// Runs fn(i) for i in [0,n) over `threads` workers using static contiguous
/// chunks. fn must only write to slots owned by index i. The first exception
/// thrown by any worker is rethrown on the caller's thread.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t lo = n * w / threads;
    const std::size_t hi = n * (w + 1) / threads;
    pool.emplace_back([&, w, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace vdet

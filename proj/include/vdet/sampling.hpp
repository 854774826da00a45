#pragma once

// SMOTE oversampling of the minority (target = 1) class.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/dataset.hpp"

namespace vdet {

struct SmoteConfig {
  double ratio = 1.0;  // target minority / majority
  int k = 5;
  std::uint64_t seed = 0;
};

/// Where a synthetic row came from: row = parent + u * (neighbor - parent)
/// over the continuous columns. Indices refer to rows of the input dataset.
struct SyntheticOrigin {
  std::size_t parent = 0;
  std::size_t neighbor = 0;
  double u = 0.0;
};

struct SmoteResult {
  Dataset data;  // input rows first, unchanged, then synthetic rows
  std::vector<SyntheticOrigin> origins;
};

/// Number of synthetic rows needed to lift minority/majority to `ratio`.
inline std::size_t smote_deficit(std::size_t minority, std::size_t majority, double ratio) {
  const auto target = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(majority)));
  return target > minority ? target - minority : 0;
}

/// k nearest minority neighbours of each minority row (self excluded), by
/// Euclidean distance over the z-scored continuous columns. Distance ties go
/// to the lower row index. Result holds dataset row indices.
inline std::vector<std::vector<std::size_t>> minority_neighbors(const Dataset& data, std::span<const std::size_t> minority,
                                                                int k) {
  const Standardizer z = Standardizer::fit(data);
  std::vector<std::size_t> cont;
  for (std::size_t c = 0; c < data.cols(); ++c)
    if (!data.binary_columns()[c]) cont.push_back(c);

  const std::size_t m = minority.size();
  std::vector<double> pts(m * cont.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < cont.size(); ++j) {
      const std::size_t c = cont[j];
      pts[i * cont.size() + j] = (data.at(minority[i], c) - z.mean[c]) / z.scale[c];
    }

  std::vector<std::vector<std::size_t>> out(m);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < m; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < cont.size(); ++c) {
        const double d = pts[i * cont.size() + c] - pts[j * cont.size() + c];
        d2 += d * d;
      }
      dist.emplace_back(d2, j);
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    for (std::size_t q = 0; q < kk; ++q) out[i].push_back(minority[dist[q].second]);
  }
  return out;
}

/// Appends synthetic minority rows until floor(ratio * majority) minority rows
/// exist. Each synthetic row j draws its parent, neighbour and u from its own
/// stream derive_seed(seed, j), so the output does not depend on evaluation
/// order. Binary columns are copied from the parent.
inline SmoteResult smote(const Dataset& train, const SmoteConfig& cfg) {
  if (!(cfg.ratio > 0.0 && cfg.ratio <= 1.0)) throw std::invalid_argument("smote: ratio must be in (0, 1]");
  if (cfg.k < 1) throw std::invalid_argument("smote: k must be >= 1");

  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < train.rows(); ++i)
    if (train.target(i) == 1) minority.push_back(i);
  const std::size_t majority = train.rows() - minority.size();

  SmoteResult out{train, {}};
  const std::size_t need = smote_deficit(minority.size(), majority, cfg.ratio);
  if (need == 0) return out;
  if (minority.size() <= static_cast<std::size_t>(cfg.k))
    throw std::invalid_argument("smote: minority class has " + std::to_string(minority.size()) +
                                " rows, need more than k=" + std::to_string(cfg.k) + "; lower k");

  const auto neighbors = minority_neighbors(train, minority, cfg.k);
  const auto& binary = train.binary_columns();
  std::vector<double> row(train.cols());
  out.data.reserve(train.rows() + need);
  out.origins.reserve(need);
  for (std::size_t j = 0; j < need; ++j) {
    Rng rng(derive_seed(cfg.seed, j));
    const std::size_t pi = uniform_index(rng, minority.size());
    const auto& nbrs = neighbors[pi];
    const std::size_t parent = minority[pi];
    const std::size_t neighbor = nbrs[uniform_index(rng, nbrs.size())];
    const double u = uniform01(rng);
    const auto xp = train.row(parent), xn = train.row(neighbor);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = binary[c] ? xp[c] : xp[c] + u * (xn[c] - xp[c]);
    out.data.append(row, 1, "smote", "");
    out.origins.push_back({parent, neighbor, u});
  }
  return out;
}

}  // namespace vdet

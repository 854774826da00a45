#pragma once

// Histogram-binned decision trees shared by the random forest (Gini
// classification) and gradient boosting (least-squares on gradients).
//
// Features are quantized once per fit. With at most kMaxBins distinct values
// the cut points are the midpoints between consecutive distinct values, so
// binned splits coincide with exact CART splits; otherwise quantile cuts are
// used.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/dataset.hpp"

namespace vdet::learn {

inline constexpr std::size_t kMaxBins = 256;

class BinnedMatrix {
 public:
  explicit BinnedMatrix(const Dataset& d) : rows_(d.rows()), cols_(d.cols()), cuts_(d.cols()), bins_(d.rows() * d.cols()) {
    std::vector<double> col(rows_);
    for (std::size_t c = 0; c < cols_; ++c) {
      for (std::size_t r = 0; r < rows_; ++r) col[r] = d.at(r, c);
      std::sort(col.begin(), col.end());
      std::vector<double> distinct;
      for (double v : col)
        if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
      auto& cuts = cuts_[c];
      if (distinct.size() <= kMaxBins) {
        for (std::size_t i = 1; i < distinct.size(); ++i) cuts.push_back(midpoint(distinct[i - 1], distinct[i]));
      } else {
        for (std::size_t q = 1; q < kMaxBins; ++q) {
          const std::size_t pos = q * rows_ / kMaxBins;
          if (pos == 0 || col[pos] == col[pos - 1]) continue;
          const double cut = midpoint(col[pos - 1], col[pos]);
          if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
        }
      }
      for (std::size_t r = 0; r < rows_; ++r) bins_[r * cols_ + c] = bin_of(c, d.at(r, c));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t bin(std::size_t r, std::size_t c) const { return bins_[r * cols_ + c]; }
  std::size_t bin_count(std::size_t c) const { return cuts_[c].size() + 1; }
  /// Rows with bin <= b satisfy x < threshold(c, b).
  double threshold(std::size_t c, std::size_t b) const { return cuts_[c][b]; }

 private:
  static double midpoint(double a, double b) {
    const double m = a + (b - a) / 2.0;
    return m > a ? m : b;  // adjacent doubles: the upper value keeps x < cut exclusive of it
  }

  std::uint8_t bin_of(std::size_t c, double x) const {
    const auto& cuts = cuts_[c];
    return static_cast<std::uint8_t>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
  }

  std::size_t rows_, cols_;
  std::vector<std::vector<double>> cuts_;
  std::vector<std::uint8_t> bins_;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      const auto& n = nodes[static_cast<std::size_t>(i)];
      if (n.feature >= 0) {
        stack.push_back({n.left, d + 1});
        stack.push_back({n.right, d + 1});
      }
    }
    return best;
  }
};

/// Split search statistics for one node. The criterion object decides the
/// per-bin accumulators, the gain of a left/right partition and leaf values.
struct SplitChoice {
  int feature = -1;
  std::size_t bin = 0;
  double gain = 0.0;
};

struct GrowParams {
  std::optional<int> max_depth;
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  /// Derive the larger child's histogram as parent minus smaller child.
  /// Only valid when every node considers all features.
  bool subtract_histograms = false;
};

/// Grows a tree over rows[begin,end) of `rows` (duplicates allowed).
///
/// Criterion must provide:
///   using Stats;                       // additive accumulator
///   Stats stats(std::size_t row) const;
///   double node_term(const Stats& parent) const;
///   double gain(double node_term, const Stats& left, const Stats& right) const;
///   double leaf_value(const Stats&, std::span<const std::size_t> rows) const;
///   bool pure(const Stats&) const;
///   std::size_t count(const Stats&) const;
/// choose_features(rng) returns the candidate feature list at each node.
template <class Criterion, class FeaturePicker>
Tree grow_tree(const BinnedMatrix& bm, std::vector<std::size_t>& rows, const Criterion& crit, const GrowParams& gp,
               FeaturePicker&& choose_features, std::vector<double>* importance = nullptr) {
  using Stats = typename Criterion::Stats;
  Tree tree;
  struct Work {
    int node;
    std::size_t begin, end;
    int depth;
    std::vector<Stats> hist;  // empty: accumulate from rows
  };
  std::vector<Work> stack;
  tree.nodes.push_back({});
  stack.push_back({0, 0, rows.size(), 0, {}});
  std::vector<Stats> hist;
  std::vector<std::size_t> offsets;
  std::vector<std::vector<Stats>> pool;  // recycled histogram buffers
  std::vector<std::size_t> sparse_offset(bm.cols() + 1, 0);
  for (std::size_t c = 0; c < bm.cols(); ++c) sparse_offset[c + 1] = sparse_offset[c] + bm.bin_count(c);
  std::vector<Stats> sparse(gp.subtract_histograms ? 0 : sparse_offset.back());
  auto accumulate = [&](std::span<const std::size_t> features, std::size_t begin, std::size_t end, std::vector<Stats>& out) {
    out.assign(offsets.back(), Stats{});
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t r = rows[i];
      const Stats s = crit.stats(r);
      for (std::size_t k = 0; k < features.size(); ++k) out[offsets[k] + bm.bin(r, features[k])] += s;
    }
  };
  auto splittable = [&](std::size_t n, int depth) { return n >= gp.min_samples_split && !(gp.max_depth && depth >= *gp.max_depth); };

  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    Stats total{};
    for (std::size_t i = w.begin; i < w.end; ++i) total += crit.stats(rows[i]);
    const std::size_t n = w.end - w.begin;
    auto make_leaf = [&] {
      auto& node = tree.nodes[static_cast<std::size_t>(w.node)];
      node.feature = -1;
      node.value = crit.leaf_value(total, std::span<const std::size_t>(rows.data() + w.begin, n));
    };
    if (!splittable(n, w.depth) || crit.pure(total)) {
      make_leaf();
      continue;
    }

    SplitChoice best;
    const auto features = choose_features();
    if (gp.subtract_histograms && features.size() != bm.cols()) throw std::logic_error("histogram subtraction needs every feature");
    offsets.assign(features.size() + 1, 0);
    for (std::size_t k = 0; k < features.size(); ++k) offsets[k + 1] = offsets[k] + bm.bin_count(features[k]);
    const double parent_term = crit.node_term(total);
    auto consider = [&](std::size_t f, std::size_t b, const Stats& left) {
      const Stats right = total - left;
      if (crit.count(left) < gp.min_samples_leaf || crit.count(right) < gp.min_samples_leaf) return;
      const double g = crit.gain(parent_term, left, right);
      if (g > best.gain + 1e-12 * std::abs(best.gain) && g > 1e-12) best = {static_cast<int>(f), b, g};
    };
    if (!gp.subtract_histograms) {
      // Per-feature scan of occupied bins only; each bin still sums its rows
      // in node order. Visited bins are cleared so `sparse` stays zero.
      for (std::size_t f : features) {
        const std::size_t nb = bm.bin_count(f);
        if (nb < 2) continue;
        Stats* h = sparse.data() + sparse_offset[f];
        std::array<std::uint64_t, kMaxBins / 64> used{};
        for (std::size_t i = w.begin; i < w.end; ++i) {
          const std::size_t b = bm.bin(rows[i], f);
          h[b] += crit.stats(rows[i]);
          used[b / 64] |= std::uint64_t{1} << (b % 64);
        }
        Stats left{};
        for (std::size_t word = 0; word < used.size(); ++word)
          for (std::uint64_t bits = used[word]; bits != 0; bits &= bits - 1) {
            const std::size_t bin = word * 64 + static_cast<std::size_t>(std::countr_zero(bits));
            if (bin + 1 < nb) {
              left += h[bin];
              consider(f, bin, left);
            }
            h[bin] = Stats{};
          }
      }
    } else {
      if (w.hist.empty()) {
        accumulate(features, w.begin, w.end, hist);
      } else {
        hist.swap(w.hist);
        pool.push_back(std::move(w.hist));
      }
      for (std::size_t k = 0; k < features.size(); ++k) {
        const std::size_t f = features[k];
        const std::size_t nb = bm.bin_count(f);
        if (nb < 2) continue;
        const Stats* h = hist.data() + offsets[k];
        Stats left{};
        for (std::size_t b = 0; b + 1 < nb; ++b) {
          if (crit.count(h[b]) == 0) continue;  // same partition as the previous bin
          left += h[b];
          consider(f, b, left);
        }
      }
    }
    if (best.feature < 0) {
      make_leaf();
      continue;
    }

    const auto f = static_cast<std::size_t>(best.feature);
    const auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(w.begin), rows.begin() + static_cast<std::ptrdiff_t>(w.end),
                                       [&](std::size_t r) { return bm.bin(r, f) <= best.bin; });
    const auto mid = static_cast<std::size_t>(mid_it - rows.begin());
    if (importance) (*importance)[f] += best.gain;

    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    auto& node = tree.nodes[static_cast<std::size_t>(w.node)];
    node.feature = best.feature;
    node.threshold = bm.threshold(f, best.bin);
    node.left = left;
    node.right = left + 1;
    Work lw{left, w.begin, mid, w.depth + 1, {}}, rw{left + 1, mid, w.end, w.depth + 1, {}};
    if (gp.subtract_histograms && splittable(mid - w.begin, lw.depth) && splittable(w.end - mid, rw.depth)) {
      Work& small = mid - w.begin <= w.end - mid ? lw : rw;
      Work& large = &small == &lw ? rw : lw;
      auto take = [&] {
        if (pool.empty()) return std::vector<Stats>{};
        auto v = std::move(pool.back());
        pool.pop_back();
        return v;
      };
      small.hist = take();
      accumulate(features, small.begin, small.end, small.hist);
      large.hist = take();
      large.hist.resize(hist.size());
      for (std::size_t b = 0; b < hist.size(); ++b) large.hist[b] = hist[b] - small.hist[b];
    }
    stack.push_back(std::move(rw));
    stack.push_back(std::move(lw));
  }
  return tree;
}

}  // namespace vdet::learn

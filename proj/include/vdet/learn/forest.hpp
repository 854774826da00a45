#pragma once

// Random forest: bootstrap-bagged CART trees with Gini impurity and
// floor(sqrt(#features)) split candidates per node.

#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/dataset.hpp"
#include "vdet/learn/tree.hpp"

namespace vdet::learn {

struct ForestParams {
  int trees = 100;
  std::optional<int> max_depth;  // empty = grow until pure
};

struct GiniCriterion {
  struct Stats {
    std::uint32_t n0 = 0, n1 = 0;
    Stats& operator+=(const Stats& o) {
      n0 += o.n0;
      n1 += o.n1;
      return *this;
    }
    Stats operator-(const Stats& o) const { return {n0 - o.n0, n1 - o.n1}; }
  };

  const std::vector<int>* y;

  Stats stats(std::size_t row) const { return (*y)[row] == 1 ? Stats{0, 1} : Stats{1, 0}; }

  /// n * gini
  static double weighted_gini(const Stats& s) {
    const double n0 = s.n0, n1 = s.n1, n = n0 + n1;
    return n > 0.0 ? n - (n0 * n0 + n1 * n1) / n : 0.0;
  }
  double node_term(const Stats& p) const { return weighted_gini(p); }
  double gain(double parent, const Stats& l, const Stats& r) const { return parent - weighted_gini(l) - weighted_gini(r); }
  double leaf_value(const Stats& s, std::span<const std::size_t>) const { return static_cast<double>(s.n1) / static_cast<double>(s.n0 + s.n1); }
  bool pure(const Stats& s) const { return s.n0 == 0 || s.n1 == 0; }
  std::size_t count(const Stats& s) const { return s.n0 + s.n1; }
};

class ForestModel {
 public:
  static ForestModel fit(const Dataset& train, const ForestParams& params, std::uint64_t seed, unsigned threads = 1) {
    if (params.trees < 1) throw std::invalid_argument("random forest needs at least one tree");
    ForestModel m;
    m.n_features_ = train.cols();
    const BinnedMatrix bm(train);
    const GiniCriterion crit{&train.targets()};
    const std::size_t n = train.rows(), F = train.cols();
    const std::size_t mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(F)))));
    GrowParams gp;
    gp.max_depth = params.max_depth;

    m.trees_.resize(static_cast<std::size_t>(params.trees));
    auto& imp = m.tree_importance_;
    imp.assign(m.trees_.size(), std::vector<double>(F, 0.0));
    parallel_for(m.trees_.size(), threads, [&](std::size_t t) {
      Rng rng(derive_seed(seed, t));
      std::vector<std::size_t> rows(n);
      for (auto& r : rows) r = uniform_index(rng, n);
      std::vector<std::size_t> features(F);
      auto pick = [&]() {
        std::iota(features.begin(), features.end(), 0);
        for (std::size_t i = 0; i < mtry; ++i) std::swap(features[i], features[i + uniform_index(rng, F - i)]);
        return std::span<const std::size_t>(features.data(), mtry);
      };
      m.trees_[t] = grow_tree(bm, rows, crit, gp, pick, &imp[t]);
    });

    m.summarize_importance();
    return m;
  }

  /// The first `trees` trees; equal to a fit with that many trees and the same seed.
  ForestModel truncated(int trees) const {
    if (trees < 1 || static_cast<std::size_t>(trees) > trees_.size()) throw std::invalid_argument("truncated: tree count out of range");
    ForestModel m = *this;
    m.trees_.resize(static_cast<std::size_t>(trees));
    m.tree_importance_.resize(static_cast<std::size_t>(trees));
    m.summarize_importance();
    return m;
  }

  double score(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(x);
    return s / static_cast<double>(trees_.size());
  }

  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<double>& importance() const { return importance_; }
  std::size_t n_features() const { return n_features_; }

 private:
  // Mean decrease in impurity, normalized per tree, averaged, renormalized.
  void summarize_importance() {
    importance_.assign(n_features_, 0.0);
    for (const auto& ti : tree_importance_) {
      const double s = std::accumulate(ti.begin(), ti.end(), 0.0);
      if (s > 0.0)
        for (std::size_t f = 0; f < n_features_; ++f) importance_[f] += ti[f] / s;
    }
    const double total = std::accumulate(importance_.begin(), importance_.end(), 0.0);
    for (auto& v : importance_) v = total > 0.0 ? v / total : 1.0 / static_cast<double>(n_features_);
  }

  std::vector<Tree> trees_;
  std::vector<std::vector<double>> tree_importance_;
  std::vector<double> importance_;
  std::size_t n_features_ = 0;
};

}  // namespace vdet::learn

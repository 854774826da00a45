#pragma once

// Gradient-boosted trees on the logistic loss. Each stage fits a
// least-squares regression tree to the loss gradients of a row subsample,
// sets Newton leaf values, shrinks them by the learning rate and applies a
// halving line search so the full training loss never increases.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/dataset.hpp"
#include "vdet/learn/tree.hpp"

namespace vdet::learn {

struct BoostParams {
  double learning_rate = 0.1;
  int max_depth = 3;
  int trees = 100;
  double subsample = 1.0;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Mean logistic loss of margins f against 0/1 targets.
inline double mean_log_loss(std::span<const double> margin, std::span<const int> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < margin.size(); ++i) s += softplus(margin[i]) - (y[i] == 1 ? margin[i] : 0.0);
  return s / static_cast<double>(margin.size());
}

// Histograms carry gradient sums only; hessians are summed over the rows of
// a leaf when its value is set.
struct GradientCriterion {
  struct Stats {
    std::size_t n = 0;
    double g = 0.0;
    Stats& operator+=(const Stats& o) {
      n += o.n;
      g += o.g;
      return *this;
    }
    Stats operator-(const Stats& o) const { return {n - o.n, g - o.g}; }
  };

  const std::vector<double>* grad;
  const std::vector<double>* hess;

  Stats stats(std::size_t row) const { return {1, (*grad)[row]}; }
  double node_term(const Stats& p) const { return p.g * p.g / static_cast<double>(p.n); }
  double gain(double parent, const Stats& l, const Stats& r) const {
    return l.g * l.g / static_cast<double>(l.n) + r.g * r.g / static_cast<double>(r.n) - parent;
  }
  double leaf_value(const Stats& s, std::span<const std::size_t> rows) const {
    constexpr double kMaxStep = 8.0;
    double h = 0.0;
    for (std::size_t r : rows) h += (*hess)[r];
    return std::clamp(-s.g / std::max(h, 1e-12), -kMaxStep, kMaxStep);
  }
  bool pure(const Stats&) const { return false; }
  std::size_t count(const Stats& s) const { return s.n; }
};

class BoostModel {
 public:
  static BoostModel fit(const Dataset& train, const BoostParams& params, std::uint64_t seed) {
    if (params.trees < 1 || params.max_depth < 1) throw std::invalid_argument("gradient boosting needs trees >= 1 and depth >= 1");
    if (!(params.subsample > 0.0 && params.subsample <= 1.0)) throw std::invalid_argument("subsample must be in (0, 1]");
    BoostModel m;
    m.n_features_ = train.cols();
    const std::size_t n = train.rows();
    const auto& y = train.targets();
    const double p0 = std::clamp(static_cast<double>(train.count_positive()) / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    m.base_ = std::log(p0 / (1.0 - p0));

    const BinnedMatrix bm(train);
    std::vector<double> margin(n, m.base_), grad(n), hess(n), step(n), trial(n);
    m.staged_loss_.push_back(mean_log_loss(margin, y));
    GrowParams gp;
    gp.max_depth = params.max_depth;
    gp.subtract_histograms = true;
    const auto sub_n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n))));
    std::vector<std::size_t> all(n), features(train.cols());
    std::iota(features.begin(), features.end(), 0);
    auto pick = [&] { return std::span<const std::size_t>(features); };

    // ex[i] = exp(-|margin[i]|), shared by the loss and the next gradient.
    std::vector<double> ex(n), trial_ex(n);
    for (std::size_t i = 0; i < n; ++i) ex[i] = std::exp(-std::abs(margin[i]));
    auto trial_loss = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        trial_ex[i] = std::exp(-std::abs(trial[i]));
        s += std::max(trial[i], 0.0) + std::log1p(trial_ex[i]) - (y[i] == 1 ? trial[i] : 0.0);
      }
      return s / static_cast<double>(n);
    };

    for (int t = 0; t < params.trees; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = margin[i] >= 0.0 ? 1.0 / (1.0 + ex[i]) : ex[i] / (1.0 + ex[i]);
        grad[i] = p - y[i];
        hess[i] = p * (1.0 - p);
      }
      std::iota(all.begin(), all.end(), 0);
      if (sub_n < n) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        for (std::size_t i = 0; i < sub_n; ++i) std::swap(all[i], all[i + uniform_index(rng, n - i)]);
        all.resize(sub_n);
      }
      Tree tree = grow_tree(bm, all, GradientCriterion{&grad, &hess}, gp, pick);
      all.resize(n);

      for (std::size_t i = 0; i < n; ++i) step[i] = tree.predict(train.row(i));
      const double before = m.staged_loss_.back();
      double scale = params.learning_rate, after = before;
      bool accepted = false;
      for (int halving = 0; halving < 20; ++halving, scale /= 2.0) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = margin[i] + scale * step[i];
        after = trial_loss();
        if (after <= before) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        m.staged_loss_.push_back(before);
        m.kept_.push_back(m.trees_.size());
        continue;
      }
      for (auto& node : tree.nodes)
        if (node.feature < 0) node.value *= scale;
      margin.swap(trial);
      ex.swap(trial_ex);
      m.staged_loss_.push_back(after);
      m.trees_.push_back(std::move(tree));
      m.kept_.push_back(m.trees_.size());
    }
    return m;
  }

  /// The model after the first `stages` stages; equal to a fit with that many
  /// trees and the same seed.
  BoostModel truncated(int stages) const {
    if (stages < 1 || static_cast<std::size_t>(stages) > kept_.size()) throw std::invalid_argument("truncated: stage count out of range");
    BoostModel m = *this;
    const auto s = static_cast<std::size_t>(stages);
    m.trees_.resize(kept_[s - 1]);
    m.kept_.resize(s);
    m.staged_loss_.resize(s + 1);
    return m;
  }

  double margin(std::span<const double> x) const {
    double f = base_;
    for (const auto& t : trees_) f += t.predict(x);
    return f;
  }
  double score(std::span<const double> x) const { return sigmoid(margin(x)); }

  /// Training loss before any tree and after each stage.
  const std::vector<double>& staged_loss() const { return staged_loss_; }
  const std::vector<Tree>& trees() const { return trees_; }
  std::size_t n_features() const { return n_features_; }

 private:
  double base_ = 0.0;
  std::vector<Tree> trees_;
  std::vector<double> staged_loss_;
  std::vector<std::size_t> kept_;  // trees kept after each stage
  std::size_t n_features_ = 0;
};

}  // namespace vdet::learn

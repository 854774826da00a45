#pragma once

// Stratified k-fold evaluation with inner grid search.
//
// For each outer fold the training part is split 80/20 (stratified) for model
// selection. SMOTE, when enabled, is fitted on the inner training part only,
// so the inner validation rows never have synthetic neighbours. The winning
// grid point (highest inner AUC, lowest index on ties) is refitted on the
// SMOTE-augmented outer training part and scored on the outer validation fold;
// the Youden threshold is read off that fold's ROC.

#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdet/common.hpp"
#include "vdet/dataset.hpp"
#include "vdet/learn/model.hpp"
#include "vdet/metrics.hpp"
#include "vdet/sampling.hpp"

namespace vdet::learn {

using Grid = std::vector<Hyperparameters>;

inline Grid default_grid(Algorithm a) {
  Grid g;
  switch (a) {
    case Algorithm::logistic:
      for (double s : {0.01, 0.1, 1.0, 10.0})
        for (Penalty p : {Penalty::l1, Penalty::l2}) g.push_back(LogisticParams{s, p});
      break;
    case Algorithm::random_forest:
      for (int t : {100, 300})
        for (std::optional<int> d : {std::optional<int>(4), std::optional<int>(8), std::optional<int>()})
          g.push_back(ForestParams{t, d});
      break;
    case Algorithm::gradient_boost:
      for (double r : {0.05, 0.1})
        for (int d : {3, 5})
          for (int t : {100, 300})
            for (double s : {0.8, 1.0}) g.push_back(BoostParams{r, d, t, s});
      break;
    case Algorithm::mlp:
      for (Activation act : {Activation::relu, Activation::tanh})
        for (double alpha : {1e-4, 1e-2})
          for (int b : {32, 128})
            for (double lr : {1e-3, 1e-2}) {
              MlpParams p;
              p.activation = act;
              p.alpha = alpha;
              p.batch_size = b;
              p.learning_rate = lr;
              g.push_back(p);
            }
      break;
  }
  return g;
}

/// Fold id per row. Each class is shuffled with its own stream and dealt
/// round-robin; the negative class continues the deal where positives ended
/// so fold sizes differ by at most one.
inline std::vector<int> stratified_folds(std::span<const int> targets, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_folds: need at least 2 folds");
  std::vector<int> fold(targets.size(), -1);
  std::size_t deal = 0;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (targets[i] == cls) idx.push_back(i);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls), 0xF01D));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) fold[i] = static_cast<int>(deal++ % static_cast<std::size_t>(k));
  }
  return fold;
}

/// Stratified holdout: returns (train, validation) index lists with
/// round(fraction * class size) rows of each class held out.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const int> targets,
                                                                                      double fraction,
                                                                                      std::uint64_t seed) {
  std::vector<std::size_t> train, val;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (targets[i] == cls) idx.push_back(i);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls), 0x401D));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto nv = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nv));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(nv), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

struct CvConfig {
  int folds = 5;
  std::optional<double> smote_ratio;  // empty = no balancing
  int smote_k = 5;
  std::uint64_t seed = 0;
  double inner_holdout = 0.2;
  unsigned threads = 1;
};

inline std::string balancing_label(const std::optional<double>& ratio) {
  if (!ratio) return "none";
  std::ostringstream os;
  os << *ratio;
  return os.str();
}

struct FoldResult {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_train_balanced = 0;
  std::size_t n_validation = 0;
  std::size_t validation_positives = 0;
  std::vector<double> inner_auc;  // per grid point
  std::size_t best_index = 0;
  Hyperparameters best;
  double auc = 0.0;
  double threshold = 0.0;
  double youden_j = 0.0;
  double recall = 0.0;
  double far = 0.0;
  RocCurve roc;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(std::span<const double> v) {
  MeanStd r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

struct CvResult {
  Algorithm algorithm = Algorithm::logistic;
  std::string balancing = "none";
  std::vector<FoldResult> folds;
  MeanStd recall, far, auc, threshold;
};

inline nlohmann::ordered_json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

inline nlohmann::ordered_json to_json(const CvResult& r) {
  nlohmann::ordered_json j;
  j["algorithm"] = to_string(r.algorithm);
  j["balancing"] = r.balancing;
  j["recall"] = to_json(r.recall);
  j["far"] = to_json(r.far);
  j["auc"] = to_json(r.auc);
  j["threshold"] = to_json(r.threshold);
  auto& folds = j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"n_train", f.n_train},
                     {"n_train_balanced", f.n_train_balanced},
                     {"n_validation", f.n_validation},
                     {"validation_positives", f.validation_positives},
                     {"recall", f.recall},
                     {"far", f.far},
                     {"auc", f.auc},
                     {"threshold", f.threshold},
                     {"youden_j", f.youden_j},
                     {"best_index", f.best_index},
                     {"best_hyperparameters", to_json(f.best)},
                     {"inner_auc", f.inner_auc}});
  }
  return j;
}

inline Dataset balance(const Dataset& d, const CvConfig& cfg, std::uint64_t stream) {
  if (!cfg.smote_ratio) return d;
  return smote(d, SmoteConfig{*cfg.smote_ratio, cfg.smote_k, derive_seed(cfg.seed, 0x5A07E, stream)}).data;
}

inline CvResult grid_search_cv(const Grid& grid, const Dataset& data, const CvConfig& cfg) {
  if (grid.empty()) throw std::invalid_argument("grid_search_cv: empty grid");
  const Algorithm alg = algorithm_of(grid.front());
  for (const auto& h : grid)
    if (algorithm_of(h) != alg) throw std::invalid_argument("grid_search_cv: grid mixes algorithms");
  require_trainable(data);

  const auto K = static_cast<std::size_t>(cfg.folds);
  const auto fold_of = stratified_folds(data.targets(), cfg.folds, cfg.seed);
  std::vector<Dataset> outer_train(K), outer_val(K), inner_train(K), inner_val(K);
  std::vector<FoldResult> results(K);
  for (std::size_t f = 0; f < K; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < data.rows(); ++i) (fold_of[i] == static_cast<int>(f) ? va : tr).push_back(i);
    outer_train[f] = data.subset(tr);
    outer_val[f] = data.subset(va);
    if (outer_val[f].count_positive() == 0 || outer_val[f].count_positive() == outer_val[f].rows())
      throw std::invalid_argument("grid_search_cv: fold " + std::to_string(f) + " lost a class; too few samples for " +
                                  std::to_string(cfg.folds) + " folds");
    const auto [itr, iva] = stratified_holdout(outer_train[f].targets(), cfg.inner_holdout, derive_seed(cfg.seed, f, 0x1AA));
    inner_train[f] = balance(outer_train[f].subset(itr), cfg, 2 * f);
    inner_val[f] = outer_train[f].subset(iva);
    results[f].fold = static_cast<int>(f);
    results[f].n_train = outer_train[f].rows();
    results[f].n_validation = outer_val[f].rows();
    results[f].validation_positives = outer_val[f].count_positive();
    results[f].inner_auc.assign(grid.size(), 0.0);
  }

  // Inner selection. Tree ensembles that differ only in size form one family:
  // it is fitted once at the largest size with the seed of its first member,
  // and smaller members are exact prefixes of that fit.
  std::vector<std::vector<std::size_t>> families;
  {
    std::map<std::string, std::size_t> family_of;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const std::string key = tree_count(grid[g]) ? describe(with_trees(grid[g], 0)) : std::to_string(g);
      const auto [it, added] = family_of.emplace(key, families.size());
      if (added) families.emplace_back();
      families[it->second].push_back(g);
    }
  }
  parallel_for(K * families.size(), cfg.threads, [&](std::size_t task) {
    const std::size_t f = task / families.size();
    const auto& members = families[task % families.size()];
    const std::uint64_t seed = derive_seed(cfg.seed, f, members.front());
    auto inner_auc = [&](const TrainedModel& m) { return roc_auc(m.score(inner_val[f]), inner_val[f].targets()).auc; };
    if (members.size() == 1) {
      results[f].inner_auc[members.front()] = inner_auc(fit(ModelSpec{grid[members.front()], seed}, inner_train[f]));
      return;
    }
    std::size_t largest = members.front();
    for (std::size_t g : members)
      if (*tree_count(grid[g]) > *tree_count(grid[largest])) largest = g;
    const auto full = fit(ModelSpec{grid[largest], seed}, inner_train[f]);
    for (std::size_t g : members) results[f].inner_auc[g] = inner_auc(g == largest ? full : full.truncated(*tree_count(grid[g])));
  });

  parallel_for(K, cfg.threads, [&](std::size_t f) {
    auto& r = results[f];
    r.best_index = static_cast<std::size_t>(std::max_element(r.inner_auc.begin(), r.inner_auc.end()) - r.inner_auc.begin());
    r.best = grid[r.best_index];
    const Dataset train = balance(outer_train[f], cfg, 2 * f + 1);
    r.n_train_balanced = train.rows();
    const auto model = fit(ModelSpec{r.best, derive_seed(cfg.seed, f, 0xBE57)}, train);
    const auto scores = model.score(outer_val[f]);
    auto roc = roc_auc(scores, outer_val[f].targets());
    const auto yj = youden_threshold(roc.curve);
    const auto rt = rates(confusion(scores, outer_val[f].targets(), yj.threshold));
    r.auc = roc.auc;
    r.threshold = yj.threshold;
    r.youden_j = yj.j;
    r.recall = rt.recall;
    r.far = rt.far;
    r.roc = std::move(roc.curve);
  });

  CvResult out;
  out.algorithm = alg;
  out.balancing = balancing_label(cfg.smote_ratio);
  out.folds = std::move(results);
  std::vector<double> rec, far, auc, thr;
  for (const auto& f : out.folds) {
    rec.push_back(f.recall);
    far.push_back(f.far);
    auc.push_back(f.auc);
    thr.push_back(f.threshold);
  }
  out.recall = mean_std(rec);
  out.far = mean_std(far);
  out.auc = mean_std(auc);
  out.threshold = mean_std(thr);
  return out;
}

}  // namespace vdet::learn

#pragma once

// Algorithm-agnostic model interface: hyperparameters, fit, score and the
// random forest importance report.

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vdet/dataset.hpp"
#include "vdet/learn/boosting.hpp"
#include "vdet/learn/forest.hpp"
#include "vdet/learn/logistic.hpp"
#include "vdet/learn/mlp.hpp"

namespace vdet::learn {

enum class Algorithm { logistic, random_forest, gradient_boost, mlp };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::logistic, Algorithm::random_forest, Algorithm::gradient_boost,
                                               Algorithm::mlp};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::logistic: return "logistic";
    case Algorithm::random_forest: return "random_forest";
    case Algorithm::gradient_boost: return "gradient_boost";
    case Algorithm::mlp: return "mlp";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : kAllAlgorithms)
    if (to_string(a) == s) return a;
  if (s == "lr") return Algorithm::logistic;
  if (s == "rf") return Algorithm::random_forest;
  if (s == "gbt" || s == "xgb") return Algorithm::gradient_boost;
  if (s == "ann") return Algorithm::mlp;
  throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

using Hyperparameters = std::variant<LogisticParams, ForestParams, BoostParams, MlpParams>;

inline Algorithm algorithm_of(const Hyperparameters& h) { return static_cast<Algorithm>(h.index()); }

inline nlohmann::ordered_json to_json(const Hyperparameters& h) {
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) {
          j["strength"] = p.strength;
          j["penalty"] = to_string(p.penalty);
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          j["trees"] = p.trees;
          j["max_depth"] = p.max_depth ? nlohmann::ordered_json(*p.max_depth) : nlohmann::ordered_json(nullptr);
        } else if constexpr (std::is_same_v<P, BoostParams>) {
          j["learning_rate"] = p.learning_rate;
          j["max_depth"] = p.max_depth;
          j["trees"] = p.trees;
          j["subsample"] = p.subsample;
        } else {
          j["activation"] = to_string(p.activation);
          j["alpha"] = p.alpha;
          j["batch_size"] = p.batch_size;
          j["learning_rate"] = p.learning_rate;
          j["hidden"] = p.hidden;
          j["epochs"] = p.epochs;
        }
      },
      h);
  return j;
}

inline std::string describe(const Hyperparameters& h) { return to_json(h).dump(); }

/// Ensemble size of forest and boosting settings; empty for the others.
inline std::optional<int> tree_count(const Hyperparameters& h) {
  if (const auto* f = std::get_if<ForestParams>(&h)) return f->trees;
  if (const auto* b = std::get_if<BoostParams>(&h)) return b->trees;
  return std::nullopt;
}

inline Hyperparameters with_trees(Hyperparameters h, int trees) {
  if (auto* f = std::get_if<ForestParams>(&h)) f->trees = trees;
  else if (auto* b = std::get_if<BoostParams>(&h)) b->trees = trees;
  else throw std::invalid_argument("with_trees: not a tree ensemble");
  return h;
}

struct ModelSpec {
  Hyperparameters params;
  std::uint64_t seed = 0;
  Algorithm algorithm() const { return algorithm_of(params); }
};

struct SchemaMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class TrainedModel {
 public:
  using State = std::variant<LogisticModel, ForestModel, BoostModel, MlpModel>;

  TrainedModel(State s, std::vector<std::string> names) : state_(std::move(s)), names_(std::move(names)) {}

  Algorithm algorithm() const { return static_cast<Algorithm>(state_.index()); }
  const State& state() const { return state_; }
  const std::vector<std::string>& feature_names() const { return names_; }

  double score(std::span<const double> x) const {
    const double s = std::visit([&](const auto& m) { return m.score(x); }, state_);
    return std::isfinite(s) ? std::clamp(s, 0.0, 1.0) : throw std::runtime_error("model produced a non-finite score");
  }

  /// Forest or boosting model cut back to its first `trees` trees (stages).
  TrainedModel truncated(int trees) const {
    if (const auto* f = std::get_if<ForestModel>(&state_)) return TrainedModel(f->truncated(trees), names_);
    if (const auto* b = std::get_if<BoostModel>(&state_)) return TrainedModel(b->truncated(trees), names_);
    throw std::invalid_argument("truncated: not a tree ensemble");
  }

  std::vector<double> score(const Dataset& rows) const {
    if (rows.feature_names() != names_) throw SchemaMismatch("score: feature schema differs from the training schema");
    std::vector<double> out(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = score(rows.row(i));
    return out;
  }

 private:
  State state_;
  std::vector<std::string> names_;
};

inline void require_trainable(const Dataset& train) {
  if (train.empty()) throw std::invalid_argument("fit: empty training set");
  const std::size_t pos = train.count_positive();
  if (pos == 0 || pos == train.rows()) throw std::invalid_argument("fit: training set has a single class");
  require_finite(train);
}

inline TrainedModel fit(const ModelSpec& spec, const Dataset& train, unsigned threads = 1) {
  require_trainable(train);
  auto state = std::visit(
      [&](const auto& p) -> TrainedModel::State {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) return LogisticModel::fit(train, p);
        else if constexpr (std::is_same_v<P, ForestParams>) return ForestModel::fit(train, p, spec.seed, threads);
        else if constexpr (std::is_same_v<P, BoostParams>) return BoostModel::fit(train, p, spec.seed);
        else return MlpModel::fit(train, p, spec.seed);
      },
      spec.params);
  return TrainedModel(std::move(state), train.feature_names());
}

struct Importance {
  std::string feature;
  double importance = 0.0;
};

/// Impurity-decrease importances, sorted descending (ties by column order).
inline std::vector<Importance> rf_importance(const TrainedModel& model) {
  const auto* rf = std::get_if<ForestModel>(&model.state());
  if (!rf) throw std::invalid_argument("rf_importance: model is not a random forest");
  std::vector<Importance> out;
  for (std::size_t f = 0; f < rf->importance().size(); ++f) out.push_back({model.feature_names()[f], rf->importance()[f]});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.importance > b.importance; });
  return out;
}

}  // namespace vdet::learn

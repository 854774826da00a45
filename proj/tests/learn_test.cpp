#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "vdet/learn/cv.hpp"
#include "vdet/learn/model.hpp"

using namespace vdet;
using namespace vdet::learn;

namespace {

// Labels drawn from a logistic model in the first two columns.
Dataset synthetic(std::uint64_t seed, std::size_t n, double pos_shift = -1.0) {
  Dataset d({"a", "b", "c", "flag"}, {false, false, false, true});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = g(rng), b = 3.0 * g(rng) + 5.0, c = g(rng), flag = u(rng) < 0.3 ? 1.0 : 0.0;
    const double z = 2.0 * a - 0.5 * (b - 5.0) + 0.8 * flag + pos_shift;
    const double row[] = {a, b, c, flag};
    d.append(row, u(rng) < sigmoid(z) ? 1 : 0);
  }
  return d;
}

double auc_on(const TrainedModel& m, const Dataset& d) { return roc_auc(m.score(d), d.targets()).auc; }

}  // namespace

TEST(Logistic, GradientMatchesCentralDifferences) {
  const auto d = synthetic(1, 300);
  const Standardizer z = Standardizer::fit(d);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.5);
  for (Penalty pen : {Penalty::l2, Penalty::l1}) {
    const LogisticObjective obj(z.transform(d), d.targets(), d.cols(), 0.05, pen);
    for (int k = 0; k < 20; ++k) {
      std::vector<double> theta(obj.dim());
      for (auto& t : theta) t = g(rng);
      const auto grad = obj.gradient(theta);
      double num2 = 0.0, den2 = 0.0;
      for (std::size_t c = 0; c < theta.size(); ++c) {
        const double h = 1e-5;
        auto tp = theta, tm = theta;
        tp[c] += h;
        tm[c] -= h;
        const double fd = (obj.smooth(tp) - obj.smooth(tm)) / (2 * h);
        num2 += (fd - grad[c]) * (fd - grad[c]);
        den2 += grad[c] * grad[c];
      }
      EXPECT_LT(std::sqrt(num2) / std::max(std::sqrt(den2), 1e-12), 1e-4);
    }
  }
}

TEST(Logistic, HessianMatchesGradientDifferences) {
  const auto d = synthetic(2, 200);
  const LogisticObjective obj(Standardizer::fit(d).transform(d), d.targets(), d.cols(), 0.01, Penalty::l2);
  std::vector<double> theta{0.3, -0.2, 0.1, 0.5, -0.4};
  const auto H = obj.hessian(theta);
  for (std::size_t c = 0; c < theta.size(); ++c) {
    auto tp = theta, tm = theta;
    tp[c] += 1e-5;
    tm[c] -= 1e-5;
    const auto gp = obj.gradient(tp), gm = obj.gradient(tm);
    for (std::size_t r = 0; r < theta.size(); ++r) EXPECT_NEAR(H[r * theta.size() + c], (gp[r] - gm[r]) / 2e-5, 1e-7);
  }
}

TEST(Logistic, ConvergesToStationaryPoint) {
  const auto d = synthetic(3, 500);
  for (Penalty pen : {Penalty::l2, Penalty::l1})
    for (double strength : {0.01, 1.0, 10.0}) {
      const auto m = LogisticModel::fit(d, {strength, pen});
      EXPECT_TRUE(m.report().converged);
      EXPECT_LT(m.report().optimality, 1e-5);
      // Independent check of stationarity on the returned coefficients.
      const LogisticObjective obj(Standardizer::fit(d).transform(d), d.targets(), d.cols(),
                                  1.0 / (strength * static_cast<double>(d.rows())), pen);
      const auto& th = m.coefficients();
      EXPECT_LT(obj.optimality(th, obj.gradient(th)), 1e-5);
    }
}

TEST(Logistic, StrongL1ZeroesCoefficients) {
  const auto d = synthetic(3, 500);
  const auto m = LogisticModel::fit(d, {1e-4, Penalty::l1});
  for (std::size_t c = 0; c < m.n_features(); ++c) EXPECT_EQ(m.coefficients()[c], 0.0);
}

TEST(Boosting, StagedLossNeverIncreases) {
  const auto d = synthetic(4, 400);
  for (double sub : {0.8, 1.0}) {
    const auto m = BoostModel::fit(d, {0.1, 3, 60, sub}, 7);
    const auto& loss = m.staged_loss();
    ASSERT_EQ(loss.size(), 61u);
    for (std::size_t t = 1; t < loss.size(); ++t) EXPECT_LE(loss[t], loss[t - 1] + 1e-15) << t;
    EXPECT_LT(loss.back(), 0.8 * loss.front());
  }
}

TEST(Boosting, StartsFromLogOddsPrior) {
  const auto d = synthetic(4, 400);
  const auto m = BoostModel::fit(d, {0.1, 3, 1, 1.0}, 7);
  const double p = static_cast<double>(d.count_positive()) / static_cast<double>(d.rows());
  EXPECT_NEAR(m.staged_loss().front(), -(p * std::log(p) + (1 - p) * std::log(1 - p)), 1e-12);
  EXPECT_THROW(BoostModel::fit(d, {0.1, 3, 0, 1.0}, 7), std::invalid_argument);
}

TEST(Boosting, TruncatedEqualsSmallerFit) {
  const auto d = synthetic(4, 300);
  const auto full = BoostModel::fit(d, {0.1, 3, 40, 0.8}, 7);
  const auto small = BoostModel::fit(d, {0.1, 3, 15, 0.8}, 7);
  const auto cut = full.truncated(15);
  ASSERT_EQ(cut.trees().size(), small.trees().size());
  EXPECT_EQ(cut.staged_loss(), small.staged_loss());
  for (std::size_t i = 0; i < d.rows(); ++i) ASSERT_TRUE(test::same_bits(cut.score(d.row(i)), small.score(d.row(i))));
  EXPECT_THROW(full.truncated(41), std::invalid_argument);
}

TEST(Mlp, OneEpochReducesLoss) {
  const auto d = synthetic(5, 600);
  for (Activation act : {Activation::relu, Activation::tanh}) {
    MlpParams p;
    p.activation = act;
    p.learning_rate = 1e-2;
    auto m = MlpModel::init(d, p, 9);
    const double before = m.loss(d);
    m.train_epochs(d, 1, 9);
    EXPECT_EQ(m.epochs_done(), 1);
    EXPECT_LT(m.loss(d), before);
  }
}

TEST(Mlp, FitIsSeedDeterministic) {
  const auto d = synthetic(5, 300);
  MlpParams p;
  p.epochs = 3;
  const auto a = MlpModel::fit(d, p, 1), b = MlpModel::fit(d, p, 1);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_TRUE(test::same_bits(a.score(d.row(i)), b.score(d.row(i))));
}

TEST(Forest, IdenticalAcrossThreadCounts) {
  const auto d = synthetic(6, 400);
  const ForestParams p{40, 6};
  const auto serial = ForestModel::fit(d, p, 21, 1);
  for (unsigned threads : {2u, 4u}) {
    const auto par = ForestModel::fit(d, p, 21, threads);
    for (std::size_t i = 0; i < d.rows(); ++i) ASSERT_TRUE(test::same_bits(serial.score(d.row(i)), par.score(d.row(i))));
    for (std::size_t f = 0; f < d.cols(); ++f) EXPECT_TRUE(test::same_bits(serial.importance()[f], par.importance()[f]));
  }
}

TEST(Forest, TruncatedEqualsSmallerFit) {
  const auto d = synthetic(6, 300);
  const auto full = ForestModel::fit(d, {30, 5}, 3);
  const auto small = ForestModel::fit(d, {12, 5}, 3);
  const auto cut = full.truncated(12);
  for (std::size_t i = 0; i < d.rows(); ++i) ASSERT_TRUE(test::same_bits(cut.score(d.row(i)), small.score(d.row(i))));
  for (std::size_t f = 0; f < d.cols(); ++f) EXPECT_TRUE(test::same_bits(cut.importance()[f], small.importance()[f]));
  EXPECT_THROW(full.truncated(0), std::invalid_argument);
}

TEST(Forest, ImportanceNormalizedAndFavoursSignal) {
  const auto d = synthetic(6, 800);
  const auto model = fit({ForestParams{100, std::nullopt}, 3}, d);
  const auto imp = rf_importance(model);
  double total = 0.0;
  for (const auto& i : imp) total += i.importance;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(imp.front().feature, "a");
  for (std::size_t k = 1; k < imp.size(); ++k) EXPECT_GE(imp[k - 1].importance, imp[k].importance);
}

TEST(Models, AllAlgorithmsLearnSignal) {
  const auto train = synthetic(7, 800), test_set = synthetic(8, 400);
  const Hyperparameters params[] = {LogisticParams{1.0, Penalty::l2}, ForestParams{100, 8}, BoostParams{0.1, 3, 100, 1.0},
                                    MlpParams{}};
  for (const auto& p : params) {
    const auto m = fit({p, 11}, train);
    EXPECT_GT(auc_on(m, test_set), 0.8) << to_string(algorithm_of(p));
  }
}

TEST(Models, ScoreRejectsSchemaMismatch) {
  const auto d = synthetic(7, 100);
  const auto m = fit({LogisticParams{}, 1}, d);
  Dataset other({"x", "b", "c", "flag"}, {});
  const double row[] = {0, 0, 0, 0};
  other.append(row, 0);
  EXPECT_THROW(m.score(other), SchemaMismatch);
}

TEST(Folds, StratifiedAndDeterministic) {
  std::vector<int> y(503, 0);
  for (std::size_t i = 0; i < 71; ++i) y[i * 7] = 1;
  const auto f = stratified_folds(y, 5, 3);
  EXPECT_EQ(f, stratified_folds(y, 5, 3));
  std::array<int, 5> pos{}, all{};
  for (std::size_t i = 0; i < y.size(); ++i) {
    ASSERT_GE(f[i], 0);
    ASSERT_LT(f[i], 5);
    ++all[static_cast<std::size_t>(f[i])];
    pos[static_cast<std::size_t>(f[i])] += y[i];
  }
  for (int k = 0; k < 5; ++k) {
    EXPECT_LE(std::abs(pos[static_cast<std::size_t>(k)] - 71 / 5), 1);
    EXPECT_LE(std::abs(all[static_cast<std::size_t>(k)] - 503 / 5), 1);
  }
}

TEST(GridSearch, DeterministicAcrossThreadsAndReportsEveryFold) {
  const auto d = synthetic(9, 500, -3.0);
  const Grid grid{LogisticParams{0.1, Penalty::l2}, LogisticParams{1.0, Penalty::l1}};
  CvConfig cfg;
  cfg.smote_ratio = 0.5;
  cfg.seed = 5;
  const auto a = grid_search_cv(grid, d, cfg);
  cfg.threads = 3;
  const auto b = grid_search_cv(grid, d, cfg);
  ASSERT_EQ(a.folds.size(), 5u);
  std::size_t validated = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(a.folds[k].best_index, b.folds[k].best_index);
    EXPECT_TRUE(test::same_bits(a.folds[k].auc, b.folds[k].auc));
    EXPECT_TRUE(test::same_bits(a.folds[k].threshold, b.folds[k].threshold));
    EXPECT_GT(a.folds[k].n_train_balanced, a.folds[k].n_train);
    validated += a.folds[k].n_validation;
  }
  EXPECT_EQ(validated, d.rows());
  EXPECT_GT(a.auc.mean, 0.8);
}

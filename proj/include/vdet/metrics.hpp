#pragma once

// Confusion counts, recall / false alarm rate, ROC curve, AUC and the Youden
// operating threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace vdet {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Predicted positive iff score >= threshold.
inline ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw std::invalid_argument("confusion: scores and labels differ in length");
  ConfusionCounts cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++cm.tp;
    else if (pred) ++cm.fp;
    else if (pos) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

struct UndefinedRate : std::domain_error {
  using std::domain_error::domain_error;
};

struct Rates {
  double recall = 0.0;
  double far = 0.0;
};

inline Rates rates(const ConfusionCounts& cm) {
  if (cm.tp + cm.fn == 0) throw UndefinedRate("recall undefined: no positive samples");
  if (cm.fp + cm.tn == 0) throw UndefinedRate("false alarm rate undefined: no negative samples");
  return {static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn),
          static_cast<double>(cm.fp) / static_cast<double>(cm.fp + cm.tn)};
}

struct RocPoint {
  double far = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
};

/// Points run from (0,0) to (1,1); thresholds are non-increasing. The first
/// point's threshold sits just above the highest score so it predicts nothing.
struct RocCurve {
  std::vector<RocPoint> points;
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

/// Sweeps the threshold over every distinct score. AUC is the trapezoid under
/// recall(far); the area is accumulated in integer pair counts so ties score
/// one half, identical to the Mann-Whitney statistic.
inline RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1 ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult r;
  const double P = static_cast<double>(pos), N = static_cast<double>(neg);
  r.curve.points.push_back({0.0, 0.0, std::nextafter(scores[order[0]], std::numeric_limits<double>::infinity())});

  std::uint64_t tp = 0, fp = 0;
  std::uint64_t area2 = 0;  // twice the count of correctly ordered pairs
  for (std::size_t i = 0; i < n;) {
    const double s = scores[order[i]];
    const std::uint64_t tp0 = tp, fp0 = fp;
    for (; i < n && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    area2 += (fp - fp0) * (tp + tp0);
    r.curve.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, s});
  }
  r.auc = static_cast<double>(area2) / (2.0 * P * N);
  return r;
}

struct YoudenChoice {
  double threshold = 0.0;
  double j = 0.0;
  double far = 0.0;
  double recall = 0.0;
  std::size_t index = 0;
};

/// Point maximizing recall - far. Ties go to the higher threshold.
inline YoudenChoice youden_threshold(const RocCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("youden_threshold: empty curve");
  YoudenChoice best;
  bool have = false;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    const double j = p.recall - p.far;
    if (!have || j > best.j || (j == best.j && p.threshold > best.threshold)) {
      best = {p.threshold, j, p.far, p.recall, i};
      have = true;
    }
  }
  return best;
}

}  // namespace vdet

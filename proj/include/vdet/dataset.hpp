#pragma once

// Row-major feature matrix with binary targets and per-row provenance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vdet {

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> feature_names, std::vector<bool> binary_columns)
      : names_(std::move(feature_names)), binary_(std::move(binary_columns)) {
    if (binary_.empty()) binary_.assign(names_.size(), false);
    if (binary_.size() != names_.size()) throw std::invalid_argument("Dataset: binary mask size differs from column count");
  }

  std::size_t rows() const { return target_.size(); }
  std::size_t cols() const { return names_.size(); }
  bool empty() const { return target_.empty(); }

  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<bool>& binary_columns() const { return binary_; }
  const std::vector<int>& targets() const { return target_; }
  const std::vector<std::string>& trip_ids() const { return trip_id_; }
  const std::vector<std::string>& event_ids() const { return event_id_; }
  const std::vector<double>& values() const { return values_; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols(), cols()}; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  int target(std::size_t i) const { return target_[i]; }

  void reserve(std::size_t n) {
    values_.reserve(n * cols());
    target_.reserve(n);
    trip_id_.reserve(n);
    event_id_.reserve(n);
  }

  void append(std::span<const double> x, int y, std::string trip_id = {}, std::string event_id = {}) {
    if (x.size() != cols()) throw std::invalid_argument("Dataset::append: row width differs from column count");
    if (y != 0 && y != 1) throw std::invalid_argument("Dataset::append: target must be 0 or 1");
    values_.insert(values_.end(), x.begin(), x.end());
    target_.push_back(y);
    trip_id_.push_back(std::move(trip_id));
    event_id_.push_back(std::move(event_id));
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out(names_, binary_);
    out.reserve(indices.size());
    for (std::size_t i : indices) out.append(row(i), target_[i], trip_id_[i], event_id_[i]);
    return out;
  }

  Dataset with_targets(std::vector<int> targets) const {
    if (targets.size() != rows()) throw std::invalid_argument("Dataset::with_targets: size mismatch");
    Dataset out = *this;
    out.target_ = std::move(targets);
    return out;
  }

  std::size_t count_positive() const { return static_cast<std::size_t>(std::count(target_.begin(), target_.end(), 1)); }

  bool same_schema(const Dataset& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::vector<bool> binary_;
  std::vector<double> values_;
  std::vector<int> target_;
  std::vector<std::string> trip_id_;
  std::vector<std::string> event_id_;
};

struct ColumnSummary {
  std::string name;
  double mean = 0.0;
  double std = 0.0;  // sample std (n-1); 0 for fewer than 2 rows
  double min = 0.0;
  double max = 0.0;
};

/// Per-column mean / std / min / max over the whole matrix.
inline std::vector<ColumnSummary> summarize_columns(const Dataset& d) {
  std::vector<ColumnSummary> out;
  const std::size_t n = d.rows();
  for (std::size_t c = 0; c < d.cols(); ++c) {
    ColumnSummary s;
    s.name = d.feature_names()[c];
    if (n > 0) {
      s.min = std::numeric_limits<double>::infinity();
      s.max = -s.min;
      double sum = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double v = d.at(r, c);
        sum += v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
      }
      s.mean = sum / static_cast<double>(n);
      if (n > 1) {
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) ss += (d.at(r, c) - s.mean) * (d.at(r, c) - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(n - 1));
      }
    }
    out.push_back(s);
  }
  return out;
}

/// z-score parameters fitted on one dataset and applied to others.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& d) {
    Standardizer s;
    const std::size_t n = d.rows(), m = d.cols();
    s.mean.assign(m, 0.0);
    s.scale.assign(m, 1.0);
    if (n == 0) return s;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) s.mean[c] += d.at(r, c);
    for (auto& v : s.mean) v /= static_cast<double>(n);
    std::vector<double> ss(m, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) ss[c] += (d.at(r, c) - s.mean[c]) * (d.at(r, c) - s.mean[c]);
    for (std::size_t c = 0; c < m; ++c) {
      const double sd = std::sqrt(ss[c] / static_cast<double>(n));
      s.scale[c] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  void apply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = (x[c] - mean[c]) / scale[c];
  }

  std::vector<double> transform(const Dataset& d) const {
    std::vector<double> out(d.rows() * d.cols());
    for (std::size_t r = 0; r < d.rows(); ++r) apply(d.row(r), std::span<double>(out.data() + r * d.cols(), d.cols()));
    return out;
  }
};

inline void require_finite(const Dataset& d) {
  for (double v : d.values())
    if (!std::isfinite(v)) throw std::invalid_argument("dataset contains non-finite feature values");
}

}  // namespace vdet

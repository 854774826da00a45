#pragma once

// Penalized logistic regression on standardized features, fitted by
// proximal Newton: each step minimizes the local quadratic model plus the
// penalty by coordinate descent, then backtracks on the true objective.
//
// Objective over theta = (w, b):
//   mean log-loss + lambda/2 |w|^2   (L2)
//   mean log-loss + lambda   |w|_1   (L1)
// with lambda = 1 / (strength * n), so strength behaves like an inverse
// regularization constant. The intercept is never penalized.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "vdet/dataset.hpp"
#include "vdet/learn/boosting.hpp"

namespace vdet::learn {

enum class Penalty { l1, l2 };

inline std::string_view to_string(Penalty p) { return p == Penalty::l1 ? "l1" : "l2"; }
inline Penalty parse_penalty(std::string_view s) {
  if (s == "l1" || s == "L1") return Penalty::l1;
  if (s == "l2" || s == "L2") return Penalty::l2;
  throw std::invalid_argument("unknown penalty '" + std::string(s) + "'");
}

struct LogisticParams {
  double strength = 1.0;
  Penalty penalty = Penalty::l2;
  double tolerance = 1e-6;  // on the minimum-norm subgradient
  int max_iter = 200;       // Newton steps
};

/// The smooth part of the objective on a standardized design matrix. For L2
/// this is the whole objective; for L1 the penalty is handled by the prox.
class LogisticObjective {
 public:
  LogisticObjective(std::vector<double> x, std::vector<int> y, std::size_t cols, double lambda, Penalty penalty)
      : x_(std::move(x)), y_(std::move(y)), cols_(cols), lambda_(lambda), penalty_(penalty), margin_(y_.size()) {}

  std::size_t dim() const { return cols_ + 1; }
  std::size_t rows() const { return y_.size(); }
  double lambda() const { return lambda_; }
  Penalty penalty() const { return penalty_; }

  /// Smooth value; fills grad (size dim()) when non-null.
  double smooth(std::span<const double> theta, std::vector<double>* grad = nullptr) const {
    const std::size_t n = rows();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = x_.data() + i * cols_;
      double z = theta[cols_];
      for (std::size_t c = 0; c < cols_; ++c) z += theta[c] * xi[c];
      margin_[i] = z;
      loss += softplus(z) - (y_[i] == 1 ? z : 0.0);
    }
    loss /= static_cast<double>(n);
    double reg = 0.0;
    if (penalty_ == Penalty::l2)
      for (std::size_t c = 0; c < cols_; ++c) reg += 0.5 * lambda_ * theta[c] * theta[c];
    if (grad) {
      grad->assign(dim(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = sigmoid(margin_[i]) - y_[i];
        const double* xi = x_.data() + i * cols_;
        for (std::size_t c = 0; c < cols_; ++c) (*grad)[c] += r * xi[c];
        (*grad)[cols_] += r;
      }
      for (auto& g : *grad) g /= static_cast<double>(n);
      if (penalty_ == Penalty::l2)
        for (std::size_t c = 0; c < cols_; ++c) (*grad)[c] += lambda_ * theta[c];
    }
    return loss + reg;
  }

  /// Full objective including a non-smooth L1 term.
  double value(std::span<const double> theta) const {
    double v = smooth(theta);
    if (penalty_ == Penalty::l1)
      for (std::size_t c = 0; c < cols_; ++c) v += lambda_ * std::abs(theta[c]);
    return v;
  }

  std::vector<double> gradient(std::span<const double> theta) const {
    std::vector<double> g;
    smooth(theta, &g);
    return g;
  }

  /// Hessian of the smooth part at theta, row-major dim() x dim().
  std::vector<double> hessian(std::span<const double> theta) const {
    const std::size_t d = dim(), n = rows();
    std::vector<double> H(d * d, 0.0), xi1(d);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = x_.data() + i * cols_;
      double z = theta[cols_];
      for (std::size_t c = 0; c < cols_; ++c) z += theta[c] * xi[c];
      const double p = sigmoid(z), w = p * (1.0 - p);
      std::copy(xi, xi + cols_, xi1.begin());
      xi1[cols_] = 1.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double wa = w * xi1[a];
        for (std::size_t b = a; b < d; ++b) H[a * d + b] += wa * xi1[b];
      }
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        H[a * d + b] /= static_cast<double>(n);
        H[b * d + a] = H[a * d + b];
      }
    if (penalty_ == Penalty::l2)
      for (std::size_t c = 0; c < cols_; ++c) H[c * d + c] += lambda_;
    return H;
  }

  /// Norm of the smallest element of the objective's subdifferential; zero
  /// exactly at the optimum.
  double optimality(std::span<const double> theta, std::span<const double> grad) const {
    double s = 0.0;
    for (std::size_t c = 0; c < dim(); ++c) {
      double r = grad[c];
      if (penalty_ == Penalty::l1 && c < cols_) {
        if (theta[c] != 0.0) r += std::copysign(lambda_, theta[c]);
        else r = std::max(std::abs(r) - lambda_, 0.0);
      }
      s += r * r;
    }
    return std::sqrt(s);
  }

  /// Proximal step from point v with step 1/L.
  void prox(std::span<const double> v, double L, std::span<double> out) const {
    for (std::size_t c = 0; c < dim(); ++c) out[c] = v[c];
    if (penalty_ != Penalty::l1) return;
    const double t = lambda_ / L;
    for (std::size_t c = 0; c < cols_; ++c) {
      const double a = std::abs(v[c]) - t;
      out[c] = a > 0.0 ? std::copysign(a, v[c]) : 0.0;
    }
  }

 private:
  std::vector<double> x_;
  std::vector<int> y_;
  std::size_t cols_;
  double lambda_;
  Penalty penalty_;
  mutable std::vector<double> margin_;
};

struct SolverReport {
  int iterations = 0;
  double optimality = 0.0;  // minimum-norm subgradient at the returned point
  bool converged = false;
};

namespace detail {

/// argmin_d g.d + d.H.d/2 + lambda |theta_w + d_w|_1 (L1 only on weights) by
/// cyclic coordinate descent.
inline std::vector<double> newton_direction(const std::vector<double>& H, std::span<const double> g, std::span<const double> theta,
                                            double lambda, bool l1, std::size_t cols) {
  const std::size_t d = g.size();
  std::vector<double> dir(d, 0.0), Hd(d, 0.0);
  for (int sweep = 0; sweep < 500; ++sweep) {
    double change = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double hcc = H[c * d + c];
      if (!(hcc > 0.0)) continue;
      const double grad_c = g[c] + Hd[c];  // derivative of the quadratic along c
      double next;
      if (l1 && c < cols) {
        const double u = theta[c] + dir[c] - grad_c / hcc;  // unpenalized coordinate minimizer
        const double a = std::abs(u) - lambda / hcc;
        next = (a > 0.0 ? std::copysign(a, u) : 0.0) - theta[c];
      } else {
        next = dir[c] - grad_c / hcc;
      }
      const double delta = next - dir[c];
      if (delta == 0.0) continue;
      dir[c] = next;
      for (std::size_t r = 0; r < d; ++r) Hd[r] += H[r * d + c] * delta;
      change = std::max(change, std::abs(delta) * std::sqrt(hcc));
    }
    if (change < 1e-13) break;
  }
  return dir;
}

}  // namespace detail

inline SolverReport minimize_newton(const LogisticObjective& obj, std::vector<double>& theta, double tol, int max_iter) {
  const std::size_t d = obj.dim();
  const bool l1 = obj.penalty() == Penalty::l1;
  const double lambda = obj.lambda();
  auto l1_norm = [&](std::span<const double> t) {
    double s = 0.0;
    if (l1)
      for (std::size_t c = 0; c + 1 < d; ++c) s += std::abs(t[c]);
    return lambda * s;
  };
  SolverReport rep;
  std::vector<double> g, cand(d);
  double f = obj.smooth(theta, &g);
  for (int it = 0; it < max_iter; ++it) {
    rep.optimality = obj.optimality(theta, g);
    if (rep.optimality < tol) {
      rep.converged = true;
      return rep;
    }
    const auto H = obj.hessian(theta);
    const auto dir = detail::newton_direction(H, g, theta, lambda, l1, d - 1);
    std::vector<double> full(d);
    for (std::size_t c = 0; c < d; ++c) full[c] = theta[c] + dir[c];
    double decrease = l1_norm(full) - l1_norm(theta);
    for (std::size_t c = 0; c < d; ++c) decrease += g[c] * dir[c];
    const double F = f + l1_norm(theta);
    double step = 1.0, f_cand = f;
    bool accepted = false;
    for (int k = 0; k < 50; ++k, step /= 2.0) {
      for (std::size_t c = 0; c < d; ++c) cand[c] = theta[c] + step * dir[c];
      f_cand = obj.smooth(cand);
      if (f_cand + l1_norm(cand) <= F + 1e-4 * step * decrease) {
        accepted = true;
        break;
      }
    }
    rep.iterations = it + 1;
    if (!accepted) break;  // no further progress at double precision
    theta = cand;
    f = obj.smooth(theta, &g);
  }
  rep.optimality = obj.optimality(theta, g);
  rep.converged = rep.optimality < tol;
  return rep;
}

class LogisticModel {
 public:
  static LogisticModel fit(const Dataset& train, const LogisticParams& params) {
    if (!(params.strength > 0.0)) throw std::invalid_argument("logistic strength must be positive");
    LogisticModel m;
    m.z_ = Standardizer::fit(train);
    const double lambda = 1.0 / (params.strength * static_cast<double>(train.rows()));
    const LogisticObjective obj(m.z_.transform(train), train.targets(), train.cols(), lambda, params.penalty);
    m.theta_.assign(obj.dim(), 0.0);
    m.report_ = minimize_newton(obj, m.theta_, params.tolerance, params.max_iter);
    return m;
  }

  double margin(std::span<const double> x) const {
    const std::size_t F = theta_.size() - 1;
    double z = theta_[F];
    for (std::size_t c = 0; c < F; ++c) z += theta_[c] * (x[c] - z_.mean[c]) / z_.scale[c];
    return z;
  }
  double score(std::span<const double> x) const { return sigmoid(margin(x)); }

  /// Coefficients on the standardized scale; the last entry is the intercept.
  const std::vector<double>& coefficients() const { return theta_; }
  const SolverReport& report() const { return report_; }
  std::size_t n_features() const { return theta_.size() - 1; }

 private:
  Standardizer z_;
  std::vector<double> theta_;
  SolverReport report_;
};

}  // namespace vdet::learn

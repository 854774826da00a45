#pragma once

// One-hidden-layer perceptron with a sigmoid output, trained on mini-batches
// with Adam in single precision. alpha is an L2 penalty applied to the
// weights (not biases), scaled by the batch size.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/dataset.hpp"
#include "vdet/learn/boosting.hpp"

namespace vdet::learn {

enum class Activation { relu, tanh };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

struct MlpParams {
  Activation activation = Activation::relu;
  double alpha = 1e-4;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int hidden = 64;
  int epochs = 20;
};

class MlpModel {
 public:
  using real = float;  // network arithmetic; inputs and scores stay double

  /// Weights initialized but untrained (Glorot uniform, zero biases).
  static MlpModel init(const Dataset& train, const MlpParams& p, std::uint64_t seed) {
    if (p.hidden < 1 || p.batch_size < 1 || p.epochs < 0) throw std::invalid_argument("invalid MLP shape parameters");
    if (!(p.learning_rate > 0.0) || p.alpha < 0.0) throw std::invalid_argument("invalid MLP rate or alpha");
    MlpModel m;
    m.p_ = p;
    m.F_ = train.cols();
    m.H_ = static_cast<std::size_t>(p.hidden);
    m.z_ = Standardizer::fit(train);
    m.theta_.assign(m.H_ * m.F_ + 2 * m.H_ + 1, 0.0f);
    Rng rng(derive_seed(seed, 0xA11));
    const double f = p.activation == Activation::relu ? std::sqrt(2.0) : 1.0;
    const double lim1 = f * std::sqrt(6.0 / static_cast<double>(m.F_ + m.H_));
    const double lim2 = f * std::sqrt(6.0 / static_cast<double>(m.H_ + 1));
    for (std::size_t q = 0; q < m.H_ * m.F_; ++q) m.w1()[q] = static_cast<real>((2.0 * uniform01(rng) - 1.0) * lim1);
    for (std::size_t h = 0; h < m.H_; ++h) m.w2()[h] = static_cast<real>((2.0 * uniform01(rng) - 1.0) * lim2);
    return m;
  }

  static MlpModel fit(const Dataset& train, const MlpParams& p, std::uint64_t seed) {
    MlpModel m = init(train, p, seed);
    m.train_epochs(train, p.epochs, seed);
    return m;
  }

  /// Runs further epochs; epoch e shuffles with stream derive_seed(seed, e).
  void train_epochs(const Dataset& train, int epochs, std::uint64_t seed) {
    const std::size_t n = train.rows();
    const std::vector<double> Xd = z_.transform(train);
    const std::vector<real> X(Xd.begin(), Xd.end());
    const auto& y = train.targets();
    const std::size_t B = std::min<std::size_t>(static_cast<std::size_t>(p_.batch_size), n);
    std::vector<std::size_t> order(n);

    const std::size_t P = theta_.size(), W1 = H_ * F_;
    if (m_.size() != P) {
      m_.assign(P, 0.0f);
      v_.assign(P, 0.0f);
    }
    std::vector<real> grad(P), hidden(H_), pre(H_), dpre(H_);
    constexpr real beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    const real lr = static_cast<real>(p_.learning_rate);

    for (int e = 0; e < epochs; ++e) {
      std::iota(order.begin(), order.end(), 0);
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epochs_done_ + 1)));
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += B) {
        const std::size_t end = std::min(n, start + B);
        const real bs = static_cast<real>(end - start);
        const real decay = static_cast<real>(p_.alpha) / bs;
        std::fill(grad.begin(), grad.end(), 0.0f);
        real* gw1 = grad.data();
        real* gb1 = gw1 + W1;
        real* gw2 = gb1 + H_;
        real& gb2 = grad[P - 1];
        const real* w2v = w2();
        for (std::size_t k = start; k < end; ++k) {
          const std::size_t i = order[k];
          const real* xi = X.data() + i * F_;
          const real out = static_cast<real>(sigmoid(logit(xi, pre, hidden)));
          const real delta = (out - static_cast<real>(y[i])) / bs;
          gb2 += delta;
          for (std::size_t h = 0; h < H_; ++h) {
            gw2[h] += delta * hidden[h];
            dpre[h] = delta * w2v[h] * activation_grad(pre[h], hidden[h]);
            gb1[h] += dpre[h];
          }
          for (std::size_t c = 0; c < F_; ++c) {
            const real xc = xi[c];
            real* col = gw1 + c * H_;
            for (std::size_t h = 0; h < H_; ++h) col[h] += dpre[h] * xc;
          }
        }
        for (std::size_t q = 0; q < W1; ++q) gw1[q] += decay * theta_[q];
        for (std::size_t h = 0; h < H_; ++h) gw2[h] += decay * w2v[h];

        ++steps_;
        const real c1 = static_cast<real>(1.0 - std::pow(0.9, static_cast<double>(steps_)));
        const real c2 = static_cast<real>(1.0 - std::pow(0.999, static_cast<double>(steps_)));
        real* th = theta_.data();
        real* mv = m_.data();
        real* vv = v_.data();
        const real* gv = grad.data();
        for (std::size_t q = 0; q < P; ++q) {
          mv[q] = beta1 * mv[q] + (1.0f - beta1) * gv[q];
          vv[q] = beta2 * vv[q] + (1.0f - beta2) * gv[q] * gv[q];
          th[q] -= lr * (mv[q] / c1) / (std::sqrt(vv[q] / c2) + eps);
        }
      }
      ++epochs_done_;
    }
  }

  double score(std::span<const double> x) const {
    std::vector<double> xs(F_);
    z_.apply(x, xs);
    const std::vector<real> xr(xs.begin(), xs.end());
    std::vector<real> pre(H_), hidden(H_);
    return sigmoid(logit(xr.data(), pre, hidden));
  }

  /// Mean log-loss (without the penalty) over a dataset.
  double loss(const Dataset& d) const {
    double s = 0.0;
    std::vector<double> xs(F_);
    std::vector<real> xr(F_), pre(H_), hidden(H_);
    for (std::size_t i = 0; i < d.rows(); ++i) {
      z_.apply(d.row(i), xs);
      std::copy(xs.begin(), xs.end(), xr.begin());
      const double z = logit(xr.data(), pre, hidden);
      s += softplus(z) - (d.target(i) == 1 ? z : 0.0);
    }
    return s / static_cast<double>(d.rows());
  }

  std::size_t n_features() const { return F_; }
  int epochs_done() const { return epochs_done_; }

 private:
  real act(real a) const {
    if (p_.activation == Activation::relu) return std::max(a, 0.0f);
    return 1.0f - 2.0f / (1.0f + std::exp(2.0f * a));  // tanh; saturates cleanly when exp overflows
  }
  real activation_grad(real pre, real post) const {
    return p_.activation == Activation::relu ? (pre > 0.0f ? 1.0f : 0.0f) : 1.0f - post * post;
  }

  double logit(const real* x, std::vector<real>& pre, std::vector<real>& hidden) const {
    std::copy(b1(), b1() + H_, pre.begin());
    for (std::size_t c = 0; c < F_; ++c) {
      const real xc = x[c];
      const real* col = w1() + c * H_;
      for (std::size_t h = 0; h < H_; ++h) pre[h] += col[h] * xc;
    }
    real z = theta_.back();
    const real* w2v = w2();
    for (std::size_t h = 0; h < H_; ++h) {
      hidden[h] = act(pre[h]);
      z += w2v[h] * hidden[h];
    }
    return static_cast<double>(z);
  }

  MlpParams p_;
  std::size_t F_ = 0, H_ = 0;
  Standardizer z_;
  // w1 (feature-major, w1[c * H_ + h]), b1, w2, b2 stored back to back.
  std::vector<real> theta_;
  real* w1() { return theta_.data(); }
  const real* w1() const { return theta_.data(); }
  const real* b1() const { return theta_.data() + H_ * F_; }
  real* w2() { return theta_.data() + H_ * F_ + H_; }
  const real* w2() const { return theta_.data() + H_ * F_ + H_; }
  std::vector<real> m_, v_;
  long steps_ = 0;
  int epochs_done_ = 0;
};

}  // namespace vdet::learn

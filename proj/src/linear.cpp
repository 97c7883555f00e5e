/*
 * Copyright 2026 The nnframe Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nnf/learners.hpp"

namespace nnf {

using nlohmann::json;

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Solves A x = b in place (A is n x n row-major) with partial pivoting.
std::vector<double> solve(std::vector<double> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(A[r * n + c]) > std::fabs(A[piv * n + c])) piv = r;
    if (std::fabs(A[piv * n + c]) < 1e-300) throw StageError("ensemble", "singular Newton system");
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(A[c * n + k], A[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r * n + c] / A[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) A[r * n + k] -= f * A[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= A[c * n + k] * x[k];
    x[c] = s / A[c * n + c];
  }
  return x;
}

}  // namespace

// --- logistic regression -------------------------------------------------------------

void LogisticRegression::do_fit(const Samples& data, Rng&) {
  std_ = Standardizer::fit(data);
  const std::size_t d = data.dim, m = d + 1, n = data.size();
  std::vector<std::vector<double>> z(n);
  for (std::size_t k = 0; k < n; ++k) {
    z[k] = std_.apply(data.row(k));
    z[k].push_back(1.0);
  }
  std::vector<double> theta(m, 0.0);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<double> grad(m, 0.0), hess(m * m, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double p = sigmoid(dot(theta, z[k]));
      const double r = p - data.y[k], w = p * (1.0 - p);
      for (std::size_t a = 0; a < m; ++a) {
        grad[a] += r * z[k][a];
        for (std::size_t b = a; b < m; ++b) hess[a * m + b] += w * z[k][a] * z[k][b];
      }
    }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < a; ++b) hess[a * m + b] = hess[b * m + a];
    for (std::size_t a = 0; a < d; ++a) {
      grad[a] += l2_ * theta[a];
      hess[a * m + a] += l2_;
    }
    hess[d * m + d] += 1e-10;
    const auto step = solve(std::move(hess), std::move(grad));
    double biggest = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      theta[a] -= step[a];
      biggest = std::max(biggest, std::fabs(step[a]));
    }
    if (!std::isfinite(biggest)) throw StageError("ensemble", "logistic regression diverged");
    if (biggest < 1e-10) break;
  }
  b_ = theta.back();
  theta.pop_back();
  w_ = std::move(theta);
}

double LogisticRegression::do_score(std::span<const double> x) const {
  return sigmoid(dot(w_, std_.apply(x)) + b_);
}

json LogisticRegression::state_json() const {
  return {{"standardizer", std_.to_json()}, {"w", w_}, {"b", b_}};
}

void LogisticRegression::load_state(const json& j) {
  std_ = Standardizer::from_json(j.at("standardizer"));
  w_ = j.at("w").get<std::vector<double>>();
  b_ = j.at("b").get<double>();
}

// --- SGD linear ----------------------------------------------------------------------------

void SgdLinear::do_fit(const Samples& data, Rng& rng) {
  std_ = Standardizer::fit(data);
  const std::size_t n = data.size();
  std::vector<std::vector<double>> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = std_.apply(data.row(k));
  w_.assign(data.dim, 0.0);
  b_ = 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  double t = 0.0;
  for (std::size_t epoch = 0; epoch < params_.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t k : order) {
      t += 1.0;
      const double eta = params_.learning_rate / (1.0 + params_.alpha * params_.learning_rate * t);
      const double m = dot(w_, z[k]) + b_;
      const double decay = 1.0 - eta * params_.alpha;
      double coef = 0.0;  // negative gradient of the loss w.r.t. the margin
      if (params_.loss == LinearLoss::kLog) {
        coef = data.y[k] - sigmoid(m);
      } else {
        const double ys = data.y[k] ? 1.0 : -1.0;
        if (ys * m < 1.0) coef = ys;
      }
      for (std::size_t a = 0; a < w_.size(); ++a) w_[a] = decay * w_[a] + eta * coef * z[k][a];
      b_ += eta * coef;
    }
  }
  for (double w : w_)
    if (!std::isfinite(w)) throw StageError("ensemble", fmt::format("{} diverged", kind()));
}

double SgdLinear::do_score(std::span<const double> x) const {
  return sigmoid(dot(w_, std_.apply(x)) + b_);
}

json SgdLinear::params_json() const {
  return {{"epochs", params_.epochs}, {"alpha", params_.alpha}, {"learning_rate", params_.learning_rate}};
}

json SgdLinear::state_json() const {
  return {{"standardizer", std_.to_json()}, {"w", w_}, {"b", b_}};
}

void SgdLinear::load_state(const json& j) {
  std_ = Standardizer::from_json(j.at("standardizer"));
  w_ = j.at("w").get<std::vector<double>>();
  b_ = j.at("b").get<double>();
}

// --- Gaussian naive Bayes ---------------------------------------------------------------

void GaussianNb::do_fit(const Samples& data, Rng&) {
  const std::size_t d = data.dim, n = data.size();
  std::array<double, 2> count{};
  for (int c = 0; c < 2; ++c) {
    mean_[c].assign(d, 0.0);
    var_[c].assign(d, 0.0);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const int c = data.y[k];
    count[c] += 1;
    for (std::size_t a = 0; a < d; ++a) mean_[c][a] += data.row(k)[a];
  }
  for (int c = 0; c < 2; ++c)
    for (auto& m : mean_[c]) m /= count[c];
  for (std::size_t k = 0; k < n; ++k) {
    const int c = data.y[k];
    for (std::size_t a = 0; a < d; ++a) {
      const double z = data.row(k)[a] - mean_[c][a];
      var_[c][a] += z * z / count[c];
    }
  }
  const auto overall = Standardizer::fit(data);
  double max_var = 0.0;
  for (double s : overall.scale) max_var = std::max(max_var, s * s);
  const double eps = 1e-9 * (max_var > 0 ? max_var : 1.0);
  for (int c = 0; c < 2; ++c) {
    for (auto& v : var_[c]) v += eps;
    log_prior_[c] = std::log(count[c] / static_cast<double>(n));
  }
}

double GaussianNb::do_score(std::span<const double> x) const {
  std::array<double, 2> ll = log_prior_;
  for (int c = 0; c < 2; ++c)
    for (std::size_t a = 0; a < x.size(); ++a) {
      const double z = x[a] - mean_[c][a];
      ll[c] -= 0.5 * std::log(2.0 * M_PI * var_[c][a]) + z * z / (2.0 * var_[c][a]);
    }
  return sigmoid(ll[1] - ll[0]);
}

json GaussianNb::state_json() const {
  return {{"log_prior", log_prior_}, {"mean", mean_}, {"var", var_}};
}

void GaussianNb::load_state(const json& j) {
  log_prior_ = j.at("log_prior").get<std::array<double, 2>>();
  mean_ = j.at("mean").get<std::array<std::vector<double>, 2>>();
  var_ = j.at("var").get<std::array<std::vector<double>, 2>>();
}

// --- kNN -----------------------------------------------------------------------------------

void KnnClassifier::do_fit(const Samples& data, Rng&) {
  if (k_ == 0) throw ConfigError("knn: k must be positive");
  std_ = Standardizer::fit(data);
  train_ = Samples(data.dim);
  for (std::size_t k = 0; k < data.size(); ++k) train_.push(std_.apply(data.row(k)), data.y[k]);
}

double KnnClassifier::do_score(std::span<const double> x) const {
  const auto q = std_.apply(x);
  const std::size_t n = train_.size(), k = std::min(k_, n);
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    const auto row = train_.row(r);
    for (std::size_t a = 0; a < q.size(); ++a) s += (row[a] - q[a]) * (row[a] - q[a]);
    dist[r] = {s, r};
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
  std::size_t noisy = 0;
  for (std::size_t r = 0; r < k; ++r) noisy += train_.y[dist[r].second];
  return static_cast<double>(noisy) / static_cast<double>(k);
}

json KnnClassifier::state_json() const {
  return {{"standardizer", std_.to_json()}, {"dim", train_.dim}, {"x", train_.x}, {"y", train_.y}};
}

void KnnClassifier::load_state(const json& j) {
  std_ = Standardizer::from_json(j.at("standardizer"));
  train_ = Samples(j.at("dim").get<std::size_t>());
  train_.x = j.at("x").get<std::vector<double>>();
  train_.y = j.at("y").get<std::vector<std::uint8_t>>();
}

}  // namespace nnf

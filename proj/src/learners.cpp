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

#include "nnf/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nnf {

using nlohmann::json;

// --- samples -----------------------------------------------------------------------

void Samples::push(std::span<const double> r, std::optional<std::uint8_t> label) {
  if (r.size() != dim)
    throw DataError(fmt::format("feature row has {} values, expected {}", r.size(), dim));
  if (label ? y.size() != size() : !y.empty())
    throw DataError("cannot mix labeled and unlabeled rows");
  x.insert(x.end(), r.begin(), r.end());
  if (label) y.push_back(*label ? 1 : 0);
}

Samples Samples::subset(std::span<const std::size_t> rows) const {
  Samples out(dim);
  out.x.reserve(rows.size() * dim);
  const bool lab = labeled() && !empty();
  for (std::size_t r : rows) {
    const auto v = row(r);
    out.x.insert(out.x.end(), v.begin(), v.end());
    if (lab) out.y.push_back(y[r]);
  }
  return out;
}

std::size_t Samples::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
}

Standardizer Standardizer::fit(const Samples& s) {
  Standardizer st;
  st.mean.assign(s.dim, 0.0);
  st.scale.assign(s.dim, 1.0);
  const double n = static_cast<double>(s.size());
  if (s.empty()) return st;
  for (std::size_t k = 0; k < s.size(); ++k)
    for (std::size_t d = 0; d < s.dim; ++d) st.mean[d] += s.row(k)[d] / n;
  std::vector<double> var(s.dim, 0.0);
  for (std::size_t k = 0; k < s.size(); ++k)
    for (std::size_t d = 0; d < s.dim; ++d) {
      const double z = s.row(k)[d] - st.mean[d];
      var[d] += z * z / n;
    }
  for (std::size_t d = 0; d < s.dim; ++d) st.scale[d] = var[d] > 1e-24 ? std::sqrt(var[d]) : 0.0;
  return st;
}

std::vector<double> Standardizer::apply(std::span<const double> r) const {
  std::vector<double> out(r.size());
  for (std::size_t d = 0; d < r.size(); ++d)
    out[d] = scale[d] > 0.0 ? (r[d] - mean[d]) / scale[d] : 0.0;
  return out;
}

json Standardizer::to_json() const { return {{"mean", mean}, {"scale", scale}}; }

Standardizer Standardizer::from_json(const json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  return s;
}

// --- classifier base ------------------------------------------------------------------

void Classifier::fit(const Samples& data, Rng& rng) {
  constant_.reset();
  if (!data.labeled()) throw DataError(fmt::format("{}: training rows are unlabeled", kind()));
  const std::size_t pos = data.positives();
  if (data.empty() || pos == 0 || pos == data.size()) {
    constant_ = pos == 0 ? 0.0 : 1.0;
    log_info("{}: single-class training set of {} rows, constant classifier", kind(), data.size());
    return;
  }
  do_fit(data, rng);
}

double Classifier::score(std::span<const double> x) const {
  return constant_ ? *constant_ : do_score(x);
}

json Classifier::to_json() const {
  json j{{"kind", kind()}, {"params", params_json()}};
  if (constant_) {
    j["constant"] = *constant_;
  } else {
    j["constant"] = nullptr;
    j["state"] = state_json();
  }
  return j;
}

double error_rate(const Classifier& c, const Samples& s) {
  if (s.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (c.predict(s.row(k)) != (s.y[k] == 1)) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(s.size());
}

// --- trees ---------------------------------------------------------------------------

json TreeParams::to_json() const {
  return {{"max_depth", max_depth},
          {"min_samples_split", min_samples_split},
          {"min_samples_leaf", min_samples_leaf},
          {"max_features", max_features == kSqrtFeatures ? json("sqrt") : json(max_features)},
          {"random_threshold", random_threshold}};
}

TreeParams TreeParams::from_json(const json& j) {
  TreeParams p;
  p.max_depth = j.at("max_depth").get<std::size_t>();
  p.min_samples_split = j.at("min_samples_split").get<std::size_t>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  const auto& mf = j.at("max_features");
  p.max_features = mf.is_string() ? kSqrtFeatures : mf.get<std::size_t>();
  p.random_threshold = j.at("random_threshold").get<bool>();
  return p;
}

double Tree::eval(std::span<const double> x) const {
  if (nodes.empty()) return 0.0;
  std::size_t k = 0;
  while (nodes[k].feature >= 0)
    k = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[k].feature)] <= nodes[k].threshold
                                     ? nodes[k].left
                                     : nodes[k].right);
  return nodes[k].value;
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  // Children always come after their parent.
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    best = std::max(best, d[k]);
    if (nodes[k].feature >= 0) {
      d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
    }
  }
  return best;
}

json Tree::to_json() const {
  std::vector<int> f, l, r;
  std::vector<double> t, v;
  for (const TreeNode& n : nodes) {
    f.push_back(n.feature);
    l.push_back(n.left);
    r.push_back(n.right);
    t.push_back(n.threshold);
    v.push_back(n.value);
  }
  return {{"feature", f}, {"threshold", t}, {"left", l}, {"right", r}, {"value", v}};
}

Tree Tree::from_json(const json& j) {
  const auto f = j.at("feature").get<std::vector<int>>();
  const auto t = j.at("threshold").get<std::vector<double>>();
  const auto l = j.at("left").get<std::vector<int>>();
  const auto r = j.at("right").get<std::vector<int>>();
  const auto v = j.at("value").get<std::vector<double>>();
  if (t.size() != f.size() || l.size() != f.size() || r.size() != f.size() || v.size() != f.size())
    throw DataError("tree: ragged node arrays");
  Tree tree;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const int n = static_cast<int>(f.size());
    if (f[k] >= 0 && (l[k] <= static_cast<int>(k) || r[k] <= static_cast<int>(k) || l[k] >= n || r[k] >= n))
      throw DataError("tree: bad child index");
    tree.nodes.push_back({f[k], t[k], l[k], r[k], v[k]});
  }
  return tree;
}

namespace {

enum class Criterion { kGini, kNewton };

class Grower {
 public:
  Grower(const Samples& d, std::span<const double> a, std::span<const double> b, Criterion c,
         double lambda, const TreeParams& p, Rng& rng)
      : d_(d), a_(a), b_(b), crit_(c), lambda_(lambda), p_(p), rng_(rng) {
    if (p.max_features == 0) mf_ = d.dim;
    else if (p.max_features == kSqrtFeatures)
      mf_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d.dim))));
    else mf_ = std::min(p.max_features, d.dim);
    features_.resize(d.dim);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  Tree grow(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    if (!rows.empty()) node(rows, 0);
    return std::move(tree_);
  }

 private:
  double quality(double a, double b) const {
    if (crit_ == Criterion::kGini) return a <= 0.0 ? 0.0 : -2.0 * b * (a - b) / a;
    return b * b / (a + lambda_);
  }
  double leaf(double a, double b) const {
    if (crit_ == Criterion::kGini) return a <= 0.0 ? 0.0 : b / a;
    return -b / (a + lambda_);
  }

  int node(std::vector<std::size_t>& rows, std::size_t depth) {
    double A = 0, B = 0;
    for (std::size_t r : rows) {
      A += a_[r];
      B += b_[r];
    }
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({-1, 0.0, -1, -1, leaf(A, B)});
    const bool pure = crit_ == Criterion::kGini && (B <= 0.0 || B >= A);
    if (depth >= p_.max_depth || rows.size() < p_.min_samples_split || pure) return id;

    // Partial Fisher-Yates picks this node's candidate features.
    for (std::size_t k = 0; k < mf_ && mf_ < d_.dim; ++k)
      std::swap(features_[k], features_[k + rng_.index(d_.dim - k)]);

    const double parent = quality(A, B);
    double best_gain = 1e-12;
    int best_f = -1;
    double best_t = 0.0;
    const std::size_t n = rows.size(), min_leaf = std::max<std::size_t>(1, p_.min_samples_leaf);
    std::vector<std::pair<double, std::size_t>> sorted(n);
    for (std::size_t c = 0; c < mf_; ++c) {
      const std::size_t f = features_[c];
      if (p_.random_threshold) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t r : rows) {
          lo = std::min(lo, d_.row(r)[f]);
          hi = std::max(hi, d_.row(r)[f]);
        }
        if (!(hi > lo)) continue;
        const double t = rng_.uniform(lo, hi);
        double la = 0, lb = 0;
        std::size_t ln = 0;
        for (std::size_t r : rows)
          if (d_.row(r)[f] <= t) {
            la += a_[r];
            lb += b_[r];
            ++ln;
          }
        if (ln < min_leaf || n - ln < min_leaf) continue;
        const double gain = quality(la, lb) + quality(A - la, B - lb) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_t = t;
        }
        continue;
      }
      for (std::size_t k = 0; k < n; ++k) sorted[k] = {d_.row(rows[k])[f], rows[k]};
      std::sort(sorted.begin(), sorted.end());
      double la = 0, lb = 0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        la += a_[sorted[k].second];
        lb += b_[sorted[k].second];
        if (sorted[k].first == sorted[k + 1].first) continue;
        if (k + 1 < min_leaf || n - k - 1 < min_leaf) continue;
        const double gain = quality(la, lb) + quality(A - la, B - lb) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_t = 0.5 * (sorted[k].first + sorted[k + 1].first);
          if (!(best_t < sorted[k + 1].first)) best_t = sorted[k].first;
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (d_.row(r)[static_cast<std::size_t>(best_f)] <= best_t ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree_.nodes[static_cast<std::size_t>(id)].feature = best_f;
    tree_.nodes[static_cast<std::size_t>(id)].threshold = best_t;
    const int l = node(left, depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    const int r = node(right, depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Samples& d_;
  std::span<const double> a_, b_;
  Criterion crit_;
  double lambda_;
  TreeParams p_;
  Rng& rng_;
  std::size_t mf_ = 0;
  std::vector<std::size_t> features_;
  Tree tree_;
};

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

Tree grow_classification_tree(const Samples& data, std::span<const std::size_t> rows,
                              const TreeParams& p, Rng& rng) {
  std::vector<double> a(data.size(), 1.0), b(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) b[k] = data.y[k];
  // Bootstrap duplicates are kept as separate rows.
  return Grower(data, a, b, Criterion::kGini, 0.0, p, rng).grow({rows.begin(), rows.end()});
}

Tree grow_newton_tree(const Samples& data, std::span<const double> grad,
                      std::span<const double> hess, const TreeParams& p, double lambda, Rng& rng) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return Grower(data, hess, grad, Criterion::kNewton, lambda, p, rng).grow(std::move(rows));
}

void DecisionTree::do_fit(const Samples& data, Rng& rng) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  tree_ = grow_classification_tree(data, rows, params_, rng);
}

// --- forests ----------------------------------------------------------------------------

Forest Forest::extra_trees(std::size_t trees) {
  ForestParams p;
  p.trees = trees;
  p.tree = {32, 2, 1, kSqrtFeatures, true};
  p.bootstrap = false;
  return Forest(p);
}

void Forest::do_fit(const Samples& data, Rng& rng) {
  const std::uint64_t base = rng.next();
  const std::size_t n = data.size();
  trees_.clear();
  oob_error_.reset();
  std::vector<std::size_t> votes(n, 0), noisy(n, 0);
  for (std::size_t t = 0; t < params_.trees; ++t) {
    Rng r(derive_seed(base, t));
    std::vector<std::size_t> rows(n);
    std::vector<char> in_bag(n, 0);
    if (params_.bootstrap) {
      for (auto& row : rows) {
        row = r.index(n);
        in_bag[row] = 1;
      }
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    trees_.push_back(grow_classification_tree(data, rows, params_.tree, r));
    if (!params_.bootstrap) continue;
    for (std::size_t k = 0; k < n; ++k)
      if (!in_bag[k]) {
        ++votes[k];
        if (trees_.back().eval(data.row(k)) > 0.5) ++noisy[k];
      }
  }
  if (!params_.bootstrap) return;
  std::size_t seen = 0, wrong = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (votes[k] == 0) continue;
    ++seen;
    if ((2 * noisy[k] > votes[k]) != (data.y[k] == 1)) ++wrong;
  }
  if (seen > 0) oob_error_ = static_cast<double>(wrong) / static_cast<double>(seen);
}

double Forest::do_score(std::span<const double> x) const {
  if (trees_.empty()) return 0.0;
  std::size_t noisy = 0;
  for (const Tree& t : trees_)
    if (t.eval(x) > 0.5) ++noisy;
  return static_cast<double>(noisy) / static_cast<double>(trees_.size());
}

json Forest::params_json() const {
  return {{"trees", params_.trees}, {"tree", params_.tree.to_json()}, {"bootstrap", params_.bootstrap}};
}

json Forest::state_json() const {
  json trees = json::array();
  for (const Tree& t : trees_) trees.push_back(t.to_json());
  json j{{"trees", trees}};
  j["oob_error"] = oob_error_ ? json(*oob_error_) : json(nullptr);
  return j;
}

void Forest::load_state(const json& j) {
  trees_.clear();
  for (const auto& t : j.at("trees")) trees_.push_back(Tree::from_json(t));
  oob_error_.reset();
  if (!j.at("oob_error").is_null()) oob_error_ = j.at("oob_error").get<double>();
}

// --- gradient boosting ------------------------------------------------------------------

void GradientBoosting::do_fit(const Samples& data, Rng& rng) {
  const std::size_t n = data.size();
  const double p = static_cast<double>(data.positives()) / static_cast<double>(n);
  f0_ = std::log(p / (1.0 - p));
  trees_.clear();
  loss_.clear();
  std::vector<double> f(n, f0_), g(n), h(n);
  const TreeParams tp{params_.max_depth, 2, params_.min_samples_leaf, 0, false};
  for (std::size_t round = 0; round < params_.rounds; ++round) {
    for (std::size_t k = 0; k < n; ++k) {
      const double s = sigmoid(f[k]);
      g[k] = s - data.y[k];
      h[k] = s * (1.0 - s);
      if (!std::isfinite(g[k]) || !std::isfinite(h[k]))
        throw StageError("ensemble", fmt::format("gbt: non-finite gradient in round {}", round));
    }
    trees_.push_back(grow_newton_tree(data, g, h, tp, params_.lambda, rng));
    double loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      f[k] += params_.learning_rate * trees_.back().eval(data.row(k));
      loss += data.y[k] ? softplus(-f[k]) : softplus(f[k]);
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss))
      throw StageError("ensemble", fmt::format("gbt: non-finite loss in round {}", round));
    loss_.push_back(loss);
  }
}

double GradientBoosting::margin(std::span<const double> x) const {
  if (constant()) return *constant() > 0.5 ? INFINITY : -INFINITY;
  double f = f0_;
  for (const Tree& t : trees_) f += params_.learning_rate * t.eval(x);
  return f;
}

double GradientBoosting::do_score(std::span<const double> x) const { return sigmoid(margin(x)); }

json GradientBoosting::params_json() const {
  return {{"rounds", params_.rounds},
          {"max_depth", params_.max_depth},
          {"learning_rate", params_.learning_rate},
          {"lambda", params_.lambda},
          {"min_samples_leaf", params_.min_samples_leaf}};
}

json GradientBoosting::state_json() const {
  json trees = json::array();
  for (const Tree& t : trees_) trees.push_back(t.to_json());
  return {{"f0", f0_}, {"trees", trees}, {"train_loss", loss_}};
}

void GradientBoosting::load_state(const json& j) {
  f0_ = j.at("f0").get<double>();
  trees_.clear();
  for (const auto& t : j.at("trees")) trees_.push_back(Tree::from_json(t));
  loss_ = j.at("train_loss").get<std::vector<double>>();
}

// --- factory -----------------------------------------------------------------------------

std::unique_ptr<Classifier> classifier_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const json& p = j.at("params");
  std::unique_ptr<Classifier> c;
  if (kind == "cart" || kind == "random_tree") {
    c = std::make_unique<DecisionTree>(TreeParams::from_json(p));
  } else if (kind == "random_forest" || kind == "extra_trees") {
    ForestParams fp;
    fp.trees = p.at("trees").get<std::size_t>();
    fp.tree = TreeParams::from_json(p.at("tree"));
    fp.bootstrap = p.at("bootstrap").get<bool>();
    c = std::make_unique<Forest>(fp);
  } else if (kind == "gbt") {
    GbtParams gp;
    gp.rounds = p.at("rounds").get<std::size_t>();
    gp.max_depth = p.at("max_depth").get<std::size_t>();
    gp.learning_rate = p.at("learning_rate").get<double>();
    gp.lambda = p.at("lambda").get<double>();
    gp.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
    c = std::make_unique<GradientBoosting>(gp);
  } else if (kind == "logistic") {
    c = std::make_unique<LogisticRegression>(p.at("l2").get<double>());
  } else if (kind == "sgd_log" || kind == "linear_hinge") {
    SgdParams sp;
    sp.loss = kind == "sgd_log" ? LinearLoss::kLog : LinearLoss::kHinge;
    sp.epochs = p.at("epochs").get<std::size_t>();
    sp.alpha = p.at("alpha").get<double>();
    sp.learning_rate = p.at("learning_rate").get<double>();
    c = std::make_unique<SgdLinear>(sp);
  } else if (kind == "gaussian_nb") {
    c = std::make_unique<GaussianNb>();
  } else if (kind == "knn") {
    c = std::make_unique<KnnClassifier>(p.at("k").get<std::size_t>());
  } else if (kind == "stacking" || kind == "self_training_bagging") {
    std::vector<std::unique_ptr<Classifier>> bases;
    for (const auto& b : p.at("bases")) bases.push_back(classifier_from_json(b));
    if (kind == "stacking") {
      c = std::make_unique<Stacking>(std::move(bases), p.at("folds").get<std::size_t>());
    } else {
      SelfTrainingParams sp;
      sp.bags = p.at("bags").get<std::size_t>();
      sp.add_per_round = p.at("add_per_round").get<std::size_t>();
      sp.max_rounds = p.at("max_rounds").get<std::size_t>();
      c = std::make_unique<SelfTrainingBagging>(std::move(bases), sp);
    }
  } else {
    throw DataError(fmt::format("unknown classifier kind '{}'", kind));
  }
  if (!j.at("constant").is_null()) {
    c->constant_ = j.at("constant").get<double>();
  } else if (j.contains("state")) {
    c->load_state(j.at("state"));
  }
  return c;
}

}  // namespace nnf

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

// Binary classifiers written from scratch: trees, forests, boosting, linear
// models, naive Bayes, kNN, stacking, a self-training bagging wrapper, and
// an extended isolation forest. Label 1 means Noisy.

#ifndef NNF_LEARNERS_HPP_
#define NNF_LEARNERS_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nnf/common.hpp"

namespace nnf {

/// Dense row-major feature matrix with optional binary labels.
struct Samples {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<std::uint8_t> y;  // empty for unlabeled sets

  explicit Samples(std::size_t d = 0) : dim(d) {}

  std::size_t size() const { return dim == 0 ? 0 : x.size() / dim; }
  bool empty() const { return size() == 0; }
  bool labeled() const { return y.size() == size(); }
  std::span<const double> row(std::size_t k) const { return {x.data() + k * dim, dim}; }
  void push(std::span<const double> r, std::optional<std::uint8_t> label = std::nullopt);
  Samples subset(std::span<const std::size_t> rows) const;
  std::size_t positives() const;
};

/// Per-feature z-scoring; zero-variance features map to 0.
struct Standardizer {
  std::vector<double> mean, scale;

  static Standardizer fit(const Samples& s);
  std::vector<double> apply(std::span<const double> r) const;
  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string_view kind() const = 0;
  /// Untrained copy with the same hyperparameters.
  virtual std::unique_ptr<Classifier> fresh() const = 0;

  /// Trains on labeled samples. Empty or single-class input yields a constant
  /// classifier.
  void fit(const Samples& data, Rng& rng);
  /// Confidence in [0, 1] that the row is Noisy.
  double score(std::span<const double> x) const;
  bool predict(std::span<const double> x) const { return score(x) > 0.5; }
  std::optional<double> constant() const { return constant_; }

  nlohmann::json to_json() const;

 protected:
  virtual void do_fit(const Samples& data, Rng& rng) = 0;
  virtual double do_score(std::span<const double> x) const = 0;
  virtual nlohmann::json params_json() const = 0;
  virtual nlohmann::json state_json() const = 0;
  virtual void load_state(const nlohmann::json& j) = 0;

  friend std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& j);

 private:
  std::optional<double> constant_;
};

std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& j);

/// Fraction of rows where predict() disagrees with the label.
double error_rate(const Classifier& c, const Samples& s);

// --- trees ----------------------------------------------------------------------

struct TreeParams {
  std::size_t max_depth = 8;
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0: all features; kSqrtFeatures: floor(sqrt(dim))
  bool random_threshold = false;  // uniform cut inside the node range

  nlohmann::json to_json() const;
  static TreeParams from_json(const nlohmann::json& j);
};

inline constexpr std::size_t kSqrtFeatures = static_cast<std::size_t>(-1);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;
};

/// Flat binary tree; rows with x[feature] <= threshold go left.
struct Tree {
  std::vector<TreeNode> nodes;

  double eval(std::span<const double> x) const;
  std::size_t depth() const;
  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

/// Gini classification tree; leaves hold the Noisy fraction.
Tree grow_classification_tree(const Samples& data, std::span<const std::size_t> rows,
                              const TreeParams& p, Rng& rng);

/// Newton regression tree on (gradient, hessian) pairs; leaves hold
/// -G / (H + lambda).
Tree grow_newton_tree(const Samples& data, std::span<const double> grad,
                      std::span<const double> hess, const TreeParams& p, double lambda, Rng& rng);

class DecisionTree final : public Classifier {
 public:
  explicit DecisionTree(TreeParams p = {}) : params_(p) {}
  std::string_view kind() const override { return params_.random_threshold ? "random_tree" : "cart"; }
  std::unique_ptr<Classifier> fresh() const override { return std::make_unique<DecisionTree>(params_); }
  const Tree& tree() const { return tree_; }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override { return tree_.eval(x); }
  nlohmann::json params_json() const override { return params_.to_json(); }
  nlohmann::json state_json() const override { return tree_.to_json(); }
  void load_state(const nlohmann::json& j) override { tree_ = Tree::from_json(j); }

 private:
  TreeParams params_;
  Tree tree_;
};

struct ForestParams {
  std::size_t trees = 100;
  TreeParams tree{12, 2, 1, kSqrtFeatures, false};
  bool bootstrap = true;
};

/// Majority vote of bootstrapped trees (random forest) or of unbootstrapped
/// random-threshold trees (extra trees).
class Forest final : public Classifier {
 public:
  explicit Forest(ForestParams p = {}) : params_(p) {}
  static Forest extra_trees(std::size_t trees = 100);

  std::string_view kind() const override { return params_.bootstrap ? "random_forest" : "extra_trees"; }
  std::unique_ptr<Classifier> fresh() const override { return std::make_unique<Forest>(params_); }
  /// Out-of-bag error; nullopt without bootstrap or when no row was ever out of bag.
  std::optional<double> oob_error() const { return oob_error_; }
  std::size_t tree_count() const { return trees_.size(); }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override;
  nlohmann::json params_json() const override;
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  ForestParams params_;
  std::vector<Tree> trees_;
  std::optional<double> oob_error_;
};

struct GbtParams {
  std::size_t rounds = 100;
  std::size_t max_depth = 3;
  double learning_rate = 0.1;
  double lambda = 1.0;
  std::size_t min_samples_leaf = 1;
};

class GradientBoosting final : public Classifier {
 public:
  explicit GradientBoosting(GbtParams p = {}) : params_(p) {}
  std::string_view kind() const override { return "gbt"; }
  std::unique_ptr<Classifier> fresh() const override {
    return std::make_unique<GradientBoosting>(params_);
  }
  /// Raw additive score; Noisy iff > 0.
  double margin(std::span<const double> x) const;
  double base_score() const { return f0_; }
  /// Training log-loss after each round.
  const std::vector<double>& train_loss() const { return loss_; }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override;
  nlohmann::json params_json() const override;
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  GbtParams params_;
  double f0_ = 0.0;
  std::vector<Tree> trees_;
  std::vector<double> loss_;
};

// --- linear and probabilistic ----------------------------------------------------

/// L2-regularized logistic regression fitted by Newton iterations on
/// standardized features.
class LogisticRegression final : public Classifier {
 public:
  explicit LogisticRegression(double l2 = 1.0) : l2_(l2) {}
  std::string_view kind() const override { return "logistic"; }
  std::unique_ptr<Classifier> fresh() const override {
    return std::make_unique<LogisticRegression>(l2_);
  }
  const std::vector<double>& weights() const { return w_; }
  double bias() const { return b_; }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override;
  nlohmann::json params_json() const override { return {{"l2", l2_}}; }
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  double l2_;
  Standardizer std_;
  std::vector<double> w_;
  double b_ = 0.0;
};

enum class LinearLoss { kLog, kHinge };

struct SgdParams {
  LinearLoss loss = LinearLoss::kLog;
  std::size_t epochs = 20;
  double alpha = 1e-4;  // L2 strength
  double learning_rate = 0.1;
};

/// Linear classifier trained by shuffled SGD on standardized features.
/// Hinge loss gives the margin classifier; its score is a sigmoid of the margin.
class SgdLinear final : public Classifier {
 public:
  explicit SgdLinear(SgdParams p = {}) : params_(p) {}
  std::string_view kind() const override {
    return params_.loss == LinearLoss::kLog ? "sgd_log" : "linear_hinge";
  }
  std::unique_ptr<Classifier> fresh() const override { return std::make_unique<SgdLinear>(params_); }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override;
  nlohmann::json params_json() const override;
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  SgdParams params_;
  Standardizer std_;
  std::vector<double> w_;
  double b_ = 0.0;
};

class GaussianNb final : public Classifier {
 public:
  std::string_view kind() const override { return "gaussian_nb"; }
  std::unique_ptr<Classifier> fresh() const override { return std::make_unique<GaussianNb>(); }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override;
  nlohmann::json params_json() const override { return nlohmann::json::object(); }
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  std::array<double, 2> log_prior_{};
  std::array<std::vector<double>, 2> mean_, var_;
};

/// Majority of the k nearest standardized training rows (ties by row order).
class KnnClassifier final : public Classifier {
 public:
  explicit KnnClassifier(std::size_t k = 5) : k_(k) {}
  std::string_view kind() const override { return "knn"; }
  std::unique_ptr<Classifier> fresh() const override { return std::make_unique<KnnClassifier>(k_); }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override;
  nlohmann::json params_json() const override { return {{"k", k_}}; }
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  std::size_t k_;
  Standardizer std_;
  Samples train_;
};

// --- meta learners ----------------------------------------------------------------

/// Out-of-fold base scores train a logistic meta-learner; base learners are
/// refitted on all rows for prediction.
class Stacking final : public Classifier {
 public:
  Stacking(std::vector<std::unique_ptr<Classifier>> bases, std::size_t folds = 5);
  std::string_view kind() const override { return "stacking"; }
  std::unique_ptr<Classifier> fresh() const override;
  std::size_t folds_used() const { return folds_used_; }
  std::size_t base_count() const { return bases_.size(); }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override;
  nlohmann::json params_json() const override;
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  std::vector<std::unique_ptr<Classifier>> bases_;
  std::size_t folds_;
  std::size_t folds_used_ = 0;
  LogisticRegression meta_;
};

struct SelfTrainingParams {
  std::size_t bags = 25;
  std::size_t add_per_round = 10;
  std::size_t max_rounds = 10;
};

/// Bagging with per-bag self-training and out-of-bag early stopping. Base
/// learners are assigned to bags round-robin. With no unlabeled rows this is
/// plain bagging.
class SelfTrainingBagging final : public Classifier {
 public:
  SelfTrainingBagging(std::vector<std::unique_ptr<Classifier>> bases, SelfTrainingParams p = {});
  std::string_view kind() const override { return "self_training_bagging"; }
  std::unique_ptr<Classifier> fresh() const override;

  void fit_semi(const Samples& labeled, const Samples& unlabeled, Rng& rng);
  /// OOB error after the initial fit and after each accepted round, per bag.
  const std::vector<std::vector<double>>& oob_history() const { return oob_history_; }
  std::size_t pseudo_labeled() const { return pseudo_labeled_; }

 protected:
  void do_fit(const Samples& data, Rng& rng) override;
  double do_score(std::span<const double> x) const override;
  nlohmann::json params_json() const override;
  nlohmann::json state_json() const override;
  void load_state(const nlohmann::json& j) override;

 private:
  std::vector<std::unique_ptr<Classifier>> bases_;
  SelfTrainingParams params_;
  std::vector<std::unique_ptr<Classifier>> bags_;
  std::vector<std::vector<double>> oob_history_;
  std::size_t pseudo_labeled_ = 0;
  Samples unlabeled_;
};

// --- extended isolation forest ----------------------------------------------------

struct IsolationParams {
  std::size_t trees = 100;
  std::size_t sample_size = 256;
  int extension_level = -1;  // -1: dim - 1 (fully extended); 0: axis-aligned
};

/// Average path length of an unsuccessful BST search over n points.
double isolation_c(std::size_t n);

class IsolationForest {
 public:
  explicit IsolationForest(IsolationParams p = {}) : params_(p) {}

  void fit(const Samples& data, Rng& rng);
  /// 2^(-E[h(x)] / c(psi)).
  double score(std::span<const double> x) const;
  double path_length(std::span<const double> x) const;
  std::size_t sample_size_used() const { return psi_; }
  std::size_t dim() const { return dim_; }

  nlohmann::json to_json() const;
  static IsolationForest from_json(const nlohmann::json& j);

  struct Node {
    std::vector<double> normal;  // empty for external nodes
    std::vector<double> point;
    int left = -1, right = -1;
    std::size_t size = 0;
  };

 private:
  IsolationParams params_;
  std::size_t psi_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::vector<Node>> trees_;
};

}  // namespace nnf

#endif  // NNF_LEARNERS_HPP_

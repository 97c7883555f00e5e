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

// Prediction and recommendation primitives: a significance-weighted Pearson
// user-kNN predictor and a biased matrix-factorization recommender.

#ifndef NNF_RECSYS_HPP_
#define NNF_RECSYS_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "nnf/dataset.hpp"

namespace nnf {

struct KnnConfig {
  std::size_t k = 35;
  std::size_t min_overlap = 2;
  std::size_t significance_cap = 50;

  void validate() const;
};

/// Pearson correlation over co-rated items times min(overlap, cap) / cap.
/// Zero when the overlap is below `min_overlap` or either side has zero
/// variance on the overlap. Both spans must be sorted by item.
double pearson_similarity(std::span<const Rating> a, std::span<const Rating> b,
                          const KnnConfig& cfg);
double pearson_similarity(const std::map<ItemId, double>& a, const std::map<ItemId, double>& b,
                          const KnnConfig& cfg);

/// User-based kNN over a training table. Similarity rows are computed lazily
/// and cached, so one instance must not be shared across threads.
class KnnPredictor {
 public:
  KnnPredictor(const RatingsTable& train, KnnConfig cfg);

  /// Mean-centered weighted average over up to k neighbors (largest |w|
  /// first, ties by user id) who rated `item`, clamped to the scale.
  /// nullopt when no neighbor with nonzero similarity rated the item.
  /// Throws DataError for users absent from the training table.
  std::optional<double> predict(UserId user, ItemId item) const;

  double user_mean(UserId user) const;

 private:
  const std::vector<std::pair<UserId, double>>& row(UserId user) const;

  const RatingsTable& train_;
  KnnConfig cfg_;
  std::unordered_map<UserId, double> means_;
  mutable std::unordered_map<UserId, std::vector<std::pair<UserId, double>>> rows_;
};

std::optional<double> knn_predict(const RatingsTable& train, UserId user, ItemId item,
                                  const KnnConfig& cfg);

struct MfConfig {
  std::size_t factors = 16;
  std::size_t epochs = 40;
  double learning_rate = 0.01;
  double regularization = 0.02;
  double init_std = 0.05;
  std::uint64_t seed = 0;
};

/// Biased matrix factorization: r_hat = mu + b_u + b_i + p_u . q_i.
class MfModel {
 public:
  MfModel() = default;

  std::size_t factors() const { return factors_; }
  double global_mean() const { return global_mean_; }
  const Scale& scale() const { return scale_; }

  bool has_user(UserId u) const { return user_index_.contains(u); }
  bool has_item(ItemId i) const { return item_index_.contains(i); }
  const std::vector<UserId>& users() const { return user_ids_; }
  const std::vector<ItemId>& items() const { return item_ids_; }

  /// Unclamped score; unknown ids fall back to the bias terms that exist.
  double score(UserId u, ItemId i) const;
  /// Score clamped to the rating scale.
  double predict(UserId u, ItemId i) const;

  std::span<const double> user_factors(UserId u) const;
  std::span<const double> item_factors(ItemId i) const;
  double user_bias(UserId u) const;
  double item_bias(ItemId i) const;

  nlohmann::json to_json() const;
  static MfModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static MfModel load(const std::filesystem::path& path);

 private:
  friend struct MfTrainer;

  std::size_t factors_ = 0;
  double global_mean_ = 0.0;
  Scale scale_;
  std::vector<UserId> user_ids_;
  std::vector<ItemId> item_ids_;
  std::unordered_map<UserId, std::size_t> user_index_;
  std::unordered_map<ItemId, std::size_t> item_index_;
  std::vector<double> user_bias_, item_bias_;
  std::vector<double> user_factors_, item_factors_;  // row-major, factors_ wide
};

struct MfTrainResult {
  MfModel model;
  std::vector<double> epoch_rmse;
};

/// Seeded SGD on squared error with L2 on biases and factors. Throws
/// StageError when the loss becomes non-finite.
MfTrainResult mf_train(const RatingsTable& train, const MfConfig& cfg);

struct TopKList {
  UserId user = 0;
  std::vector<std::pair<ItemId, double>> items;
};

/// Top-K items the user has not rated in `train`, by unclamped model score,
/// ties broken by ascending item id.
TopKList recommend_topk(const MfModel& model, const RatingsTable& train, UserId user,
                        std::size_t k);

}  // namespace nnf

#endif  // NNF_RECSYS_HPP_

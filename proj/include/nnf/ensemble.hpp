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

// Layer 2: per-rating features, ensemble variants trained on the board's
// consensus labels, and arbitration of the Uncertain set.

#ifndef NNF_ENSEMBLE_HPP_
#define NNF_ENSEMBLE_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "nnf/board.hpp"
#include "nnf/dataset.hpp"
#include "nnf/learners.hpp"

namespace nnf {

inline constexpr std::size_t kFeatureDim = 19;
const std::vector<std::string>& feature_names();

/// Builds feature rows for the ratings the board voted on. Rating and item
/// statistics come from `evidence`.
class FeatureBuilder {
 public:
  FeatureBuilder(const RatingsTable& evidence, const RatingsTable& test, const BoardResult& board);

  /// Throws DataError when the board did not vote on `key`.
  std::vector<double> row(const RatingKey& key) const;
  /// All rows in board order, unlabeled.
  Samples all() const;

 private:
  struct Stats {
    double mean = 0.0, std = 0.0;
    std::size_t count = 0;
  };
  std::vector<double> row_at(std::size_t pos) const;

  const RatingsTable& test_;
  const BoardResult& board_;
  std::unordered_map<UserId, Stats> users_;
  std::unordered_map<ItemId, Stats> items_;
};

/// Consensus ratings (labeled) and Uncertain ratings (unlabeled).
struct LayerTwoData {
  Samples labeled{kFeatureDim};
  std::vector<RatingKey> labeled_keys;
  Samples unlabeled{kFeatureDim};
  std::vector<RatingKey> unlabeled_keys;
};

LayerTwoData split_by_consensus(const Samples& features, const BoardResult& board);

enum class ElVariant : std::uint8_t { kEl1, kEl2, kEl2_2, kEl3, kEl4_1, kEl4_2, kEl5 };

std::string_view to_string(ElVariant v);
/// Accepts EL1, EL2, EL2_2 (or EL2.2), EL3, EL4_1 (EL4.1), EL4_2 (EL4.2), EL5.
ElVariant parse_el_variant(std::string_view s);

struct EnsembleConfig {
  ElVariant variant = ElVariant::kEl3;
  std::uint64_t seed = 0;
  ForestParams forest;
  GbtParams gbt;
  SelfTrainingParams ressel;
  IsolationParams isolation;
  double isolation_cut = 0.8;
  std::size_t stacking_folds = 5;
};

/// Base learners of each variant, untrained.
std::vector<std::unique_ptr<Classifier>> el2_bases();
std::vector<std::unique_ptr<Classifier>> el2_2_bases(const ForestParams& forest);
std::vector<std::unique_ptr<Classifier>> el4_1_bases();
std::vector<std::unique_ptr<Classifier>> el4_2_bases();

class ElModel {
 public:
  ElModel() = default;
  ElModel(ElVariant v, std::unique_ptr<Classifier> c, std::size_t dim = kFeatureDim);
  ElModel(ElVariant v, std::optional<IsolationForest> f, double cut, std::size_t dim);

  ElVariant variant() const { return variant_; }
  std::size_t dim() const { return dim_; }
  /// Decision threshold on score(): Noisy iff score > cut.
  double cut() const { return cut_; }
  double score(std::span<const double> x) const;
  Verdict verdict(std::span<const double> x) const {
    return score(x) > cut_ ? Verdict::kNoisy : Verdict::kClean;
  }

  const Classifier* classifier() const { return clf_.get(); }
  const IsolationForest* isolation() const { return eif_ ? &*eif_ : nullptr; }
  nlohmann::json diagnostics() const;

  nlohmann::json to_json() const;
  static ElModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ElModel load(const std::filesystem::path& path);

 private:
  ElVariant variant_ = ElVariant::kEl3;
  std::size_t dim_ = kFeatureDim;
  double cut_ = 0.5;
  std::shared_ptr<const Classifier> clf_;
  std::optional<IsolationForest> eif_;
};

/// Supervised variants learn from `labeled`; self-training variants also use
/// `unlabeled`; the isolation forest sees `unlabeled` only.
ElModel train_el(const EnsembleConfig& cfg, const Samples& labeled, const Samples& unlabeled);

/// Throws DataError on a dimension mismatch.
std::vector<Verdict> classify_uncertain(const ElModel& model, const Samples& unlabeled);

struct Classification {
  RatingKey key;
  double score = 0.0;
  Verdict label = Verdict::kClean;
};

std::vector<Classification> classify_keys(const ElModel& model, const Samples& unlabeled,
                                          std::span<const RatingKey> keys);

/// Final two-way label per board rating: consensus where reached, otherwise
/// the ensemble's verdict. Throws DataError when an Uncertain rating has no
/// classification.
std::vector<Verdict> resolve_labels(const BoardResult& board, std::span<const Classification> el);
std::vector<Verdict> resolve_labels(std::span<const VoteSet> votes,
                                    std::span<const Classification> el);

/// `userId,itemId,score,label,variant`
void write_classifications_csv(std::span<const Classification> rows, ElVariant variant,
                               const std::filesystem::path& path);
std::vector<Classification> read_classifications_csv(const std::filesystem::path& path);

}  // namespace nnf

#endif  // NNF_ENSEMBLE_HPP_

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

// Two-dimensional evaluation: group-validated ranking accuracy against
// serendipity, per-user deltas between two recommender arms, quadrants and
// the threshold plane.

#ifndef NNF_EVAL_HPP_
#define NNF_EVAL_HPP_

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nnf/dataset.hpp"
#include "nnf/recsys.hpp"

namespace nnf {

struct KMeansResult {
  std::vector<std::size_t> assignment;  ///< one entry per input row
  std::vector<std::vector<double>> centroids;
  std::vector<double> inertia;  ///< after each assignment step
  std::size_t iterations = 0;
  bool converged = false;
};

/// k-means++ seeding then Lloyd iterations. k above the row count is lowered
/// with a warning. Empty clusters keep their previous centroid.
KMeansResult kmeans(const std::vector<std::vector<double>>& rows, std::size_t k,
                    std::uint64_t seed, std::size_t max_iter = 100);

struct ClusterAssignment {
  std::size_t k = 0;
  std::map<UserId, std::size_t> cluster;
  std::vector<std::vector<double>> centroids;
  std::vector<double> inertia;
};

/// Clusters users by their MF factors. Users unknown to the model are an error.
ClusterAssignment cluster_users(const MfModel& model, std::span<const UserId> users,
                                std::size_t k, std::uint64_t seed, std::size_t max_iter = 100);

/// Final inertia for each k; the caller picks the elbow.
std::vector<std::pair<std::size_t, double>> elbow_curve(
    const std::vector<std::vector<double>>& rows, std::span<const std::size_t> ks,
    std::uint64_t seed);

struct RankingMetrics {
  double ndcg = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

/// Binary-relevance metrics over the first K recommendations.
RankingMetrics ranking_metrics(std::span<const ItemId> recs, const std::set<ItemId>& relevant,
                               std::size_t k);

enum class SerendipityFormula : std::uint8_t { kComplement, kCosineMean };
std::string_view to_string(SerendipityFormula f);
SerendipityFormula parse_serendipity_formula(std::string_view s);

double cosine(std::span<const double> a, std::span<const double> b);

/// Mean over `recs` of unexpectedness times relevance. Unexpectedness is one
/// minus the mean cosine to the history (kComplement) or the mean cosine
/// itself (kCosineMean). History items without genres are skipped; a
/// recommended item with no usable comparison contributes 0.
double serendipity(std::span<const ItemId> recs, const std::set<ItemId>& history,
                   const std::set<ItemId>& relevant, const GenreTable& genres,
                   SerendipityFormula formula = SerendipityFormula::kComplement);

enum class Metric : std::uint8_t { kNdcg, kPrecision, kRecall, kF1 };
inline constexpr Metric kAllMetrics[] = {Metric::kNdcg, Metric::kPrecision, Metric::kRecall,
                                         Metric::kF1};
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

struct UserEval {
  UserId user = 0;
  double ndcg = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  double serendipity = 0.0;
  std::size_t cluster = 0;
  std::size_t eval_ratings = 0;  ///< held-out ratings, for per-rating weighting

  double metric(Metric m) const;
};

struct EvalConfig {
  std::size_t clusters = 20;
  std::size_t top_k = 10;
  double relevance_threshold = 3.5;
  SerendipityFormula formula = SerendipityFormula::kComplement;
  std::size_t kmeans_max_iter = 100;
};

/// Scores one arm: top-K from `model` excluding the user's `train` items,
/// relevance from `eval`, history from `train`.
std::vector<UserEval> evaluate_users(const MfModel& model, const RatingsTable& train,
                                     const RatingsTable& eval, std::span<const UserId> users,
                                     const ClusterAssignment& clusters, const EvalConfig& cfg);

struct GlobalMetrics {
  double ndcg = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0, serendipity = 0.0;
  std::size_t users = 0;
};
GlobalMetrics global_metrics(std::span<const UserEval> evals);

enum class Quadrant : std::uint8_t { kI, kII, kIII, kIV, kOrigin };
std::string_view to_string(Quadrant q);

/// x is the serendipity delta, y the accuracy delta. Zero counts as positive
/// on a single axis; both zero is the origin.
Quadrant quadrant(double x, double y);

struct Plane {
  double a = 0.07;
  double b = 0.17;
};

inline bool plane_positive(double x, double y, const Plane& p) { return p.a * x + p.b * y > 0.0; }

struct DeltaPoint {
  UserId user = 0;
  std::size_t cluster = 0;
  double x = 0.0, y = 0.0;
  Quadrant quadrant = Quadrant::kOrigin;
  bool positive = false;
  bool on_axis = false;
  std::size_t weight = 1;
};

enum class PercentMode : std::uint8_t { kUsers, kRatings };
std::string_view to_string(PercentMode m);
PercentMode parse_percent_mode(std::string_view s);

struct DeltaReport {
  Metric metric = Metric::kNdcg;
  std::vector<DeltaPoint> points;
  double percent_positive = 0.0;
  std::map<Quadrant, std::size_t> quadrant_counts;

  std::string pair_name() const;
};

/// Throws DataError when the two arms cover different users.
DeltaReport delta_points(std::span<const UserEval> before, std::span<const UserEval> after,
                         Metric metric, const Plane& plane,
                         PercentMode mode = PercentMode::kUsers);

/// Recount of percent_positive from the points.
double recount_percent_positive(const DeltaReport& r, PercentMode mode);

std::map<std::size_t, double> cluster_means(std::span<const UserEval> evals, Metric metric);

/// Percentage of clusters strictly below the mean of the cluster means.
double critical_group_pct(const std::map<std::size_t, double>& cluster_metric);

nlohmann::json to_json(const GlobalMetrics& g);
nlohmann::json to_json(const DeltaReport& r, bool with_points = true);

/// `userId,cluster,dSerendipity,dMetric,quadrant,positive`
void write_deltas_csv(const DeltaReport& r, const std::filesystem::path& path);
void write_scatter_svg(const DeltaReport& r, const Plane& plane, const std::filesystem::path& path);

}  // namespace nnf

#endif  // NNF_EVAL_HPP_

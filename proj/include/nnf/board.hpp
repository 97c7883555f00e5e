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

// Layer 1: four natural-noise detectors and the unanimity decision board.
//
// Every detector returns per-rating results in the order of the table under
// scrutiny (`test.ratings()`), so position k of each output refers to the
// same rating.

#ifndef NNF_BOARD_HPP_
#define NNF_BOARD_HPP_

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nnf/dataset.hpp"
#include "nnf/recsys.hpp"

namespace nnf {

enum class Verdict : std::uint8_t { kClean = 0, kNoisy = 1 };
enum class Consensus : std::uint8_t { kClean = 0, kNoisy = 1, kUncertain = 2 };

constexpr std::size_t kDetectorCount = 4;
enum class Detector : std::uint8_t { kNf1 = 0, kNf2 = 1, kNf3 = 2, kNf4 = 3 };

std::string_view to_string(Verdict v);
std::string_view to_string(Consensus c);
std::string_view to_string(Detector d);
Verdict parse_verdict(std::string_view s);
Consensus parse_consensus(std::string_view s);
Detector parse_detector(std::string_view s);

struct VoteSet {
  RatingKey key;
  std::array<Verdict, kDetectorCount> votes{};
  Consensus consensus = Consensus::kClean;
};

/// Unanimous Noisy -> Noisy, unanimous Clean -> Clean, otherwise Uncertain.
Consensus consensus(const std::array<Verdict, kDetectorCount>& votes);
/// Same rule; throws DataError when a vote is missing.
Consensus consensus(const std::array<std::optional<Verdict>, kDetectorCount>& votes);

// --- NF1: homologous user/item/rating classes -------------------------------

enum class RatingClass : std::uint8_t { kWeak = 0, kAverage = 1, kStrong = 2 };
enum class UserClass : std::uint8_t { kCritical = 0, kAverage = 1, kBenevolent = 2, kVariable = 3 };
enum class ItemClass : std::uint8_t {
  kWeaklyPreferred = 0,
  kAveragelyPreferred = 1,
  kStronglyPreferred = 2,
  kVariablyPreferred = 3,
};

struct Nf1Config {
  double weak_cut = 2.5;    // Weak: [r_min, weak_cut)
  double strong_cut = 4.0;  // Strong: [strong_cut, r_max]
  double majority = 0.5;
};

RatingClass nf1_rating_class(double value, const Nf1Config& cfg);
UserClass nf1_classify_user(std::span<const double> ratings, const Nf1Config& cfg);
ItemClass nf1_classify_item(std::span<const double> ratings, const Nf1Config& cfg);
/// Verdict for one rating given its user and item classes.
Verdict nf1_verdict(UserClass u, ItemClass i, RatingClass r);

struct Nf1Result {
  std::vector<Verdict> verdicts;
  std::vector<UserClass> user_class;
  std::vector<ItemClass> item_class;
};

/// Classes come from `evidence`; verdicts are issued for every rating of `test`.
Nf1Result nf1_detect(const RatingsTable& evidence, const RatingsTable& test,
                     const Nf1Config& cfg);

// --- NF2: user engagement groups and Rating Noisy Degree --------------------

enum class Quantity : std::uint8_t { kHeavy = 0, kMedium = 1, kLight = 2 };
enum class Quality : std::uint8_t { kEasy = 0, kDifficult = 1 };

struct Nf2Group {
  Quantity quantity = Quantity::kMedium;
  Quality quality = Quality::kEasy;
  friend bool operator==(const Nf2Group&, const Nf2Group&) = default;
};

struct Nf2Config {
  double theta_heavy_medium = 0.075;
  double theta_light = 0.05;
  double rnd_cut = 0.5;
  double coherence_threshold = 0.8;
  double epsilon = 1e-9;
};

/// Rating-count tercile cut-points over a user population.
struct Nf2Population {
  std::size_t lower = 0;  // counts below -> Light
  std::size_t upper = 0;  // counts >= upper (when upper > lower) -> Heavy

  static Nf2Population from_counts(std::vector<std::size_t> counts);
  Quantity quantity(std::size_t count) const;
};

/// Per-genre mean of a user's ratings, keyed by genre index.
using GenreMeans = std::map<std::size_t, double>;
GenreMeans user_genre_means(std::span<const Rating> user_ratings, const GenreTable& genres);

/// 1 - mean over genre-bearing items of the mean normalized deviation
/// |r - m_g| / (r_max - r_min) across the item's genres. nullopt when the
/// user rated no item with a genre.
std::optional<double> nf2_coherence(std::span<const Rating> user_ratings, const GenreTable& genres,
                                    const Scale& scale);

/// Fraction of the item's genres (those with a user mean) where
/// |r - m_g| / max(m_g, eps) >= theta. 0 when no genre is countable.
double nf2_rnd(double rating, std::span<const std::size_t> item_genres, const GenreMeans& means,
               double theta, double epsilon = 1e-9);

Nf2Group nf2_group_user(UserId user, const RatingsTable& table, const Nf2Config& cfg);

struct Nf2Result {
  std::vector<Verdict> verdicts;
  std::vector<double> rnd;
  std::vector<Nf2Group> group;
  std::size_t users_without_genres = 0;
};

Nf2Result nf2_detect(const RatingsTable& evidence, const RatingsTable& test,
                     const Nf2Config& cfg);

// --- NF3: prediction consistency --------------------------------------------

struct Nf3Config {
  KnnConfig knn;
  double threshold = 0.05;
};

/// |r - p| / (r_max - r_min).
double nf3_consistency(double rating, double prediction, const Scale& scale);

struct Nf3Result {
  std::vector<Verdict> verdicts;
  std::vector<std::optional<double>> consistency;  // nullopt: unpredictable
  std::size_t unpredictable = 0;
};

/// Predictions come from `train` only. Unpredictable ratings are Clean.
Nf3Result nf3_detect(const RatingsTable& train, const RatingsTable& test, const Nf3Config& cfg);

// --- NF4: fuzzy profiles ------------------------------------------------------

struct FuzzyProfile {
  double low = 0.0;
  double medium = 0.0;
  double high = 0.0;
};

FuzzyProfile nf4_fuzzify(double rating, const Scale& scale);
double manhattan(const FuzzyProfile& a, const FuzzyProfile& b);
/// Maps Manhattan distance [1, 2] onto [0, 1]; distances below 1 give 0.
double nf4_dissimilarity(const FuzzyProfile& a, const FuzzyProfile& b);

struct Nf4Config {
  double delta1 = 1.0;
  double delta2 = 0.25;
  /// Optional profile amplification applied to user and item profiles.
  std::function<FuzzyProfile(const FuzzyProfile&)> amplify;
};

struct Nf4Assessment {
  bool prefiltered = false;  // user and item profiles too far apart to judge
  double noise_degree = 0.0;
  Verdict verdict = Verdict::kClean;
};

Nf4Assessment nf4_assess(const FuzzyProfile& rating, const FuzzyProfile& user,
                         const FuzzyProfile& item, const Nf4Config& cfg);

struct Nf4Result {
  std::vector<Verdict> verdicts;
  std::vector<double> noise_degree;
  std::size_t prefiltered = 0;
};

/// User and item profiles are means of the fuzzified ratings in `evidence`.
Nf4Result nf4_detect(const RatingsTable& evidence, const RatingsTable& test,
                     const Nf4Config& cfg);

// --- Board --------------------------------------------------------------------

/// Ratings flagged Noisy by exactly each detector subset. Index = bitmask with
/// bit d set for detector d; index 0 is the all-Clean complement.
struct VennCounts {
  std::array<std::size_t, 1u << kDetectorCount> regions{};

  std::size_t total() const;
  static std::string label(unsigned mask);
  nlohmann::json to_json() const;
  static VennCounts from_json(const nlohmann::json& j);
};

VennCounts venn_counts(std::span<const VoteSet> votes);

struct BoardConfig {
  Nf1Config nf1;
  Nf2Config nf2;
  Nf3Config nf3;
  Nf4Config nf4;
};

struct BoardResult {
  std::vector<VoteSet> votes;
  Nf1Result nf1;
  Nf2Result nf2;
  Nf3Result nf3;
  Nf4Result nf4;
  VennCounts venn;

  std::size_t count(Consensus c) const;
};

/// Runs all four detectors on `test`. Profiles use train U test as evidence;
/// NF3 predicts from `train` alone.
BoardResult run_board(const RatingsTable& train, const RatingsTable& test, const BoardConfig& cfg);

/// `userId,itemId,nf1,nf2,nf3,nf4,consensus`
void write_votes_csv(std::span<const VoteSet> votes, const std::filesystem::path& path);
std::vector<VoteSet> read_votes_csv(const std::filesystem::path& path);

}  // namespace nnf

#endif  // NNF_BOARD_HPP_

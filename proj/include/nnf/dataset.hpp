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

// Rating tables in MovieLens CSV layout: loading, validation, activity
// filtering and per-user splitting.

#ifndef NNF_DATASET_HPP_
#define NNF_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nnf/common.hpp"

namespace nnf {

constexpr std::int64_t kSecondsPerDay = 86400;

struct Scale {
  double min = 0.5;
  double max = 5.0;

  double range() const { return max - min; }
  bool contains(double v) const { return v >= min && v <= max; }
};

struct Rating {
  UserId user = 0;
  ItemId item = 0;
  double value = 0.0;
  std::int64_t timestamp = 0;

  RatingKey key() const { return {user, item}; }
  /// UTC calendar day index of the timestamp.
  std::int64_t day() const { return timestamp / kSecondsPerDay; }
};

struct GenreLookup {
  std::span<const double> vector;
  bool known = false;
};

/// Item -> binary genre indicator vector over a sorted vocabulary.
class GenreTable {
 public:
  GenreTable() = default;
  GenreTable(std::vector<std::string> vocabulary,
             std::unordered_map<ItemId, std::vector<double>> vectors);

  std::size_t dimension() const { return vocabulary_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  std::size_t item_count() const { return vectors_.size(); }
  /// Sorted ids of the items present in the table.
  std::vector<ItemId> item_ids() const;

  /// Unknown items map to the zero vector with `known == false`.
  GenreLookup lookup(ItemId item) const;
  std::span<const double> vector(ItemId item) const { return lookup(item).vector; }
  /// Indices of the genres set for `item`.
  std::vector<std::size_t> active(ItemId item) const;

 private:
  std::vector<std::string> vocabulary_;
  std::unordered_map<ItemId, std::vector<double>> vectors_;
  std::vector<double> zero_;
};

/// Immutable, deduplicated set of ratings sorted by (user, item).
class RatingsTable {
 public:
  RatingsTable() = default;
  /// Throws DataError on duplicate (user, item) pairs, out-of-scale values,
  /// non-positive ids or negative timestamps.
  RatingsTable(std::vector<Rating> ratings, Scale scale,
               std::shared_ptr<const GenreTable> genres = nullptr);

  std::span<const Rating> ratings() const { return ratings_; }
  const Rating& operator[](std::size_t i) const { return ratings_[i]; }
  std::size_t size() const { return ratings_.size(); }
  bool empty() const { return ratings_.empty(); }

  const Scale& scale() const { return scale_; }
  const GenreTable& genres() const;
  std::shared_ptr<const GenreTable> genres_ptr() const { return genres_; }

  /// Sorted distinct ids.
  const std::vector<UserId>& users() const { return users_; }
  const std::vector<ItemId>& items() const { return items_; }

  bool has_user(UserId u) const { return user_ranges_.contains(u); }
  bool has_item(ItemId i) const { return item_index_.contains(i); }
  /// Ratings of `u` sorted by item; empty for unknown users.
  std::span<const Rating> user_ratings(UserId u) const;
  /// Positions (into ratings()) of the ratings of item `i`.
  std::span<const std::size_t> item_positions(ItemId i) const;
  std::optional<std::size_t> find(RatingKey key) const;
  bool contains(RatingKey key) const { return find(key).has_value(); }

  /// New table with the ratings that satisfy `keep`.
  template <typename Pred>
  RatingsTable filtered(Pred keep) const {
    std::vector<Rating> out;
    out.reserve(ratings_.size());
    for (const Rating& r : ratings_)
      if (keep(r)) out.push_back(r);
    return RatingsTable(std::move(out), scale_, genres_);
  }

 private:
  std::vector<Rating> ratings_;
  Scale scale_;
  std::shared_ptr<const GenreTable> genres_;
  std::vector<UserId> users_;
  std::vector<ItemId> items_;
  std::unordered_map<UserId, std::pair<std::size_t, std::size_t>> user_ranges_;
  std::unordered_map<ItemId, std::vector<std::size_t>> item_index_;
};

/// Collapses duplicate (user, item) pairs keeping the latest timestamp (ties:
/// the later row wins). Returns the number of dropped rows.
std::size_t dedupe_latest(std::vector<Rating>& ratings);

/// Union of tables with disjoint keys. Scale and genres come from `a`.
RatingsTable merge(const RatingsTable& a, const RatingsTable& b);

struct LoadResult {
  RatingsTable table;
  std::size_t duplicates_dropped = 0;
};

/// Reads `userId,movieId,rating,timestamp`. Throws DataError naming the line
/// for malformed rows or ratings outside `scale`.
LoadResult load_ratings(const std::filesystem::path& path, Scale scale,
                        std::shared_ptr<const GenreTable> genres = nullptr);

struct GenreLoadResult {
  std::shared_ptr<const GenreTable> table;
  std::size_t empty_genre_items = 0;
};

/// Reads `movieId,title,genres` with pipe-separated genres. `(no genres
/// listed)` and empty cells map to the zero vector.
GenreLoadResult load_genres(const std::filesystem::path& path);

/// Canonical snapshot in the same schema as the input.
void write_ratings_csv(const RatingsTable& table, const std::filesystem::path& path);
void write_genres_csv(const GenreTable& genres, const std::filesystem::path& path);

/// Keeps users with at least `min_count` ratings. Single pass.
RatingsTable filter_min_activity(const RatingsTable& table, std::size_t min_count);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct SplitResult {
  RatingsTable train;
  RatingsTable test;
  std::size_t singleton_users = 0;
};

/// Per-user split: each user's ratings are shuffled with a seeded generator and
/// the first ceil(train_fraction * n_u) go to train.
SplitResult split_train_test(const RatingsTable& table, const SplitSpec& spec);

struct ThreeWaySpec {
  double train_fraction = 0.70;
  double detect_fraction = 0.15;
  std::uint64_t seed = 0;
};

struct ThreeWaySplit {
  RatingsTable train;
  RatingsTable detect;
  RatingsTable eval;
};

/// Per-user three-way split: ceil(train_fraction * n) to train, then
/// round(detect_fraction * n) (bounded by what is left) to detect, rest to eval.
ThreeWaySplit split_three_way(const RatingsTable& table, const ThreeWaySpec& spec);

/// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip text for a rating value, MovieLens style ("4.0", "3.5").
std::string format_value(double v);

}  // namespace nnf

#endif  // NNF_DATASET_HPP_

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

#include "nnf/dataset.hpp"

#include "nnf/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

namespace nnf {
// ---------------------------------------------------------------------------
// GenreTable

GenreTable::GenreTable(std::vector<std::string> vocabulary,
                       std::unordered_map<ItemId, std::vector<double>> vectors)
    : vocabulary_(std::move(vocabulary)),
      vectors_(std::move(vectors)),
      zero_(vocabulary_.size(), 0.0) {
  for (const auto& [item, v] : vectors_) {
    if (v.size() != vocabulary_.size())
      throw DataError(fmt::format("genre vector of item {} has length {}, expected {}", item,
                                  v.size(), vocabulary_.size()));
  }
}

GenreLookup GenreTable::lookup(ItemId item) const {
  const auto it = vectors_.find(item);
  if (it == vectors_.end()) return {zero_, false};
  return {it->second, true};
}

std::vector<ItemId> GenreTable::item_ids() const {
  std::vector<ItemId> out;
  out.reserve(vectors_.size());
  for (const auto& [item, _] : vectors_) out.push_back(item);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> GenreTable::active(ItemId item) const {
  std::vector<std::size_t> out;
  const auto v = vector(item);
  for (std::size_t g = 0; g < v.size(); ++g)
    if (v[g] != 0.0) out.push_back(g);
  return out;
}

// ---------------------------------------------------------------------------
// RatingsTable

RatingsTable::RatingsTable(std::vector<Rating> ratings, Scale scale,
                           std::shared_ptr<const GenreTable> genres)
    : ratings_(std::move(ratings)), scale_(scale), genres_(std::move(genres)) {
  if (!(scale_.min < scale_.max))
    throw DataError(fmt::format("invalid rating scale [{}, {}]", scale_.min, scale_.max));
  std::sort(ratings_.begin(), ratings_.end(),
            [](const Rating& a, const Rating& b) { return a.key() < b.key(); });
  for (std::size_t i = 0; i < ratings_.size(); ++i) {
    const Rating& r = ratings_[i];
    if (r.user < 1 || r.item < 1)
      throw DataError(fmt::format("rating ({}, {}) has a non-positive id", r.user, r.item));
    if (!std::isfinite(r.value) || !scale_.contains(r.value))
      throw DataError(fmt::format("rating ({}, {}) value {} outside scale [{}, {}]", r.user,
                                  r.item, r.value, scale_.min, scale_.max));
    if (r.timestamp < 0)
      throw DataError(fmt::format("rating ({}, {}) has negative timestamp", r.user, r.item));
    if (i > 0 && ratings_[i - 1].key() == r.key())
      throw DataError(fmt::format("duplicate rating ({}, {})", r.user, r.item));
    if (i == 0 || ratings_[i - 1].user != r.user) {
      users_.push_back(r.user);
      user_ranges_[r.user] = {i, i};
    }
    user_ranges_[r.user].second = i + 1;
    item_index_[r.item].push_back(i);
  }
  items_.reserve(item_index_.size());
  for (const auto& [item, _] : item_index_) items_.push_back(item);
  std::sort(items_.begin(), items_.end());
}

const GenreTable& RatingsTable::genres() const {
  static const GenreTable kEmpty;
  return genres_ ? *genres_ : kEmpty;
}

std::span<const Rating> RatingsTable::user_ratings(UserId u) const {
  const auto it = user_ranges_.find(u);
  if (it == user_ranges_.end()) return {};
  return std::span<const Rating>(ratings_).subspan(it->second.first,
                                                   it->second.second - it->second.first);
}

std::span<const std::size_t> RatingsTable::item_positions(ItemId i) const {
  const auto it = item_index_.find(i);
  if (it == item_index_.end()) return {};
  return it->second;
}

std::optional<std::size_t> RatingsTable::find(RatingKey key) const {
  const auto rs = user_ratings(key.user);
  const auto it = std::lower_bound(rs.begin(), rs.end(), key.item,
                                   [](const Rating& r, ItemId item) { return r.item < item; });
  if (it == rs.end() || it->item != key.item) return std::nullopt;
  return static_cast<std::size_t>(&*it - ratings_.data());
}

std::size_t dedupe_latest(std::vector<Rating>& ratings) {
  // Stable sort keeps file order among equal timestamps, so the later row wins.
  std::stable_sort(ratings.begin(), ratings.end(), [](const Rating& a, const Rating& b) {
    if (a.key() != b.key()) return a.key() < b.key();
    return a.timestamp < b.timestamp;
  });
  std::vector<Rating> out;
  out.reserve(ratings.size());
  for (const Rating& r : ratings) {
    if (!out.empty() && out.back().key() == r.key())
      out.back() = r;
    else
      out.push_back(r);
  }
  const std::size_t dropped = ratings.size() - out.size();
  ratings = std::move(out);
  return dropped;
}

RatingsTable merge(const RatingsTable& a, const RatingsTable& b) {
  std::vector<Rating> all(a.ratings().begin(), a.ratings().end());
  all.insert(all.end(), b.ratings().begin(), b.ratings().end());
  return RatingsTable(std::move(all), a.scale(), a.genres_ptr() ? a.genres_ptr() : b.genres_ptr());
}

// ---------------------------------------------------------------------------
// I/O

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", tmp.string()));
    out << content;
    if (!out) throw DataError(fmt::format("write to '{}' failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

std::string format_value(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) return fmt::format("{:.1f}", v);
  return fmt::format("{}", v);
}

LoadResult load_ratings(const std::filesystem::path& path, Scale scale,
                        std::shared_ptr<const GenreTable> genres) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open ratings file '{}'", path.string()));
  std::string line;
  std::size_t lineno = 0;
  std::vector<Rating> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (lineno == 1) {
      if (text != "userId,movieId,rating,timestamp")
        throw DataError(fmt::format("{}:1: expected header 'userId,movieId,rating,timestamp'",
                                    path.string()));
      continue;
    }
    if (text.empty()) continue;
    const auto f = split_csv(text);
    Rating r;
    if (f.size() != 4 || !parse_number(f[0], r.user) || !parse_number(f[1], r.item) ||
        !parse_number(f[2], r.value) || !parse_number(f[3], r.timestamp))
      throw DataError(fmt::format("{}:{}: malformed row '{}'", path.string(), lineno, text));
    if (!scale.contains(r.value))
      throw DataError(fmt::format("{}:{}: rating {} outside scale [{}, {}]", path.string(), lineno,
                                  f[2], scale.min, scale.max));
    rows.push_back(r);
  }
  if (lineno == 0) throw DataError(fmt::format("{}: empty file, header missing", path.string()));
  LoadResult result;
  result.duplicates_dropped = dedupe_latest(rows);
  if (result.duplicates_dropped > 0)
    log_info("{}: dropped {} duplicate ratings", path.string(), result.duplicates_dropped);
  result.table = RatingsTable(std::move(rows), scale, std::move(genres));
  return result;
}

GenreLoadResult load_genres(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open movies file '{}'", path.string()));
  std::string line;
  std::size_t lineno = 0;
  std::map<ItemId, std::vector<std::string>> raw;
  std::set<std::string> vocab;
  GenreLoadResult result;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (lineno == 1) {
      if (text != "movieId,title,genres")
        throw DataError(
            fmt::format("{}:1: expected header 'movieId,title,genres'", path.string()));
      continue;
    }
    if (text.empty()) continue;
    const auto f = split_csv(text);
    ItemId item = 0;
    if (f.size() < 3 || !parse_number(f[0], item))
      throw DataError(fmt::format("{}:{}: malformed row", path.string(), lineno));
    const std::string_view cell = trim(f.back());
    auto& genres = raw[item];
    if (cell.empty()) {
      ++result.empty_genre_items;
      continue;
    }
    if (cell == "(no genres listed)") continue;
    std::size_t start = 0;
    while (start <= cell.size()) {
      const auto bar = cell.find('|', start);
      const auto g = trim(cell.substr(start, bar == std::string_view::npos ? cell.npos : bar - start));
      if (!g.empty()) {
        genres.emplace_back(g);
        vocab.emplace(g);
      }
      if (bar == std::string_view::npos) break;
      start = bar + 1;
    }
  }
  if (result.empty_genre_items > 0)
    log_warning("{}: {} items with an empty genre cell", path.string(), result.empty_genre_items);
  std::vector<std::string> vocabulary(vocab.begin(), vocab.end());
  std::unordered_map<ItemId, std::vector<double>> vectors;
  for (const auto& [item, names] : raw) {
    std::vector<double> v(vocabulary.size(), 0.0);
    for (const auto& n : names) {
      const auto pos = std::lower_bound(vocabulary.begin(), vocabulary.end(), n) - vocabulary.begin();
      v[static_cast<std::size_t>(pos)] = 1.0;
    }
    vectors.emplace(item, std::move(v));
  }
  result.table = std::make_shared<const GenreTable>(std::move(vocabulary), std::move(vectors));
  return result;
}

void write_ratings_csv(const RatingsTable& table, const std::filesystem::path& path) {
  std::string out = "userId,movieId,rating,timestamp\n";
  out.reserve(table.size() * 28 + out.size());
  for (const Rating& r : table.ratings())
    out += fmt::format("{},{},{},{}\n", r.user, r.item, format_value(r.value), r.timestamp);
  write_file_atomic(path, out);
}

void write_genres_csv(const GenreTable& genres, const std::filesystem::path& path) {
  // Titles are not retained; the id stands in for them.
  std::string out = "movieId,title,genres\n";
  for (ItemId item : genres.item_ids()) {
    std::string cell;
    for (std::size_t g : genres.active(item)) {
      if (!cell.empty()) cell.push_back('|');
      cell += genres.vocabulary()[g];
    }
    if (cell.empty()) cell = "(no genres listed)";
    out += fmt::format("{},{},{}\n", item, item, quote_csv(cell));
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Filtering and splitting

RatingsTable filter_min_activity(const RatingsTable& table, std::size_t min_count) {
  if (min_count == 0) return table;
  return table.filtered(
      [&](const Rating& r) { return table.user_ratings(r.user).size() >= min_count; });
}

namespace {

std::size_t ceil_count(double fraction, std::size_t n) {
  // Guard against 0.7 * 10 = 7.000000000000001 style rounding.
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

}  // namespace

SplitResult split_train_test(const RatingsTable& table, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError(fmt::format("train_fraction {} not in (0, 1)", spec.train_fraction));
  SplitResult result;
  std::vector<Rating> train, test;
  for (UserId u : table.users()) {
    const auto rs = table.user_ratings(u);
    std::vector<Rating> mine(rs.begin(), rs.end());
    if (mine.size() == 1) {
      ++result.singleton_users;
      train.push_back(mine.front());
      continue;
    }
    // Chronological order, then a per-user seeded shuffle.
    std::stable_sort(mine.begin(), mine.end(),
                     [](const Rating& a, const Rating& b) { return a.timestamp < b.timestamp; });
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(u)));
    rng.shuffle(mine);
    const std::size_t n_train = std::min(mine.size(), ceil_count(spec.train_fraction, mine.size()));
    train.insert(train.end(), mine.begin(), mine.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), mine.begin() + static_cast<std::ptrdiff_t>(n_train), mine.end());
  }
  if (result.singleton_users > 0)
    log_warning("split: {} users with a single rating kept in train", result.singleton_users);
  result.train = RatingsTable(std::move(train), table.scale(), table.genres_ptr());
  result.test = RatingsTable(std::move(test), table.scale(), table.genres_ptr());
  return result;
}

ThreeWaySplit split_three_way(const RatingsTable& table, const ThreeWaySpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.detect_fraction > 0.0 &&
        spec.train_fraction + spec.detect_fraction < 1.0))
    throw ConfigError(fmt::format("invalid three-way fractions {}/{}", spec.train_fraction,
                                  spec.detect_fraction));
  std::vector<Rating> train, detect, eval;
  for (UserId u : table.users()) {
    const auto rs = table.user_ratings(u);
    std::vector<Rating> mine(rs.begin(), rs.end());
    std::stable_sort(mine.begin(), mine.end(),
                     [](const Rating& a, const Rating& b) { return a.timestamp < b.timestamp; });
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(u)));
    rng.shuffle(mine);
    const std::size_t n = mine.size();
    const std::size_t n_train = std::min(n, ceil_count(spec.train_fraction, n));
    const auto want_detect =
        static_cast<std::size_t>(std::llround(spec.detect_fraction * static_cast<double>(n)));
    const std::size_t n_detect = std::min(n - n_train, want_detect);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train)
        train.push_back(mine[i]);
      else if (i < n_train + n_detect)
        detect.push_back(mine[i]);
      else
        eval.push_back(mine[i]);
    }
  }
  return {RatingsTable(std::move(train), table.scale(), table.genres_ptr()),
          RatingsTable(std::move(detect), table.scale(), table.genres_ptr()),
          RatingsTable(std::move(eval), table.scale(), table.genres_ptr())};
}

}  // namespace nnf

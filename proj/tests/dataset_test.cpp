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

#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace nnf {
namespace {

TEST(LoadRatings, DropsDuplicatesKeepingLatest) {
  TempDir dir;
  const auto path = dir.write("ratings.csv",
                              "userId,movieId,rating,timestamp\n"
                              "1,10,4.0,100\n"
                              "1,11,3.0,100\n"
                              "1,10,2.0,200\n"
                              "2,10,5.0,50\n");
  const auto loaded = load_ratings(path, Scale{});
  EXPECT_EQ(loaded.table.size(), 3u);
  EXPECT_EQ(loaded.duplicates_dropped, 1u);
  const auto pos = loaded.table.find({1, 10});
  ASSERT_TRUE(pos.has_value());
  EXPECT_DOUBLE_EQ(loaded.table[*pos].value, 2.0);
  EXPECT_EQ(loaded.table[*pos].timestamp, 200);
}

TEST(LoadRatings, HeaderOnlyIsEmpty) {
  TempDir dir;
  const auto loaded = load_ratings(dir.write("r.csv", "userId,movieId,rating,timestamp\n"), Scale{});
  EXPECT_TRUE(loaded.table.empty());
  EXPECT_EQ(loaded.duplicates_dropped, 0u);
}

TEST(LoadRatings, OutOfScaleIsValidationError) {
  TempDir dir;
  const auto path = dir.write("r.csv", "userId,movieId,rating,timestamp\n1,10,7.0,100\n");
  EXPECT_THROW(load_ratings(path, Scale{0.5, 5.0}), DataError);
}

TEST(LoadRatings, MalformedRowNamesLine) {
  TempDir dir;
  const auto path =
      dir.write("r.csv", "userId,movieId,rating,timestamp\n1,10,4.0,100\n1,x,4.0,100\n");
  try {
    load_ratings(path, Scale{});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(LoadRatings, RejectsWrongHeader) {
  TempDir dir;
  EXPECT_THROW(load_ratings(dir.write("r.csv", "user,item,rating\n"), Scale{}), DataError);
}

TEST(LoadRatings, SnapshotReloadsIdentically) {
  TempDir dir;
  Rng rng(3);
  const auto table = random_table(rng, 12, 30, 0.4);
  write_ratings_csv(table, dir.path() / "snap.csv");
  const auto back = load_ratings(dir.path() / "snap.csv", table.scale()).table;
  ASSERT_EQ(back.size(), table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    EXPECT_EQ(back[i].key(), table[i].key());
    EXPECT_EQ(back[i].value, table[i].value);
    EXPECT_EQ(back[i].timestamp, table[i].timestamp);
  }
}

TEST(Dedupe, Idempotent) {
  Rng rng(11);
  std::vector<Rating> rows;
  for (int i = 0; i < 300; ++i)
    rows.push_back({static_cast<UserId>(1 + rng.index(5)), static_cast<ItemId>(1 + rng.index(20)),
                    0.5 * static_cast<double>(1 + rng.index(10)),
                    static_cast<std::int64_t>(rng.index(1000))});
  dedupe_latest(rows);
  auto again = rows;
  EXPECT_EQ(dedupe_latest(again), 0u);
  ASSERT_EQ(again.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(again[i].key(), rows[i].key());
}

TEST(RatingsTable, RejectsDuplicates) {
  EXPECT_THROW(RatingsTable({{1, 1, 3.0, 0}, {1, 1, 4.0, 1}}, Scale{}), DataError);
}

TEST(LoadGenres, IndicatorVectors) {
  TempDir dir;
  const auto path = dir.write("movies.csv",
                              "movieId,title,genres\n"
                              "1,Toy Story,Adventure|Comedy\n"
                              "2,\"Heat, The (1995)\",Drama\n"
                              "3,Copy,Adventure|Comedy\n"
                              "4,Nothing,(no genres listed)\n"
                              "5,Blank,\n");
  const auto loaded = load_genres(path);
  const GenreTable& g = *loaded.table;
  EXPECT_EQ(g.vocabulary(), (std::vector<std::string>{"Adventure", "Comedy", "Drama"}));
  const auto v1 = g.lookup(1);
  EXPECT_TRUE(v1.known);
  EXPECT_EQ(std::vector<double>(v1.vector.begin(), v1.vector.end()),
            (std::vector<double>{1, 1, 0}));
  EXPECT_EQ(g.active(2), (std::vector<std::size_t>{2}));
  EXPECT_EQ(g.active(4).size(), 0u);
  EXPECT_TRUE(g.lookup(5).known);
  EXPECT_EQ(loaded.empty_genre_items, 1u);

  const auto unknown = g.lookup(99);
  EXPECT_FALSE(unknown.known);
  EXPECT_EQ(unknown.vector.size(), 3u);
  EXPECT_TRUE(std::all_of(unknown.vector.begin(), unknown.vector.end(),
                          [](double x) { return x == 0.0; }));

  // Identical genre sets give cosine similarity 1.
  const auto a = g.vector(1), b = g.vector(3);
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  EXPECT_DOUBLE_EQ(dot / std::sqrt(na * nb), 1.0);
}

TEST(FilterMinActivity, ThresholdIsInclusive) {
  std::vector<Rating> rows;
  auto add_user = [&](UserId u, int n) {
    for (int i = 0; i < n; ++i) rows.push_back({u, i + 1, 3.0, i});
  };
  add_user(1, 60);  // A
  add_user(2, 10);  // B
  add_user(3, 50);  // C
  add_user(4, 49);
  const RatingsTable table(rows, Scale{});
  const auto kept = filter_min_activity(table, 50);
  EXPECT_EQ(kept.users(), (std::vector<UserId>{1, 3}));
  EXPECT_EQ(kept.size(), 110u);
  EXPECT_EQ(filter_min_activity(table, 0).size(), table.size());
}

TEST(FilterMinActivity, MonotoneInThreshold) {
  Rng rng(5);
  const auto table = random_table(rng, 40, 60, 0.3);
  std::size_t prev = table.users().size();
  for (std::size_t m = 0; m <= 40; m += 2) {
    const auto kept = filter_min_activity(table, m);
    EXPECT_LE(kept.users().size(), prev);
    prev = kept.users().size();
    for (UserId u : kept.users()) EXPECT_GE(kept.user_ratings(u).size(), m);
  }
}

TEST(SplitTrainTest, TenRatingsAtPointEight) {
  std::vector<Rating> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({1, i + 1, 3.0, i});
  const auto split = split_train_test(RatingsTable(rows, Scale{}), {0.8, 1});
  EXPECT_EQ(split.train.size(), 8u);
  EXPECT_EQ(split.test.size(), 2u);
}

TEST(SplitTrainTest, SingletonUserGoesToTrain) {
  const RatingsTable table({{1, 1, 3.0, 0}, {2, 1, 4.0, 0}, {2, 2, 4.0, 0}}, Scale{});
  const auto split = split_train_test(table, {0.5, 9});
  EXPECT_EQ(split.singleton_users, 1u);
  EXPECT_TRUE(split.train.contains({1, 1}));
}

TEST(SplitTrainTest, DeterministicPerSeed) {
  Rng rng(8);
  const auto table = random_table(rng, 20, 50, 0.3);
  const auto a = split_train_test(table, {0.8, 42});
  const auto b = split_train_test(table, {0.8, 42});
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].key(), b.train[i].key());
}

// Enumerates both halves and checks set algebra against the input.
void expect_partition(const RatingsTable& all, const RatingsTable& a, const RatingsTable& b) {
  std::set<RatingKey> ka, kb, kall;
  for (const auto& r : a.ratings()) ka.insert(r.key());
  for (const auto& r : b.ratings()) kb.insert(r.key());
  for (const auto& r : all.ratings()) kall.insert(r.key());
  std::vector<RatingKey> inter;
  std::set_intersection(ka.begin(), ka.end(), kb.begin(), kb.end(), std::back_inserter(inter));
  EXPECT_TRUE(inter.empty());
  std::set<RatingKey> uni = ka;
  uni.insert(kb.begin(), kb.end());
  EXPECT_EQ(uni, kall);
}

TEST(SplitTrainTest, HundredRatingsTenUsers) {
  std::vector<Rating> rows;
  for (UserId u = 1; u <= 10; ++u)
    for (ItemId i = 1; i <= 10; ++i) rows.push_back({u, i * 7 + u, 0.5 * static_cast<double>(i), i});
  const RatingsTable table(rows, Scale{});
  const auto split = split_train_test(table, {0.8, 123});
  EXPECT_EQ(split.train.size(), 80u);
  EXPECT_EQ(split.test.size(), 20u);
  expect_partition(table, split.train, split.test);
}

TEST(SplitTrainTest, PartitionPropertyOverRandomTables) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const auto table = random_table(rng, 5 + rng.index(20), 10 + rng.index(40), 0.35);
    const double frac = 0.5 + 0.45 * rng.uniform();
    const auto split = split_train_test(table, {frac, seed * 31});
    expect_partition(table, split.train, split.test);
  }
}

TEST(SplitThreeWay, PartitionAndProportions) {
  Rng rng(17);
  const auto table = random_table(rng, 30, 200, 0.4);
  const auto s = split_three_way(table, {0.7, 0.15, 5});
  EXPECT_EQ(s.train.size() + s.detect.size() + s.eval.size(), table.size());
  expect_partition(table, s.train, merge(s.detect, s.eval));
  for (UserId u : table.users()) {
    const auto n = table.user_ratings(u).size();
    EXPECT_EQ(s.train.user_ratings(u).size(),
              static_cast<std::size_t>(std::ceil(0.7 * static_cast<double>(n) - 1e-9)));
  }
}

TEST(SplitTrainTest, RejectsBadFraction) {
  EXPECT_THROW(split_train_test(RatingsTable(), {1.0, 0}), ConfigError);
}

}  // namespace
}  // namespace nnf

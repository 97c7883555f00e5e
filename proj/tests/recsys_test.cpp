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

#include "nnf/recsys.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace nnf {
namespace {

// Textbook Pearson over the co-rated items, written independently of the
// merge-based implementation.
double pearson_oracle(const std::map<ItemId, double>& a, const std::map<ItemId, double>& b,
                      std::size_t min_overlap, std::size_t cap) {
  std::vector<double> x, y;
  for (const auto& [item, v] : a) {
    const auto it = b.find(item);
    if (it != b.end()) {
      x.push_back(v);
      y.push_back(it->second);
    }
  }
  if (x.size() < min_overlap || x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    syy += y[k] * y[k];
    sxy += x[k] * y[k];
  }
  const double cov = sxy - sx * sy / n;
  const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  if (vx <= 1e-12 || vy <= 1e-12) return 0.0;
  return cov / std::sqrt(vx * vy) * std::min<double>(n, static_cast<double>(cap)) /
         static_cast<double>(cap);
}

TEST(Pearson, IdenticalProfilesGiveOne) {
  std::map<ItemId, double> a;
  for (ItemId i = 1; i <= 60; ++i) a[i] = 0.5 * static_cast<double>(1 + i % 10);
  EXPECT_NEAR(pearson_similarity(a, a, KnnConfig{}), 1.0, 1e-12);
}

TEST(Pearson, OverlapBelowMinimumIsZero) {
  const std::map<ItemId, double> a{{1, 3.0}, {2, 4.0}}, b{{1, 5.0}, {3, 1.0}};
  EXPECT_EQ(pearson_similarity(a, b, KnnConfig{35, 2, 50}), 0.0);
}

TEST(Pearson, ReversedTripleWithSignificanceWeight) {
  const std::map<ItemId, double> a{{1, 1}, {2, 2}, {3, 3}}, b{{1, 3}, {2, 2}, {3, 1}};
  EXPECT_NEAR(pearson_similarity(a, b, KnnConfig{35, 2, 50}), -0.06, 1e-12);
}

TEST(Pearson, ZeroVarianceIsZero) {
  const std::map<ItemId, double> a{{1, 3}, {2, 3}, {3, 3}}, b{{1, 1}, {2, 2}, {3, 5}};
  EXPECT_EQ(pearson_similarity(a, b, KnnConfig{}), 0.0);
}

TEST(Pearson, SymmetricAndMatchesOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<ItemId, double> a, b;
    for (ItemId i = 1; i <= 40; ++i) {
      if (rng.uniform() < 0.5) a[i] = 0.5 * static_cast<double>(1 + rng.index(10));
      if (rng.uniform() < 0.5) b[i] = 0.5 * static_cast<double>(1 + rng.index(10));
    }
    const KnnConfig cfg{35, 1 + rng.index(3), 1 + rng.index(30)};
    const double ab = pearson_similarity(a, b, cfg);
    EXPECT_EQ(ab, pearson_similarity(b, a, cfg));
    EXPECT_NEAR(ab, pearson_oracle(a, b, cfg.min_overlap, cfg.significance_cap), 1e-9);
    EXPECT_LE(std::fabs(ab), 1.0);
  }
}

TEST(Pearson, SpanAndMapOverloadsAgree) {
  Rng rng(4);
  const auto table = random_table(rng, 10, 30, 0.6);
  auto to_map = [&](UserId u) {
    std::map<ItemId, double> m;
    for (const auto& r : table.user_ratings(u)) m[r.item] = r.value;
    return m;
  };
  for (UserId u : table.users())
    for (UserId v : table.users())
      EXPECT_EQ(pearson_similarity(table.user_ratings(u), table.user_ratings(v), KnnConfig{}),
                pearson_similarity(to_map(u), to_map(v), KnnConfig{}));
}

// User 1 has mean 3.0; user 2 agrees perfectly on items 1-2 and deviates by
// +0.5 from its own mean on item 3.
RatingsTable single_neighbor_table() {
  return RatingsTable({{1, 1, 2.0, 0},
                       {1, 2, 4.0, 0},
                       {2, 1, 2.0, 0},
                       {2, 2, 4.0, 0},
                       {2, 3, 3.75, 0},
                       {3, 4, 3.0, 0}},
                      Scale{});
}

TEST(KnnPredict, SingleNeighborWeightedDeviation) {
  const auto train = single_neighbor_table();
  // mean(user 2) = (2 + 4 + 3.75) / 3 = 3.25, deviation on item 3 = +0.5.
  const auto p = knn_predict(train, 1, 3, KnnConfig{35, 2, 2});
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(*p, 3.5, 1e-12);
  // Significance weighting scales w but cancels in the single-neighbor ratio.
  EXPECT_NEAR(*knn_predict(train, 1, 3, KnnConfig{}), 3.5, 1e-12);
}

TEST(KnnPredict, NoNeighborRatedItem) {
  const auto train = single_neighbor_table();
  EXPECT_FALSE(knn_predict(train, 1, 4, KnnConfig{}).has_value());
}

TEST(KnnPredict, AllSimilaritiesZero) {
  // User 2 is constant on the overlap, so its similarity to user 1 is 0.
  const RatingsTable train(
      {{1, 1, 2.0, 0}, {1, 2, 4.0, 0}, {2, 1, 3.0, 0}, {2, 2, 3.0, 0}, {2, 3, 5.0, 0}}, Scale{});
  EXPECT_FALSE(knn_predict(train, 1, 3, KnnConfig{}).has_value());
}

TEST(KnnPredict, UnknownUserThrowsUnknownItemUnpredictable) {
  const auto train = single_neighbor_table();
  EXPECT_THROW(knn_predict(train, 99, 1, KnnConfig{}), DataError);
  EXPECT_FALSE(knn_predict(train, 1, 999, KnnConfig{}).has_value());
}

TEST(KnnPredict, OutputWithinScale) {
  Rng rng(9);
  const auto train = random_table(rng, 30, 40, 0.5);
  KnnPredictor knn(train, KnnConfig{5, 2, 50});
  for (UserId u : train.users())
    for (ItemId i = 1; i <= 40; ++i) {
      const auto p = knn.predict(u, i);
      if (p) {
        EXPECT_GE(*p, 0.5);
        EXPECT_LE(*p, 5.0);
      }
    }
}

TEST(KnnConfig, RejectsZeroK) { EXPECT_THROW((KnnConfig{0, 2, 50}.validate()), ConfigError); }

TEST(MfTrain, ConstantTarget) {
  std::vector<Rating> rows;
  for (UserId u = 1; u <= 20; ++u)
    for (ItemId i = 1; i <= 15; ++i)
      if ((u + i) % 3 != 0) rows.push_back({u, i, 3.0, 0});
  MfConfig cfg;
  cfg.epochs = 20;
  const auto res = mf_train(RatingsTable(rows, Scale{}), cfg);
  EXPECT_DOUBLE_EQ(res.model.global_mean(), 3.0);
  EXPECT_LT(res.epoch_rmse.back(), 1e-2);
}

TEST(MfTrain, BitwiseDeterministic) {
  Rng rng(2);
  const auto train = random_table(rng, 25, 40, 0.3);
  MfConfig cfg;
  cfg.seed = 77;
  cfg.epochs = 5;
  const auto a = mf_train(train, cfg), b = mf_train(train, cfg);
  EXPECT_EQ(a.model.to_json().dump(), b.model.to_json().dump());
  EXPECT_EQ(a.epoch_rmse, b.epoch_rmse);
}

TEST(MfTrain, RankOneTwoByTwo) {
  // r = a_u * b_i with a = (1, 2), b = (1.5, 2.5).
  const RatingsTable train({{1, 1, 1.5, 0}, {1, 2, 2.5, 0}, {2, 1, 3.0, 0}, {2, 2, 5.0, 0}},
                           Scale{});
  MfConfig cfg;
  cfg.factors = 2;
  cfg.epochs = 200;
  cfg.learning_rate = 0.05;
  const auto res = mf_train(train, cfg);
  EXPECT_LT(res.epoch_rmse.back(), 0.1);
}

TEST(MfTrain, RmseNonIncreasingAfterWarmup) {
  Rng rng(31);
  const auto train = random_table(rng, 60, 80, 0.25);
  MfConfig cfg;
  cfg.seed = 5;
  cfg.epochs = 30;
  const auto res = mf_train(train, cfg);
  for (std::size_t e = 3; e + 1 < res.epoch_rmse.size(); ++e)
    EXPECT_LE(res.epoch_rmse[e + 1], res.epoch_rmse[e] + 1e-3) << "epoch " << e;
}

TEST(MfTrain, EmptyTableRejected) { EXPECT_THROW(mf_train(RatingsTable(), MfConfig{}), DataError); }

TEST(MfTrain, DivergenceAborts) {
  Rng rng(1);
  const auto train = random_table(rng, 10, 10, 0.8);
  MfConfig cfg;
  cfg.learning_rate = 50.0;
  cfg.epochs = 50;
  EXPECT_THROW(mf_train(train, cfg), StageError);
}

TEST(MfModel, CheckpointRoundTrip) {
  Rng rng(12);
  const auto train = random_table(rng, 8, 12, 0.5);
  MfConfig cfg;
  cfg.epochs = 3;
  const auto model = mf_train(train, cfg).model;
  TempDir dir;
  model.save(dir.path() / "mf.json");
  const auto back = MfModel::load(dir.path() / "mf.json");
  for (UserId u : train.users())
    for (ItemId i : train.items()) EXPECT_EQ(back.score(u, i), model.score(u, i));
}

// Model with one user, zero factors and per-item biases equal to `scores`.
MfModel handcrafted(const std::vector<std::pair<ItemId, double>>& scores) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& [id, s] : scores) items.push_back({{"id", id}, {"bias", s}, {"factors", {0.0}}});
  return MfModel::from_json({{"format", "nnf.mf"},
                             {"version", 1},
                             {"factors", 1},
                             {"global_mean", 0.0},
                             {"scale", {0.5, 5.0}},
                             {"users", {{{"id", 1}, {"bias", 0.0}, {"factors", {0.0}}}}},
                             {"items", items}});
}

TEST(RecommendTopK, ZeroKIsEmpty) {
  const auto model = handcrafted({{1, 4.0}, {2, 3.0}});
  EXPECT_TRUE(recommend_topk(model, RatingsTable(), 1, 0).items.empty());
}

TEST(RecommendTopK, TieBreakByItemId) {
  const auto model = handcrafted({{7, 3.0}, {3, 3.0}, {5, 1.0}});
  const auto top = recommend_topk(model, RatingsTable(), 1, 2);
  ASSERT_EQ(top.items.size(), 2u);
  EXPECT_EQ(top.items[0].first, 3);
  EXPECT_EQ(top.items[1].first, 7);
}

TEST(RecommendTopK, MatchesBruteForceSort) {
  const std::vector<std::pair<ItemId, double>> scores{{10, 2.0}, {11, 4.1}, {12, 3.9}};
  const auto model = handcrafted(scores);
  auto oracle = scores;
  std::sort(oracle.begin(), oracle.end(), [](auto a, auto b) { return a.second > b.second; });
  const auto top = recommend_topk(model, RatingsTable(), 1, 2);
  ASSERT_EQ(top.items.size(), 2u);
  EXPECT_EQ(top.items[0].first, oracle[0].first);
  EXPECT_EQ(top.items[1].first, oracle[1].first);
  EXPECT_EQ(top.items[0].first, 11);
}

TEST(RecommendTopK, ExcludesTrainItemsAndAllRatedGivesEmpty) {
  Rng rng(6);
  const auto train = random_table(rng, 15, 25, 0.4);
  MfConfig cfg;
  cfg.epochs = 3;
  const auto model = mf_train(train, cfg).model;
  for (UserId u : train.users()) {
    const auto top = recommend_topk(model, train, u, 10);
    for (std::size_t k = 0; k < top.items.size(); ++k) {
      EXPECT_FALSE(train.contains({u, top.items[k].first}));
      if (k > 0) EXPECT_GE(top.items[k - 1].second, top.items[k].second);
    }
  }
  const RatingsTable full({{1, 1, 3.0, 0}, {1, 2, 4.0, 0}}, Scale{});
  const auto m = mf_train(full, cfg).model;
  EXPECT_TRUE(recommend_topk(m, full, 1, 5).items.empty());
  EXPECT_THROW(recommend_topk(m, full, 42, 5), DataError);
}

}  // namespace
}  // namespace nnf

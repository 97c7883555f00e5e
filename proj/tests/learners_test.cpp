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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nnf {
namespace {

// Two uniform features, label = x0 + x1 > 1.
Samples separable(std::uint64_t seed, std::size_t n, double margin = 0.0) {
  Rng rng(seed);
  Samples s(2);
  while (s.size() < n) {
    const double a = rng.uniform(), b = rng.uniform();
    if (std::fabs(a + b - 1.0) < margin) continue;
    s.push(std::vector<double>{a, b}, a + b > 1.0 ? 1 : 0);
  }
  return s;
}

// Label = (x0 > 0.5) xor (x1 > 0.5), corners kept away from the cut lines.
Samples xor_fixture(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  Samples s(2);
  while (s.size() < n) {
    const double a = rng.uniform(), b = rng.uniform();
    if (std::fabs(a - 0.5) < 0.05 || std::fabs(b - 0.5) < 0.05) continue;
    s.push(std::vector<double>{a, b}, ((a > 0.5) != (b > 0.5)) ? 1 : 0);
  }
  return s;
}

// Two Gaussian blobs in 3 dimensions centered at -1 and +1, label = blob.
Samples blobs(Rng& rng, std::size_t n, double sd = 0.6) {
  Samples s(3);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint8_t y = k % 2;
    std::vector<double> r(3);
    for (auto& v : r) v = (y ? 1.0 : -1.0) + sd * rng.normal();
    s.push(r, y);
  }
  return s;
}

double accuracy(const Classifier& c, const Samples& s) { return 1.0 - error_rate(c, s); }

std::vector<double> scores(const Classifier& c, const Samples& s) {
  std::vector<double> out;
  for (std::size_t k = 0; k < s.size(); ++k) out.push_back(c.score(s.row(k)));
  return out;
}

double log_loss_of(double f, int y) {
  return y ? std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
}

// --- samples ---------------------------------------------------------------------

TEST(Samples, PushSubsetAndMixing) {
  Samples s(2);
  s.push(std::vector<double>{1, 2}, 1);
  s.push(std::vector<double>{3, 4}, 0);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.positives(), 1u);
  const std::vector<std::size_t> rows{1, 1};
  const auto sub = s.subset(rows);
  EXPECT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.row(1)[0], 3.0);
  EXPECT_THROW(s.push(std::vector<double>{1}, 1), DataError);
  EXPECT_THROW(s.push(std::vector<double>{1, 2}), DataError);
}

TEST(Classifier, SingleClassIsConstant) {
  Samples s(1);
  for (int k = 0; k < 5; ++k) s.push(std::vector<double>{double(k)}, 1);
  Rng rng(1);
  Forest f;
  f.fit(s, rng);
  ASSERT_TRUE(f.constant());
  EXPECT_TRUE(f.predict(std::vector<double>{100.0}));
  Samples empty(1);
  LogisticRegression lr;
  lr.fit(empty, rng);
  EXPECT_FALSE(lr.predict(std::vector<double>{0.0}));
}

// --- trees ------------------------------------------------------------------------

TEST(Tree, DepthZeroPredictsMajority) {
  const auto s = separable(1, 100);
  const bool majority = 2 * s.positives() > s.size();
  ForestParams p;
  p.trees = 1;
  p.tree.max_depth = 0;
  Forest f(p);
  Rng rng(3);
  f.fit(s, rng);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_EQ(f.predict(s.row(k)), majority);
}

TEST(Tree, StumpMatchesBruteForceGini) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng gen(seed);
    Samples s(1);
    for (int k = 0; k < 40; ++k) {
      const double x = std::round(gen.uniform() * 1000) / 1000;
      s.push(std::vector<double>{x}, (x > 0.6) != (gen.uniform() < 0.15) ? 1 : 0);
    }
    // Oracle: try every midpoint, keep the lowest weighted Gini.
    std::vector<double> xs;
    for (std::size_t k = 0; k < s.size(); ++k) xs.push_back(s.row(k)[0]);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    double best = INFINITY, best_t = 0;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
      const double t = 0.5 * (xs[k] + xs[k + 1]);
      double nl = 0, pl = 0, nr = 0, pr = 0;
      for (std::size_t r = 0; r < s.size(); ++r)
        (s.row(r)[0] <= t ? nl : nr) += 1, (s.row(r)[0] <= t ? pl : pr) += s.y[r];
      const double g = 2 * pl * (nl - pl) / nl + 2 * pr * (nr - pr) / nr;
      if (g < best - 1e-12) {
        best = g;
        best_t = t;
      }
    }
    DecisionTree stump(TreeParams{1, 2, 1, 0, false});
    Rng rng(seed);
    stump.fit(s, rng);
    ASSERT_EQ(stump.tree().nodes.size(), 3u);
    EXPECT_NEAR(stump.tree().nodes[0].threshold, best_t, 1e-12) << seed;
  }
}

TEST(Tree, RespectsDepthAndSeparates) {
  const auto s = separable(2, 300, 0.02);
  DecisionTree t(TreeParams{6, 2, 1, 0, false});
  Rng rng(1);
  t.fit(s, rng);
  EXPECT_LE(t.tree().depth(), 6u);
  EXPECT_GT(accuracy(t, s), 0.9);
}

// --- random forest -----------------------------------------------------------------

TEST(Forest, SeparableOobError) {
  const auto s = separable(7, 100);
  ForestParams p;
  p.trees = 100;
  Forest f(p);
  Rng rng(11);
  f.fit(s, rng);
  ASSERT_TRUE(f.oob_error());
  EXPECT_LE(*f.oob_error(), 0.1);
}

TEST(Forest, Deterministic) {
  const auto s = separable(8, 150);
  ForestParams p;
  p.trees = 30;
  Forest a(p), b(p);
  Rng r1(5), r2(5);
  a.fit(s, r1);
  b.fit(s, r2);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  const auto probe = separable(9, 100);
  EXPECT_EQ(scores(a, probe), scores(b, probe));
}

TEST(Forest, OobTracksHeldOutError) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng gen(100 + seed);
    const auto train = blobs(gen, 300, 1.0);
    const auto test = blobs(gen, 1000, 1.0);
    ForestParams p;
    p.trees = 60;
    Forest f(p);
    Rng rng(seed);
    f.fit(train, rng);
    ASSERT_TRUE(f.oob_error());
    EXPECT_NEAR(*f.oob_error(), error_rate(f, test), 0.15) << seed;
  }
}

TEST(Forest, ExtraTreesFit) {
  const auto s = separable(12, 200, 0.02);
  auto et = Forest::extra_trees(50);
  Rng rng(2);
  et.fit(s, rng);
  EXPECT_FALSE(et.oob_error());
  EXPECT_GT(accuracy(et, s), 0.9);
}

// --- gradient boosting -------------------------------------------------------------

TEST(Gbt, LossStrictlyDecreasesOnSeparable) {
  const auto s = separable(3, 200, 0.05);
  GbtParams p;
  p.rounds = 10;
  GradientBoosting g(p);
  Rng rng(1);
  g.fit(s, rng);
  ASSERT_EQ(g.train_loss().size(), 10u);
  for (std::size_t k = 1; k < 10; ++k) EXPECT_LT(g.train_loss()[k], g.train_loss()[k - 1]);
}

TEST(Gbt, FirstRoundMatchesStumpOracle) {
  const auto s = separable(4, 60, 0.05);
  const double n = static_cast<double>(s.size());
  const double prior = static_cast<double>(s.positives()) / n;
  const double f0 = std::log(prior / (1 - prior));
  const double lambda = 1.0, lr = 0.1;
  // Oracle: exhaustive depth-1 Newton split.
  const double p0 = 1 / (1 + std::exp(-f0));
  double best_gain = 0, best_loss = 0;
  for (std::size_t f = 0; f < 2; ++f) {
    std::vector<double> xs;
    for (std::size_t k = 0; k < s.size(); ++k) xs.push_back(s.row(k)[f]);
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
      if (xs[k] == xs[k + 1]) continue;
      const double t = 0.5 * (xs[k] + xs[k + 1]);
      double gl = 0, hl = 0, gr = 0, hr = 0;
      for (std::size_t r = 0; r < s.size(); ++r) {
        const double g = p0 - s.y[r], h = p0 * (1 - p0);
        if (s.row(r)[f] <= t) gl += g, hl += h;
        else gr += g, hr += h;
      }
      const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                           (gl + gr) * (gl + gr) / (hl + hr + lambda);
      if (gain > best_gain + 1e-12) {
        best_gain = gain;
        const double vl = -gl / (hl + lambda), vr = -gr / (hr + lambda);
        double loss = 0;
        for (std::size_t r = 0; r < s.size(); ++r)
          loss += log_loss_of(f0 + lr * (s.row(r)[f] <= t ? vl : vr), s.y[r]);
        best_loss = loss / n;
      }
    }
  }
  GbtParams p;
  p.rounds = 1;
  p.max_depth = 1;
  GradientBoosting g(p);
  Rng rng(0);
  g.fit(s, rng);
  EXPECT_NEAR(g.base_score(), f0, 1e-12);
  EXPECT_NEAR(g.train_loss()[0], best_loss, 1e-9);
}

TEST(Gbt, ZeroLearningRateKeepsPrior) {
  const auto s = separable(5, 80);
  GbtParams p;
  p.learning_rate = 0.0;
  p.rounds = 5;
  GradientBoosting g(p);
  Rng rng(0);
  g.fit(s, rng);
  const double prior = static_cast<double>(s.positives()) / static_cast<double>(s.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    EXPECT_NEAR(g.margin(s.row(k)), std::log(prior / (1 - prior)), 1e-12);
}

TEST(Gbt, ZeroRoundsPredictsMajority) {
  Samples s(1);
  for (int k = 0; k < 10; ++k) s.push(std::vector<double>{double(k)}, k < 7 ? 1 : 0);
  GbtParams p;
  p.rounds = 0;
  GradientBoosting g(p);
  Rng rng(0);
  g.fit(s, rng);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_TRUE(g.predict(s.row(k)));
}

// --- linear, NB, kNN -----------------------------------------------------------------

TEST(Logistic, SeparatesAndHandlesConstantFeatures) {
  const auto s = separable(6, 300, 0.02);
  LogisticRegression lr;
  Rng rng(0);
  lr.fit(s, rng);
  EXPECT_GT(accuracy(lr, s), 0.95);

  Samples flat(2);
  for (int k = 0; k < 10; ++k) flat.push(std::vector<double>{1.0, 1.0}, k < 7 ? 1 : 0);
  LogisticRegression c;
  c.fit(flat, rng);
  EXPECT_NEAR(c.score(std::vector<double>{1.0, 1.0}), 0.7, 1e-6);
}

TEST(Linear, SgdAndHingeSeparate) {
  const auto s = separable(13, 300, 0.05);
  for (LinearLoss loss : {LinearLoss::kLog, LinearLoss::kHinge}) {
    SgdParams p;
    p.loss = loss;
    SgdLinear m(p);
    Rng rng(4);
    m.fit(s, rng);
    EXPECT_GT(accuracy(m, s), 0.93) << m.kind();
  }
}

TEST(NaiveBayes, MatchesClosedFormOnOneFeature) {
  Samples s(1);
  const std::vector<double> c0{0, 1, 2}, c1{4, 6};
  for (double v : c0) s.push(std::vector<double>{v}, 0);
  for (double v : c1) s.push(std::vector<double>{v}, 1);
  GaussianNb nb;
  Rng rng(0);
  nb.fit(s, rng);
  const double eps = 1e-9 * 4.64;  // 1e-9 times the overall variance 4.64
  auto logpdf = [](double x, double m, double v) {
    return -0.5 * std::log(2 * M_PI * v) - (x - m) * (x - m) / (2 * v);
  };
  const double x = 3.0;
  const double l0 = std::log(0.6) + logpdf(x, 1.0, 2.0 / 3 + eps);
  const double l1 = std::log(0.4) + logpdf(x, 5.0, 1.0 + eps);
  EXPECT_NEAR(nb.score(std::vector<double>{x}), 1 / (1 + std::exp(l0 - l1)), 1e-9);
}

TEST(Knn, OneNeighborRecallsTraining) {
  Rng gen(1);
  const auto s = blobs(gen, 60);
  KnnClassifier knn(1);
  Rng rng(0);
  knn.fit(s, rng);
  EXPECT_EQ(accuracy(knn, s), 1.0);
}

// --- stacking -------------------------------------------------------------------------

TEST(Stacking, XorFollowsTheTree) {
  const auto train = xor_fixture(1, 400), test = xor_fixture(2, 400);
  std::vector<std::unique_ptr<Classifier>> bases;
  bases.push_back(std::make_unique<DecisionTree>(TreeParams{6, 2, 1, 0, false}));
  bases.push_back(std::make_unique<LogisticRegression>());
  Stacking st(std::move(bases));
  DecisionTree cart(TreeParams{6, 2, 1, 0, false});
  LogisticRegression lin;
  Rng r1(1), r2(1), r3(1);
  st.fit(train, r1);
  cart.fit(train, r2);
  lin.fit(train, r3);
  EXPECT_LT(accuracy(lin, test), 0.7);
  EXPECT_GE(accuracy(st, test), accuracy(cart, test) - 0.05);
}

TEST(Stacking, NotWorseThanBestBase) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng gen(seed);
    const auto train = blobs(gen, 200, 1.0), test = blobs(gen, 400, 1.0);
    auto make = [] {
      std::vector<std::unique_ptr<Classifier>> v;
      v.push_back(std::make_unique<KnnClassifier>(5));
      v.push_back(std::make_unique<DecisionTree>(TreeParams{12, 2, 1, 0, false}));
      v.push_back(std::make_unique<GaussianNb>());
      return v;
    };
    Stacking stack(make());
    Rng rng(seed);
    stack.fit(train, rng);
    double best = 0;
    for (auto& b : make()) {
      Rng r(seed);
      b->fit(train, r);
      best = std::max(best, accuracy(*b, test));
    }
    EXPECT_GE(accuracy(stack, test), best - 0.05) << seed;
  }
}

TEST(Stacking, ConstantBaseOutputsGiveMajority) {
  Samples s(1);
  for (int k = 0; k < 30; ++k) s.push(std::vector<double>{0.0}, k < 20 ? 1 : 0);
  std::vector<std::unique_ptr<Classifier>> bases;
  bases.push_back(std::make_unique<GaussianNb>());
  bases.push_back(std::make_unique<DecisionTree>());
  Stacking st(std::move(bases));
  Rng rng(0);
  st.fit(s, rng);
  EXPECT_TRUE(st.predict(std::vector<double>{0.0}));
  EXPECT_TRUE(st.predict(std::vector<double>{5.0}));
}

TEST(Stacking, MergesSingleClassFolds) {
  Samples s(1);
  for (int k = 0; k < 20; ++k) s.push(std::vector<double>{double(k)}, k == 3 ? 1 : 0);
  std::vector<std::unique_ptr<Classifier>> bases;
  bases.push_back(std::make_unique<GaussianNb>());
  Stacking st(std::move(bases), 5);
  Rng rng(0);
  st.fit(s, rng);
  EXPECT_LT(st.folds_used(), 5u);
}

// --- self-training bagging -----------------------------------------------------------

TEST(SelfTraining, EmptyUnlabeledIsPlainBagging) {
  Rng gen(3);
  const auto train = blobs(gen, 80, 1.0), probe = blobs(gen, 100, 1.0);
  SelfTrainingParams p;
  p.bags = 7;
  auto bases = [] {
    std::vector<std::unique_ptr<Classifier>> v;
    v.push_back(std::make_unique<DecisionTree>(TreeParams{4, 2, 1, kSqrtFeatures, true}));
    v.push_back(std::make_unique<SgdLinear>());
    return v;
  };
  SelfTrainingBagging st(bases(), p);
  Rng rng(42);
  st.fit_semi(train, Samples(3), rng);

  // Independent plain bagging with the same seed stream.
  Rng ref(42);
  const std::uint64_t base = ref.next();
  const auto protos = bases();
  std::vector<std::unique_ptr<Classifier>> bags;
  for (std::size_t b = 0; b < p.bags; ++b) {
    Rng r(derive_seed(base, b));
    std::vector<std::size_t> boot(train.size());
    for (auto& v : boot) v = r.index(train.size());
    auto c = protos[b % protos.size()]->fresh();
    c->fit(train.subset(boot), r);
    bags.push_back(std::move(c));
  }
  for (std::size_t k = 0; k < probe.size(); ++k) {
    std::size_t votes = 0;
    for (const auto& c : bags) votes += c->predict(probe.row(k));
    EXPECT_EQ(st.score(probe.row(k)), static_cast<double>(votes) / static_cast<double>(p.bags));
  }
  EXPECT_EQ(st.pseudo_labeled(), 0u);
}

TEST(SelfTraining, AcceptedOobNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng gen(seed);
    const auto labeled = blobs(gen, 30, 1.2);
    Samples unlabeled(3);
    const auto pool = blobs(gen, 300, 1.2);
    for (std::size_t k = 0; k < pool.size(); ++k) unlabeled.push(pool.row(k));
    std::vector<std::unique_ptr<Classifier>> bases;
    bases.push_back(std::make_unique<GaussianNb>());
    bases.push_back(std::make_unique<SgdLinear>());
    SelfTrainingBagging st(std::move(bases));
    Rng rng(seed);
    st.fit_semi(labeled, unlabeled, rng);
    ASSERT_EQ(st.oob_history().size(), 25u);
    for (const auto& h : st.oob_history())
      for (std::size_t k = 1; k < h.size(); ++k) EXPECT_LE(h[k], h[k - 1]);
  }
}

TEST(SelfTraining, TwoClusterFixtureNoWorseThanLabeledOnly) {
  Rng gen(9);
  const auto labeled = blobs(gen, 10, 0.8);
  const auto pool = blobs(gen, 200, 0.8), test = blobs(gen, 1000, 0.8);
  Samples unlabeled(3);
  for (std::size_t k = 0; k < pool.size(); ++k) unlabeled.push(pool.row(k));
  auto bases = [] {
    std::vector<std::unique_ptr<Classifier>> v;
    v.push_back(std::make_unique<DecisionTree>(TreeParams{4, 2, 1, kSqrtFeatures, true}));
    v.push_back(std::make_unique<SgdLinear>());
    return v;
  };
  SelfTrainingBagging semi(bases()), plain(bases());
  Rng r1(1), r2(1);
  semi.fit_semi(labeled, unlabeled, r1);
  plain.fit_semi(labeled, Samples(3), r2);
  EXPECT_GE(accuracy(semi, test), accuracy(plain, test) - 0.02);
}

// --- isolation forest -----------------------------------------------------------------

TEST(Isolation, NormalizerValues) {
  EXPECT_EQ(isolation_c(1), 0.0);
  EXPECT_EQ(isolation_c(2), 1.0);
  EXPECT_NEAR(isolation_c(3), 2 * 1.5 - 4.0 / 3, 1e-12);
  for (std::size_t n : {4u, 10u, 256u, 5000u}) {
    double h = 0;
    for (std::size_t i = 1; i < n; ++i) h += 1.0 / static_cast<double>(i);
    EXPECT_NEAR(isolation_c(n), 2 * h - 2.0 * (n - 1.0) / n, 1e-9);
  }
  // Large n approaches the logarithmic form.
  const double n = 5000;
  EXPECT_NEAR(isolation_c(5000), 2 * (std::log(n - 1) + 0.5772156649015329) - 2 * (n - 1) / n, 1e-3);
  EXPECT_THROW(Stacking(std::vector<std::unique_ptr<Classifier>>{}), ConfigError);
}

TEST(Isolation, FarOutlierRanksAboveDuplicates) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Samples s(3);
    for (int k = 0; k < 100; ++k) s.push(std::vector<double>{1.0, 2.0, 3.0});
    s.push(std::vector<double>{50.0, -40.0, 80.0});
    IsolationForest f;
    Rng rng(seed);
    f.fit(s, rng);
    std::vector<double> dup;
    for (std::size_t k = 0; k < 100; ++k) dup.push_back(f.score(s.row(k)));
    std::nth_element(dup.begin(), dup.begin() + 50, dup.end());
    EXPECT_GT(f.score(s.row(100)), dup[50]) << seed;
    EXPECT_LE(f.sample_size_used(), 101u);
  }
}

TEST(Isolation, IdenticalPointsScoreEqually) {
  Samples s(2);
  for (int k = 0; k < 20; ++k) s.push(std::vector<double>{0.5, 0.5});
  IsolationForest f;
  Rng rng(0);
  f.fit(s, rng);
  const double a = f.score(s.row(0));
  for (std::size_t k = 1; k < s.size(); ++k) EXPECT_EQ(f.score(s.row(k)), a);
}

TEST(Isolation, ScoresInOpenUnitInterval) {
  Rng gen(4);
  const auto s = blobs(gen, 300);
  IsolationForest f;
  Rng rng(1);
  f.fit(s, rng);
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_GT(f.score(s.row(k)), 0.0);
    EXPECT_LT(f.score(s.row(k)), 1.0);
  }
}

TEST(Isolation, ExtensionZeroIsAxisAligned) {
  Rng gen(5);
  const auto s = blobs(gen, 200);
  IsolationParams p;
  p.extension_level = 0;
  p.trees = 10;
  IsolationForest f(p);
  Rng rng(1);
  f.fit(s, rng);
  const auto j = f.to_json();
  std::size_t splits = 0;
  for (const auto& tree : j.at("trees"))
    for (const auto& n : tree) {
      if (!n.contains("normal")) continue;
      ++splits;
      std::size_t nonzero = 0;
      for (double v : n.at("normal")) nonzero += v != 0.0;
      EXPECT_EQ(nonzero, 1u);
    }
  EXPECT_GT(splits, 0u);
}

TEST(Isolation, RoundTripAndSeedDeterminism) {
  Rng gen(6);
  const auto s = blobs(gen, 150);
  IsolationForest a, b;
  Rng r1(3), r2(3);
  a.fit(s, r1);
  b.fit(s, r2);
  const auto c = IsolationForest::from_json(nlohmann::json::parse(a.to_json().dump()));
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_EQ(a.score(s.row(k)), b.score(s.row(k)));
    EXPECT_EQ(a.score(s.row(k)), c.score(s.row(k)));
  }
  Samples one(3);
  one.push(std::vector<double>{0, 0, 0});
  Rng r(0);
  EXPECT_THROW(IsolationForest().fit(one, r), DataError);
}

// --- serialization ----------------------------------------------------------------------

TEST(Serialization, EveryLearnerRoundTrips) {
  Rng gen(10);
  const auto train = blobs(gen, 120, 1.0), probe = blobs(gen, 60, 1.0);
  std::vector<std::unique_ptr<Classifier>> all;
  all.push_back(std::make_unique<DecisionTree>());
  all.push_back(std::make_unique<DecisionTree>(TreeParams{4, 2, 1, kSqrtFeatures, true}));
  ForestParams fp;
  fp.trees = 10;
  all.push_back(std::make_unique<Forest>(fp));
  all.push_back(Forest::extra_trees(10).fresh());
  GbtParams gp;
  gp.rounds = 10;
  all.push_back(std::make_unique<GradientBoosting>(gp));
  all.push_back(std::make_unique<LogisticRegression>());
  all.push_back(std::make_unique<SgdLinear>());
  SgdParams hp;
  hp.loss = LinearLoss::kHinge;
  all.push_back(std::make_unique<SgdLinear>(hp));
  all.push_back(std::make_unique<GaussianNb>());
  all.push_back(std::make_unique<KnnClassifier>(3));
  {
    std::vector<std::unique_ptr<Classifier>> b;
    b.push_back(std::make_unique<GaussianNb>());
    b.push_back(std::make_unique<KnnClassifier>(3));
    all.push_back(std::make_unique<Stacking>(std::move(b)));
  }
  {
    std::vector<std::unique_ptr<Classifier>> b;
    b.push_back(std::make_unique<GaussianNb>());
    SelfTrainingParams sp;
    sp.bags = 3;
    all.push_back(std::make_unique<SelfTrainingBagging>(std::move(b), sp));
  }
  for (auto& c : all) {
    Rng rng(1);
    c->fit(train, rng);
    const auto text = c->to_json().dump();
    const auto back = classifier_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(back->kind(), c->kind());
    EXPECT_EQ(back->to_json().dump(), text) << c->kind();
    EXPECT_EQ(scores(*back, probe), scores(*c, probe)) << c->kind();
  }
  EXPECT_THROW(classifier_from_json(nlohmann::json{{"kind", "nope"}, {"params", {}}, {"constant", nullptr}}),
               DataError);
}

}  // namespace
}  // namespace nnf

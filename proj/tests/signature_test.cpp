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

#include "nnf/signature.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace nnf {
namespace {

constexpr std::int64_t kDay0 = 18262;  // 2020-01-01

struct Fixture {
  std::vector<Rating> rows;
  LabelMap labels;

  // `earlier` ratings on the day before, then `last` on the final day with
  // the first `noisy` of them Noisy.
  void add_user(UserId u, std::size_t earlier, std::size_t last, std::size_t noisy,
                bool earlier_noisy = false) {
    ItemId item = 1;
    for (std::size_t k = 0; k < earlier; ++k) {
      rows.push_back({u, item, 3.0, (kDay0 - 1) * kSecondsPerDay + 3600 + std::int64_t(k)});
      labels[{u, item++}] = earlier_noisy ? Verdict::kNoisy : Verdict::kClean;
    }
    for (std::size_t k = 0; k < last; ++k) {
      rows.push_back({u, item, 4.0, kDay0 * kSecondsPerDay + 60 * std::int64_t(k)});
      labels[{u, item++}] = k < noisy ? Verdict::kNoisy : Verdict::kClean;
    }
  }
  RatingsTable table() const { return RatingsTable(rows, Scale{}); }
};

TEST(OptOut, SixOfTenIsHit) {
  Fixture f;
  f.add_user(1, 5, 10, 6);
  const auto hits = detect_optout(f.table(), f.labels);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].signature_id, "optout");
  EXPECT_EQ(hits[0].user, 1);
  EXPECT_EQ(hits[0].last_day, kDay0);
  EXPECT_EQ(hits[0].noisy_count, 6u);
  EXPECT_EQ(hits[0].total_count, 10u);
  EXPECT_DOUBLE_EQ(hits[0].ratio, 0.6);
}

TEST(OptOut, FiveOfTenIsNotHit) {
  Fixture f;
  f.add_user(1, 5, 10, 5);
  EXPECT_TRUE(detect_optout(f.table(), f.labels).empty());
}

TEST(OptOut, NoNoiseIsNotHit) {
  Fixture f;
  f.add_user(1, 5, 3, 0);
  EXPECT_TRUE(detect_optout(f.table(), f.labels).empty());
  EXPECT_TRUE(
      detect_optout(f.table(), f.labels, {0.5, OptOutDenominator::kGlobalNoise}).empty());
}

TEST(OptOut, StrictBoundaryOverCompositions) {
  for (std::size_t total = 1; total <= 12; ++total)
    for (std::size_t noisy = 0; noisy <= total; ++noisy) {
      Fixture f;
      f.add_user(7, 3, total, noisy, true);
      const double ratio = double(noisy) / double(total);
      const auto at = detect_optout(f.table(), f.labels, {ratio, {}});
      EXPECT_TRUE(at.empty()) << noisy << "/" << total;
      const auto half = detect_optout(f.table(), f.labels);
      EXPECT_EQ(half.size(), 2 * noisy > total ? 1u : 0u) << noisy << "/" << total;
    }
}

TEST(OptOut, OnlyLastDayCounts) {
  Fixture f;
  f.add_user(1, 20, 2, 0, true);  // noisy history, clean last day
  f.add_user(2, 20, 2, 2);        // clean history, noisy last day
  const auto hits = detect_optout(f.table(), f.labels);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].user, 2);
}

TEST(OptOut, DayBoundaryIsUtcMidnight) {
  std::vector<Rating> rows{{1, 1, 3.0, kDay0 * kSecondsPerDay - 1},
                           {1, 2, 3.0, kDay0 * kSecondsPerDay}};
  LabelMap labels{{{1, 1}, Verdict::kNoisy}, {{1, 2}, Verdict::kClean}};
  EXPECT_TRUE(detect_optout(RatingsTable(rows, Scale{}), labels).empty());
  labels[{1, 2}] = Verdict::kNoisy;
  const auto hits = detect_optout(RatingsTable(rows, Scale{}), labels);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].total_count, 1u);
  EXPECT_EQ(format_day(hits[0].last_day), "2020-01-01");
}

TEST(OptOut, GlobalNoiseDenominator) {
  Fixture f;
  f.add_user(1, 4, 10, 3, true);  // 3 of 7 noisy ratings are on the last day
  f.add_user(2, 4, 10, 3);        // all 3 noisy ratings on the last day
  const auto hits = detect_optout(f.table(), f.labels, {0.5, OptOutDenominator::kGlobalNoise});
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].user, 2);
  EXPECT_EQ(hits[0].total_count, 3u);
  EXPECT_DOUBLE_EQ(hits[0].ratio, 1.0);
}

TEST(OptOut, MissingLabelThrows) {
  Fixture f;
  f.add_user(1, 2, 2, 1);
  f.labels.erase({1, 1});
  EXPECT_THROW(detect_optout(f.table(), f.labels), DataError);
  EXPECT_THROW(detect_optout(f.table(), {}), DataError);
}

TEST(OptOut, BadThresholdThrows) {
  Fixture f;
  f.add_user(1, 2, 2, 1);
  EXPECT_THROW(detect_optout(f.table(), f.labels, {1.5, {}}), ConfigError);
}

TEST(OptOut, LabelMonotone) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Fixture f;
    for (UserId u = 1; u <= 15; ++u) {
      const std::size_t last = 1 + rng.index(8);
      f.add_user(u, rng.index(5), last, rng.index(last + 1));
    }
    const auto t = f.table();
    auto before = detect_optout(t, f.labels);
    LabelMap more = f.labels;
    for (auto& [key, v] : more)
      if (rng.uniform() < 0.2) v = Verdict::kNoisy;
    const auto after = detect_optout(t, more);
    for (const auto& h : before)
      EXPECT_TRUE(std::any_of(after.begin(), after.end(),
                              [&](const SignatureHit& a) { return a.user == h.user; }));
  }
}

TEST(Action, RemoveUserDropsEveryRating) {
  Fixture f;
  f.add_user(1, 70, 10, 10);
  f.add_user(2, 5, 5, 0);
  const auto t = f.table();
  const auto hits = detect_optout(t, f.labels);
  ASSERT_EQ(hits.size(), 1u);
  const auto out = apply_signature_action(t, hits);
  EXPECT_EQ(out.size(), t.size() - 80);
  EXPECT_FALSE(out.has_user(1));
}

TEST(Action, RemoveLastDayKeepsHistory) {
  Fixture f;
  f.add_user(1, 70, 10, 10);
  const auto t = f.table();
  const auto out = apply_signature_action(t, detect_optout(t, f.labels),
                                          SignatureAction::kRemoveLastDay);
  EXPECT_EQ(out.size(), 70u);
}

TEST(Action, NoHitsAndIdempotence) {
  Fixture f;
  f.add_user(1, 5, 10, 8);
  f.add_user(2, 5, 10, 1);
  const auto t = f.table();
  EXPECT_EQ(apply_signature_action(t, {}).size(), t.size());
  const auto hits = detect_optout(t, f.labels);
  for (auto a : {SignatureAction::kRemoveUser, SignatureAction::kRemoveLastDay}) {
    const auto once = apply_signature_action(t, hits, a);
    const auto twice = apply_signature_action(once, hits, a);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t k = 0; k < once.size(); ++k) EXPECT_EQ(once[k].key(), twice[k].key());
  }
}

TEST(Hits, CsvRoundTripAndDates) {
  EXPECT_EQ(format_day(0), "1970-01-01");
  EXPECT_EQ(parse_day("2020-01-01"), kDay0);
  EXPECT_EQ(parse_day(format_day(-1)), -1);
  EXPECT_THROW(parse_day("2020-02-30"), DataError);
  EXPECT_THROW(parse_day("20-1-1"), DataError);
  std::vector<SignatureHit> hits{{"optout", 3, kDay0, 6, 10, 0.6},
                                 {"optout", 9, kDay0 + 40, 2, 3, 2.0 / 3.0}};
  TempDir dir;
  write_hits_csv(hits, SignatureAction::kRemoveUser, dir.path() / "s.csv");
  const auto back = read_hits_csv(dir.path() / "s.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(back[k].user, hits[k].user);
    EXPECT_EQ(back[k].last_day, hits[k].last_day);
    EXPECT_EQ(back[k].noisy_count, hits[k].noisy_count);
    EXPECT_EQ(back[k].total_count, hits[k].total_count);
    EXPECT_EQ(back[k].ratio, hits[k].ratio);
  }
}

TEST(Registry, BuiltinsAndErrors) {
  auto reg = SignatureRegistry::with_builtins();
  EXPECT_EQ(reg.ids(), std::vector<std::string>{"optout"});
  const auto sig = reg.make("optout");
  EXPECT_TRUE(sig->needs_labels());
  Fixture f;
  f.add_user(1, 1, 4, 3);
  EXPECT_EQ(sig->detect(f.table(), &f.labels).size(), 1u);
  EXPECT_THROW(sig->detect(f.table(), nullptr), StageError);
  EXPECT_THROW(reg.make("shilling"), ConfigError);
  EXPECT_THROW(reg.add("optout", nullptr), ConfigError);
  EXPECT_EQ(parse_signature_action("RemoveLastDay"), SignatureAction::kRemoveLastDay);
  EXPECT_EQ(parse_optout_denominator("global_noise"), OptOutDenominator::kGlobalNoise);
  EXPECT_THROW(parse_signature_action("Quarantine"), ConfigError);
}

}  // namespace
}  // namespace nnf

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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nnf/csv.hpp"
#include "nnf/pipeline.hpp"

namespace nnf {

namespace {

constexpr std::int64_t kEpoch2015 = 1420070400;

std::int64_t floor_day(std::int64_t ts) {
  std::int64_t d = ts / kSecondsPerDay;
  if (ts % kSecondsPerDay < 0) --d;
  return d;
}

std::vector<double> scale_grid(const Scale& s, double step) {
  if (!(step > 0.0)) throw ConfigError("noise grid step must be positive");
  std::vector<double> g;
  for (std::size_t k = 0;; ++k) {
    const double v = s.min + static_cast<double>(k) * step;
    if (v > s.max + 1e-9) break;
    g.push_back(v);
  }
  if (g.size() < 2) throw ConfigError("rating scale has fewer than two grid values");
  return g;
}

double draw_other(const std::vector<double>& grid, double original, Rng& rng) {
  std::vector<double> options;
  for (double v : grid)
    if (std::abs(v - original) > 1e-9) options.push_back(v);
  return options[rng.index(options.size())];
}

}  // namespace

PlantedData generate_planted(const PlantedSpec& spec) {
  if (spec.users == 0 || spec.items == 0 || spec.factors == 0)
    throw ConfigError("planted data needs users, items and factors");
  if (spec.min_per_user == 0 || spec.min_per_user > spec.max_per_user)
    throw ConfigError("planted data needs 0 < min_per_user <= max_per_user");
  Rng rng(spec.seed);
  const std::size_t f = spec.factors;
  const double factor_sd = std::pow(0.35 / static_cast<double>(f), 0.25);
  const auto draw = [&](std::size_t n, double sd) {
    std::vector<double> v(n);
    for (auto& x : v) x = sd * rng.normal();
    return v;
  };
  const double mu = 3.5;
  const auto bu = draw(spec.users, 0.3), bi = draw(spec.items, 0.3);
  const auto p = draw(spec.users * f, factor_sd), q = draw(spec.items * f, factor_sd);

  std::vector<std::size_t> rank(spec.items);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  rng.shuffle(rank);
  std::vector<double> weight(spec.items);
  for (std::size_t i = 0; i < spec.items; ++i)
    weight[i] = std::pow(static_cast<double>(rank[i]) + 1.0, -spec.popularity_skew);

  std::vector<std::string> vocab;
  for (std::size_t g = 0; g < spec.genres; ++g) vocab.push_back(fmt::format("Genre{:02}", g + 1));
  std::unordered_map<ItemId, std::vector<double>> gvec;
  if (spec.genres > 0) {
    const auto dirs = draw(spec.genres * f, 1.0);
    for (std::size_t i = 0; i < spec.items; ++i) {
      std::vector<std::pair<double, std::size_t>> s;
      for (std::size_t g = 0; g < spec.genres; ++g) {
        double dot = 0.0;
        for (std::size_t a = 0; a < f; ++a) dot += q[i * f + a] * dirs[g * f + a];
        s.emplace_back(-dot, g);
      }
      std::sort(s.begin(), s.end());
      std::vector<double> v(spec.genres, 0.0);
      const std::size_t take = std::min(spec.genres, 1 + rng.index(3));
      for (std::size_t k = 0; k < take; ++k) v[s[k].second] = 1.0;
      gvec[static_cast<ItemId>(i + 1)] = std::move(v);
    }
  }

  std::vector<Rating> rows;
  std::vector<std::pair<double, std::size_t>> keys(spec.items);
  for (std::size_t u = 0; u < spec.users; ++u) {
    const std::size_t n = std::min(
        spec.items, spec.min_per_user + rng.index(spec.max_per_user - spec.min_per_user + 1));
    for (std::size_t i = 0; i < spec.items; ++i) {
      double r = rng.uniform();
      while (r <= 0.0) r = rng.uniform();
      keys[i] = {std::log(r) / weight[i], i};
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), keys.end(),
                      [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    const std::int64_t start = kEpoch2015 + static_cast<std::int64_t>(rng.index(365)) * kSecondsPerDay;
    const std::size_t days = 1 + rng.index(std::max<std::size_t>(spec.max_days, 1));
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = keys[k].second;
      double s = mu + bu[u] + bi[i] + spec.noise_sd * rng.normal();
      for (std::size_t a = 0; a < f; ++a) s += p[u * f + a] * q[i * f + a];
      const double r = std::clamp(std::round(s * 2.0) / 2.0, 0.5, 5.0);
      // Spread over the user's active days; the final rating lands on the last one.
      const std::size_t day = k + 1 == n ? days - 1 : rng.index(days);
      const std::int64_t ts = start + static_cast<std::int64_t>(day) * kSecondsPerDay +
                              static_cast<std::int64_t>(rng.index(kSecondsPerDay));
      rows.push_back({static_cast<UserId>(u + 1), static_cast<ItemId>(i + 1), r, ts});
    }
  }
  auto genres = spec.genres > 0 ? std::make_shared<const GenreTable>(vocab, std::move(gvec))
                                : std::shared_ptr<const GenreTable>();
  return {RatingsTable(std::move(rows), Scale{}, genres), genres};
}

std::string_view to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kUniformReplace: return "UniformReplace";
    case NoiseKind::kFlip: return "Flip";
    case NoiseKind::kOptOutBurst: return "OptOutBurst";
  }
  return "?";
}

NoiseKind parse_noise_kind(std::string_view s) {
  for (auto k : {NoiseKind::kUniformReplace, NoiseKind::kFlip, NoiseKind::kOptOutBurst})
    if (to_string(k) == s) return k;
  throw ConfigError(fmt::format("unknown noise kind '{}'", s));
}

NoisyData inject_noise(const RatingsTable& table, double rate, NoiseKind kind, std::uint64_t seed,
                       double step) {
  if (!(rate >= 0.0 && rate <= 0.5))
    throw ConfigError(fmt::format("noise rate {} outside [0, 0.5]", rate));
  const Scale& sc = table.scale();
  const auto grid = scale_grid(sc, step);
  Rng rng(seed);
  std::vector<Rating> rows(table.ratings().begin(), table.ratings().end());
  NoisyData out;
  out.mask.kind = kind;
  const auto perturb = [&](Rating& r) {
    const double before = r.value;
    r.value = kind == NoiseKind::kFlip ? sc.max + sc.min - r.value : draw_other(grid, r.value, rng);
    out.mask.entries[r.key()] = {before, r.value};
  };
  if (kind == NoiseKind::kOptOutBurst) {
    std::vector<UserId> users = table.users();
    std::sort(users.begin(), users.end());
    rng.shuffle(users);
    const auto n = static_cast<std::size_t>(std::llround(rate * static_cast<double>(users.size())));
    users.resize(n);
    std::unordered_map<UserId, std::int64_t> last;
    for (UserId u : users) {
      out.mask.users.insert(u);
      std::int64_t d = std::numeric_limits<std::int64_t>::min();
      for (const Rating& r : table.user_ratings(u)) d = std::max(d, floor_day(r.timestamp));
      last[u] = d;
    }
    for (Rating& r : rows) {
      const auto it = last.find(r.user);
      if (it != last.end() && floor_day(r.timestamp) == it->second) perturb(r);
    }
  } else {
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    const auto n = static_cast<std::size_t>(std::llround(rate * static_cast<double>(rows.size())));
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    for (std::size_t k : idx) perturb(rows[k]);
  }
  out.table = RatingsTable(std::move(rows), sc, table.genres_ptr());
  return out;
}

void write_mask_csv(const GroundTruthMask& mask, const std::filesystem::path& path) {
  std::string out = "userId,itemId,kind,original,value\n";
  for (const auto& [key, e] : mask.entries)
    out += fmt::format("{},{},{},{},{}\n", key.user, key.item, to_string(mask.kind),
                       format_value(e.original), format_value(e.value));
  write_file_atomic(path, out);
}

GroundTruthMask read_mask_csv(const std::filesystem::path& path) {
  GroundTruthMask mask;
  bool first = true;
  for (const CsvRow& row : read_csv(path, "userId,itemId,kind,original,value")) {
    const NoiseKind k = parse_noise_kind(row.fields[2]);
    if (!first && k != mask.kind)
      throw DataError(fmt::format("{}:{}: mixed noise kinds", path.string(), row.line));
    first = false;
    mask.kind = k;
    const RatingKey key{field_as<UserId>(row, 0, path), field_as<ItemId>(row, 1, path)};
    if (!mask.entries
             .emplace(key, MaskEntry{field_as<double>(row, 3, path), field_as<double>(row, 4, path)})
             .second)
      throw DataError(fmt::format("{}:{}: repeated rating", path.string(), row.line));
    if (k == NoiseKind::kOptOutBurst) mask.users.insert(key.user);
  }
  return mask;
}

std::optional<double> DetectionScore::precision() const {
  if (flagged == 0) return std::nullopt;
  return static_cast<double>(true_positive) / static_cast<double>(flagged);
}

std::optional<double> DetectionScore::recall() const {
  if (positives == 0) return std::nullopt;
  return static_cast<double>(true_positive) / static_cast<double>(positives);
}

nlohmann::json DetectionScore::to_json() const {
  const auto opt = [](std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"flagged", flagged},
          {"true_positive", true_positive},
          {"positives", positives},
          {"precision", opt(precision())},
          {"recall", opt(recall())}};
}

DetectionScore score_detection(std::span<const RatingKey> keys, std::span<const Verdict> verdicts,
                               const GroundTruthMask& mask) {
  if (keys.size() != verdicts.size())
    throw DataError(fmt::format("{} keys but {} verdicts", keys.size(), verdicts.size()));
  DetectionScore s;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const bool truth = mask.contains(keys[k]);
    const bool flag = verdicts[k] == Verdict::kNoisy;
    s.positives += truth;
    s.flagged += flag;
    s.true_positive += truth && flag;
  }
  return s;
}

}  // namespace nnf

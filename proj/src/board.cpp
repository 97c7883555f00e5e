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

#include "nnf/board.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "nnf/csv.hpp"

namespace nnf {

std::string_view to_string(Verdict v) { return v == Verdict::kNoisy ? "noisy" : "clean"; }

std::string_view to_string(Consensus c) {
  switch (c) {
    case Consensus::kNoisy: return "noisy";
    case Consensus::kClean: return "clean";
    case Consensus::kUncertain: return "uncertain";
  }
  return "?";
}

std::string_view to_string(Detector d) {
  static constexpr std::array<std::string_view, kDetectorCount> kNames{"NF1", "NF2", "NF3", "NF4"};
  return kNames[static_cast<std::size_t>(d)];
}

Verdict parse_verdict(std::string_view s) {
  if (s == "noisy") return Verdict::kNoisy;
  if (s == "clean") return Verdict::kClean;
  throw DataError(fmt::format("bad verdict '{}'", s));
}

Consensus parse_consensus(std::string_view s) {
  if (s == "uncertain") return Consensus::kUncertain;
  return parse_verdict(s) == Verdict::kNoisy ? Consensus::kNoisy : Consensus::kClean;
}

Detector parse_detector(std::string_view s) {
  for (std::size_t d = 0; d < kDetectorCount; ++d) {
    const auto det = static_cast<Detector>(d);
    std::string lower(to_string(det));
    for (char& c : lower) c = static_cast<char>(std::tolower(c));
    if (s == to_string(det) || s == lower) return det;
  }
  throw ConfigError(fmt::format("unknown detector '{}' (expected NF1..NF4)", s));
}

Consensus consensus(const std::array<Verdict, kDetectorCount>& votes) {
  const auto noisy = std::count(votes.begin(), votes.end(), Verdict::kNoisy);
  if (noisy == static_cast<std::ptrdiff_t>(kDetectorCount)) return Consensus::kNoisy;
  if (noisy == 0) return Consensus::kClean;
  return Consensus::kUncertain;
}

Consensus consensus(const std::array<std::optional<Verdict>, kDetectorCount>& votes) {
  std::array<Verdict, kDetectorCount> v{};
  for (std::size_t d = 0; d < kDetectorCount; ++d) {
    if (!votes[d])
      throw DataError(fmt::format("consensus: missing vote from {}",
                                  to_string(static_cast<Detector>(d))));
    v[d] = *votes[d];
  }
  return consensus(v);
}

// ---------------------------------------------------------------------------
// NF1

RatingClass nf1_rating_class(double value, const Nf1Config& cfg) {
  if (value < cfg.weak_cut) return RatingClass::kWeak;
  if (value < cfg.strong_cut) return RatingClass::kAverage;
  return RatingClass::kStrong;
}

namespace {

// 0/1/2 for the set holding a strict majority, 3 when none does.
int majority_set(std::span<const double> ratings, const Nf1Config& cfg) {
  std::array<std::size_t, 3> counts{};
  for (double r : ratings) ++counts[static_cast<std::size_t>(nf1_rating_class(r, cfg))];
  const double need = cfg.majority * static_cast<double>(ratings.size());
  for (int k = 0; k < 3; ++k)
    if (static_cast<double>(counts[static_cast<std::size_t>(k)]) > need) return k;
  return 3;
}

std::vector<double> values_of(std::span<const Rating> rs) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const Rating& r : rs) out.push_back(r.value);
  return out;
}

}  // namespace

UserClass nf1_classify_user(std::span<const double> ratings, const Nf1Config& cfg) {
  if (ratings.empty()) return UserClass::kVariable;
  return static_cast<UserClass>(majority_set(ratings, cfg));
}

ItemClass nf1_classify_item(std::span<const double> ratings, const Nf1Config& cfg) {
  if (ratings.empty()) return ItemClass::kVariablyPreferred;
  return static_cast<ItemClass>(majority_set(ratings, cfg));
}

Verdict nf1_verdict(UserClass u, ItemClass i, RatingClass r) {
  // The three homologous groups pair user class k with item class k and
  // expect rating class k, for k in {weak, average, strong}.
  const auto uk = static_cast<int>(u);
  if (uk > 2 || uk != static_cast<int>(i)) return Verdict::kClean;
  return uk == static_cast<int>(r) ? Verdict::kClean : Verdict::kNoisy;
}

Nf1Result nf1_detect(const RatingsTable& evidence, const RatingsTable& test,
                     const Nf1Config& cfg) {
  std::unordered_map<UserId, UserClass> users;
  std::unordered_map<ItemId, ItemClass> items;
  for (UserId u : evidence.users())
    users[u] = nf1_classify_user(values_of(evidence.user_ratings(u)), cfg);
  for (ItemId i : evidence.items()) {
    std::vector<double> vals;
    for (std::size_t pos : evidence.item_positions(i)) vals.push_back(evidence[pos].value);
    items[i] = nf1_classify_item(vals, cfg);
  }
  Nf1Result out;
  out.verdicts.reserve(test.size());
  for (const Rating& r : test.ratings()) {
    const auto uit = users.find(r.user);
    const auto iit = items.find(r.item);
    const UserClass uc = uit == users.end() ? UserClass::kVariable : uit->second;
    const ItemClass ic = iit == items.end() ? ItemClass::kVariablyPreferred : iit->second;
    out.user_class.push_back(uc);
    out.item_class.push_back(ic);
    out.verdicts.push_back(nf1_verdict(uc, ic, nf1_rating_class(r.value, cfg)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// NF2

Nf2Population Nf2Population::from_counts(std::vector<std::size_t> counts) {
  Nf2Population p;
  if (counts.empty()) return p;
  std::sort(counts.begin(), counts.end());
  const std::size_t n = counts.size();
  p.lower = counts[n / 3];
  p.upper = counts[std::min(n - 1, (2 * n) / 3)];
  return p;
}

Quantity Nf2Population::quantity(std::size_t count) const {
  if (count < lower) return Quantity::kLight;
  if (upper > lower && count >= upper) return Quantity::kHeavy;
  return Quantity::kMedium;
}

GenreMeans user_genre_means(std::span<const Rating> user_ratings, const GenreTable& genres) {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const Rating& r : user_ratings)
    for (std::size_t g : genres.active(r.item)) {
      acc[g].first += r.value;
      ++acc[g].second;
    }
  GenreMeans means;
  for (const auto& [g, sn] : acc) means[g] = sn.first / static_cast<double>(sn.second);
  return means;
}

std::optional<double> nf2_coherence(std::span<const Rating> user_ratings, const GenreTable& genres,
                                    const Scale& scale) {
  const GenreMeans means = user_genre_means(user_ratings, genres);
  double total = 0;
  std::size_t items = 0;
  for (const Rating& r : user_ratings) {
    const auto active = genres.active(r.item);
    if (active.empty()) continue;
    double dev = 0;
    for (std::size_t g : active) dev += std::fabs(r.value - means.at(g)) / scale.range();
    total += dev / static_cast<double>(active.size());
    ++items;
  }
  if (items == 0) return std::nullopt;
  return 1.0 - total / static_cast<double>(items);
}

double nf2_rnd(double rating, std::span<const std::size_t> item_genres, const GenreMeans& means,
               double theta, double epsilon) {
  std::size_t counted = 0, high = 0;
  for (std::size_t g : item_genres) {
    const auto it = means.find(g);
    if (it == means.end()) continue;
    ++counted;
    if (std::fabs(rating - it->second) / std::max(it->second, epsilon) >= theta) ++high;
  }
  if (counted == 0) return 0.0;
  return static_cast<double>(high) / static_cast<double>(counted);
}

namespace {

Nf2Population population_of(const RatingsTable& table) {
  std::vector<std::size_t> counts;
  counts.reserve(table.users().size());
  for (UserId u : table.users()) counts.push_back(table.user_ratings(u).size());
  return Nf2Population::from_counts(std::move(counts));
}

Nf2Group group_of(UserId user, const RatingsTable& table, const Nf2Population& pop,
                  const Nf2Config& cfg, bool* no_genres) {
  const auto rs = table.user_ratings(user);
  Nf2Group g;
  g.quantity = pop.quantity(rs.size());
  const auto coherence = nf2_coherence(rs, table.genres(), table.scale());
  if (no_genres) *no_genres = !coherence.has_value();
  g.quality = (!coherence || *coherence >= cfg.coherence_threshold) ? Quality::kEasy
                                                                    : Quality::kDifficult;
  return g;
}

}  // namespace

Nf2Group nf2_group_user(UserId user, const RatingsTable& table, const Nf2Config& cfg) {
  if (!table.has_user(user)) throw DataError(fmt::format("nf2: unknown user {}", user));
  bool no_genres = false;
  const auto g = group_of(user, table, population_of(table), cfg, &no_genres);
  if (no_genres) log_warning("nf2: user {} rated no item with genres; quality set to easy", user);
  return g;
}

Nf2Result nf2_detect(const RatingsTable& evidence, const RatingsTable& test,
                     const Nf2Config& cfg) {
  const Nf2Population pop = population_of(evidence);
  struct UserState {
    Nf2Group group;
    GenreMeans means;
  };
  std::unordered_map<UserId, UserState> users;
  Nf2Result out;
  for (UserId u : test.users()) {
    bool no_genres = false;
    UserState st;
    st.group = group_of(u, evidence, pop, cfg, &no_genres);
    st.means = user_genre_means(evidence.user_ratings(u), evidence.genres());
    if (no_genres) ++out.users_without_genres;
    users.emplace(u, std::move(st));
  }
  if (out.users_without_genres > 0)
    log_warning("nf2: {} users rated no item with genres; quality set to easy",
                out.users_without_genres);
  out.verdicts.reserve(test.size());
  for (const Rating& r : test.ratings()) {
    const UserState& st = users.at(r.user);
    const double theta =
        st.group.quantity == Quantity::kLight ? cfg.theta_light : cfg.theta_heavy_medium;
    const auto genres = evidence.genres().active(r.item);
    const double rnd = nf2_rnd(r.value, genres, st.means, theta, cfg.epsilon);
    const bool exempt =
        st.group.quantity == Quantity::kMedium && st.group.quality == Quality::kEasy;
    out.rnd.push_back(rnd);
    out.group.push_back(st.group);
    out.verdicts.push_back(!exempt && rnd > cfg.rnd_cut ? Verdict::kNoisy : Verdict::kClean);
  }
  return out;
}

// ---------------------------------------------------------------------------
// NF3

double nf3_consistency(double rating, double prediction, const Scale& scale) {
  return std::fabs(rating - prediction) / scale.range();
}

Nf3Result nf3_detect(const RatingsTable& train, const RatingsTable& test, const Nf3Config& cfg) {
  KnnPredictor knn(train, cfg.knn);
  Nf3Result out;
  out.verdicts.reserve(test.size());
  for (const Rating& r : test.ratings()) {
    std::optional<double> p;
    if (train.has_user(r.user)) p = knn.predict(r.user, r.item);
    if (!p) {
      ++out.unpredictable;
      out.consistency.push_back(std::nullopt);
      out.verdicts.push_back(Verdict::kClean);
      continue;
    }
    const double c = nf3_consistency(r.value, *p, test.scale());
    out.consistency.push_back(c);
    out.verdicts.push_back(c > cfg.threshold ? Verdict::kNoisy : Verdict::kClean);
  }
  if (out.unpredictable > 0)
    log_info("nf3: {} of {} ratings unpredictable, voted clean", out.unpredictable, test.size());
  return out;
}

// ---------------------------------------------------------------------------
// NF4

FuzzyProfile nf4_fuzzify(double rating, const Scale& scale) {
  const double t = std::clamp((rating - scale.min) / scale.range(), 0.0, 1.0);
  FuzzyProfile p;
  p.low = std::max(0.0, 1.0 - 2.0 * t);
  p.high = std::max(0.0, 2.0 * t - 1.0);
  p.medium = 1.0 - p.low - p.high;
  return p;
}

double manhattan(const FuzzyProfile& a, const FuzzyProfile& b) {
  return std::fabs(a.low - b.low) + std::fabs(a.medium - b.medium) + std::fabs(a.high - b.high);
}

double nf4_dissimilarity(const FuzzyProfile& a, const FuzzyProfile& b) {
  return std::max(0.0, manhattan(a, b) - 1.0);
}

Nf4Assessment nf4_assess(const FuzzyProfile& rating, const FuzzyProfile& user,
                         const FuzzyProfile& item, const Nf4Config& cfg) {
  Nf4Assessment a;
  if (manhattan(user, item) >= cfg.delta1) {
    a.prefiltered = true;
    return a;
  }
  a.noise_degree = std::min(nf4_dissimilarity(user, rating), nf4_dissimilarity(item, rating));
  a.verdict = a.noise_degree > cfg.delta2 ? Verdict::kNoisy : Verdict::kClean;
  return a;
}

namespace {

struct ProfileAcc {
  FuzzyProfile sum;
  std::size_t n = 0;

  void add(const FuzzyProfile& p) {
    sum.low += p.low;
    sum.medium += p.medium;
    sum.high += p.high;
    ++n;
  }
  FuzzyProfile mean() const {
    const double k = static_cast<double>(n);
    return {sum.low / k, sum.medium / k, sum.high / k};
  }
};

}  // namespace

Nf4Result nf4_detect(const RatingsTable& evidence, const RatingsTable& test,
                     const Nf4Config& cfg) {
  std::unordered_map<UserId, ProfileAcc> users;
  std::unordered_map<ItemId, ProfileAcc> items;
  for (const Rating& r : evidence.ratings()) {
    const auto p = nf4_fuzzify(r.value, evidence.scale());
    users[r.user].add(p);
    items[r.item].add(p);
  }
  auto profile = [&](const auto& map, auto key, const FuzzyProfile& fallback) {
    const auto it = map.find(key);
    FuzzyProfile p = it == map.end() ? fallback : it->second.mean();
    return cfg.amplify ? cfg.amplify(p) : p;
  };
  Nf4Result out;
  out.verdicts.reserve(test.size());
  for (const Rating& r : test.ratings()) {
    const auto rp = nf4_fuzzify(r.value, test.scale());
    const auto a = nf4_assess(rp, profile(users, r.user, rp), profile(items, r.item, rp), cfg);
    if (a.prefiltered) ++out.prefiltered;
    out.noise_degree.push_back(a.noise_degree);
    out.verdicts.push_back(a.verdict);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Board

std::size_t VennCounts::total() const {
  std::size_t t = 0;
  for (std::size_t c : regions) t += c;
  return t;
}

std::string VennCounts::label(unsigned mask) {
  if (mask == 0) return "none";
  std::string out;
  for (std::size_t d = 0; d < kDetectorCount; ++d) {
    if (!(mask & (1u << d))) continue;
    if (!out.empty()) out += "&";
    out += to_string(static_cast<Detector>(d));
  }
  return out;
}

nlohmann::json VennCounts::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (unsigned m = 0; m < regions.size(); ++m) j[label(m)] = regions[m];
  return j;
}

VennCounts VennCounts::from_json(const nlohmann::json& j) {
  VennCounts v;
  for (unsigned m = 0; m < v.regions.size(); ++m) v.regions[m] = j.at(label(m)).get<std::size_t>();
  return v;
}

VennCounts venn_counts(std::span<const VoteSet> votes) {
  VennCounts v;
  for (const VoteSet& vs : votes) {
    unsigned mask = 0;
    for (std::size_t d = 0; d < kDetectorCount; ++d)
      if (vs.votes[d] == Verdict::kNoisy) mask |= 1u << d;
    ++v.regions[mask];
  }
  return v;
}

std::size_t BoardResult::count(Consensus c) const {
  return static_cast<std::size_t>(std::count_if(
      votes.begin(), votes.end(), [c](const VoteSet& v) { return v.consensus == c; }));
}

BoardResult run_board(const RatingsTable& train, const RatingsTable& test, const BoardConfig& cfg) {
  const RatingsTable evidence = merge(train, test);
  BoardResult out;
  out.nf1 = nf1_detect(evidence, test, cfg.nf1);
  out.nf2 = nf2_detect(evidence, test, cfg.nf2);
  out.nf3 = nf3_detect(train, test, cfg.nf3);
  out.nf4 = nf4_detect(evidence, test, cfg.nf4);
  out.votes.reserve(test.size());
  for (std::size_t k = 0; k < test.size(); ++k) {
    VoteSet vs;
    vs.key = test[k].key();
    vs.votes = {out.nf1.verdicts[k], out.nf2.verdicts[k], out.nf3.verdicts[k],
                out.nf4.verdicts[k]};
    vs.consensus = consensus(vs.votes);
    out.votes.push_back(vs);
  }
  out.venn = venn_counts(out.votes);
  return out;
}

void write_votes_csv(std::span<const VoteSet> votes, const std::filesystem::path& path) {
  std::string out = "userId,itemId,nf1,nf2,nf3,nf4,consensus\n";
  for (const VoteSet& v : votes)
    out += fmt::format("{},{},{},{},{},{},{}\n", v.key.user, v.key.item, to_string(v.votes[0]),
                       to_string(v.votes[1]), to_string(v.votes[2]), to_string(v.votes[3]),
                       to_string(v.consensus));
  write_file_atomic(path, out);
}

std::vector<VoteSet> read_votes_csv(const std::filesystem::path& path) {
  std::vector<VoteSet> out;
  for (const CsvRow& row : read_csv(path, "userId,itemId,nf1,nf2,nf3,nf4,consensus")) {
    VoteSet v;
    v.key = {field_as<UserId>(row, 0, path), field_as<ItemId>(row, 1, path)};
    for (std::size_t d = 0; d < kDetectorCount; ++d) v.votes[d] = parse_verdict(row.fields[2 + d]);
    v.consensus = parse_consensus(row.fields[6]);
    if (v.consensus != consensus(v.votes))
      throw DataError(fmt::format("{}:{}: consensus does not match votes", path.string(), row.line));
    out.push_back(v);
  }
  return out;
}

}  // namespace nnf

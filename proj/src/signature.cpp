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

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

#include "nnf/csv.hpp"

namespace nnf {

namespace {

std::int64_t day_of(std::int64_t ts) {
  std::int64_t d = ts / kSecondsPerDay;
  if (ts % kSecondsPerDay < 0) --d;
  return d;
}

const Verdict& label_of(const LabelMap& labels, const Rating& r) {
  const auto it = labels.find(r.key());
  if (it == labels.end())
    throw DataError(fmt::format("signature: rating ({}, {}) has no label", r.user, r.item));
  return it->second;
}

}  // namespace

LabelMap make_label_map(std::span<const RatingKey> keys, std::span<const Verdict> labels) {
  if (keys.size() != labels.size())
    throw DataError(fmt::format("{} keys but {} labels", keys.size(), labels.size()));
  LabelMap out;
  out.reserve(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k)
    if (!out.emplace(keys[k], labels[k]).second)
      throw DataError(fmt::format("repeated label for ({}, {})", keys[k].user, keys[k].item));
  return out;
}

std::string format_day(std::int64_t day) {
  using namespace std::chrono;
  const year_month_day d{sys_days{days{day}}};
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(d.year()),
                     static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
}

std::int64_t parse_day(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !parse_number(s.substr(0, 4), y) ||
      !parse_number(s.substr(5, 2), m) || !parse_number(s.substr(8, 2), d))
    throw DataError(fmt::format("bad date '{}'", s));
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw DataError(fmt::format("bad date '{}'", s));
  return sys_days{ymd}.time_since_epoch().count();
}

std::string_view to_string(OptOutDenominator d) {
  return d == OptOutDenominator::kLastDayActivity ? "last_day_activity" : "global_noise";
}

std::string_view to_string(SignatureAction a) {
  return a == SignatureAction::kRemoveUser ? "RemoveUser" : "RemoveLastDay";
}

OptOutDenominator parse_optout_denominator(std::string_view s) {
  if (s == "last_day_activity") return OptOutDenominator::kLastDayActivity;
  if (s == "global_noise") return OptOutDenominator::kGlobalNoise;
  throw ConfigError(fmt::format("unknown opt-out denominator '{}'", s));
}

SignatureAction parse_signature_action(std::string_view s) {
  if (s == "RemoveUser" || s == "remove_user") return SignatureAction::kRemoveUser;
  if (s == "RemoveLastDay" || s == "remove_last_day") return SignatureAction::kRemoveLastDay;
  throw ConfigError(fmt::format("unknown signature action '{}'", s));
}

std::vector<SignatureHit> detect_optout(const RatingsTable& table, const LabelMap& labels,
                                        const OptOutConfig& cfg) {
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
    throw ConfigError(fmt::format("opt-out threshold {} outside [0, 1]", cfg.threshold));
  std::vector<UserId> users = table.users();
  std::sort(users.begin(), users.end());
  std::vector<SignatureHit> hits;
  for (UserId u : users) {
    const auto rs = table.user_ratings(u);
    if (rs.empty()) continue;
    std::int64_t last = day_of(rs[0].timestamp);
    for (const Rating& r : rs) last = std::max(last, day_of(r.timestamp));
    std::size_t day_total = 0, day_noisy = 0, all_noisy = 0;
    for (const Rating& r : rs) {
      const bool noisy = label_of(labels, r) == Verdict::kNoisy;
      all_noisy += noisy;
      if (day_of(r.timestamp) == last) {
        ++day_total;
        day_noisy += noisy;
      }
    }
    const std::size_t denom =
        cfg.denominator == OptOutDenominator::kLastDayActivity ? day_total : all_noisy;
    if (denom == 0) continue;
    const double ratio = static_cast<double>(day_noisy) / static_cast<double>(denom);
    if (ratio > cfg.threshold)
      hits.push_back({std::string(kOptOutId), u, last, day_noisy, denom, ratio});
  }
  return hits;
}

RatingsTable apply_signature_action(const RatingsTable& table, std::span<const SignatureHit> hits,
                                    SignatureAction action) {
  if (hits.empty()) return table;
  std::unordered_map<UserId, std::set<std::int64_t>> flagged;
  for (const SignatureHit& h : hits) flagged[h.user].insert(h.last_day);
  return table.filtered([&](const Rating& r) {
    const auto it = flagged.find(r.user);
    if (it == flagged.end()) return true;
    if (action == SignatureAction::kRemoveUser) return false;
    return !it->second.contains(day_of(r.timestamp));
  });
}

std::vector<SignatureHit> OptOutSignature::detect(const RatingsTable& table,
                                                  const LabelMap* labels) const {
  if (labels == nullptr) throw StageError("signature", "opt-out signature needs labels");
  return detect_optout(table, *labels, cfg_);
}

SignatureRegistry SignatureRegistry::with_builtins() {
  SignatureRegistry r;
  r.add(std::string(kOptOutId),
        [](const OptOutConfig& cfg) { return std::make_unique<OptOutSignature>(cfg); });
  return r;
}

void SignatureRegistry::add(std::string id, Factory make) {
  if (!factories_.emplace(id, std::move(make)).second)
    throw ConfigError(fmt::format("signature '{}' registered twice", id));
}

std::unique_ptr<Signature> SignatureRegistry::make(std::string_view id,
                                                   const OptOutConfig& cfg) const {
  const auto it = factories_.find(id);
  if (it == factories_.end()) throw ConfigError(fmt::format("unknown signature '{}'", id));
  return it->second(cfg);
}

std::vector<std::string> SignatureRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, make] : factories_) out.push_back(id);
  return out;
}

void write_hits_csv(std::span<const SignatureHit> hits, SignatureAction action,
                    const std::filesystem::path& path) {
  std::string out = "signatureId,userId,lastDay,noisyCount,totalCount,ratio,action\n";
  for (const SignatureHit& h : hits)
    out += fmt::format("{},{},{},{},{},{:.17g},{}\n", quote_csv(h.signature_id), h.user,
                       format_day(h.last_day), h.noisy_count, h.total_count, h.ratio,
                       to_string(action));
  write_file_atomic(path, out);
}

std::vector<SignatureHit> read_hits_csv(const std::filesystem::path& path) {
  std::vector<SignatureHit> out;
  for (const CsvRow& row :
       read_csv(path, "signatureId,userId,lastDay,noisyCount,totalCount,ratio,action")) {
    SignatureHit h;
    h.signature_id = row.fields[0];
    h.user = field_as<UserId>(row, 1, path);
    h.last_day = parse_day(row.fields[2]);
    h.noisy_count = field_as<std::size_t>(row, 3, path);
    h.total_count = field_as<std::size_t>(row, 4, path);
    h.ratio = field_as<double>(row, 5, path);
    parse_signature_action(row.fields[6]);
    if (h.total_count == 0)
      throw DataError(fmt::format("{}:{}: totalCount must be positive", path.string(), row.line));
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace nnf

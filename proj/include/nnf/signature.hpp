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

// Layer 3: signature detectors over labeled ratings and the actions that
// remove what they flag.

#ifndef NNF_SIGNATURE_HPP_
#define NNF_SIGNATURE_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nnf/board.hpp"
#include "nnf/dataset.hpp"

namespace nnf {

using LabelMap = std::unordered_map<RatingKey, Verdict, RatingKeyHash>;

/// Pairs keys with labels; throws DataError on a length mismatch or a repeated key.
LabelMap make_label_map(std::span<const RatingKey> keys, std::span<const Verdict> labels);

struct SignatureHit {
  std::string signature_id;
  UserId user = 0;
  std::int64_t last_day = 0;  ///< days since the epoch, UTC
  std::size_t noisy_count = 0;
  std::size_t total_count = 0;
  double ratio = 0.0;
};

/// "YYYY-MM-DD" for a day number, and back. The parser throws DataError.
std::string format_day(std::int64_t day);
std::int64_t parse_day(std::string_view s);

enum class OptOutDenominator : std::uint8_t { kLastDayActivity, kGlobalNoise };
enum class SignatureAction : std::uint8_t { kRemoveUser, kRemoveLastDay };

std::string_view to_string(OptOutDenominator d);
std::string_view to_string(SignatureAction a);
OptOutDenominator parse_optout_denominator(std::string_view s);
SignatureAction parse_signature_action(std::string_view s);

struct OptOutConfig {
  double threshold = 0.5;
  OptOutDenominator denominator = OptOutDenominator::kLastDayActivity;
};

inline constexpr std::string_view kOptOutId = "optout";

/// Flags users whose last active day is mostly noise. With the default
/// denominator the ratio is last-day Noisy over last-day ratings; with
/// kGlobalNoise it is last-day Noisy over all of the user's Noisy ratings.
/// A hit needs ratio > threshold. Throws DataError when a rating has no label.
std::vector<SignatureHit> detect_optout(const RatingsTable& table, const LabelMap& labels,
                                        const OptOutConfig& cfg = {});

/// Drops flagged users, or only their flagged day.
RatingsTable apply_signature_action(const RatingsTable& table, std::span<const SignatureHit> hits,
                                    SignatureAction action = SignatureAction::kRemoveUser);

/// A pluggable detector. Label-free signatures may run before Layer 1.
class Signature {
 public:
  virtual ~Signature() = default;
  virtual std::string id() const = 0;
  virtual bool needs_labels() const = 0;
  /// `labels` may be null for label-free signatures.
  virtual std::vector<SignatureHit> detect(const RatingsTable& table,
                                           const LabelMap* labels) const = 0;
};

class OptOutSignature final : public Signature {
 public:
  explicit OptOutSignature(OptOutConfig cfg = {}) : cfg_(cfg) {}
  std::string id() const override { return std::string(kOptOutId); }
  bool needs_labels() const override { return true; }
  std::vector<SignatureHit> detect(const RatingsTable& table,
                                   const LabelMap* labels) const override;

 private:
  OptOutConfig cfg_;
};

class SignatureRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Signature>(const OptOutConfig&)>;

  /// Registry holding the built-in signatures.
  static SignatureRegistry with_builtins();

  /// Throws ConfigError on a duplicate id.
  void add(std::string id, Factory make);
  /// Throws ConfigError on an unknown id.
  std::unique_ptr<Signature> make(std::string_view id, const OptOutConfig& cfg = {}) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, Factory, std::less<>> factories_;
};

/// `signatureId,userId,lastDay,noisyCount,totalCount,ratio,action`
void write_hits_csv(std::span<const SignatureHit> hits, SignatureAction action,
                    const std::filesystem::path& path);
std::vector<SignatureHit> read_hits_csv(const std::filesystem::path& path);

}  // namespace nnf

#endif  // NNF_SIGNATURE_HPP_

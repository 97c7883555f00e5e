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

// End-to-end orchestration: ingest, board, ensemble, signature, removal and
// before/after evaluation, plus synthetic data and noise injection.

#ifndef NNF_PIPELINE_HPP_
#define NNF_PIPELINE_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nnf/board.hpp"
#include "nnf/dataset.hpp"
#include "nnf/ensemble.hpp"
#include "nnf/eval.hpp"
#include "nnf/recsys.hpp"
#include "nnf/signature.hpp"

namespace nnf {

inline constexpr std::uint64_t kDefaultSeed = 42;

struct PipelineConfig {
  PipelineConfig();

  std::string ratings_path = "data/mini/ratings.csv";
  std::string genres_path = "data/mini/movies.csv";
  Scale scale;
  std::size_t min_activity = 50;
  ThreeWaySpec split;
  BoardConfig board;
  EnsembleConfig ensemble;
  bool signature_enabled = true;
  OptOutConfig optout;
  SignatureAction signature_action = SignatureAction::kRemoveUser;
  MfConfig mf;
  EvalConfig eval;
  std::uint64_t cluster_seed = kDefaultSeed;
  Plane plane;
  PercentMode percent_mode = PercentMode::kUsers;
  std::string mask_path;  ///< ground-truth mask, optional
  std::string out_dir = "out";
  std::string run_id;  ///< empty: derived from the config hash

  void set_all_seeds(std::uint64_t seed);
  /// Throws ConfigError on an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  /// Throws ConfigError when a value is out of range.
  void validate() const;

  /// Sorted `key=value` lines for every setting.
  std::string canonical() const;
  /// FNV-1a of canonical() without out_dir and run_id, as 16 hex digits.
  std::string hash() const;
  std::string effective_run_id() const;
  std::filesystem::path run_dir() const;
};

struct ConfigKeyInfo {
  std::string key;
  std::string help;
};
const std::vector<ConfigKeyInfo>& config_keys();

/// Reads `key = value` lines; '#' starts a comment. Later lines win.
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

// --- Synthetic data -------------------------------------------------------------

struct PlantedSpec {
  std::size_t users = 500;
  std::size_t items = 800;
  std::size_t min_per_user = 60;
  std::size_t max_per_user = 160;
  std::size_t factors = 8;
  std::size_t genres = 12;
  double noise_sd = 0.0;  ///< Gaussian noise added before rounding
  double popularity_skew = 0.8;  ///< Zipf exponent for item choice
  std::size_t max_days = 12;
  std::uint64_t seed = kDefaultSeed;
};

struct PlantedData {
  RatingsTable table;
  std::shared_ptr<const GenreTable> genres;
};

/// Ratings drawn from a planted biased-MF model, rounded to the half-star grid.
PlantedData generate_planted(const PlantedSpec& spec);

// --- Noise injection ------------------------------------------------------------

enum class NoiseKind : std::uint8_t { kUniformReplace, kFlip, kOptOutBurst };
std::string_view to_string(NoiseKind k);
NoiseKind parse_noise_kind(std::string_view s);

struct MaskEntry {
  double original = 0.0;
  double value = 0.0;
};

struct GroundTruthMask {
  NoiseKind kind = NoiseKind::kUniformReplace;
  std::map<RatingKey, MaskEntry> entries;
  std::set<UserId> users;  ///< burst users for kOptOutBurst

  bool contains(const RatingKey& k) const { return entries.contains(k); }
  std::size_t size() const { return entries.size(); }
};

struct NoisyData {
  RatingsTable table;
  GroundTruthMask mask;
};

/// Perturbs round(rate * n) ratings, or round(rate * users) users for the
/// burst kind. Replacement values lie on the `step` grid of the scale.
NoisyData inject_noise(const RatingsTable& table, double rate, NoiseKind kind, std::uint64_t seed,
                       double step = 0.5);

/// `userId,itemId,kind,original,value`
void write_mask_csv(const GroundTruthMask& mask, const std::filesystem::path& path);
GroundTruthMask read_mask_csv(const std::filesystem::path& path);

struct DetectionScore {
  std::size_t flagged = 0, true_positive = 0, positives = 0;
  std::optional<double> precision() const;
  std::optional<double> recall() const;
  nlohmann::json to_json() const;
};

DetectionScore score_detection(std::span<const RatingKey> keys, std::span<const Verdict> verdicts,
                               const GroundTruthMask& mask);

// --- Stages -----------------------------------------------------------------------

namespace artifact {
inline constexpr const char* kTrain = "train.csv";
inline constexpr const char* kDetect = "detect.csv";
inline constexpr const char* kEval = "eval.csv";
inline constexpr const char* kGenres = "movies.csv";
inline constexpr const char* kIngest = "ingest.json";
inline constexpr const char* kVotes = "votes.csv";
inline constexpr const char* kVenn = "venn.json";
inline constexpr const char* kBoard = "board.json";
inline constexpr const char* kEnsemble = "ensemble.csv";
inline constexpr const char* kModel = "el-model.json";
inline constexpr const char* kEnsembleSummary = "ensemble.json";
inline constexpr const char* kSignature = "signature.csv";
inline constexpr const char* kSignatureSummary = "signature.json";
inline constexpr const char* kReport = "report.json";
}  // namespace artifact

/// Each stage reads its inputs from the run directory and persists its
/// outputs there. Failures other than config and data errors surface as
/// StageError naming the stage.
nlohmann::json stage_ingest(const PipelineConfig& cfg);
nlohmann::json stage_detect(const PipelineConfig& cfg);
nlohmann::json stage_ensemble(const PipelineConfig& cfg);
nlohmann::json stage_signature(const PipelineConfig& cfg);
/// Framework arm; writes report.json, deltas and scatter files.
nlohmann::json stage_evaluate(const PipelineConfig& cfg);

/// Runs every stage in order and returns the report.
nlohmann::json run_framework(const PipelineConfig& cfg);
/// Removal driven by one detector's verdicts. Reuses ingest and board
/// artifacts produced under the same config; output goes to
/// `<run-dir>/baseline-<detector>/`.
nlohmann::json run_baseline(const PipelineConfig& cfg, Detector detector);

/// Report without fields that vary between identical runs.
nlohmann::json stable_report(nlohmann::json report);

/// Human-readable summary of the reports in a run directory.
std::string summarize_run(const std::filesystem::path& run_dir);

}  // namespace nnf

#endif  // NNF_PIPELINE_HPP_

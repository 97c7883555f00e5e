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
#include <fstream>
#include <functional>

#include "nnf/csv.hpp"
#include "nnf/pipeline.hpp"

namespace nnf {

namespace {

struct Entry {
  std::string key;
  std::string help;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
T parse_value(std::string_view key, std::string_view v) {
  T out{};
  if (!parse_number(v, out)) throw ConfigError(fmt::format("{}: bad value '{}'", key, v));
  return out;
}

template <typename T, typename Ref>
Entry num(std::string key, std::string help, Ref ref) {
  return {key, std::move(help),
          [ref, key](PipelineConfig& c, std::string_view v) { ref(c) = parse_value<T>(key, v); },
          [ref](const PipelineConfig& c) {
            return fmt::format("{}", ref(const_cast<PipelineConfig&>(c)));
          }};
}

template <typename Ref>
Entry text(std::string key, std::string help, Ref ref) {
  return {key, std::move(help),
          [ref](PipelineConfig& c, std::string_view v) { ref(c) = std::string(trim(v)); },
          [ref](const PipelineConfig& c) { return ref(const_cast<PipelineConfig&>(c)); }};
}

template <typename Ref, typename Parse>
Entry choice(std::string key, std::string help, Ref ref, Parse parse) {
  return {key, std::move(help),
          [ref, parse](PipelineConfig& c, std::string_view v) { ref(c) = parse(trim(v)); },
          [ref](const PipelineConfig& c) {
            return std::string(to_string(ref(const_cast<PipelineConfig&>(c))));
          }};
}

bool parse_bool(std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("bad boolean '{}'", v));
}

#define NNF_REF(T, expr) [](PipelineConfig & c) -> T& { return expr; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> e;
    e.push_back(text("ratings", "ratings CSV (userId,movieId,rating,timestamp)",
                     NNF_REF(std::string, c.ratings_path)));
    e.push_back(text("genres", "movies CSV (movieId,title,genres); empty for none",
                     NNF_REF(std::string, c.genres_path)));
    e.push_back(num<double>("scale.min", "lowest rating", NNF_REF(double, c.scale.min)));
    e.push_back(num<double>("scale.max", "highest rating", NNF_REF(double, c.scale.max)));
    e.push_back(num<std::size_t>("min_activity", "drop users with fewer ratings",
                                 NNF_REF(std::size_t, c.min_activity)));
    e.push_back(num<double>("split.train", "train fraction per user",
                            NNF_REF(double, c.split.train_fraction)));
    e.push_back(num<double>("split.detect", "detect fraction per user",
                            NNF_REF(double, c.split.detect_fraction)));
    e.push_back(num<std::uint64_t>("split.seed", "split seed", NNF_REF(std::uint64_t, c.split.seed)));
    e.push_back(num<double>("nf1.weak_cut", "ratings below are weak",
                            NNF_REF(double, c.board.nf1.weak_cut)));
    e.push_back(num<double>("nf1.strong_cut", "ratings at or above are strong",
                            NNF_REF(double, c.board.nf1.strong_cut)));
    e.push_back(num<double>("nf1.majority", "class share needed to type a user or item",
                            NNF_REF(double, c.board.nf1.majority)));
    e.push_back(num<double>("nf2.theta_heavy_medium", "deviation cut for heavy and medium users",
                            NNF_REF(double, c.board.nf2.theta_heavy_medium)));
    e.push_back(num<double>("nf2.theta_light", "deviation cut for light users",
                            NNF_REF(double, c.board.nf2.theta_light)));
    e.push_back(num<double>("nf2.rnd_cut", "noisy when RND exceeds this",
                            NNF_REF(double, c.board.nf2.rnd_cut)));
    e.push_back(num<double>("nf2.coherence", "coherence threshold between easy and difficult",
                            NNF_REF(double, c.board.nf2.coherence_threshold)));
    e.push_back(num<std::size_t>("nf3.k", "neighbors", NNF_REF(std::size_t, c.board.nf3.knn.k)));
    e.push_back(num<std::size_t>("nf3.min_overlap", "co-rated items for a similarity",
                                 NNF_REF(std::size_t, c.board.nf3.knn.min_overlap)));
    e.push_back(num<std::size_t>("nf3.significance_cap", "overlap cap of similarity weighting",
                                 NNF_REF(std::size_t, c.board.nf3.knn.significance_cap)));
    e.push_back(num<double>("nf3.threshold", "noisy when consistency exceeds this",
                            NNF_REF(double, c.board.nf3.threshold)));
    e.push_back(num<double>("nf4.delta1", "user-item profile distance prefilter",
                            NNF_REF(double, c.board.nf4.delta1)));
    e.push_back(num<double>("nf4.delta2", "noisy when noise degree exceeds this",
                            NNF_REF(double, c.board.nf4.delta2)));
    e.push_back(choice("ensemble.variant", "EL1 EL2 EL2_2 EL3 EL4_1 EL4_2 EL5",
                       NNF_REF(ElVariant, c.ensemble.variant), parse_el_variant));
    e.push_back(num<std::uint64_t>("ensemble.seed", "ensemble seed",
                                   NNF_REF(std::uint64_t, c.ensemble.seed)));
    e.push_back(num<std::size_t>("ensemble.trees", "random forest trees",
                                 NNF_REF(std::size_t, c.ensemble.forest.trees)));
    e.push_back(num<std::size_t>("ensemble.tree_depth", "random forest depth",
                                 NNF_REF(std::size_t, c.ensemble.forest.tree.max_depth)));
    e.push_back(num<std::size_t>("ensemble.gbt_rounds", "boosting rounds",
                                 NNF_REF(std::size_t, c.ensemble.gbt.rounds)));
    e.push_back(num<std::size_t>("ensemble.gbt_depth", "boosted tree depth",
                                 NNF_REF(std::size_t, c.ensemble.gbt.max_depth)));
    e.push_back(num<double>("ensemble.gbt_lr", "boosting learning rate",
                            NNF_REF(double, c.ensemble.gbt.learning_rate)));
    e.push_back(num<std::size_t>("ensemble.ressel_bags", "self-training bags",
                                 NNF_REF(std::size_t, c.ensemble.ressel.bags)));
    e.push_back(num<std::size_t>("ensemble.ressel_add", "pseudo-labels added per round",
                                 NNF_REF(std::size_t, c.ensemble.ressel.add_per_round)));
    e.push_back(num<std::size_t>("ensemble.ressel_rounds", "self-training rounds",
                                 NNF_REF(std::size_t, c.ensemble.ressel.max_rounds)));
    e.push_back(num<std::size_t>("ensemble.isolation_trees", "isolation trees",
                                 NNF_REF(std::size_t, c.ensemble.isolation.trees)));
    e.push_back(num<std::size_t>("ensemble.isolation_sample", "isolation subsample size",
                                 NNF_REF(std::size_t, c.ensemble.isolation.sample_size)));
    e.push_back(num<int>("ensemble.isolation_extension", "hyperplane extension, -1 for full",
                         NNF_REF(int, c.ensemble.isolation.extension_level)));
    e.push_back(num<double>("ensemble.isolation_cut", "anomaly score above which a rating is noisy",
                            NNF_REF(double, c.ensemble.isolation_cut)));
    e.push_back(num<std::size_t>("ensemble.stacking_folds", "stacking folds",
                                 NNF_REF(std::size_t, c.ensemble.stacking_folds)));
    e.push_back({"signature.enabled", "run the opt-out signature",
                 [](PipelineConfig& c, std::string_view v) { c.signature_enabled = parse_bool(v); },
                 [](const PipelineConfig& c) {
                   return std::string(c.signature_enabled ? "true" : "false");
                 }});
    e.push_back(num<double>("signature.threshold", "opt-out ratio threshold",
                            NNF_REF(double, c.optout.threshold)));
    e.push_back(choice("signature.denominator", "last_day_activity or global_noise",
                       NNF_REF(OptOutDenominator, c.optout.denominator),
                       parse_optout_denominator));
    e.push_back(choice("signature.action", "RemoveUser or RemoveLastDay",
                       NNF_REF(SignatureAction, c.signature_action), parse_signature_action));
    e.push_back(num<std::size_t>("mf.factors", "latent factors",
                                 NNF_REF(std::size_t, c.mf.factors)));
    e.push_back(num<std::size_t>("mf.epochs", "SGD epochs", NNF_REF(std::size_t, c.mf.epochs)));
    e.push_back(num<double>("mf.learning_rate", "SGD step", NNF_REF(double, c.mf.learning_rate)));
    e.push_back(num<double>("mf.regularization", "L2 weight",
                            NNF_REF(double, c.mf.regularization)));
    e.push_back(num<double>("mf.init_std", "factor init spread", NNF_REF(double, c.mf.init_std)));
    e.push_back(num<std::uint64_t>("mf.seed", "recommender seed", NNF_REF(std::uint64_t, c.mf.seed)));
    e.push_back(num<std::size_t>("eval.clusters", "k-means clusters",
                                 NNF_REF(std::size_t, c.eval.clusters)));
    e.push_back(num<std::size_t>("eval.top_k", "ranking cutoff K",
                                 NNF_REF(std::size_t, c.eval.top_k)));
    e.push_back(num<double>("eval.relevance_threshold", "held-out ratings at or above are relevant",
                            NNF_REF(double, c.eval.relevance_threshold)));
    e.push_back(choice("eval.serendipity_formula", "complement or cosine_mean",
                       NNF_REF(SerendipityFormula, c.eval.formula), parse_serendipity_formula));
    e.push_back(num<std::size_t>("eval.kmeans_max_iter", "Lloyd iterations",
                                 NNF_REF(std::size_t, c.eval.kmeans_max_iter)));
    e.push_back(num<std::uint64_t>("eval.cluster_seed", "k-means seed",
                                   NNF_REF(std::uint64_t, c.cluster_seed)));
    e.push_back(num<double>("eval.plane_a", "serendipity coefficient of the plane",
                            NNF_REF(double, c.plane.a)));
    e.push_back(num<double>("eval.plane_b", "accuracy coefficient of the plane",
                            NNF_REF(double, c.plane.b)));
    e.push_back(choice("eval.percent_mode", "users or ratings",
                       NNF_REF(PercentMode, c.percent_mode), parse_percent_mode));
    e.push_back(text("noise.mask", "ground-truth mask CSV for precision and recall",
                     NNF_REF(std::string, c.mask_path)));
    e.push_back(text("out_dir", "artifact root", NNF_REF(std::string, c.out_dir)));
    e.push_back(text("run_id", "run directory name; default from the config hash",
                     NNF_REF(std::string, c.run_id)));
    return e;
  }();
  return table;
}

#undef NNF_REF

const Entry& find_entry(std::string_view key) {
  for (const Entry& e : entries())
    if (e.key == key) return e;
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

}  // namespace

PipelineConfig::PipelineConfig() { set_all_seeds(kDefaultSeed); }

void PipelineConfig::set_all_seeds(std::uint64_t seed) {
  split.seed = seed;
  ensemble.seed = seed;
  mf.seed = seed;
  cluster_seed = seed;
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  if (key == "seed") {
    set_all_seeds(parse_value<std::uint64_t>(key, value));
    return;
  }
  find_entry(key).set(*this, value);
}

std::string PipelineConfig::get(std::string_view key) const { return find_entry(key).get(*this); }

const std::vector<ConfigKeyInfo>& config_keys() {
  static const std::vector<ConfigKeyInfo> keys = [] {
    std::vector<ConfigKeyInfo> out;
    for (const Entry& e : entries()) out.push_back({e.key, e.help});
    return out;
  }();
  return keys;
}

void PipelineConfig::validate() const {
  const auto need = [](bool ok, std::string_view what) {
    if (!ok) throw ConfigError(std::string(what));
  };
  need(scale.min < scale.max, "scale.min must be below scale.max");
  need(split.train_fraction > 0 && split.detect_fraction > 0 &&
           split.train_fraction + split.detect_fraction < 1,
       "split fractions must be positive and leave room for the eval fold");
  need(board.nf1.weak_cut <= board.nf1.strong_cut, "nf1.weak_cut must not exceed nf1.strong_cut");
  need(board.nf1.majority >= 0 && board.nf1.majority < 1, "nf1.majority must lie in [0, 1)");
  need(board.nf2.theta_light >= 0 && board.nf2.theta_heavy_medium >= 0, "nf2 thetas must be >= 0");
  need(board.nf2.rnd_cut >= 0 && board.nf2.rnd_cut <= 1, "nf2.rnd_cut must lie in [0, 1]");
  need(board.nf3.knn.k >= 1, "nf3.k must be at least 1");
  need(board.nf3.threshold >= 0, "nf3.threshold must be >= 0");
  need(board.nf4.delta1 >= 0 && board.nf4.delta2 >= 0, "nf4 deltas must be >= 0");
  need(ensemble.forest.trees >= 1 && ensemble.isolation.trees >= 1 && ensemble.ressel.bags >= 1,
       "ensemble sizes must be at least 1");
  need(ensemble.stacking_folds >= 2, "ensemble.stacking_folds must be at least 2");
  need(ensemble.isolation.sample_size >= 2, "ensemble.isolation_sample must be at least 2");
  need(optout.threshold >= 0 && optout.threshold <= 1, "signature.threshold must lie in [0, 1]");
  need(mf.factors >= 1 && mf.learning_rate > 0, "mf.factors and mf.learning_rate must be positive");
  need(eval.clusters >= 1 && eval.top_k >= 1, "eval.clusters and eval.top_k must be at least 1");
  need(std::isfinite(plane.a) && std::isfinite(plane.b) && (plane.a != 0 || plane.b != 0),
       "plane coefficients must be finite and not both zero");
  need(!ratings_path.empty(), "ratings path is empty");
  need(run_id.find_first_of("/\\") == std::string::npos && run_id != "." && run_id != "..",
       "run_id must be a plain directory name");
}

std::string PipelineConfig::canonical() const {
  std::vector<std::string> lines;
  for (const Entry& e : entries()) lines.push_back(e.key + "=" + e.get(*this));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string PipelineConfig::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const Entry& e : entries()) {
    if (e.key == "out_dir" || e.key == "run_id") continue;
    for (char ch : e.key + "=" + e.get(*this) + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
  }
  return fmt::format("{:016x}", h);
}

std::string PipelineConfig::effective_run_id() const {
  return run_id.empty() ? "run-" + hash().substr(0, 8) : run_id;
}

std::filesystem::path PipelineConfig::run_dir() const {
  return std::filesystem::path(out_dir) / effective_run_id();
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(fmt::format("{}:{}: expected key = value", path.string(), n));
    try {
      cfg.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
}

}  // namespace nnf

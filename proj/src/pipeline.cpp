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

#include "nnf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_set>

#include <fmt/chrono.h>

namespace nnf {

using nlohmann::json;

namespace {

template <typename F>
auto guarded(std::string_view stage, F&& fn) -> decltype(fn()) {
  log_info("stage {}: start", stage);
  try {
    auto out = fn();
    log_info("stage {}: done", stage);
    return out;
  } catch (const ConfigError&) {
    throw;
  } catch (const DataError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string(stage), e.what());
  }
}

std::filesystem::path prepare_dir(const PipelineConfig& cfg) {
  cfg.validate();
  const auto dir = cfg.run_dir();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw StageError("ingest", fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  return dir;
}

json read_json(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw DataError(fmt::format("missing artifact '{}'; run the earlier stages first", path.string()));
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

struct Folds {
  RatingsTable train, detect, eval;
};

Folds load_folds(const PipelineConfig& cfg) {
  const auto dir = cfg.run_dir();
  std::shared_ptr<const GenreTable> genres;
  if (std::filesystem::exists(dir / artifact::kGenres))
    genres = load_genres(dir / artifact::kGenres).table;
  const auto load = [&](const char* name) {
    const auto p = dir / name;
    if (!std::filesystem::exists(p))
      throw DataError(fmt::format("missing artifact '{}'; run ingest first", p.string()));
    return load_ratings(p, cfg.scale, genres).table;
  };
  return {load(artifact::kTrain), load(artifact::kDetect), load(artifact::kEval)};
}

std::size_t count_users(const RatingsTable& t) { return t.users().size(); }

json manifest(const PipelineConfig& cfg) { return {{"config_hash", cfg.hash()}}; }

bool manifest_matches(const PipelineConfig& cfg, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return false;
  try {
    return json::parse(read_file(path)).value("config_hash", "") == cfg.hash();
  } catch (const json::exception&) {
    return false;
  }
}

std::vector<RatingKey> keys_of(std::span<const VoteSet> votes) {
  std::vector<RatingKey> k;
  k.reserve(votes.size());
  for (const VoteSet& v : votes) k.push_back(v.key);
  return k;
}

struct ArmSpec {
  std::string name;
  std::filesystem::path dir;
  std::unordered_set<RatingKey, RatingKeyHash> removal;
  std::vector<SignatureHit> hits;
  std::vector<Verdict> final_labels;  ///< aligned with votes
};

json glossary() {
  return {{"x", "serendipity after minus before"},
          {"y", "accuracy metric after minus before"},
          {"I", "serendipity increased, accuracy increased"},
          {"II", "serendipity decreased, accuracy increased"},
          {"III", "serendipity decreased, accuracy decreased"},
          {"IV", "serendipity increased, accuracy decreased"},
          {"Origin", "both deltas zero"},
          {"axis", "a single zero delta counts as an increase; such points are flagged on_axis"},
          {"quadrant_note",
           "quadrants follow the axis geometry above; a tabular convention that files "
           "accuracy up with serendipity down under IV disagrees with it"},
          {"positive", "a*x + b*y > 0"}};
}

json config_json(const PipelineConfig& cfg) {
  json j = json::object();
  for (const auto& k : config_keys())
    if (k.key != "out_dir" && k.key != "run_id") j[k.key] = cfg.get(k.key);
  return j;
}

json evaluate_arm(const PipelineConfig& cfg, const ArmSpec& arm) {
  const Folds f = load_folds(cfg);
  const auto votes = read_votes_csv(cfg.run_dir() / artifact::kVotes);
  if (votes.size() != f.detect.size())
    throw DataError("votes.csv does not cover the detect fold; rerun detect");
  const RatingsTable combined = merge(f.train, f.detect);
  const RatingsTable denoised =
      combined.filtered([&](const Rating& r) { return !arm.removal.contains(r.key()); });
  const RatingsTable cleaned =
      apply_signature_action(denoised, arm.hits, cfg.signature_action);
  if (cleaned.empty()) throw DataError("removal left an empty training table");
  log_info("{}: training recommender on {} and {} ratings", arm.name, combined.size(),
           cleaned.size());
  const MfModel before = mf_train(combined, cfg.mf).model;
  const MfModel after = mf_train(cleaned, cfg.mf).model;

  std::vector<UserId> base;
  std::vector<UserId> eval_users = f.eval.users();
  std::sort(eval_users.begin(), eval_users.end());
  for (UserId u : eval_users) {
    if (!before.has_user(u)) continue;
    const auto rs = f.eval.user_ratings(u);
    if (std::any_of(rs.begin(), rs.end(),
                    [&](const Rating& r) { return r.value >= cfg.eval.relevance_threshold; }))
      base.push_back(u);
  }
  if (base.empty()) throw DataError("no evaluation user has a relevant held-out rating");
  std::vector<UserId> universe, excluded;
  for (UserId u : base) (after.has_user(u) ? universe : excluded).push_back(u);
  if (universe.empty()) throw DataError("removal dropped every evaluation user");
  const ClusterAssignment clusters =
      cluster_users(before, base, cfg.eval.clusters, cfg.cluster_seed, cfg.eval.kmeans_max_iter);
  const auto ev_before = evaluate_users(before, combined, f.eval, universe, clusters, cfg.eval);
  const auto ev_after = evaluate_users(after, cleaned, f.eval, universe, clusters, cfg.eval);

  json pairs = json::array();
  for (Metric m : kAllMetrics) {
    const DeltaReport r = delta_points(ev_before, ev_after, m, cfg.plane, cfg.percent_mode);
    const double check = recount_percent_positive(r, cfg.percent_mode);
    if (check != r.percent_positive)
      throw StageError("evaluate", "percent_positive recount mismatch");
    write_deltas_csv(r, arm.dir / fmt::format("deltas-{}.csv", r.pair_name()));
    write_scatter_svg(r, cfg.plane, arm.dir / fmt::format("scatter-{}.svg", r.pair_name()));
    pairs.push_back(to_json(r));
  }
  const auto means_before = cluster_means(ev_before, Metric::kNdcg);
  const auto means_after = cluster_means(ev_after, Metric::kNdcg);
  json cm = json::array();
  for (const auto& [c, v] : means_before) {
    const auto it = means_after.find(c);
    cm.push_back({{"cluster", c},
                  {"ndcg_before", v},
                  {"ndcg_after", it == means_after.end() ? json() : json(it->second)}});
  }

  json report;
  report["format"] = "nnf.report";
  report["version"] = 1;
  report["arm"] = arm.name;
  report["generated_at"] =
      fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                               std::chrono::system_clock::now())));
  report["config_hash"] = cfg.hash();
  report["seeds"] = {{"split", cfg.split.seed},
                     {"ensemble", cfg.ensemble.seed},
                     {"mf", cfg.mf.seed},
                     {"cluster", cfg.cluster_seed}};
  report["config"] = config_json(cfg);
  report["ingest"] = read_json(cfg.run_dir() / artifact::kIngest);
  report["board"] = read_json(cfg.run_dir() / artifact::kBoard);
  report["venn"] = read_json(cfg.run_dir() / artifact::kVenn);
  if (arm.name == "framework") {
    report["ensemble"] = read_json(cfg.run_dir() / artifact::kEnsembleSummary);
    report["signature"] = read_json(cfg.run_dir() / artifact::kSignatureSummary);
  }
  report["removal"] = {{"noisy_ratings_removed", combined.size() - denoised.size()},
                       {"signature_ratings_removed", denoised.size() - cleaned.size()},
                       {"signature_users", arm.hits.size()},
                       {"train_before", combined.size()},
                       {"train_after", cleaned.size()},
                       {"eval_ratings_removed", 0}};
  report["universe"] = {{"users", universe.size()},
                        {"removed_users_excluded", excluded.size()},
                        {"clusters", clusters.k},
                        {"kmeans_inertia", clusters.inertia}};
  report["global"] = {{"before", to_json(global_metrics(ev_before))},
                      {"after", to_json(global_metrics(ev_after))}};
  report["critical_group_pct"] = {{"before", critical_group_pct(means_before)},
                                  {"after", critical_group_pct(means_after)}};
  report["cluster_ndcg"] = cm;
  report["percent_mode"] = to_string(cfg.percent_mode);
  report["plane"] = {{"a", cfg.plane.a}, {"b", cfg.plane.b}};
  report["pairs"] = pairs;
  report["glossary"] = glossary();

  if (!cfg.mask_path.empty()) {
    const GroundTruthMask mask = read_mask_csv(cfg.mask_path);
    const auto keys = keys_of(votes);
    json gt;
    gt["kind"] = to_string(mask.kind);
    gt["mask_size"] = mask.size();
    for (std::size_t d = 0; d < kDetectorCount; ++d) {
      std::vector<Verdict> v;
      for (const VoteSet& s : votes) v.push_back(s.votes[d]);
      gt["detectors"][std::string(to_string(static_cast<Detector>(d)))] =
          score_detection(keys, v, mask).to_json();
    }
    std::vector<Verdict> cons;
    for (const VoteSet& s : votes)
      cons.push_back(s.consensus == Consensus::kNoisy ? Verdict::kNoisy : Verdict::kClean);
    gt["consensus"] = score_detection(keys, cons, mask).to_json();
    if (!arm.final_labels.empty())
      gt["final"] = score_detection(keys, arm.final_labels, mask).to_json();
    if (!mask.users.empty()) {
      std::size_t tp = 0;
      for (const auto& h : arm.hits) tp += mask.users.contains(h.user);
      gt["signature_users"] = {{"flagged", arm.hits.size()},
                               {"true_positive", tp},
                               {"burst_users", mask.users.size()}};
    }
    report["ground_truth"] = gt;
  }
  write_json(arm.dir / artifact::kReport, report);
  return report;
}

}  // namespace

json stage_ingest(const PipelineConfig& cfg) {
  const auto dir = prepare_dir(cfg);
  return guarded("ingest", [&] {
    std::shared_ptr<const GenreTable> genres;
    std::size_t empty_genres = 0;
    if (!cfg.genres_path.empty()) {
      auto g = load_genres(cfg.genres_path);
      genres = g.table;
      empty_genres = g.empty_genre_items;
    }
    const LoadResult loaded = load_ratings(cfg.ratings_path, cfg.scale, genres);
    const RatingsTable filtered = filter_min_activity(loaded.table, cfg.min_activity);
    if (filtered.empty())
      throw DataError(fmt::format("no user has at least {} ratings", cfg.min_activity));
    const ThreeWaySplit split = split_three_way(filtered, cfg.split);
    write_ratings_csv(split.train, dir / artifact::kTrain);
    write_ratings_csv(split.detect, dir / artifact::kDetect);
    write_ratings_csv(split.eval, dir / artifact::kEval);
    if (genres) write_genres_csv(*genres, dir / artifact::kGenres);
    else std::filesystem::remove(dir / artifact::kGenres);
    json j = manifest(cfg);
    j["ratings_loaded"] = loaded.table.size();
    j["duplicates_dropped"] = loaded.duplicates_dropped;
    j["users_loaded"] = count_users(loaded.table);
    j["ratings_kept"] = filtered.size();
    j["users_kept"] = count_users(filtered);
    j["items_kept"] = filtered.items().size();
    j["train"] = split.train.size();
    j["detect"] = split.detect.size();
    j["eval"] = split.eval.size();
    j["genre_items"] = genres ? genres->item_count() : 0;
    j["genre_vocabulary"] = genres ? genres->dimension() : 0;
    j["empty_genre_items"] = empty_genres;
    write_json(dir / artifact::kIngest, j);
    return j;
  });
}

json stage_detect(const PipelineConfig& cfg) {
  const auto dir = prepare_dir(cfg);
  return guarded("detect", [&] {
    const Folds f = load_folds(cfg);
    const BoardResult board = run_board(f.train, f.detect, cfg.board);
    write_votes_csv(board.votes, dir / artifact::kVotes);
    write_json(dir / artifact::kVenn, board.venn.to_json());
    json j = manifest(cfg);
    j["detect_ratings"] = board.votes.size();
    j["consensus"] = {{"Noisy", board.count(Consensus::kNoisy)},
                      {"Clean", board.count(Consensus::kClean)},
                      {"Uncertain", board.count(Consensus::kUncertain)}};
    json noisy = json::object();
    for (std::size_t d = 0; d < kDetectorCount; ++d) {
      std::size_t n = 0;
      for (const VoteSet& v : board.votes) n += v.votes[d] == Verdict::kNoisy;
      noisy[std::string(to_string(static_cast<Detector>(d)))] = n;
    }
    j["detector_noisy"] = noisy;
    j["nf2_users_without_genres"] = board.nf2.users_without_genres;
    j["nf3_unpredictable"] = board.nf3.unpredictable;
    j["nf4_prefiltered"] = board.nf4.prefiltered;
    write_json(dir / artifact::kBoard, j);
    return j;
  });
}

json stage_ensemble(const PipelineConfig& cfg) {
  const auto dir = prepare_dir(cfg);
  return guarded("ensemble", [&] {
    const Folds f = load_folds(cfg);
    const BoardResult board = run_board(f.train, f.detect, cfg.board);
    const auto stored = read_votes_csv(dir / artifact::kVotes);
    if (stored.size() != board.votes.size())
      throw DataError("votes.csv does not match the board; rerun detect");
    for (std::size_t k = 0; k < stored.size(); ++k)
      if (stored[k].key != board.votes[k].key || stored[k].votes != board.votes[k].votes)
        throw DataError("votes.csv does not match the board; rerun detect");
    const RatingsTable evidence = merge(f.train, f.detect);
    const FeatureBuilder fb(evidence, f.detect, board);
    const LayerTwoData l2 = split_by_consensus(fb.all(), board);
    const ElModel model = train_el(cfg.ensemble, l2.labeled, l2.unlabeled);
    const auto cls = classify_keys(model, l2.unlabeled, l2.unlabeled_keys);
    write_classifications_csv(cls, cfg.ensemble.variant, dir / artifact::kEnsemble);
    model.save(dir / artifact::kModel);
    std::size_t noisy = 0;
    for (const auto& c : cls) noisy += c.label == Verdict::kNoisy;
    json j = manifest(cfg);
    j["variant"] = to_string(cfg.ensemble.variant);
    j["labeled"] = l2.labeled.size();
    j["labeled_noisy"] = l2.labeled.positives();
    j["uncertain"] = l2.unlabeled.size();
    j["uncertain_classified_noisy"] = noisy;
    j["uncertain_remaining"] = l2.unlabeled.size() - cls.size();
    j["diagnostics"] = model.diagnostics();
    write_json(dir / artifact::kEnsembleSummary, j);
    return j;
  });
}

json stage_signature(const PipelineConfig& cfg) {
  const auto dir = prepare_dir(cfg);
  return guarded("signature", [&] {
    const Folds f = load_folds(cfg);
    const auto votes = read_votes_csv(dir / artifact::kVotes);
    const auto cls = read_classifications_csv(dir / artifact::kEnsemble);
    const auto labels = resolve_labels(votes, cls);
    const auto keys = keys_of(votes);
    const LabelMap map = make_label_map(keys, labels);
    std::vector<SignatureHit> hits;
    if (cfg.signature_enabled) {
      const auto sig = SignatureRegistry::with_builtins().make(kOptOutId, cfg.optout);
      hits = sig->detect(f.detect, &map);
    }
    write_hits_csv(hits, cfg.signature_action, dir / artifact::kSignature);
    std::size_t noisy = 0;
    for (Verdict v : labels) noisy += v == Verdict::kNoisy;
    json j = manifest(cfg);
    j["enabled"] = cfg.signature_enabled;
    j["signature"] = kOptOutId;
    j["threshold"] = cfg.optout.threshold;
    j["denominator"] = to_string(cfg.optout.denominator);
    j["action"] = to_string(cfg.signature_action);
    j["final_noisy"] = noisy;
    j["final_clean"] = labels.size() - noisy;
    j["hits"] = hits.size();
    json users = json::array();
    for (const auto& h : hits) users.push_back(h.user);
    j["flagged_users"] = users;
    write_json(dir / artifact::kSignatureSummary, j);
    return j;
  });
}

json stage_evaluate(const PipelineConfig& cfg) {
  const auto dir = prepare_dir(cfg);
  return guarded("evaluate", [&] {
    const auto votes = read_votes_csv(dir / artifact::kVotes);
    const auto cls = read_classifications_csv(dir / artifact::kEnsemble);
    ArmSpec arm;
    arm.name = "framework";
    arm.dir = dir;
    arm.final_labels = resolve_labels(votes, cls);
    for (std::size_t k = 0; k < votes.size(); ++k)
      if (arm.final_labels[k] == Verdict::kNoisy) arm.removal.insert(votes[k].key);
    arm.hits = read_hits_csv(dir / artifact::kSignature);
    return evaluate_arm(cfg, arm);
  });
}

json run_framework(const PipelineConfig& cfg) {
  stage_ingest(cfg);
  stage_detect(cfg);
  stage_ensemble(cfg);
  stage_signature(cfg);
  return stage_evaluate(cfg);
}

json run_baseline(const PipelineConfig& cfg, Detector detector) {
  const auto dir = prepare_dir(cfg);
  if (!manifest_matches(cfg, dir / artifact::kIngest)) stage_ingest(cfg);
  if (!manifest_matches(cfg, dir / artifact::kBoard)) stage_detect(cfg);
  const std::string name = fmt::format("baseline-{}", to_string(detector));
  return guarded(name, [&] {
    ArmSpec arm;
    arm.name = name;
    arm.dir = dir / name;
    std::filesystem::create_directories(arm.dir);
    const auto votes = read_votes_csv(dir / artifact::kVotes);
    const auto d = static_cast<std::size_t>(detector);
    for (const VoteSet& v : votes) {
      arm.final_labels.push_back(v.votes[d]);
      if (v.votes[d] == Verdict::kNoisy) arm.removal.insert(v.key);
    }
    return evaluate_arm(cfg, arm);
  });
}

json stable_report(json report) {
  report.erase("generated_at");
  return report;
}

std::string summarize_run(const std::filesystem::path& run_dir) {
  std::vector<std::filesystem::path> reports;
  if (std::filesystem::exists(run_dir / artifact::kReport)) reports.push_back(run_dir / artifact::kReport);
  if (std::filesystem::is_directory(run_dir)) {
    std::vector<std::filesystem::path> subs;
    for (const auto& e : std::filesystem::directory_iterator(run_dir))
      if (e.is_directory() && std::filesystem::exists(e.path() / artifact::kReport))
        subs.push_back(e.path() / artifact::kReport);
    std::sort(subs.begin(), subs.end());
    reports.insert(reports.end(), subs.begin(), subs.end());
  }
  if (reports.empty())
    throw DataError(fmt::format("no report.json under '{}'", run_dir.string()));
  std::string out = fmt::format("{:<16} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n", "arm",
                                "removed", "ndcg0", "ndcg1", "%+ndcg", "%+prec", "%+recall",
                                "%+f1");
  for (const auto& p : reports) {
    const json r = read_json(p);
    std::map<std::string, double> pct;
    for (const auto& pair : r.at("pairs")) pct[pair.at("metric")] = pair.at("percent_positive");
    const auto& rem = r.at("removal");
    out += fmt::format("{:<16} {:>9} {:>9.4f} {:>9.4f} {:>9.2f} {:>9.2f} {:>9.2f} {:>9.2f}\n",
                       r.at("arm").get<std::string>(),
                       rem.at("train_before").get<std::size_t>() -
                           rem.at("train_after").get<std::size_t>(),
                       r.at("global").at("before").at("ndcg").get<double>(),
                       r.at("global").at("after").at("ndcg").get<double>(), pct["ndcg"],
                       pct["precision"], pct["recall"], pct["f1"]);
  }
  const json first = read_json(reports.front());
  if (first.contains("venn")) {
    out += "venn:";
    for (const auto& [k, v] : first.at("venn").items()) out += fmt::format(" {}={}", k, v.dump());
    out += "\n";
  }
  return out;
}

}  // namespace nnf

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

#include "nnf/ensemble.hpp"

#include <cmath>
#include <map>

#include "nnf/csv.hpp"

namespace nnf {

using nlohmann::json;

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> kNames{
      "rating",         "user_mean",     "user_std",       "item_mean",  "item_std",
      "user_deviation", "item_deviation", "log_user_count", "log_item_count",
      "nf1_user_class", "nf1_item_class", "nf4_noise_degree", "nf3_consistency",
      "nf2_rnd",        "vote_nf1",      "vote_nf2",       "vote_nf3",   "vote_nf4",
      "nf3_missing"};
  return kNames;
}

// --- features ----------------------------------------------------------------------------

FeatureBuilder::FeatureBuilder(const RatingsTable& evidence, const RatingsTable& test,
                               const BoardResult& board)
    : test_(test), board_(board) {
  if (board.votes.size() != test.size())
    throw DataError("features: board and test table disagree in size");
  auto accumulate = [](auto& map, auto id, double v) {
    auto& s = map[id];
    // Welford update; std holds M2 until finalized.
    ++s.count;
    const double delta = v - s.mean;
    s.mean += delta / static_cast<double>(s.count);
    s.std += delta * (v - s.mean);
  };
  for (const Rating& r : evidence.ratings()) {
    accumulate(users_, r.user, r.value);
    accumulate(items_, r.item, r.value);
  }
  for (auto& [id, s] : users_) s.std = std::sqrt(s.std / static_cast<double>(s.count));
  for (auto& [id, s] : items_) s.std = std::sqrt(s.std / static_cast<double>(s.count));
}

std::vector<double> FeatureBuilder::row_at(std::size_t pos) const {
  const Rating& r = test_[pos];
  const Scale& sc = test_.scale();
  const auto uit = users_.find(r.user);
  const auto iit = items_.find(r.item);
  const Stats u = uit == users_.end() ? Stats{r.value, 0.0, 0} : uit->second;
  const Stats i = iit == items_.end() ? Stats{r.value, 0.0, 0} : iit->second;
  const auto& c = board_.nf3.consistency[pos];
  const auto& votes = board_.votes[pos].votes;
  auto vote = [&](std::size_t d) { return votes[d] == Verdict::kNoisy ? 1.0 : 0.0; };
  return {(r.value - sc.min) / sc.range(),
          u.mean,
          u.std,
          i.mean,
          i.std,
          std::fabs(r.value - u.mean),
          std::fabs(r.value - i.mean),
          std::log1p(static_cast<double>(u.count)),
          std::log1p(static_cast<double>(i.count)),
          static_cast<double>(board_.nf1.user_class[pos]),
          static_cast<double>(board_.nf1.item_class[pos]),
          board_.nf4.noise_degree[pos],
          c.value_or(0.0),
          board_.nf2.rnd[pos],
          vote(0),
          vote(1),
          vote(2),
          vote(3),
          c.has_value() ? 0.0 : 1.0};
}

std::vector<double> FeatureBuilder::row(const RatingKey& key) const {
  const auto pos = test_.find(key);
  if (!pos) throw DataError(fmt::format("features: rating ({}, {}) was not voted on", key.user, key.item));
  return row_at(*pos);
}

Samples FeatureBuilder::all() const {
  Samples s(kFeatureDim);
  s.x.reserve(test_.size() * kFeatureDim);
  for (std::size_t k = 0; k < test_.size(); ++k) s.push(row_at(k));
  return s;
}

LayerTwoData split_by_consensus(const Samples& features, const BoardResult& board) {
  if (features.size() != board.votes.size())
    throw DataError("split_by_consensus: feature and vote counts differ");
  LayerTwoData out;
  out.labeled = Samples(features.dim);
  out.unlabeled = Samples(features.dim);
  for (std::size_t k = 0; k < features.size(); ++k) {
    const VoteSet& v = board.votes[k];
    if (v.consensus == Consensus::kUncertain) {
      out.unlabeled.push(features.row(k));
      out.unlabeled_keys.push_back(v.key);
    } else {
      out.labeled.push(features.row(k), v.consensus == Consensus::kNoisy ? 1 : 0);
      out.labeled_keys.push_back(v.key);
    }
  }
  return out;
}

// --- variants ------------------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<ElVariant, std::string_view>, 7> kVariantNames{{
    {ElVariant::kEl1, "EL1"},
    {ElVariant::kEl2, "EL2"},
    {ElVariant::kEl2_2, "EL2_2"},
    {ElVariant::kEl3, "EL3"},
    {ElVariant::kEl4_1, "EL4_1"},
    {ElVariant::kEl4_2, "EL4_2"},
    {ElVariant::kEl5, "EL5"},
}};

TreeParams random_decision_tree() { return {4, 2, 1, kSqrtFeatures, true}; }

SgdParams hinge() {
  SgdParams p;
  p.loss = LinearLoss::kHinge;
  return p;
}

}  // namespace

std::string_view to_string(ElVariant v) {
  for (const auto& [k, name] : kVariantNames)
    if (k == v) return name;
  return "?";
}

ElVariant parse_el_variant(std::string_view s) {
  std::string norm(s);
  for (char& c : norm) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (c == '.') c = '_';
  }
  for (const auto& [k, name] : kVariantNames)
    if (norm == name) return k;
  throw ConfigError(fmt::format("unknown ensemble variant '{}'", s));
}

std::vector<std::unique_ptr<Classifier>> el2_bases() {
  std::vector<std::unique_ptr<Classifier>> v;
  v.push_back(std::make_unique<KnnClassifier>(5));
  v.push_back(std::make_unique<DecisionTree>(TreeParams{12, 2, 1, 0, false}));
  v.push_back(std::make_unique<SgdLinear>(hinge()));
  v.push_back(std::make_unique<GaussianNb>());
  return v;
}

std::vector<std::unique_ptr<Classifier>> el2_2_bases(const ForestParams& forest) {
  std::vector<std::unique_ptr<Classifier>> v;
  v.push_back(std::make_unique<Forest>(forest));
  v.push_back(Forest::extra_trees(forest.trees).fresh());
  v.push_back(std::make_unique<LogisticRegression>());
  v.push_back(std::make_unique<DecisionTree>(TreeParams{12, 2, 1, 0, false}));
  v.push_back(std::make_unique<GaussianNb>());
  return v;
}

std::vector<std::unique_ptr<Classifier>> el4_1_bases() {
  std::vector<std::unique_ptr<Classifier>> v;
  v.push_back(std::make_unique<DecisionTree>(random_decision_tree()));
  v.push_back(std::make_unique<SgdLinear>());
  return v;
}

std::vector<std::unique_ptr<Classifier>> el4_2_bases() {
  std::vector<std::unique_ptr<Classifier>> v;
  v.push_back(std::make_unique<GaussianNb>());
  v.push_back(std::make_unique<SgdLinear>(hinge()));
  v.push_back(std::make_unique<KnnClassifier>(10));
  v.push_back(std::make_unique<DecisionTree>(random_decision_tree()));
  v.push_back(std::make_unique<SgdLinear>());
  return v;
}

// --- model ----------------------------------------------------------------------------------

ElModel::ElModel(ElVariant v, std::unique_ptr<Classifier> c, std::size_t dim)
    : variant_(v), dim_(dim), cut_(0.5), clf_(std::move(c)) {}

ElModel::ElModel(ElVariant v, std::optional<IsolationForest> f, double cut, std::size_t dim)
    : variant_(v), dim_(dim), cut_(cut), eif_(std::move(f)) {}

double ElModel::score(std::span<const double> x) const {
  if (x.size() != dim_)
    throw DataError(fmt::format("{}: feature row has {} values, expected {}", to_string(variant_),
                                x.size(), dim_));
  if (clf_) return clf_->score(x);
  if (eif_) return eif_->score(x);
  return 0.0;
}

json ElModel::diagnostics() const {
  json d = json::object();
  if (const auto* f = dynamic_cast<const Forest*>(clf_.get()); f && f->oob_error())
    d["oob_error"] = *f->oob_error();
  if (const auto* g = dynamic_cast<const GradientBoosting*>(clf_.get()))
    d["train_loss"] = g->train_loss();
  if (const auto* s = dynamic_cast<const Stacking*>(clf_.get())) d["folds_used"] = s->folds_used();
  if (const auto* b = dynamic_cast<const SelfTrainingBagging*>(clf_.get())) {
    d["oob_history"] = b->oob_history();
    d["pseudo_labeled"] = b->pseudo_labeled();
  }
  if (clf_ && clf_->constant()) d["constant"] = *clf_->constant();
  if (eif_) d["sample_size"] = eif_->sample_size_used();
  return d;
}

json ElModel::to_json() const {
  json j{{"format", "nnf.el"}, {"version", 1}, {"variant", to_string(variant_)},
         {"dim", dim_},        {"cut", cut_}};
  if (clf_) j["model"] = clf_->to_json();
  else if (eif_) j["model"] = eif_->to_json();
  else j["model"] = nullptr;
  return j;
}

ElModel ElModel::from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "nnf.el" || j.at("version").get<int>() != 1)
      throw DataError("not an ensemble model file (format nnf.el, version 1)");
    const ElVariant v = parse_el_variant(j.at("variant").get<std::string>());
    const auto dim = j.at("dim").get<std::size_t>();
    const double cut = j.at("cut").get<double>();
    const json& m = j.at("model");
    if (v == ElVariant::kEl5) {
      std::optional<IsolationForest> f;
      if (!m.is_null()) f = IsolationForest::from_json(m);
      return ElModel(v, std::move(f), cut, dim);
    }
    ElModel out(v, classifier_from_json(m), dim);
    out.cut_ = cut;
    return out;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed ensemble model: {}", e.what()));
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("malformed ensemble model: {}", e.what()));
  }
}

void ElModel::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_json().dump(1) + "\n");
}

ElModel ElModel::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j);
}

ElModel train_el(const EnsembleConfig& cfg, const Samples& labeled, const Samples& unlabeled) {
  Rng rng(cfg.seed);
  if (cfg.variant == ElVariant::kEl5) {
    if (unlabeled.size() < 2) {
      log_warning("EL5: {} uncertain rows, too few for an isolation forest; all voted clean",
                  unlabeled.size());
      return ElModel(cfg.variant, std::nullopt, cfg.isolation_cut, unlabeled.dim ? unlabeled.dim : kFeatureDim);
    }
    IsolationForest f(cfg.isolation);
    f.fit(unlabeled, rng);
    return ElModel(cfg.variant, std::move(f), cfg.isolation_cut, unlabeled.dim);
  }

  const std::size_t pos = labeled.positives();
  if (labeled.empty() || pos == 0 || pos == labeled.size())
    log_warning("{}: labeled set of {} rows holds a single class; constant classifier",
                to_string(cfg.variant), labeled.size());

  std::unique_ptr<Classifier> clf;
  switch (cfg.variant) {
    case ElVariant::kEl1: clf = std::make_unique<Forest>(cfg.forest); break;
    case ElVariant::kEl2: clf = std::make_unique<Stacking>(el2_bases(), cfg.stacking_folds); break;
    case ElVariant::kEl2_2:
      clf = std::make_unique<Stacking>(el2_2_bases(cfg.forest), cfg.stacking_folds);
      break;
    case ElVariant::kEl3: clf = std::make_unique<GradientBoosting>(cfg.gbt); break;
    case ElVariant::kEl4_1:
    case ElVariant::kEl4_2: {
      auto bases = cfg.variant == ElVariant::kEl4_1 ? el4_1_bases() : el4_2_bases();
      auto st = std::make_unique<SelfTrainingBagging>(std::move(bases), cfg.ressel);
      if (unlabeled.empty()) log_warning("{}: no unlabeled rows, plain bagging", to_string(cfg.variant));
      st->fit_semi(labeled, unlabeled, rng);
      return ElModel(cfg.variant, std::move(st), labeled.dim);
    }
    case ElVariant::kEl5: break;
  }
  clf->fit(labeled, rng);
  return ElModel(cfg.variant, std::move(clf), labeled.dim);
}

std::vector<Verdict> classify_uncertain(const ElModel& model, const Samples& unlabeled) {
  if (!unlabeled.empty() && unlabeled.dim != model.dim())
    throw DataError(fmt::format("classify: rows have {} features, model expects {}", unlabeled.dim,
                                model.dim()));
  std::vector<Verdict> out;
  out.reserve(unlabeled.size());
  for (std::size_t k = 0; k < unlabeled.size(); ++k) out.push_back(model.verdict(unlabeled.row(k)));
  return out;
}

std::vector<Classification> classify_keys(const ElModel& model, const Samples& unlabeled,
                                          std::span<const RatingKey> keys) {
  if (keys.size() != unlabeled.size()) throw DataError("classify: key and row counts differ");
  const auto verdicts = classify_uncertain(model, unlabeled);
  std::vector<Classification> out;
  out.reserve(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k)
    out.push_back({keys[k], model.score(unlabeled.row(k)), verdicts[k]});
  return out;
}

std::vector<Verdict> resolve_labels(const BoardResult& board, std::span<const Classification> el) {
  return resolve_labels(std::span<const VoteSet>(board.votes), el);
}

std::vector<Verdict> resolve_labels(std::span<const VoteSet> votes,
                                    std::span<const Classification> el) {
  std::unordered_map<RatingKey, Verdict, RatingKeyHash> by_key;
  for (const auto& c : el) by_key[c.key] = c.label;
  std::vector<Verdict> out;
  out.reserve(votes.size());
  for (const VoteSet& v : votes) {
    switch (v.consensus) {
      case Consensus::kNoisy: out.push_back(Verdict::kNoisy); break;
      case Consensus::kClean: out.push_back(Verdict::kClean); break;
      case Consensus::kUncertain: {
        const auto it = by_key.find(v.key);
        if (it == by_key.end())
          throw DataError(fmt::format("uncertain rating ({}, {}) has no ensemble label", v.key.user,
                                      v.key.item));
        out.push_back(it->second);
      }
    }
  }
  return out;
}

void write_classifications_csv(std::span<const Classification> rows, ElVariant variant,
                               const std::filesystem::path& path) {
  std::string out = "userId,itemId,score,label,variant\n";
  for (const auto& c : rows)
    out += fmt::format("{},{},{:.17g},{},{}\n", c.key.user, c.key.item, c.score, to_string(c.label),
                       to_string(variant));
  write_file_atomic(path, out);
}

std::vector<Classification> read_classifications_csv(const std::filesystem::path& path) {
  std::vector<Classification> out;
  for (const CsvRow& row : read_csv(path, "userId,itemId,score,label,variant")) {
    Classification c;
    c.key = {field_as<UserId>(row, 0, path), field_as<ItemId>(row, 1, path)};
    c.score = field_as<double>(row, 2, path);
    c.label = parse_verdict(row.fields[3]);
    parse_el_variant(row.fields[4]);
    out.push_back(c);
  }
  return out;
}

}  // namespace nnf

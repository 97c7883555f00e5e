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
#include <numeric>

#include "nnf/learners.hpp"

namespace nnf {

using nlohmann::json;

namespace {

std::vector<std::unique_ptr<Classifier>> fresh_all(const std::vector<std::unique_ptr<Classifier>>& v) {
  std::vector<std::unique_ptr<Classifier>> out;
  for (const auto& c : v) out.push_back(c->fresh());
  return out;
}

json prototypes_json(const std::vector<std::unique_ptr<Classifier>>& v) {
  json out = json::array();
  for (const auto& c : v) out.push_back(c->fresh()->to_json());
  return out;
}

bool single_class(const Samples& s, std::span<const std::size_t> rows) {
  std::size_t pos = 0;
  for (std::size_t r : rows) pos += s.y[r];
  return pos == 0 || pos == rows.size();
}

}  // namespace

// --- stacking -------------------------------------------------------------------------------

Stacking::Stacking(std::vector<std::unique_ptr<Classifier>> bases, std::size_t folds)
    : bases_(std::move(bases)), folds_(folds) {
  if (bases_.empty()) throw ConfigError("stacking needs at least one base learner");
  if (folds_ < 2) throw ConfigError("stacking needs at least 2 folds");
}

std::unique_ptr<Classifier> Stacking::fresh() const {
  return std::make_unique<Stacking>(fresh_all(bases_), folds_);
}

void Stacking::do_fit(const Samples& data, Rng& rng) {
  const std::size_t n = data.size(), nb = bases_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(std::min(folds_, n));
  for (std::size_t k = 0; k < n; ++k) folds[k % folds.size()].push_back(order[k]);

  for (std::size_t f = 0; f < folds.size() && folds.size() > 1;) {
    if (!single_class(data, folds[f])) {
      ++f;
      continue;
    }
    const std::size_t into = f + 1 < folds.size() ? f + 1 : f - 1;
    log_warning("stacking: fold {} holds a single class, merged with fold {}", f, into);
    folds[into].insert(folds[into].end(), folds[f].begin(), folds[f].end());
    folds.erase(folds.begin() + static_cast<std::ptrdiff_t>(f));
    f = 0;
  }
  folds_used_ = folds.size();

  std::vector<double> oof(n * nb, 0.0);
  if (folds.size() >= 2) {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> train_rows;
      for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
      std::sort(train_rows.begin(), train_rows.end());
      const Samples train = data.subset(train_rows);
      for (std::size_t b = 0; b < nb; ++b) {
        auto clf = bases_[b]->fresh();
        clf->fit(train, rng);
        for (std::size_t r : folds[f]) oof[r * nb + b] = clf->score(data.row(r));
      }
    }
  } else {
    log_warning("stacking: fewer than two usable folds, meta-learner sees in-sample scores");
  }

  std::vector<std::unique_ptr<Classifier>> fitted;
  for (std::size_t b = 0; b < nb; ++b) {
    auto clf = bases_[b]->fresh();
    clf->fit(data, rng);
    if (folds.size() < 2)
      for (std::size_t r = 0; r < n; ++r) oof[r * nb + b] = clf->score(data.row(r));
    fitted.push_back(std::move(clf));
  }
  bases_ = std::move(fitted);

  Samples meta(nb);
  for (std::size_t r = 0; r < n; ++r)
    meta.push(std::span<const double>(oof.data() + r * nb, nb), data.y[r]);
  meta_.fit(meta, rng);
}

double Stacking::do_score(std::span<const double> x) const {
  std::vector<double> z;
  z.reserve(bases_.size());
  for (const auto& b : bases_) z.push_back(b->score(x));
  return meta_.score(z);
}

json Stacking::params_json() const { return {{"folds", folds_}, {"bases", prototypes_json(bases_)}}; }

json Stacking::state_json() const {
  json bases = json::array();
  for (const auto& b : bases_) bases.push_back(b->to_json());
  return {{"bases", bases}, {"meta", meta_.to_json()}, {"folds_used", folds_used_}};
}

void Stacking::load_state(const json& j) {
  bases_.clear();
  for (const auto& b : j.at("bases")) bases_.push_back(classifier_from_json(b));
  auto meta = classifier_from_json(j.at("meta"));
  auto* lr = dynamic_cast<LogisticRegression*>(meta.get());
  if (!lr) throw DataError("stacking: meta-learner must be logistic");
  meta_ = *lr;
  folds_used_ = j.at("folds_used").get<std::size_t>();
}

// --- self-training bagging -----------------------------------------------------------------

SelfTrainingBagging::SelfTrainingBagging(std::vector<std::unique_ptr<Classifier>> bases,
                                         SelfTrainingParams p)
    : bases_(std::move(bases)), params_(p) {
  if (bases_.empty()) throw ConfigError("self-training bagging needs a base learner");
  if (params_.bags == 0) throw ConfigError("self-training bagging needs at least one bag");
}

std::unique_ptr<Classifier> SelfTrainingBagging::fresh() const {
  return std::make_unique<SelfTrainingBagging>(fresh_all(bases_), params_);
}

void SelfTrainingBagging::fit_semi(const Samples& labeled, const Samples& unlabeled, Rng& rng) {
  if (!unlabeled.empty() && unlabeled.dim != labeled.dim)
    throw DataError("self-training: labeled and unlabeled dimensions differ");
  unlabeled_ = unlabeled;
  unlabeled_.y.clear();
  try {
    fit(labeled, rng);
  } catch (...) {
    unlabeled_ = Samples();
    throw;
  }
  unlabeled_ = Samples();
}

void SelfTrainingBagging::do_fit(const Samples& labeled, Rng& rng) {
  const std::uint64_t base = rng.next();
  const std::size_t n = labeled.size();
  bags_.clear();
  oob_history_.clear();
  pseudo_labeled_ = 0;
  const std::size_t half = std::max<std::size_t>(1, params_.add_per_round / 2);

  for (std::size_t b = 0; b < params_.bags; ++b) {
    Rng r(derive_seed(base, b));
    const Classifier& proto = *bases_[b % bases_.size()];
    std::vector<std::size_t> boot(n);
    std::vector<char> in_bag(n, 0);
    for (auto& row : boot) {
      row = r.index(n);
      in_bag[row] = 1;
    }
    Samples train = labeled.subset(boot);
    auto clf = proto.fresh();
    clf->fit(train, r);

    std::vector<std::size_t> oob_rows;
    for (std::size_t k = 0; k < n; ++k)
      if (!in_bag[k]) oob_rows.push_back(k);
    const Samples oob = oob_rows.empty() ? labeled : labeled.subset(oob_rows);
    double err = error_rate(*clf, oob);
    std::vector<double> history{err};

    std::vector<std::size_t> pool(unlabeled_.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t round = 0; round < params_.max_rounds && !pool.empty(); ++round) {
      // (confidence, pool position) per predicted class, most confident first.
      std::array<std::vector<std::pair<double, std::size_t>>, 2> ranked;
      for (std::size_t k = 0; k < pool.size(); ++k) {
        const double s = clf->score(unlabeled_.row(pool[k]));
        ranked[s > 0.5 ? 1 : 0].push_back({-std::fabs(s - 0.5), k});
      }
      std::vector<std::pair<std::size_t, std::uint8_t>> picks;
      for (std::uint8_t c = 0; c < 2; ++c) {
        auto& v = ranked[c];
        const std::size_t take = std::min(half, v.size());
        std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(take), v.end());
        for (std::size_t k = 0; k < take; ++k) picks.push_back({v[k].second, c});
      }
      if (picks.empty()) break;

      Samples candidate = train;
      for (const auto& [pos, label] : picks) candidate.push(unlabeled_.row(pool[pos]), label);
      auto next = proto.fresh();
      next->fit(candidate, r);
      const double next_err = error_rate(*next, oob);
      if (next_err > err) break;

      clf = std::move(next);
      train = std::move(candidate);
      err = next_err;
      history.push_back(err);
      pseudo_labeled_ += picks.size();
      std::vector<char> taken(pool.size(), 0);
      for (const auto& p : picks) taken[p.first] = 1;
      std::vector<std::size_t> rest;
      for (std::size_t k = 0; k < pool.size(); ++k)
        if (!taken[k]) rest.push_back(pool[k]);
      pool = std::move(rest);
    }
    bags_.push_back(std::move(clf));
    oob_history_.push_back(std::move(history));
  }
}

double SelfTrainingBagging::do_score(std::span<const double> x) const {
  std::size_t noisy = 0;
  for (const auto& b : bags_)
    if (b->predict(x)) ++noisy;
  return bags_.empty() ? 0.0 : static_cast<double>(noisy) / static_cast<double>(bags_.size());
}

json SelfTrainingBagging::params_json() const {
  return {{"bags", params_.bags},
          {"add_per_round", params_.add_per_round},
          {"max_rounds", params_.max_rounds},
          {"bases", prototypes_json(bases_)}};
}

json SelfTrainingBagging::state_json() const {
  json bags = json::array();
  for (const auto& b : bags_) bags.push_back(b->to_json());
  return {{"bags", bags}, {"oob_history", oob_history_}, {"pseudo_labeled", pseudo_labeled_}};
}

void SelfTrainingBagging::load_state(const json& j) {
  bags_.clear();
  for (const auto& b : j.at("bags")) bags_.push_back(classifier_from_json(b));
  oob_history_ = j.at("oob_history").get<std::vector<std::vector<double>>>();
  pseudo_labeled_ = j.at("pseudo_labeled").get<std::size_t>();
}

}  // namespace nnf

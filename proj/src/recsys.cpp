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

#include "nnf/recsys.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nnf {

void KnnConfig::validate() const {
  if (k < 1) throw ConfigError("knn: k must be >= 1");
  if (min_overlap < 1) throw ConfigError("knn: min_overlap must be >= 1");
  if (significance_cap < 1) throw ConfigError("knn: significance_cap must be >= 1");
}

namespace {

template <typename ItA, typename ItB, typename Key, typename Val>
double pearson_merge(ItA a, ItA a_end, ItB b, ItB b_end, Key key, Val val,
                     const KnnConfig& cfg) {
  std::vector<std::pair<double, double>> common;
  while (a != a_end && b != b_end) {
    if (key(*a) < key(*b)) {
      ++a;
    } else if (key(*b) < key(*a)) {
      ++b;
    } else {
      common.emplace_back(val(*a), val(*b));
      ++a;
      ++b;
    }
  }
  const std::size_t n = common.size();
  if (n < cfg.min_overlap || n == 0) return 0.0;
  double ma = 0, mb = 0;
  for (const auto& [x, y] : common) {
    ma += x;
    mb += y;
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (const auto& [x, y] : common) {
    sab += (x - ma) * (y - mb);
    saa += (x - ma) * (x - ma);
    sbb += (y - mb) * (y - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  const double r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  const double weight = static_cast<double>(std::min(n, cfg.significance_cap)) /
                        static_cast<double>(cfg.significance_cap);
  return r * weight;
}

}  // namespace

double pearson_similarity(std::span<const Rating> a, std::span<const Rating> b,
                          const KnnConfig& cfg) {
  return pearson_merge(
      a.begin(), a.end(), b.begin(), b.end(), [](const Rating& r) { return r.item; },
      [](const Rating& r) { return r.value; }, cfg);
}

double pearson_similarity(const std::map<ItemId, double>& a, const std::map<ItemId, double>& b,
                          const KnnConfig& cfg) {
  using Entry = std::pair<const ItemId, double>;
  return pearson_merge(
      a.begin(), a.end(), b.begin(), b.end(), [](const Entry& e) { return e.first; },
      [](const Entry& e) { return e.second; }, cfg);
}

// ---------------------------------------------------------------------------
// KnnPredictor

KnnPredictor::KnnPredictor(const RatingsTable& train, KnnConfig cfg) : train_(train), cfg_(cfg) {
  cfg_.validate();
  for (UserId u : train_.users()) {
    const auto rs = train_.user_ratings(u);
    double s = 0;
    for (const Rating& r : rs) s += r.value;
    means_[u] = s / static_cast<double>(rs.size());
  }
}

double KnnPredictor::user_mean(UserId user) const {
  const auto it = means_.find(user);
  if (it == means_.end()) throw DataError(fmt::format("knn: unknown user {}", user));
  return it->second;
}

const std::vector<std::pair<UserId, double>>& KnnPredictor::row(UserId user) const {
  auto it = rows_.find(user);
  if (it != rows_.end()) return it->second;
  std::vector<std::pair<UserId, double>> sims;
  const auto mine = train_.user_ratings(user);
  for (UserId v : train_.users()) {
    if (v == user) continue;
    const double w = pearson_similarity(mine, train_.user_ratings(v), cfg_);
    if (w != 0.0) sims.emplace_back(v, w);
  }
  return rows_.emplace(user, std::move(sims)).first->second;
}

std::optional<double> KnnPredictor::predict(UserId user, ItemId item) const {
  const double mu = user_mean(user);
  if (!train_.has_item(item)) return std::nullopt;
  const auto& sims = row(user);
  // Candidates: neighbors with nonzero similarity who rated the item.
  std::vector<std::pair<UserId, double>> cands;
  for (const auto& [v, w] : sims)
    if (train_.contains({v, item})) cands.emplace_back(v, w);
  if (cands.empty()) return std::nullopt;
  std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
    if (std::fabs(a.second) != std::fabs(b.second)) return std::fabs(a.second) > std::fabs(b.second);
    return a.first < b.first;
  });
  if (cands.size() > cfg_.k) cands.resize(cfg_.k);
  double num = 0, den = 0;
  for (const auto& [v, w] : cands) {
    const double r_vi = train_[*train_.find({v, item})].value;
    num += w * (r_vi - means_.at(v));
    den += std::fabs(w);
  }
  const Scale& s = train_.scale();
  return std::clamp(mu + num / den, s.min, s.max);
}

std::optional<double> knn_predict(const RatingsTable& train, UserId user, ItemId item,
                                  const KnnConfig& cfg) {
  return KnnPredictor(train, cfg).predict(user, item);
}

// ---------------------------------------------------------------------------
// MfModel

double MfModel::score(UserId u, ItemId i) const {
  double s = global_mean_;
  const auto ui = user_index_.find(u);
  const auto ii = item_index_.find(i);
  if (ui != user_index_.end()) s += user_bias_[ui->second];
  if (ii != item_index_.end()) s += item_bias_[ii->second];
  if (ui != user_index_.end() && ii != item_index_.end()) {
    const double* p = &user_factors_[ui->second * factors_];
    const double* q = &item_factors_[ii->second * factors_];
    for (std::size_t f = 0; f < factors_; ++f) s += p[f] * q[f];
  }
  return s;
}

double MfModel::predict(UserId u, ItemId i) const {
  return std::clamp(score(u, i), scale_.min, scale_.max);
}

std::span<const double> MfModel::user_factors(UserId u) const {
  const auto it = user_index_.find(u);
  if (it == user_index_.end()) throw DataError(fmt::format("mf: unknown user {}", u));
  return std::span<const double>(user_factors_).subspan(it->second * factors_, factors_);
}

std::span<const double> MfModel::item_factors(ItemId i) const {
  const auto it = item_index_.find(i);
  if (it == item_index_.end()) throw DataError(fmt::format("mf: unknown item {}", i));
  return std::span<const double>(item_factors_).subspan(it->second * factors_, factors_);
}

double MfModel::user_bias(UserId u) const {
  const auto it = user_index_.find(u);
  return it == user_index_.end() ? 0.0 : user_bias_[it->second];
}

double MfModel::item_bias(ItemId i) const {
  const auto it = item_index_.find(i);
  return it == item_index_.end() ? 0.0 : item_bias_[it->second];
}

nlohmann::json MfModel::to_json() const {
  nlohmann::json j;
  j["format"] = "nnf.mf";
  j["version"] = 1;
  j["factors"] = factors_;
  j["global_mean"] = global_mean_;
  j["scale"] = {scale_.min, scale_.max};
  auto block = [&](const auto& ids, const auto& bias, const auto& factors) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      arr.push_back({{"id", ids[k]},
                     {"bias", bias[k]},
                     {"factors", std::vector<double>(factors.begin() + static_cast<std::ptrdiff_t>(k * factors_),
                                                     factors.begin() + static_cast<std::ptrdiff_t>((k + 1) * factors_))}});
    }
    return arr;
  };
  j["users"] = block(user_ids_, user_bias_, user_factors_);
  j["items"] = block(item_ids_, item_bias_, item_factors_);
  return j;
}

MfModel MfModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "nnf.mf" || j.value("version", 0) != 1)
    throw DataError("mf checkpoint: unsupported format or version");
  MfModel m;
  m.factors_ = j.at("factors").get<std::size_t>();
  m.global_mean_ = j.at("global_mean").get<double>();
  m.scale_ = {j.at("scale").at(0).get<double>(), j.at("scale").at(1).get<double>()};
  auto read = [&](const nlohmann::json& arr, auto& ids, auto& index, auto& bias, auto& factors) {
    for (const auto& e : arr) {
      const auto id = e.at("id").get<std::int64_t>();
      index[id] = ids.size();
      ids.push_back(id);
      bias.push_back(e.at("bias").get<double>());
      const auto f = e.at("factors").get<std::vector<double>>();
      if (f.size() != m.factors_) throw DataError("mf checkpoint: factor length mismatch");
      factors.insert(factors.end(), f.begin(), f.end());
    }
  };
  read(j.at("users"), m.user_ids_, m.user_index_, m.user_bias_, m.user_factors_);
  read(j.at("items"), m.item_ids_, m.item_index_, m.item_bias_, m.item_factors_);
  return m;
}

void MfModel::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_json().dump());
}

MfModel MfModel::load(const std::filesystem::path& path) {
  return from_json(nlohmann::json::parse(read_file(path)));
}

// ---------------------------------------------------------------------------
// Training

struct MfTrainer {
  static MfTrainResult run(const RatingsTable& train, const MfConfig& cfg) {
    if (train.empty()) throw DataError("mf_train: empty training table");
    if (cfg.factors == 0) throw ConfigError("mf_train: factors must be >= 1");
    MfModel m;
    m.factors_ = cfg.factors;
    m.scale_ = train.scale();
    m.user_ids_ = train.users();
    m.item_ids_ = train.items();
    for (std::size_t k = 0; k < m.user_ids_.size(); ++k) m.user_index_[m.user_ids_[k]] = k;
    for (std::size_t k = 0; k < m.item_ids_.size(); ++k) m.item_index_[m.item_ids_[k]] = k;
    double sum = 0;
    for (const Rating& r : train.ratings()) sum += r.value;
    m.global_mean_ = sum / static_cast<double>(train.size());

    const std::size_t f = cfg.factors;
    Rng rng(cfg.seed);
    m.user_bias_.assign(m.user_ids_.size(), 0.0);
    m.item_bias_.assign(m.item_ids_.size(), 0.0);
    m.user_factors_.resize(m.user_ids_.size() * f);
    m.item_factors_.resize(m.item_ids_.size() * f);
    for (double& x : m.user_factors_) x = cfg.init_std * rng.normal();
    for (double& x : m.item_factors_) x = cfg.init_std * rng.normal();

    struct Obs {
      std::size_t u, i;
      double r;
    };
    std::vector<Obs> obs;
    obs.reserve(train.size());
    for (const Rating& r : train.ratings())
      obs.push_back({m.user_index_.at(r.user), m.item_index_.at(r.item), r.value});

    MfTrainResult result;
    const double lr = cfg.learning_rate, reg = cfg.regularization;
    std::vector<std::size_t> order(obs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(order);
      for (std::size_t k : order) {
        const Obs& o = obs[k];
        double* p = &m.user_factors_[o.u * f];
        double* q = &m.item_factors_[o.i * f];
        double pred = m.global_mean_ + m.user_bias_[o.u] + m.item_bias_[o.i];
        for (std::size_t d = 0; d < f; ++d) pred += p[d] * q[d];
        const double err = o.r - pred;
        m.user_bias_[o.u] += lr * (err - reg * m.user_bias_[o.u]);
        m.item_bias_[o.i] += lr * (err - reg * m.item_bias_[o.i]);
        for (std::size_t d = 0; d < f; ++d) {
          const double pd = p[d], qd = q[d];
          p[d] += lr * (err * qd - reg * pd);
          q[d] += lr * (err * pd - reg * qd);
        }
      }
      double se = 0;
      for (const Obs& o : obs) {
        const double e = o.r - m.score(m.user_ids_[o.u], m.item_ids_[o.i]);
        se += e * e;
      }
      const double rmse = std::sqrt(se / static_cast<double>(obs.size()));
      if (!std::isfinite(rmse))
        throw StageError("mf_train", fmt::format("non-finite training loss at epoch {} "
                                                  "(lr={}, reg={}, factors={})",
                                                  epoch, lr, reg, f));
      result.epoch_rmse.push_back(rmse);
    }
    result.model = std::move(m);
    return result;
  }
};

MfTrainResult mf_train(const RatingsTable& train, const MfConfig& cfg) {
  return MfTrainer::run(train, cfg);
}

TopKList recommend_topk(const MfModel& model, const RatingsTable& train, UserId user,
                        std::size_t k) {
  if (!model.has_user(user)) throw DataError(fmt::format("recommend: unknown user {}", user));
  TopKList out;
  out.user = user;
  if (k == 0) return out;
  std::vector<std::pair<ItemId, double>> cands;
  cands.reserve(model.items().size());
  for (ItemId i : model.items()) {
    const bool seen = train.contains({user, i});
    if (!seen) cands.emplace_back(i, model.score(user, i));
  }
  const auto better = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  const std::size_t n = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(n), cands.end(),
                    better);
  cands.resize(n);
  out.items = std::move(cands);
  return out;
}

}  // namespace nnf

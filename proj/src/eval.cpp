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

#include "nnf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nnf/csv.hpp"

namespace nnf {

using nlohmann::json;

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

std::pair<std::size_t, double> nearest(std::span<const double> x,
                                       const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_dist(x, centroids[c]);
    if (d < dist) {
      dist = d;
      best = c;
    }
  }
  return {best, dist};
}

std::vector<std::vector<double>> seed_plus_plus(const std::vector<std::vector<double>>& rows,
                                                std::size_t k, Rng& rng) {
  const std::size_t n = rows.size();
  std::vector<std::vector<double>> centers{rows[rng.index(n)]};
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(rows[i], centers[0]);
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] > 0.0 && u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
      while (d2[pick] == 0.0) --pick;
    } else {
      pick = rng.index(n);
    }
    centers.push_back(rows[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(rows[i], centers.back()));
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& rows, std::size_t k,
                    std::uint64_t seed, std::size_t max_iter) {
  if (k == 0) throw ConfigError("k-means needs k >= 1");
  if (rows.empty()) throw DataError("k-means on an empty set");
  const std::size_t dim = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != dim) throw DataError("k-means rows have different lengths");
    for (double v : r)
      if (!std::isfinite(v)) throw DataError("k-means row has a non-finite value");
  }
  if (k > rows.size()) {
    log_warning("k-means: k lowered from {} to {}", k, rows.size());
    k = rows.size();
  }
  Rng rng(seed);
  KMeansResult out;
  out.centroids = seed_plus_plus(rows, k, rng);
  out.assignment.assign(rows.size(), k);
  for (std::size_t it = 0; it < std::max<std::size_t>(max_iter, 1); ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto [c, d] = nearest(rows[i], out.centroids);
      inertia += d;
      changed |= c != out.assignment[i];
      out.assignment[i] = c;
    }
    out.inertia.push_back(inertia);
    out.iterations = it + 1;
    if (!changed) {
      out.converged = true;
      break;
    }
    std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ++count[out.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) sum[out.assignment[i]][d] += rows[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d)
        out.centroids[c][d] = sum[c][d] / static_cast<double>(count[c]);
    }
  }
  return out;
}

ClusterAssignment cluster_users(const MfModel& model, std::span<const UserId> users,
                                std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  std::vector<UserId> ids(users.begin(), users.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::vector<double>> rows;
  rows.reserve(ids.size());
  for (UserId u : ids) {
    if (!model.has_user(u)) throw DataError(fmt::format("clustering: unknown user {}", u));
    const auto f = model.user_factors(u);
    rows.emplace_back(f.begin(), f.end());
  }
  const KMeansResult km = kmeans(rows, k, seed, max_iter);
  ClusterAssignment out;
  out.k = km.centroids.size();
  out.centroids = km.centroids;
  out.inertia = km.inertia;
  for (std::size_t i = 0; i < ids.size(); ++i) out.cluster[ids[i]] = km.assignment[i];
  return out;
}

std::vector<std::pair<std::size_t, double>> elbow_curve(
    const std::vector<std::vector<double>>& rows, std::span<const std::size_t> ks,
    std::uint64_t seed) {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t k : ks) out.emplace_back(k, kmeans(rows, k, seed).inertia.back());
  return out;
}

RankingMetrics ranking_metrics(std::span<const ItemId> recs, const std::set<ItemId>& relevant,
                               std::size_t k) {
  if (k == 0) throw ConfigError("ranking cutoff K must be at least 1");
  RankingMetrics m;
  const std::size_t n = std::min(k, recs.size());
  double dcg = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (relevant.contains(recs[i])) {
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, relevant.size()); ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
  m.precision = static_cast<double>(hits) / static_cast<double>(k);
  m.recall = relevant.empty() ? 0.0
                              : static_cast<double>(hits) / static_cast<double>(relevant.size());
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  return m;
}

std::string_view to_string(SerendipityFormula f) {
  return f == SerendipityFormula::kComplement ? "complement" : "cosine_mean";
}

SerendipityFormula parse_serendipity_formula(std::string_view s) {
  if (s == "complement") return SerendipityFormula::kComplement;
  if (s == "cosine_mean") return SerendipityFormula::kCosineMean;
  throw ConfigError(fmt::format("unknown serendipity formula '{}'", s));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    dot += a[d] * b[d];
    na += a[d] * a[d];
    nb += b[d] * b[d];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double serendipity(std::span<const ItemId> recs, const std::set<ItemId>& history,
                   const std::set<ItemId>& relevant, const GenreTable& genres,
                   SerendipityFormula formula) {
  if (recs.empty()) return 0.0;
  std::vector<std::span<const double>> hist;
  for (ItemId h : history) {
    const auto v = genres.vector(h);
    if (std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; })) hist.push_back(v);
  }
  double total = 0.0;
  for (ItemId i : recs) {
    if (!relevant.contains(i) || hist.empty()) continue;
    const auto v = genres.vector(i);
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) continue;
    double s = 0.0;
    for (const auto& h : hist) s += cosine(v, h);
    s /= static_cast<double>(hist.size());
    const double u = formula == SerendipityFormula::kComplement ? 1.0 - s : s;
    total += std::clamp(u, 0.0, 1.0);
  }
  return total / static_cast<double>(recs.size());
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kNdcg: return "ndcg";
    case Metric::kPrecision: return "precision";
    case Metric::kRecall: return "recall";
    case Metric::kF1: return "f1";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  for (Metric m : kAllMetrics)
    if (to_string(m) == s) return m;
  throw ConfigError(fmt::format("unknown metric '{}'", s));
}

double UserEval::metric(Metric m) const {
  switch (m) {
    case Metric::kNdcg: return ndcg;
    case Metric::kPrecision: return precision;
    case Metric::kRecall: return recall;
    case Metric::kF1: return f1;
  }
  return 0.0;
}

std::vector<UserEval> evaluate_users(const MfModel& model, const RatingsTable& train,
                                     const RatingsTable& eval, std::span<const UserId> users,
                                     const ClusterAssignment& clusters, const EvalConfig& cfg) {
  std::vector<UserEval> out;
  out.reserve(users.size());
  for (UserId u : users) {
    const auto c = clusters.cluster.find(u);
    if (c == clusters.cluster.end())
      throw DataError(fmt::format("evaluation: user {} has no cluster", u));
    std::set<ItemId> relevant, history;
    const auto held = eval.user_ratings(u);
    for (const Rating& r : held)
      if (r.value >= cfg.relevance_threshold) relevant.insert(r.item);
    for (const Rating& r : train.user_ratings(u)) history.insert(r.item);
    const TopKList top = recommend_topk(model, train, u, cfg.top_k);
    std::vector<ItemId> recs;
    for (const auto& [item, score] : top.items) recs.push_back(item);
    const RankingMetrics m = ranking_metrics(recs, relevant, cfg.top_k);
    UserEval e;
    e.user = u;
    e.ndcg = m.ndcg;
    e.precision = m.precision;
    e.recall = m.recall;
    e.f1 = m.f1;
    e.serendipity = serendipity(recs, history, relevant, train.genres(), cfg.formula);
    e.cluster = c->second;
    e.eval_ratings = held.size();
    out.push_back(e);
  }
  return out;
}

GlobalMetrics global_metrics(std::span<const UserEval> evals) {
  GlobalMetrics g;
  g.users = evals.size();
  if (evals.empty()) return g;
  for (const UserEval& e : evals) {
    g.ndcg += e.ndcg;
    g.precision += e.precision;
    g.recall += e.recall;
    g.f1 += e.f1;
    g.serendipity += e.serendipity;
  }
  const auto n = static_cast<double>(evals.size());
  g.ndcg /= n;
  g.precision /= n;
  g.recall /= n;
  g.f1 /= n;
  g.serendipity /= n;
  return g;
}

std::string_view to_string(Quadrant q) {
  switch (q) {
    case Quadrant::kI: return "I";
    case Quadrant::kII: return "II";
    case Quadrant::kIII: return "III";
    case Quadrant::kIV: return "IV";
    case Quadrant::kOrigin: return "Origin";
  }
  return "?";
}

Quadrant quadrant(double x, double y) {
  if (x == 0.0 && y == 0.0) return Quadrant::kOrigin;
  if (x >= 0.0) return y >= 0.0 ? Quadrant::kI : Quadrant::kIV;
  return y >= 0.0 ? Quadrant::kII : Quadrant::kIII;
}

std::string_view to_string(PercentMode m) { return m == PercentMode::kUsers ? "users" : "ratings"; }

PercentMode parse_percent_mode(std::string_view s) {
  if (s == "users") return PercentMode::kUsers;
  if (s == "ratings") return PercentMode::kRatings;
  throw ConfigError(fmt::format("unknown percent mode '{}'", s));
}

std::string DeltaReport::pair_name() const {
  return fmt::format("serendipity-{}", to_string(metric));
}

double recount_percent_positive(const DeltaReport& r, PercentMode mode) {
  double pos = 0.0, all = 0.0;
  for (const DeltaPoint& p : r.points) {
    const double w = mode == PercentMode::kUsers ? 1.0 : static_cast<double>(p.weight);
    all += w;
    if (p.positive) pos += w;
  }
  return all > 0.0 ? 100.0 * pos / all : 0.0;
}

DeltaReport delta_points(std::span<const UserEval> before, std::span<const UserEval> after,
                         Metric metric, const Plane& plane, PercentMode mode) {
  std::map<UserId, const UserEval*> a;
  for (const UserEval& e : after) a[e.user] = &e;
  std::vector<UserId> only_before, only_after;
  std::set<UserId> seen;
  for (const UserEval& e : before) {
    seen.insert(e.user);
    if (!a.contains(e.user)) only_before.push_back(e.user);
  }
  for (const auto& [u, e] : a)
    if (!seen.contains(u)) only_after.push_back(u);
  if (!only_before.empty() || !only_after.empty() || before.size() != seen.size() ||
      after.size() != a.size())
    throw DataError(fmt::format("arms cover different users: before only [{}], after only [{}]",
                                fmt::join(only_before, ","), fmt::join(only_after, ",")));
  DeltaReport r;
  r.metric = metric;
  for (const UserEval& b : before) {
    const UserEval& e = *a.at(b.user);
    DeltaPoint p;
    p.user = b.user;
    p.cluster = e.cluster;
    p.x = e.serendipity - b.serendipity;
    p.y = e.metric(metric) - b.metric(metric);
    p.quadrant = quadrant(p.x, p.y);
    p.on_axis = (p.x == 0.0) != (p.y == 0.0);
    p.positive = plane_positive(p.x, p.y, plane);
    p.weight = b.eval_ratings;
    ++r.quadrant_counts[p.quadrant];
    r.points.push_back(p);
  }
  r.percent_positive = recount_percent_positive(r, mode);
  return r;
}

std::map<std::size_t, double> cluster_means(std::span<const UserEval> evals, Metric metric) {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const UserEval& e : evals) {
    acc[e.cluster].first += e.metric(metric);
    ++acc[e.cluster].second;
  }
  std::map<std::size_t, double> out;
  for (const auto& [c, s] : acc) out[c] = s.first / static_cast<double>(s.second);
  return out;
}

double critical_group_pct(const std::map<std::size_t, double>& cluster_metric) {
  if (cluster_metric.empty()) return 0.0;
  double mean = 0.0;
  for (const auto& [c, v] : cluster_metric) mean += v;
  mean /= static_cast<double>(cluster_metric.size());
  std::size_t below = 0;
  for (const auto& [c, v] : cluster_metric) below += v < mean;
  return 100.0 * static_cast<double>(below) / static_cast<double>(cluster_metric.size());
}

json to_json(const GlobalMetrics& g) {
  return {{"ndcg", g.ndcg},     {"precision", g.precision},     {"recall", g.recall},
          {"f1", g.f1},         {"serendipity", g.serendipity}, {"users", g.users}};
}

json to_json(const DeltaReport& r, bool with_points) {
  json q = json::object();
  for (Quadrant k : {Quadrant::kI, Quadrant::kII, Quadrant::kIII, Quadrant::kIV, Quadrant::kOrigin}) {
    const auto it = r.quadrant_counts.find(k);
    q[std::string(to_string(k))] = it == r.quadrant_counts.end() ? 0 : it->second;
  }
  json j = {{"pair", r.pair_name()},
            {"metric", to_string(r.metric)},
            {"percent_positive", r.percent_positive},
            {"points_count", r.points.size()},
            {"quadrants", q}};
  if (with_points) {
    json pts = json::array();
    for (const DeltaPoint& p : r.points)
      pts.push_back({{"user", p.user},
                     {"cluster", p.cluster},
                     {"x", p.x},
                     {"y", p.y},
                     {"quadrant", to_string(p.quadrant)},
                     {"positive", p.positive},
                     {"on_axis", p.on_axis}});
    j["points"] = pts;
  }
  return j;
}

void write_deltas_csv(const DeltaReport& r, const std::filesystem::path& path) {
  std::string out = "userId,cluster,dSerendipity,dMetric,quadrant,positive\n";
  for (const DeltaPoint& p : r.points)
    out += fmt::format("{},{},{:.17g},{:.17g},{},{}\n", p.user, p.cluster, p.x, p.y,
                       to_string(p.quadrant), p.positive ? 1 : 0);
  write_file_atomic(path, out);
}

void write_scatter_svg(const DeltaReport& r, const Plane& plane,
                       const std::filesystem::path& path) {
  constexpr double kW = 640, kH = 480, kPad = 50;
  double mx = 1e-6, my = 1e-6;
  for (const DeltaPoint& p : r.points) {
    mx = std::max(mx, std::abs(p.x));
    my = std::max(my, std::abs(p.y));
  }
  mx *= 1.1;
  my *= 1.1;
  const auto sx = [&](double x) { return kPad + (x + mx) / (2 * mx) * (kW - 2 * kPad); };
  const auto sy = [&](double y) { return kH - kPad - (y + my) / (2 * my) * (kH - 2 * kPad); };
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<clipPath id=\"plot\"><rect x=\"{2}\" y=\"{2}\" width=\"{3}\" height=\"{4}\"/></clipPath>\n"
      "<text x=\"{5}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"16\">{6}: {7:.2f}% positive</text>\n",
      kW, kH, kPad, kW - 2 * kPad, kH - 2 * kPad, kW / 2, r.pair_name(), r.percent_positive);
  s += fmt::format(
      "<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"#888\"/>\n"
      "<line x1=\"{:.2f}\" y1=\"{}\" x2=\"{:.2f}\" y2=\"{}\" stroke=\"#888\"/>\n",
      kPad, sy(0), kW - kPad, sy(0), sx(0), kPad, sx(0), kH - kPad);
  if (plane.b != 0.0) {
    s += fmt::format(
        "<line clip-path=\"url(#plot)\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" "
        "stroke=\"#1f5fbf\" stroke-dasharray=\"6 4\"/>\n",
        sx(-mx), sy(plane.a * mx / plane.b), sx(mx), sy(-plane.a * mx / plane.b));
  } else {
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" "
                     "stroke=\"#1f5fbf\" stroke-dasharray=\"6 4\"/>\n",
                     sx(0), kPad, kH - kPad);
  }
  const auto label = [&](double x, double y, std::string_view t) {
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" "
                     "font-family=\"sans-serif\" font-size=\"14\" fill=\"#555\">{}</text>\n",
                     sx(x), sy(y), t);
  };
  label(mx * 0.8, my * 0.85, "I");
  label(-mx * 0.8, my * 0.85, "II");
  label(-mx * 0.8, -my * 0.85, "III");
  label(mx * 0.8, -my * 0.85, "IV");
  for (const DeltaPoint& p : r.points)
    s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n", sx(p.x),
                     sy(p.y), p.positive ? "#2a9d47" : "#c8412f");
  s += fmt::format(
      "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"12\">delta serendipity</text>\n"
      "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" "
      "transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">delta {}</text>\n</svg>\n",
      kW / 2, kH - 12, kH / 2, kH / 2, to_string(r.metric));
  write_file_atomic(path, s);
}

}  // namespace nnf

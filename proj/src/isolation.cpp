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

double isolation_c(std::size_t n) {
  if (n <= 1) return 0.0;
  double h = 0.0;  // H(n - 1)
  for (std::size_t i = n - 1; i >= 1; --i) h += 1.0 / static_cast<double>(i);
  return 2.0 * h - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

namespace {

class IsoBuilder {
 public:
  IsoBuilder(const Samples& d, std::size_t ext, std::size_t limit, Rng& rng)
      : d_(d), ext_(ext), limit_(limit), rng_(rng) {}

  std::vector<IsolationForest::Node> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    node(rows, 0);
    return std::move(nodes_);
  }

 private:
  int node(std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_.back().size = rows.size();
    if (depth >= limit_ || rows.size() <= 1) return id;

    const std::size_t dim = d_.dim;
    std::vector<double> normal(dim), point(dim);
    for (auto& v : normal) v = rng_.normal();
    std::vector<std::size_t> idx(dim);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng_.shuffle(idx);
    for (std::size_t k = 0; k + 1 + ext_ < dim; ++k) normal[idx[k]] = 0.0;
    double norm = 0.0;
    for (double v : normal) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : normal) v /= norm;
    for (std::size_t a = 0; a < dim; ++a) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t r : rows) {
        lo = std::min(lo, d_.row(r)[a]);
        hi = std::max(hi, d_.row(r)[a]);
      }
      point[a] = rng_.uniform(lo, hi);
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      double s = 0.0;
      for (std::size_t a = 0; a < dim; ++a) s += (d_.row(r)[a] - point[a]) * normal[a];
      (s <= 0.0 ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[static_cast<std::size_t>(id)].normal = std::move(normal);
    nodes_[static_cast<std::size_t>(id)].point = std::move(point);
    const int l = node(left, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    const int r = node(right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Samples& d_;
  std::size_t ext_, limit_;
  Rng& rng_;
  std::vector<IsolationForest::Node> nodes_;
};

}  // namespace

void IsolationForest::fit(const Samples& data, Rng& rng) {
  const std::size_t n = data.size();
  if (n < 2) throw DataError(fmt::format("isolation forest needs at least 2 rows, got {}", n));
  if (params_.trees == 0) throw ConfigError("isolation forest needs at least one tree");
  dim_ = data.dim;
  psi_ = std::min(params_.sample_size, n);
  if (psi_ < 2) throw ConfigError("isolation forest sample size must be at least 2");
  if (psi_ < params_.sample_size)
    log_warning("isolation forest: sample size lowered from {} to {}", params_.sample_size, psi_);
  const std::size_t full = dim_ - 1;
  const std::size_t ext =
      params_.extension_level < 0 ? full
                                  : std::min(static_cast<std::size_t>(params_.extension_level), full);
  const auto limit = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(psi_))));
  const std::uint64_t base = rng.next();
  trees_.clear();
  std::vector<std::size_t> all(n);
  for (std::size_t t = 0; t < params_.trees; ++t) {
    Rng r(derive_seed(base, t));
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t k = 0; k < psi_; ++k) std::swap(all[k], all[k + r.index(n - k)]);
    IsoBuilder b(data, ext, limit, r);
    trees_.push_back(b.build({all.begin(), all.begin() + static_cast<std::ptrdiff_t>(psi_)}));
  }
}

double IsolationForest::path_length(std::span<const double> x) const {
  if (x.size() != dim_)
    throw DataError(fmt::format("isolation forest: row has {} values, expected {}", x.size(), dim_));
  double total = 0.0;
  for (const auto& tree : trees_) {
    std::size_t k = 0, depth = 0;
    while (!tree[k].normal.empty()) {
      double s = 0.0;
      for (std::size_t a = 0; a < dim_; ++a) s += (x[a] - tree[k].point[a]) * tree[k].normal[a];
      k = static_cast<std::size_t>(s <= 0.0 ? tree[k].left : tree[k].right);
      ++depth;
    }
    total += static_cast<double>(depth) + isolation_c(tree[k].size);
  }
  return trees_.empty() ? 0.0 : total / static_cast<double>(trees_.size());
}

double IsolationForest::score(std::span<const double> x) const {
  return std::pow(2.0, -path_length(x) / isolation_c(psi_));
}

json IsolationForest::to_json() const {
  json trees = json::array();
  for (const auto& tree : trees_) {
    json nodes = json::array();
    for (const Node& n : tree) {
      if (n.normal.empty()) nodes.push_back({{"size", n.size}});
      else
        nodes.push_back({{"size", n.size}, {"normal", n.normal}, {"point", n.point},
                         {"left", n.left}, {"right", n.right}});
    }
    trees.push_back(nodes);
  }
  return {{"kind", "extended_isolation_forest"},
          {"params",
           {{"trees", params_.trees},
            {"sample_size", params_.sample_size},
            {"extension_level", params_.extension_level}}},
          {"psi", psi_},
          {"dim", dim_},
          {"trees", trees}};
}

IsolationForest IsolationForest::from_json(const json& j) {
  IsolationParams p;
  p.trees = j.at("params").at("trees").get<std::size_t>();
  p.sample_size = j.at("params").at("sample_size").get<std::size_t>();
  p.extension_level = j.at("params").at("extension_level").get<int>();
  IsolationForest f(p);
  f.psi_ = j.at("psi").get<std::size_t>();
  f.dim_ = j.at("dim").get<std::size_t>();
  for (const auto& tree : j.at("trees")) {
    std::vector<Node> nodes;
    for (const auto& n : tree) {
      Node node;
      node.size = n.at("size").get<std::size_t>();
      if (n.contains("normal")) {
        node.normal = n.at("normal").get<std::vector<double>>();
        node.point = n.at("point").get<std::vector<double>>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        const int count = static_cast<int>(tree.size());
        if (node.normal.size() != f.dim_ || node.point.size() != f.dim_ || node.left <= 0 ||
            node.right <= 0 || node.left >= count || node.right >= count)
          throw DataError("isolation forest: malformed node");
      }
      nodes.push_back(std::move(node));
    }
    if (nodes.empty()) throw DataError("isolation forest: empty tree");
    f.trees_.push_back(std::move(nodes));
  }
  return f;
}

}  // namespace nnf

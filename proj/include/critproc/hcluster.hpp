// Copyright 2026 The critproc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "critproc/error.hpp"
#include "critproc/matrix.hpp"

namespace critproc {

// Upper-triangle distance store, scipy "condensed" layout.
class CondensedDistances {
 public:
  CondensedDistances() = default;
  explicit CondensedDistances(std::size_t n) : n_(n), values_(n * (n - 1) / 2, 0.0) {}

  std::size_t size() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return values_[index(i, j)];
  }
  double& at(std::size_t i, std::size_t j) { return values_[index(i, j)]; }

  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return n_ * i - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n_ = 0;
  std::vector<double> values_;
};

namespace hcluster_detail {

inline void require_finite(const Matrix& x) {
  for (double v : x.data())
    if (!std::isfinite(v)) throw Error(Errc::kNonFiniteInput, "matrix contains NaN or Inf");
}

}  // namespace hcluster_detail

inline CondensedDistances pairwise_sq_euclidean(const Matrix& x) {
  if (x.rows() < 2) throw Error(Errc::kEmptyData, "need at least 2 rows");
  hcluster_detail::require_finite(x);
  CondensedDistances d(x.rows());
  for (std::size_t i = 0; i + 1 < x.rows(); ++i) {
    const auto a = x.row(i);
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
      const auto b = x.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      d.at(i, j) = s;
    }
  }
  return d;
}

struct Merge {
  std::size_t left = 0;   // smaller node id
  std::size_t right = 0;  // larger node id
  double height = 0.0;
  std::size_t size = 0;

  bool operator==(const Merge&) const = default;
};

// Merge history. Leaves are nodes 0..n-1; merge k creates node n+k.
struct Dendrogram {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;

  bool operator==(const Dendrogram&) const = default;
};

inline constexpr double kTieTolerance = 1e-12;

// Agglomerative clustering with Ward's criterion.
//
// Dissimilarities are kept squared and updated with the Lance-Williams
// recurrence
//   d2(A+B, C) = ((nA+nC) d2(A,C) + (nB+nC) d2(B,C) - nC d2(A,B)) / (nA+nB+nC)
// so that for singletons the height equals the Euclidean distance, and in
// general height^2 / 2 is the increase in total within-cluster SSE. Equal
// dissimilarities are resolved by the lexicographically smallest
// (left id, right id) pair; dissimilarities within a relative
// kTieTolerance of each other are treated as equal.
inline Dendrogram ward_linkage(const Matrix& x) {
  const std::size_t n = x.rows();
  auto d2 = pairwise_sq_euclidean(x);

  std::vector<std::size_t> node(n);     // slot -> node id
  std::vector<std::size_t> members(n, 1);
  std::vector<char> active(n, 1);
  std::iota(node.begin(), node.end(), std::size_t{0});

  Dendrogram out;
  out.n_leaves = n;
  out.merges.reserve(n - 1);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = n, best_b = n;
    std::size_t best_lo = 0, best_hi = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!active[b]) continue;
        const double v = d2(a, b);
        // Dissimilarities that agree to within rounding of the recurrence
        // count as tied, so exact ties on gridded data are not decided by
        // the last bit.
        const double tol = kTieTolerance * (std::isinf(best) ? v : std::max(v, best));
        if (v > best + tol) continue;
        const std::size_t lo = std::min(node[a], node[b]);
        const std::size_t hi = std::max(node[a], node[b]);
        if (v < best - tol || lo < best_lo || (lo == best_lo && hi < best_hi)) {
          best = v;
          best_a = a;
          best_b = b;
          best_lo = lo;
          best_hi = hi;
        }
      }
    }

    const double na = static_cast<double>(members[best_a]);
    const double nb = static_cast<double>(members[best_b]);
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == best_a || c == best_b) continue;
      const double nc = static_cast<double>(members[c]);
      const double v =
          ((na + nc) * d2(best_a, c) + (nb + nc) * d2(best_b, c) - nc * best) / (na + nb + nc);
      d2.at(best_a, c) = std::max(v, 0.0);
    }
    members[best_a] += members[best_b];
    active[best_b] = 0;
    node[best_a] = n + step;
    out.merges.push_back({best_lo, best_hi, std::sqrt(best), members[best_a]});
  }
  return out;
}

// Flat partition; labels are 0..k-1 and every label is used.
struct ClusterLabels {
  std::vector<int> labels;
  std::size_t k = 0;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(k, 0);
    for (int l : labels) ++s[static_cast<std::size_t>(l)];
    return s;
  }

  bool operator==(const ClusterLabels&) const = default;
};

namespace hcluster_detail {

// Applies the first `count` merges; labels numbered by smallest member.
inline ClusterLabels apply_merges(const Dendrogram& d, std::size_t count) {
  const std::size_t n = d.n_leaves;
  std::vector<std::size_t> parent(n + count);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (std::size_t m = 0; m < count; ++m) {
    parent[find(d.merges[m].left)] = n + m;
    parent[find(d.merges[m].right)] = n + m;
  }
  ClusterLabels out;
  out.labels.assign(n, -1);
  std::vector<int> root_label(n + count, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    if (root_label[r] < 0) root_label[r] = static_cast<int>(out.k++);
    out.labels[i] = root_label[r];
  }
  return out;
}

}  // namespace hcluster_detail

// Relabels clusters by decreasing pooled mean of the output cells of their
// members, so cluster 0 is the highest-output cluster. Ties keep the order
// of the smallest member index.
inline ClusterLabels relabel_by_output(const ClusterLabels& in, const Matrix& outputs) {
  if (outputs.rows() != in.labels.size())
    throw Error(Errc::kDimensionMismatch, "outputs rows != label count");
  std::vector<double> sum(in.k, 0.0);
  std::vector<double> count(in.k, 0.0);
  for (std::size_t i = 0; i < in.labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(in.labels[i]);
    for (double v : outputs.row(i)) sum[c] += v;
    count[c] += static_cast<double>(outputs.cols());
  }
  std::vector<std::size_t> order(in.k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sum[a] / count[a] > sum[b] / count[b];
  });
  std::vector<int> new_id(in.k);
  for (std::size_t r = 0; r < order.size(); ++r) new_id[order[r]] = static_cast<int>(r);
  ClusterLabels out = in;
  for (auto& l : out.labels) l = new_id[static_cast<std::size_t>(l)];
  return out;
}

inline ClusterLabels cut_k(const Dendrogram& d, std::size_t k) {
  if (k < 1 || k > d.n_leaves)
    throw Error(Errc::kKOutOfRange,
                "k=" + std::to_string(k) + " outside [1, " + std::to_string(d.n_leaves) + "]");
  return hcluster_detail::apply_merges(d, d.n_leaves - k);
}

inline ClusterLabels cut_k(const Dendrogram& d, std::size_t k, const Matrix& outputs) {
  return relabel_by_output(cut_k(d, k), outputs);
}

// Components of all merges with height <= h.
inline ClusterLabels cut_height(const Dendrogram& d, double h) {
  std::size_t count = 0;
  while (count < d.merges.size() && d.merges[count].height <= h) ++count;
  return hcluster_detail::apply_merges(d, count);
}

inline ClusterLabels cut_height(const Dendrogram& d, double h, const Matrix& outputs) {
  return relabel_by_output(cut_height(d, h), outputs);
}

// Leaves in recursive left-then-right order from the root.
inline std::vector<std::size_t> leaf_order(const Dendrogram& d) {
  std::vector<std::size_t> order;
  if (d.n_leaves == 0) return order;
  if (d.merges.empty()) return {0};
  std::vector<std::size_t> stack{d.n_leaves + d.merges.size() - 1};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    if (v < d.n_leaves) {
      order.push_back(v);
      continue;
    }
    const auto& m = d.merges[v - d.n_leaves];
    stack.push_back(m.right);
    stack.push_back(m.left);
  }
  return order;
}

inline nlohmann::json dendrogram_to_json(const Dendrogram& d) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : d.merges)
    merges.push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
  return {{"n_leaves", d.n_leaves}, {"merges", std::move(merges)}};
}

inline Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram d;
  d.n_leaves = j.at("n_leaves").get<std::size_t>();
  for (const auto& m : j.at("merges"))
    d.merges.push_back({m.at("left").get<std::size_t>(), m.at("right").get<std::size_t>(),
                        m.at("height").get<double>(), m.at("size").get<std::size_t>()});
  if (d.n_leaves < 1 || d.merges.size() + 1 != d.n_leaves)
    throw Error(Errc::kInvalidConfig, "dendrogram needs n_leaves - 1 merges");
  return d;
}

// Graphviz rendering; each edge is labelled with the height of its parent.
inline std::string dendrogram_to_dot(const Dendrogram& d) {
  std::ostringstream out;
  out << "digraph dendrogram {\n  node [shape=point];\n";
  char buf[64];
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const auto& m = d.merges[k];
    const std::size_t id = d.n_leaves + k;
    std::snprintf(buf, sizeof buf, "%.6g", m.height);
    out << "  n" << id << " [label=\"" << buf << "\", shape=ellipse];\n";
    out << "  n" << id << " -> n" << m.left << " [label=\"" << buf << "\"];\n";
    out << "  n" << id << " -> n" << m.right << " [label=\"" << buf << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace critproc

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
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "critproc/error.hpp"
#include "critproc/forest.hpp"
#include "critproc/matrix.hpp"
#include "critproc/parallel.hpp"
#include "critproc/rng.hpp"

namespace critproc {

// Encoded columns that are switched between instance and background values
// together, e.g. the one-hot block of one categorical source column.
struct FeatureGroup {
  std::string name;
  std::vector<std::size_t> columns;
};

enum class ShapMode { kExact, kSampled };

inline constexpr std::size_t kMaxExactFeatures = 15;

struct ShapConfig {
  Matrix background;  // m x p reference rows
  ShapMode mode = ShapMode::kExact;
  std::size_t n_permutations = 1000;
  std::uint64_t seed = 0;
  std::vector<FeatureGroup> groups;  // empty: one group per column
};

struct ShapValues {
  double base_value = 0.0;  // mean model output over the background
  double prediction = 0.0;  // model output at the instance
  std::vector<double> phi;
  std::vector<double> std_error;  // sampled mode only; zeros otherwise
};

using ModelFn = std::function<double(std::span<const double>)>;

// Groups of a config, defaulting to singletons; must partition [0, p).
inline std::vector<FeatureGroup> resolve_groups(const ShapConfig& cfg, std::size_t p) {
  if (cfg.groups.empty()) {
    std::vector<FeatureGroup> out;
    for (std::size_t j = 0; j < p; ++j) out.push_back({"x" + std::to_string(j), {j}});
    return out;
  }
  std::vector<int> owner(p, -1);
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    if (cfg.groups[g].columns.empty())
      throw Error(Errc::kInvalidConfig, "feature group '" + cfg.groups[g].name + "' is empty");
    for (auto c : cfg.groups[g].columns) {
      if (c >= p || owner[c] >= 0)
        throw Error(Errc::kInvalidConfig, "feature groups must partition the encoded columns");
      owner[c] = static_cast<int>(g);
    }
  }
  for (int o : owner)
    if (o < 0) throw Error(Errc::kInvalidConfig, "feature groups must partition the encoded columns");
  return cfg.groups;
}

namespace shap_detail {

inline void check(const ShapConfig& cfg, std::span<const double> instance) {
  if (cfg.background.rows() < 1) throw Error(Errc::kEmptyData, "background needs >= 1 row");
  if (cfg.background.cols() != instance.size())
    throw Error(Errc::kDimensionMismatch, "instance width != background width");
}

// Weight |S|!(M-|S|-1)!/M! indexed by |S|.
inline std::vector<double> coalition_weights(std::size_t m) {
  std::vector<double> w(m);
  for (std::size_t s = 0; s < m; ++s) {
    // s!(m-s-1)!/m! = 1 / (m * C(m-1, s))
    double binom = 1.0;
    for (std::size_t i = 1; i <= s; ++i)
      binom = binom * static_cast<double>(m - 1 - s + i) / static_cast<double>(i);
    w[s] = 1.0 / (static_cast<double>(m) * binom);
  }
  return w;
}

inline double mean_output(const ModelFn& f, const Matrix& rows) {
  double s = 0.0;
  for (std::size_t r = 0; r < rows.rows(); ++r) s += f(rows.row(r));
  return s / static_cast<double>(rows.rows());
}

}  // namespace shap_detail

// Exact interventional Shapley values by enumerating all 2^M coalitions:
//   v(S) = mean_b f(x_S, b_rest)
//   phi_j = sum_{S not containing j} |S|!(M-|S|-1)!/M! (v(S+j) - v(S))
inline ShapValues shap_exact(const ModelFn& model, std::span<const double> instance,
                             const ShapConfig& cfg) {
  shap_detail::check(cfg, instance);
  const auto groups = resolve_groups(cfg, instance.size());
  const std::size_t m = groups.size();
  if (m > kMaxExactFeatures)
    throw Error(Errc::kTooManyFeatures, std::to_string(m) + " features; use sampled mode");

  const std::size_t subsets = std::size_t{1} << m;
  std::vector<double> value(subsets, 0.0);
  const Matrix& bg = cfg.background;
  parallel_for(subsets, [&](std::size_t mask) {
    std::vector<double> z(instance.size());
    double s = 0.0;
    for (std::size_t r = 0; r < bg.rows(); ++r) {
      const auto b = bg.row(r);
      std::copy(b.begin(), b.end(), z.begin());
      for (std::size_t g = 0; g < m; ++g)
        if (mask >> g & 1U)
          for (auto c : groups[g].columns) z[c] = instance[c];
      s += model(z);
    }
    value[mask] = s / static_cast<double>(bg.rows());
  });

  const auto weight = shap_detail::coalition_weights(m);
  ShapValues out;
  out.base_value = value[0];
  out.prediction = model(instance);
  out.phi.assign(m, 0.0);
  out.std_error.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double acc = 0.0;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    out.phi[j] = acc;
  }
  return out;
}

// Permutation-sampling estimate of the same target. Each permutation walks
// the coalition chain with the full background, so every sample satisfies
// efficiency exactly; std_error is the Monte Carlo standard error of the
// per-feature mean.
inline ShapValues shap_sampled(const ModelFn& model, std::span<const double> instance,
                               const ShapConfig& cfg) {
  shap_detail::check(cfg, instance);
  if (cfg.n_permutations < 1) throw Error(Errc::kInvalidConfig, "n_permutations must be >= 1");
  const auto groups = resolve_groups(cfg, instance.size());
  const std::size_t m = groups.size();
  const Matrix& bg = cfg.background;

  ShapValues out;
  out.base_value = shap_detail::mean_output(model, bg);
  out.prediction = model(instance);

  std::vector<double> contrib(cfg.n_permutations * m, 0.0);
  parallel_for(cfg.n_permutations, [&](std::size_t k) {
    Rng rng(derive_seed(cfg.seed, k));
    std::vector<std::size_t> order(m);
    for (std::size_t g = 0; g < m; ++g) order[g] = g;
    rng.shuffle(std::span(order));
    Matrix z = bg;
    double prev = out.base_value;
    for (std::size_t step = 0; step < m; ++step) {
      const std::size_t g = order[step];
      for (std::size_t r = 0; r < z.rows(); ++r)
        for (auto c : groups[g].columns) z(r, c) = instance[c];
      const double cur = step + 1 == m ? out.prediction : shap_detail::mean_output(model, z);
      contrib[k * m + g] = cur - prev;
      prev = cur;
    }
  });

  out.phi.assign(m, 0.0);
  out.std_error.assign(m, 0.0);
  const double n = static_cast<double>(cfg.n_permutations);
  for (std::size_t g = 0; g < m; ++g) {
    double sum = 0.0;
    for (std::size_t k = 0; k < cfg.n_permutations; ++k) sum += contrib[k * m + g];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t k = 0; k < cfg.n_permutations; ++k) {
      const double d = contrib[k * m + g] - mean;
      ss += d * d;
    }
    out.phi[g] = mean;
    out.std_error[g] = cfg.n_permutations > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  return out;
}

inline ShapValues shap(const ModelFn& model, std::span<const double> instance, const ShapConfig& cfg) {
  return cfg.mode == ShapMode::kExact ? shap_exact(model, instance, cfg)
                                      : shap_sampled(model, instance, cfg);
}

// Exact interventional Shapley values of a forest output (class column
// `output` for classifiers, 0 for regressors) without enumerating
// coalitions. For a fixed tree and background row b, the composite input
// reaches a leaf exactly when every group on which x and b disagree along
// the path is in the coalition (taken x's way) or outside it (taken b's
// way). The leaf's indicator game over those groups has a closed form:
//   in-group  j: +(a-1)! c! / (a+c)!
//   out-group j: -a! (c-1)! / (a+c)!
// with a, c the in/out group counts. Summing over leaves, rows and trees
// gives the same phi as shap_exact on the forest's model function.
inline ShapValues shap_forest(const Forest& forest, std::size_t output,
                              std::span<const double> instance, const ShapConfig& cfg) {
  shap_detail::check(cfg, instance);
  if (instance.size() != forest.n_features)
    throw Error(Errc::kDimensionMismatch, "instance width != forest features");
  const std::size_t width = forest.n_classes == 0 ? 1 : forest.n_classes;
  if (output >= width) throw Error(Errc::kLabelOutOfRange, "forest output index out of range");
  const auto groups = resolve_groups(cfg, instance.size());
  const std::size_t m = groups.size();
  if (m > 64) throw Error(Errc::kTooManyFeatures, "at most 64 feature groups");
  std::vector<std::size_t> group_of(instance.size());
  for (std::size_t g = 0; g < m; ++g)
    for (auto c : groups[g].columns) group_of[c] = g;

  // factorial table up to m
  std::vector<double> fact(m + 1, 1.0);
  for (std::size_t i = 1; i <= m; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

  const Matrix& bg = cfg.background;
  const std::size_t n_trees = forest.trees.size();
  std::vector<double> per_tree(n_trees * (m + 1), 0.0);  // phi..., base

  parallel_for(n_trees, [&](std::size_t t) {
    const Tree& tree = forest.trees[t];
    double* acc = per_tree.data() + t * (m + 1);
    struct Frame {
      std::uint32_t node;
      std::uint64_t in;
      std::uint64_t out;
    };
    std::vector<Frame> stack;
    for (std::size_t r = 0; r < bg.rows(); ++r) {
      const auto b = bg.row(r);
      acc[m] += tree.value(tree.leaf_index(b))[output];
      stack.assign(1, Frame{0, 0, 0});
      while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        const auto& node = tree.nodes[f.node];
        if (node.feature < 0) {
          const double v = tree.value(f.node)[output];
          const auto a = static_cast<std::size_t>(std::popcount(f.in));
          const auto c = static_cast<std::size_t>(std::popcount(f.out));
          if (a + c == 0 || v == 0.0) continue;
          if (a > 0) {
            const double w = v * fact[a - 1] * fact[c] / fact[a + c];
            for (std::uint64_t bits = f.in; bits; bits &= bits - 1)
              acc[std::countr_zero(bits)] += w;
          }
          if (c > 0) {
            const double w = v * fact[a] * fact[c - 1] / fact[a + c];
            for (std::uint64_t bits = f.out; bits; bits &= bits - 1)
              acc[std::countr_zero(bits)] -= w;
          }
          continue;
        }
        const auto col = static_cast<std::size_t>(node.feature);
        const std::uint64_t bit = std::uint64_t{1} << group_of[col];
        const std::uint32_t x_next = instance[col] <= node.threshold ? node.left : node.right;
        const std::uint32_t b_next = b[col] <= node.threshold ? node.left : node.right;
        if (f.in & bit) {
          stack.push_back({x_next, f.in, f.out});
        } else if (f.out & bit) {
          stack.push_back({b_next, f.in, f.out});
        } else if (x_next == b_next) {
          stack.push_back({x_next, f.in, f.out});
        } else {
          stack.push_back({x_next, f.in | bit, f.out});
          stack.push_back({b_next, f.in, f.out | bit});
        }
      }
    }
  });

  ShapValues out;
  out.phi.assign(m, 0.0);
  out.std_error.assign(m, 0.0);
  const double scale = 1.0 / (static_cast<double>(n_trees) * static_cast<double>(bg.rows()));
  for (std::size_t t = 0; t < n_trees; ++t) {
    for (std::size_t g = 0; g < m; ++g) out.phi[g] += per_tree[t * (m + 1) + g];
    out.base_value += per_tree[t * (m + 1) + m];
  }
  for (auto& v : out.phi) v *= scale;
  out.base_value *= scale;
  out.prediction = forest_output(forest, instance)[output];
  return out;
}

// Groups mirroring an encoder's source columns.
template <typename Blocks>
std::vector<FeatureGroup> groups_from_blocks(const Blocks& blocks) {
  std::vector<FeatureGroup> groups;
  for (const auto& b : blocks) {
    FeatureGroup g{b.source, {}};
    for (std::size_t i = 0; i < b.width; ++i) g.columns.push_back(b.first + i);
    groups.push_back(std::move(g));
  }
  return groups;
}

struct RankedFeature {
  std::string name;
  double mean_abs_shap = 0.0;
};

// Mean |phi| per feature over instances, descending; ties by name.
inline std::vector<RankedFeature> global_ranking(std::span<const std::string> names,
                                                 std::span<const std::vector<double>> phis) {
  if (phis.empty()) throw Error(Errc::kEmptyData, "ranking needs at least one instance");
  std::vector<RankedFeature> ranked;
  for (std::size_t j = 0; j < names.size(); ++j) {
    double s = 0.0;
    for (const auto& phi : phis) {
      if (phi.size() != names.size()) throw Error(Errc::kDimensionMismatch, "phi width != names");
      s += std::abs(phi[j]);
    }
    ranked.push_back({names[j], s / static_cast<double>(phis.size())});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.mean_abs_shap != b.mean_abs_shap) return a.mean_abs_shap > b.mean_abs_shap;
    return a.name < b.name;
  });
  return ranked;
}

struct ShapReport {
  double base_value = 0.0;
  std::vector<std::string> feature_names;
  std::vector<std::string> instance_ids;
  std::vector<std::vector<double>> phi;
  std::vector<RankedFeature> global;
};

inline nlohmann::json to_json(const ShapReport& report) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : report.global)
    features.push_back({{"name", f.name}, {"mean_abs_shap", f.mean_abs_shap}});
  nlohmann::json instances = nlohmann::json::array();
  for (std::size_t i = 0; i < report.phi.size(); ++i) {
    nlohmann::json phi = nlohmann::json::object();
    for (std::size_t j = 0; j < report.feature_names.size(); ++j)
      phi[report.feature_names[j]] = report.phi[i][j];
    instances.push_back({{"id", report.instance_ids[i]}, {"phi", std::move(phi)}});
  }
  return {{"base_value", report.base_value},
          {"features", std::move(features)},
          {"instances", std::move(instances)}};
}

}  // namespace critproc

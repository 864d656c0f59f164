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
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "critproc/error.hpp"
#include "critproc/matrix.hpp"
#include "critproc/parallel.hpp"
#include "critproc/rng.hpp"

namespace critproc {

enum class Task { kClassify, kRegress };

// How many features are drawn per node. kAuto means sqrt(p) for
// classification and p/3 for regression.
enum class FeatureRule { kAuto, kSqrt, kThird, kAll, kCount };

inline constexpr std::size_t kUnlimitedDepth = std::numeric_limits<std::size_t>::max();

struct ForestParams {
  Task task = Task::kClassify;
  std::size_t tree_count = 1000;
  std::size_t max_depth = 6;
  std::size_t min_samples_leaf = 1;
  FeatureRule feature_rule = FeatureRule::kAuto;
  std::size_t features_per_split = 0;  // used when feature_rule == kCount
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (tree_count < 1) throw Error(Errc::kInvalidConfig, "tree_count must be >= 1");
    if (max_depth < 1) throw Error(Errc::kInvalidConfig, "max_depth must be >= 1");
    if (min_samples_leaf < 1) throw Error(Errc::kInvalidConfig, "min_samples_leaf must be >= 1");
    if (feature_rule == FeatureRule::kCount && features_per_split < 1)
      throw Error(Errc::kInvalidConfig, "features_per_split must be >= 1");
  }

  std::size_t resolve_features(std::size_t p) const {
    FeatureRule rule = feature_rule;
    if (rule == FeatureRule::kAuto)
      rule = task == Task::kClassify ? FeatureRule::kSqrt : FeatureRule::kThird;
    std::size_t m = p;
    switch (rule) {
      case FeatureRule::kSqrt:
        m = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))));
        break;
      case FeatureRule::kThird: m = p / 3; break;
      case FeatureRule::kCount: m = features_per_split; break;
      case FeatureRule::kAll:
      case FeatureRule::kAuto: m = p; break;
    }
    return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(p, 1));
  }
};

// Flat binary tree. Node 0 is the root; x[feature] <= threshold goes left.
// `values` holds `value_width` entries per node: class frequencies for
// classification, the mean target for regression.
struct Tree {
  struct Node {
    std::int32_t feature = -1;  // -1 for leaves
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t samples = 0;
  };

  std::vector<Node> nodes;
  std::vector<double> values;
  std::size_t value_width = 1;

  bool is_leaf(std::size_t i) const { return nodes[i].feature < 0; }

  std::span<const double> value(std::size_t i) const {
    return std::span<const double>(values).subspan(i * value_width, value_width);
  }

  std::size_t leaf_index(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0)
      i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                              : nodes[i].right;
    return i;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      const auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!is_leaf(i)) {
        stack.push_back({nodes[i].left, d + 1});
        stack.push_back({nodes[i].right, d + 1});
      }
    }
    return best;
  }

  bool operator==(const Tree& o) const {
    if (nodes.size() != o.nodes.size() || values != o.values || value_width != o.value_width)
      return false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto &a = nodes[i], &b = o.nodes[i];
      if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left ||
          a.right != b.right || a.samples != b.samples)
        return false;
    }
    return true;
  }
};

namespace forest_detail {

struct SplitChoice {
  bool found = false;
  double score = -std::numeric_limits<double>::infinity();  // higher is better
  std::size_t feature = 0;
  double threshold = 0.0;
};

// Lexicographic preference: higher score, then lower feature, then lower
// threshold.
inline bool better(const SplitChoice& cand, const SplitChoice& cur) {
  if (!cur.found) return true;
  if (cand.score != cur.score) return cand.score > cur.score;
  if (cand.feature != cur.feature) return cand.feature < cur.feature;
  return cand.threshold < cur.threshold;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> y, std::size_t n_classes,
              const ForestParams& params, Rng& rng)
      : x_(x),
        y_(y),
        n_classes_(n_classes),
        params_(params),
        rng_(rng),
        mtry_(params.resolve_features(x.cols())) {
    tree_.value_width = params.task == Task::kClassify ? n_classes : 1;
    feature_order_.resize(x.cols());
    std::iota(feature_order_.begin(), feature_order_.end(), std::size_t{0});
  }

  Tree build(std::vector<std::size_t> samples) {
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  std::size_t add_node(std::span<const std::size_t> samples) {
    const std::size_t id = tree_.nodes.size();
    Tree::Node node;
    node.samples = static_cast<std::uint32_t>(samples.size());
    tree_.nodes.push_back(node);
    const double inv = 1.0 / static_cast<double>(samples.size());
    if (params_.task == Task::kClassify) {
      std::vector<double> freq(n_classes_, 0.0);
      for (auto s : samples) freq[static_cast<std::size_t>(y_[s])] += 1.0;
      for (auto& f : freq) f *= inv;
      tree_.values.insert(tree_.values.end(), freq.begin(), freq.end());
    } else {
      double sum = 0.0;
      for (auto s : samples) sum += y_[s];
      tree_.values.push_back(sum * inv);
    }
    return id;
  }

  bool is_pure(std::span<const std::size_t> samples) const {
    const double first = y_[samples.front()];
    for (auto s : samples)
      if (y_[s] != first) return false;
    return true;
  }

  std::size_t grow(std::vector<std::size_t>& samples, std::size_t depth) {
    const std::size_t id = add_node(samples);
    if (depth >= params_.max_depth || samples.size() < 2 * params_.min_samples_leaf ||
        is_pure(samples))
      return id;
    const auto split = find_split(samples);
    if (!split.found) return id;

    std::vector<std::size_t> left, right;
    for (auto s : samples)
      (x_(s, split.feature) <= split.threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();

    tree_.nodes[id].feature = static_cast<std::int32_t>(split.feature);
    tree_.nodes[id].threshold = split.threshold;
    const auto l = grow(left, depth + 1);
    tree_.nodes[id].left = static_cast<std::uint32_t>(l);
    const auto r = grow(right, depth + 1);
    tree_.nodes[id].right = static_cast<std::uint32_t>(r);
    return id;
  }

  // Visits features in a random order until `mtry_` non-constant ones have
  // been evaluated.
  SplitChoice find_split(std::span<const std::size_t> samples) {
    rng_.shuffle(std::span(feature_order_));
    SplitChoice best;
    std::size_t evaluated = 0;
    const std::size_t m = samples.size();
    column_.resize(m);
    for (std::size_t f : feature_order_) {
      if (evaluated >= mtry_) break;
      for (std::size_t i = 0; i < m; ++i) column_[i] = {x_(samples[i], f), y_[samples[i]]};
      std::sort(column_.begin(), column_.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (column_.front().first == column_.back().first) continue;
      ++evaluated;
      scan_feature(f, best);
    }
    return best;
  }

  void scan_feature(std::size_t f, SplitChoice& best) {
    const std::size_t m = column_.size();
    const std::size_t min_leaf = params_.min_samples_leaf;
    if (params_.task == Task::kClassify) {
      std::vector<double> left(n_classes_, 0.0), right(n_classes_, 0.0);
      for (const auto& [v, y] : column_) right[static_cast<std::size_t>(y)] += 1.0;
      double left_sq = 0.0, right_sq = 0.0;
      for (double c : right) right_sq += c * c;
      for (std::size_t i = 1; i < m; ++i) {
        const auto cls = static_cast<std::size_t>(column_[i - 1].second);
        // Update sum of squared counts incrementally.
        left_sq += 2.0 * left[cls] + 1.0;
        left[cls] += 1.0;
        right_sq -= 2.0 * right[cls] - 1.0;
        right[cls] -= 1.0;
        if (column_[i].first == column_[i - 1].first) continue;
        if (i < min_leaf || m - i < min_leaf) continue;
        const double score =
            left_sq / static_cast<double>(i) + right_sq / static_cast<double>(m - i);
        offer(f, i, score, best);
      }
    } else {
      double total = 0.0;
      for (const auto& [v, y] : column_) total += y;
      double left_sum = 0.0;
      for (std::size_t i = 1; i < m; ++i) {
        left_sum += column_[i - 1].second;
        if (column_[i].first == column_[i - 1].first) continue;
        if (i < min_leaf || m - i < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(i) +
                             right_sum * right_sum / static_cast<double>(m - i);
        offer(f, i, score, best);
      }
    }
  }

  void offer(std::size_t f, std::size_t i, double score, SplitChoice& best) {
    const double lo = column_[i - 1].first;
    const double hi = column_[i].first;
    double t = lo + (hi - lo) / 2.0;
    if (t >= hi || t < lo) t = lo;
    SplitChoice cand{true, score, f, t};
    if (better(cand, best)) best = cand;
  }

  const Matrix& x_;
  std::span<const double> y_;
  std::size_t n_classes_;
  const ForestParams& params_;
  Rng& rng_;
  std::size_t mtry_;
  Tree tree_;
  std::vector<std::size_t> feature_order_;
  std::vector<std::pair<double, double>> column_;
};

inline std::size_t infer_classes(std::span<const double> y) {
  double top = 0.0;
  for (double v : y) {
    if (v < 0.0 || v != std::floor(v))
      throw Error(Errc::kLabelOutOfRange, "class labels must be non-negative integers");
    top = std::max(top, v);
  }
  return static_cast<std::size_t>(top) + 1;
}

inline void check_inputs(const Matrix& x, std::span<const double> y) {
  if (x.rows() == 0 || x.cols() == 0) throw Error(Errc::kEmptyData, "no training data");
  if (y.size() != x.rows()) throw Error(Errc::kDimensionMismatch, "targets != rows");
  for (double v : x.data())
    if (!std::isfinite(v)) throw Error(Errc::kNonFiniteInput, "features contain NaN or Inf");
  for (double v : y)
    if (!std::isfinite(v)) throw Error(Errc::kNonFiniteInput, "targets contain NaN or Inf");
}

}  // namespace forest_detail

// One CART tree on all rows of `x`. For classification, y holds class ids in
// [0, n_classes); n_classes == 0 infers max(y)+1.
inline Tree fit_tree(const Matrix& x, std::span<const double> y, const ForestParams& params,
                     Rng& rng, std::size_t n_classes = 0) {
  params.validate();
  forest_detail::check_inputs(x, y);
  if (params.task == Task::kClassify) {
    const auto inferred = forest_detail::infer_classes(y);
    if (n_classes == 0) n_classes = inferred;
    if (inferred > n_classes) throw Error(Errc::kLabelOutOfRange, "label >= n_classes");
  }
  std::vector<std::size_t> samples(x.rows());
  std::iota(samples.begin(), samples.end(), std::size_t{0});
  return forest_detail::TreeBuilder(x, y, n_classes, params, rng).build(std::move(samples));
}

struct Forest {
  ForestParams params;
  std::vector<Tree> trees;
  std::size_t n_classes = 0;  // 0 for regression
  std::size_t n_features = 0;
  std::vector<std::string> feature_names;

  bool operator==(const Forest& o) const {
    return trees == o.trees && n_classes == o.n_classes && n_features == o.n_features &&
           feature_names == o.feature_names;
  }
};

// Bagged ensemble. Tree t draws from its own stream seeded by
// (params.seed, t), so the result does not depend on the worker count.
inline Forest fit_forest(const Matrix& x, std::span<const double> y, const ForestParams& params,
                         std::vector<std::string> feature_names = {}, std::size_t n_classes = 0,
                         std::size_t workers = worker_count()) {
  params.validate();
  forest_detail::check_inputs(x, y);
  Forest forest;
  forest.params = params;
  forest.n_features = x.cols();
  if (feature_names.empty())
    for (std::size_t j = 0; j < x.cols(); ++j) feature_names.push_back("x" + std::to_string(j));
  if (feature_names.size() != x.cols())
    throw Error(Errc::kDimensionMismatch, "feature_names length != columns");
  forest.feature_names = std::move(feature_names);
  if (params.task == Task::kClassify) {
    const auto inferred = forest_detail::infer_classes(y);
    forest.n_classes = n_classes == 0 ? inferred : n_classes;
    if (inferred > forest.n_classes) throw Error(Errc::kLabelOutOfRange, "label >= n_classes");
  }
  forest.trees.resize(params.tree_count);
  const std::size_t n = x.rows();
  parallel_for(
      params.tree_count,
      [&](std::size_t t) {
        Rng rng(derive_seed(params.seed, t));
        std::vector<std::size_t> samples(n);
        if (params.bootstrap) {
          for (auto& s : samples) s = rng.below(n);
        } else {
          std::iota(samples.begin(), samples.end(), std::size_t{0});
        }
        forest.trees[t] = forest_detail::TreeBuilder(x, y, forest.n_classes, params, rng)
                              .build(std::move(samples));
      },
      workers);
  return forest;
}

namespace forest_detail {
inline void check_width(const Forest& f, const Matrix& x) {
  if (x.cols() != f.n_features)
    throw Error(Errc::kDimensionMismatch, "expected " + std::to_string(f.n_features) +
                                              " features, got " + std::to_string(x.cols()));
}
}  // namespace forest_detail

// Mean of the trees' leaf values for one row (length n_classes, or 1).
inline std::vector<double> forest_output(const Forest& f, std::span<const double> x) {
  const std::size_t width = f.n_classes == 0 ? 1 : f.n_classes;
  std::vector<double> acc(width, 0.0);
  for (const auto& t : f.trees) {
    const auto v = t.value(t.leaf_index(x));
    for (std::size_t k = 0; k < width; ++k) acc[k] += v[k];
  }
  const double inv = 1.0 / static_cast<double>(f.trees.size());
  for (auto& a : acc) a *= inv;
  return acc;
}

inline Matrix predict_proba(const Forest& f, const Matrix& x) {
  if (f.n_classes == 0) throw Error(Errc::kInvalidConfig, "predict_proba on a regression forest");
  forest_detail::check_width(f, x);
  Matrix out(x.rows(), f.n_classes);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto p = forest_output(f, x.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

// Class ids (argmax, lowest id on ties) or regression means.
inline std::vector<double> predict(const Forest& f, const Matrix& x) {
  forest_detail::check_width(f, x);
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto p = forest_output(f, x.row(r));
    if (f.n_classes == 0) {
      out[r] = p[0];
    } else {
      out[r] = static_cast<double>(std::max_element(p.begin(), p.end()) - p.begin());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kForestFormatVersion = 1;

inline std::string to_string(FeatureRule rule) {
  switch (rule) {
    case FeatureRule::kAuto: return "auto";
    case FeatureRule::kSqrt: return "sqrt";
    case FeatureRule::kThird: return "third";
    case FeatureRule::kAll: return "all";
    case FeatureRule::kCount: return "count";
  }
  return "auto";
}

inline nlohmann::json params_to_json(const ForestParams& p) {
  nlohmann::json j{{"task", p.task == Task::kClassify ? "classify" : "regress"},
                   {"tree_count", p.tree_count},
                   {"min_samples_leaf", p.min_samples_leaf},
                   {"bootstrap", p.bootstrap},
                   {"seed", p.seed}};
  j["max_depth"] = p.max_depth == kUnlimitedDepth ? nlohmann::json(nullptr) : nlohmann::json(p.max_depth);
  if (p.feature_rule == FeatureRule::kCount)
    j["features_per_split"] = p.features_per_split;
  else
    j["features_per_split"] = to_string(p.feature_rule);
  return j;
}

// Reads the parameter keys present in `j` over `base`.
inline ForestParams params_from_json(const nlohmann::json& j, ForestParams base = {}) {
  try {
    if (j.contains("task")) {
      const auto t = j["task"].get<std::string>();
      if (t == "classify") base.task = Task::kClassify;
      else if (t == "regress") base.task = Task::kRegress;
      else throw Error(Errc::kInvalidConfig, "task must be classify or regress");
    }
    if (j.contains("tree_count")) base.tree_count = j["tree_count"].get<std::size_t>();
    if (j.contains("max_depth"))
      base.max_depth = j["max_depth"].is_null() ? kUnlimitedDepth : j["max_depth"].get<std::size_t>();
    if (j.contains("min_samples_leaf")) base.min_samples_leaf = j["min_samples_leaf"].get<std::size_t>();
    if (j.contains("bootstrap")) base.bootstrap = j["bootstrap"].get<bool>();
    if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("features_per_split")) {
      const auto& v = j["features_per_split"];
      if (v.is_number_integer()) {
        base.feature_rule = FeatureRule::kCount;
        base.features_per_split = v.get<std::size_t>();
      } else {
        const auto s = v.get<std::string>();
        if (s == "auto") base.feature_rule = FeatureRule::kAuto;
        else if (s == "sqrt") base.feature_rule = FeatureRule::kSqrt;
        else if (s == "third") base.feature_rule = FeatureRule::kThird;
        else if (s == "all") base.feature_rule = FeatureRule::kAll;
        else throw Error(Errc::kInvalidConfig, "unknown features_per_split '" + s + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidConfig, std::string("forest params: ") + e.what());
  }
  base.validate();
  return base;
}

inline nlohmann::json forest_to_json(const Forest& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees) {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<std::uint32_t> left, right, samples;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      samples.push_back(n.samples);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"samples", samples},
                     {"value", t.values}});
  }
  nlohmann::json params = params_to_json(f.params);
  params["features_per_split_resolved"] = f.params.resolve_features(f.n_features);
  return {{"format", "critproc.forest"},
          {"version", kForestFormatVersion},
          {"params", std::move(params)},
          {"n_classes", f.n_classes},
          {"n_features", f.n_features},
          {"feature_names", f.feature_names},
          {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "critproc.forest" ||
        j.at("version").get<int>() != kForestFormatVersion)
      throw Error(Errc::kInvalidConfig, "unsupported forest document");
    Forest f;
    f.params = params_from_json(j.at("params"));
    f.n_classes = j.at("n_classes").get<std::size_t>();
    f.n_features = j.at("n_features").get<std::size_t>();
    f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& jt : j.at("trees")) {
      Tree t;
      t.value_width = f.n_classes == 0 ? 1 : f.n_classes;
      const auto feature = jt.at("feature").get<std::vector<int>>();
      const auto threshold = jt.at("threshold").get<std::vector<double>>();
      const auto left = jt.at("left").get<std::vector<std::uint32_t>>();
      const auto right = jt.at("right").get<std::vector<std::uint32_t>>();
      const auto samples = jt.at("samples").get<std::vector<std::uint32_t>>();
      t.values = jt.at("value").get<std::vector<double>>();
      const std::size_t count = feature.size();
      if (threshold.size() != count || left.size() != count || right.size() != count ||
          samples.size() != count || t.values.size() != count * t.value_width)
        throw Error(Errc::kInvalidConfig, "inconsistent tree arrays");
      for (std::size_t i = 0; i < count; ++i) {
        if (feature[i] >= 0 &&
            (static_cast<std::size_t>(feature[i]) >= f.n_features || left[i] >= count || right[i] >= count))
          throw Error(Errc::kInvalidConfig, "tree node out of range");
        t.nodes.push_back({feature[i], threshold[i], left[i], right[i], samples[i]});
      }
      f.trees.push_back(std::move(t));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidConfig, std::string("forest document: ") + e.what());
  }
}

}  // namespace critproc

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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "critproc/error.hpp"
#include "critproc/hcluster.hpp"
#include "critproc/table.hpp"

namespace critproc {

// counts[i][j]: samples with true class i predicted as j.
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;

  std::size_t classes() const noexcept { return counts.size(); }
  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
      for (auto c : row) t += c;
    return t;
  }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::size_t k) {
  if (y_true.size() != y_pred.size())
    throw Error(Errc::kDimensionMismatch, "y_true and y_pred lengths differ");
  ConfusionMatrix cm;
  cm.counts.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_pred[i] < 0 || static_cast<std::size_t>(y_true[i]) >= k ||
        static_cast<std::size_t>(y_pred[i]) >= k)
      throw Error(Errc::kLabelOutOfRange, "label outside [0, " + std::to_string(k) + ")");
    ++cm.counts[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
  }
  return cm;
}

struct Averaging {
  enum class Kind { kMacro, kBinary };
  Kind kind = Kind::kMacro;
  std::size_t positive = 1;

  static Averaging macro() { return {Kind::kMacro, 0}; }
  static Averaging binary(std::size_t positive_class) { return {Kind::kBinary, positive_class}; }
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Per-class scores; a zero denominator yields 0 for that score.
inline ClassScores class_scores(const ConfusionMatrix& cm, std::size_t c) {
  double tp = static_cast<double>(cm.counts[c][c]);
  double predicted = 0.0, actual = 0.0;
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    predicted += static_cast<double>(cm.counts[i][c]);
    actual += static_cast<double>(cm.counts[c][i]);
  }
  ClassScores s;
  s.precision = predicted > 0.0 ? tp / predicted : 0.0;
  s.recall = actual > 0.0 ? tp / actual : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

inline ClassificationMetrics classification_metrics(const ConfusionMatrix& cm,
                                                    Averaging averaging = Averaging::macro()) {
  const auto total = cm.total();
  if (total == 0) throw Error(Errc::kEmptyData, "confusion matrix is empty");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  if (averaging.kind == Averaging::Kind::kBinary) {
    if (averaging.positive >= cm.classes())
      throw Error(Errc::kLabelOutOfRange, "positive class out of range");
    const auto s = class_scores(cm, averaging.positive);
    m.precision = s.precision;
    m.recall = s.recall;
    m.f1 = s.f1;
    return m;
  }
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto s = class_scores(cm, c);
    m.precision += s.precision;
    m.recall += s.recall;
    m.f1 += s.f1;
  }
  const double k = static_cast<double>(cm.classes());
  m.precision /= k;
  m.recall /= k;
  m.f1 /= k;
  return m;
}

struct RegressionMetrics {
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double mape_percent = 0.0;
};

inline RegressionMetrics regression_metrics(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw Error(Errc::kDimensionMismatch, "y and yhat lengths differ");
  if (y.empty()) throw Error(Errc::kEmptyData, "no samples");
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double sst = 0.0, sse = 0.0, sae = 0.0, ape = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    sse += e * e;
    sae += std::abs(e);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  if (sst == 0.0) throw Error(Errc::kZeroVarianceTarget, "R^2 undefined for constant target");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) throw Error(Errc::kZeroTargetValue, "MAPE undefined when a target is 0");
    ape += std::abs((y[i] - yhat[i]) / y[i]);
  }
  return {sse / n, sae / n, 1.0 - sse / sst, 100.0 * ape / n};
}

// Chance-corrected agreement of two partitions of the same items.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(Errc::kDimensionMismatch, "partition sizes differ");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double v) { return v * (v - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, v] : joint) index += pairs(v);
  for (const auto& [key, v] : rows) sum_rows += pairs(v);
  for (const auto& [key, v] : cols) sum_cols += pairs(v);
  const double total = pairs(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Cluster profiling

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // population
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

inline Moments moments(std::span<const double> values) {
  Moments m;
  if (values.empty()) return m;
  const double n = static_cast<double>(values.size());
  for (double v : values) m.mean += v;
  m.mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.sd = std::sqrt(m2);
  if (m2 > 0.0) {
    m.skewness = m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

inline constexpr std::size_t kProfileBins = 20;

struct ClusterStats {
  std::size_t member_count = 0;
  double mu_thick = 0.0;
  double sigma_thick = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

struct NumericInputProfile {
  std::string column;
  std::vector<double> mean_by_cluster;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::vector<std::size_t>> histogram;  // k x kProfileBins over [lo, hi]
};

struct CategoricalInputProfile {
  std::string column;
  std::vector<std::string> categories;
  std::vector<std::vector<std::size_t>> counts;  // k x categories
  std::vector<std::string> predominant;          // per cluster
};

struct ClusterProfile {
  std::vector<ClusterStats> clusters;
  std::vector<NumericInputProfile> numeric_inputs;
  std::vector<CategoricalInputProfile> categorical_inputs;
};

// Output statistics pool every output cell of every member run.
inline ClusterProfile profile_clusters(const RunTable& table, const ClusterLabels& labels,
                                       std::span<const std::string> inputs_of_interest) {
  if (labels.labels.size() != table.rows())
    throw Error(Errc::kDimensionMismatch, "labels length != rows");
  const std::size_t k = labels.k;
  const Matrix outputs = table.output_matrix();
  ClusterProfile profile;
  std::vector<std::vector<double>> cells(k);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto c = static_cast<std::size_t>(labels.labels[r]);
    if (c >= k) throw Error(Errc::kLabelOutOfRange, "cluster label >= k");
    const auto row = outputs.row(r);
    cells[c].insert(cells[c].end(), row.begin(), row.end());
  }
  const auto sizes = labels.sizes();
  for (std::size_t c = 0; c < k; ++c) {
    const auto m = moments(cells[c]);
    profile.clusters.push_back({sizes[c], m.mean, m.sd, m.skewness, m.excess_kurtosis});
  }

  for (const auto& name : inputs_of_interest) {
    const auto& spec = table.schema().at(name);
    if (spec.kind == ColumnKind::kNumeric) {
      NumericInputProfile p;
      p.column = name;
      const auto col = table.numeric(name);
      p.lo = *std::min_element(col.begin(), col.end());
      p.hi = *std::max_element(col.begin(), col.end());
      p.mean_by_cluster.assign(k, 0.0);
      p.histogram.assign(k, std::vector<std::size_t>(kProfileBins, 0));
      const double width = (p.hi - p.lo) / static_cast<double>(kProfileBins);
      for (std::size_t r = 0; r < col.size(); ++r) {
        const auto c = static_cast<std::size_t>(labels.labels[r]);
        p.mean_by_cluster[c] += col[r];
        std::size_t bin = 0;
        if (width > 0.0)
          bin = std::min(kProfileBins - 1, static_cast<std::size_t>((col[r] - p.lo) / width));
        ++p.histogram[c][bin];
      }
      for (std::size_t c = 0; c < k; ++c) p.mean_by_cluster[c] /= static_cast<double>(sizes[c]);
      profile.numeric_inputs.push_back(std::move(p));
    } else if (spec.kind == ColumnKind::kCategorical) {
      CategoricalInputProfile p;
      p.column = name;
      p.categories = table.vocabulary(name);
      p.counts.assign(k, std::vector<std::size_t>(p.categories.size(), 0));
      const auto col = table.categorical(name);
      for (std::size_t r = 0; r < col.size(); ++r) {
        const auto it = std::lower_bound(p.categories.begin(), p.categories.end(), col[r]);
        ++p.counts[static_cast<std::size_t>(labels.labels[r])]
                  [static_cast<std::size_t>(it - p.categories.begin())];
      }
      for (std::size_t c = 0; c < k; ++c) {
        const auto best = std::max_element(p.counts[c].begin(), p.counts[c].end());
        p.predominant.push_back(p.categories[static_cast<std::size_t>(best - p.counts[c].begin())]);
      }
      profile.categorical_inputs.push_back(std::move(p));
    } else {
      throw Error(Errc::kTypeMismatch, "cannot profile vector column '" + name + "'");
    }
  }
  return profile;
}

inline nlohmann::json to_json(const ClassificationMetrics& m) {
  return {{"accuracy", m.accuracy},
          {"f1_macro", m.f1},
          {"precision_macro", m.precision},
          {"recall_macro", m.recall}};
}

inline nlohmann::json to_json(const RegressionMetrics& m) {
  return {{"mse", m.mse}, {"mae", m.mae}, {"r2", m.r2}, {"mape_pct", m.mape_percent}};
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) { return cm.counts; }

inline nlohmann::json to_json(const ClusterProfile& p) {
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t c = 0; c < p.clusters.size(); ++c) {
    const auto& s = p.clusters[c];
    clusters.push_back({{"cluster", c},
                        {"member_count", s.member_count},
                        {"mu_thick", s.mu_thick},
                        {"sigma_thick", s.sigma_thick},
                        {"skewness", s.skewness},
                        {"excess_kurtosis", s.excess_kurtosis}});
  }
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& n : p.numeric_inputs)
    inputs.push_back({{"column", n.column},
                      {"kind", "numeric"},
                      {"mean_by_cluster", n.mean_by_cluster},
                      {"range", {n.lo, n.hi}},
                      {"histogram", n.histogram}});
  for (const auto& c : p.categorical_inputs)
    inputs.push_back({{"column", c.column},
                      {"kind", "categorical"},
                      {"categories", c.categories},
                      {"counts", c.counts},
                      {"predominant", c.predominant}});
  return {{"clusters", std::move(clusters)}, {"inputs", std::move(inputs)}};
}

}  // namespace critproc

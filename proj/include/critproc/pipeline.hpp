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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "critproc/error.hpp"
#include "critproc/features.hpp"
#include "critproc/forest.hpp"
#include "critproc/hcluster.hpp"
#include "critproc/metrics.hpp"
#include "critproc/pca.hpp"
#include "critproc/shapley.hpp"
#include "critproc/svg.hpp"
#include "critproc/synthgen.hpp"
#include "critproc/table.hpp"

#ifndef CRITPROC_VERSION
#define CRITPROC_VERSION "0.1.0"
#endif

namespace critproc {

inline constexpr const char* kToolVersion = CRITPROC_VERSION;

struct DataPaths {
  std::string csv;
  std::string schema;
  std::string truth;  // optional; empty when absent
};

struct ClusterSettings {
  std::optional<std::size_t> k;
  std::optional<double> height;
  std::vector<std::string> profile_inputs;  // empty: every known input present
};

enum class LabelSource { kCluster, kTruth };

struct ClassifySettings {
  std::vector<std::string> inputs{"recipe", "year", kSurfAreaDiff};
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
  LabelSource labels = LabelSource::kCluster;
  std::size_t k = 3;
  bool stratify = true;
  ForestParams forest;
};

struct RegressSettings {
  std::vector<std::string> target_columns = outer_thickness_columns();
  std::vector<std::string> inputs;
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
  ForestParams forest;

  RegressSettings() {
    inputs = inlet_thickness_columns();
    for (const char* c : {"year", "recipe", kSurfAreaDiff, kSurfaceAreaStd, "reactor"}) inputs.push_back(c);
    forest.task = Task::kRegress;
    forest.tree_count = 500;
  }
};

struct ExplainSettings {
  std::string model = "regress";  // or "classify"
  std::size_t output = 0;         // class column for classifiers
  std::size_t background_cap = 100;
  ShapMode mode = ShapMode::kExact;
  std::size_t n_permutations = 1000;
  std::size_t max_instances = 200;
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  std::filesystem::path out = "critproc_out";
  std::uint64_t seed = 42;
  DataPaths data;
  std::optional<GenConfig> synth;
  ClusterSettings cluster;
  ClassifySettings classify;
  RegressSettings regress;
  ExplainSettings explain;

  std::filesystem::path command_dir(const std::string& command) const { return out / command; }
};

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

namespace pipeline_detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  return j[key].get<T>();
}

inline const nlohmann::json& section(const nlohmann::json& root, const char* name) {
  static const nlohmann::json kEmpty = nlohmann::json::object();
  if (!root.contains(name)) return kEmpty;
  if (!root[name].is_object()) throw Error(Errc::kInvalidConfig, std::string("'") + name + "' must be an object");
  return root[name];
}

inline std::string mode_name(ShapMode m) { return m == ShapMode::kExact ? "exact" : "sampled"; }

}  // namespace pipeline_detail

// Reads a pipeline config. Section seeds default to the top-level seed; an
// overriding --seed replaces every seed.
inline PipelineConfig parse_config(const nlohmann::json& root, const ConfigOverrides& overrides = {}) {
  using pipeline_detail::get_or;
  using pipeline_detail::section;
  if (!root.is_object()) throw Error(Errc::kInvalidConfig, "config must be a JSON object");
  PipelineConfig cfg;
  try {
    cfg.out = get_or<std::string>(root, "out", cfg.out.string());
    if (overrides.out) cfg.out = *overrides.out;
    cfg.seed = get_or<std::uint64_t>(root, "seed", cfg.seed);
    if (overrides.seed) cfg.seed = *overrides.seed;
    auto seed_of = [&](const nlohmann::json& s) {
      return overrides.seed ? *overrides.seed : get_or<std::uint64_t>(s, "seed", cfg.seed);
    };

    const auto& data = section(root, "data");
    const auto synth_dir = (cfg.out / "synth").string();
    cfg.data.csv = get_or<std::string>(data, "csv", (std::filesystem::path(synth_dir) / "runs.csv").string());
    cfg.data.schema = get_or<std::string>(data, "schema", (std::filesystem::path(synth_dir) / "schema.json").string());
    cfg.data.truth = get_or<std::string>(data, "truth", data.contains("csv") ? std::string()
                                                        : (std::filesystem::path(synth_dir) / "truth.csv").string());

    if (root.contains("synth")) {
      auto gen = section(root, "synth");
      auto copy = gen;
      copy["seed"] = seed_of(gen);
      cfg.synth = gen_config_from_json(copy);
    }

    const auto& cl = section(root, "cluster");
    if (cl.contains("k") && cl.contains("height"))
      throw Error(Errc::kInvalidConfig, "cluster: give either k or height, not both");
    if (cl.contains("height")) cfg.cluster.height = cl["height"].get<double>();
    else cfg.cluster.k = get_or<std::size_t>(cl, "k", 3);
    cfg.cluster.profile_inputs = get_or<std::vector<std::string>>(cl, "profile_inputs", {});

    const auto& c = section(root, "classify");
    cfg.classify.inputs = get_or(c, "inputs", cfg.classify.inputs);
    cfg.classify.test_ratio = get_or(c, "test_ratio", cfg.classify.test_ratio);
    cfg.classify.seed = seed_of(c);
    const auto labels = get_or<std::string>(c, "labels", "cluster");
    if (labels == "cluster") cfg.classify.labels = LabelSource::kCluster;
    else if (labels == "truth") cfg.classify.labels = LabelSource::kTruth;
    else throw Error(Errc::kInvalidConfig, "classify.labels must be 'cluster' or 'truth'");
    cfg.classify.k = get_or(c, "k", cfg.classify.k);
    cfg.classify.stratify = get_or(c, "stratify", cfg.classify.stratify);
    cfg.classify.forest =
        params_from_json(c.contains("forest") ? c["forest"] : nlohmann::json::object(), cfg.classify.forest);
    cfg.classify.forest.task = Task::kClassify;
    if (overrides.seed || !(c.contains("forest") && c["forest"].contains("seed")))
      cfg.classify.forest.seed = cfg.classify.seed;

    const auto& r = section(root, "regress");
    cfg.regress.target_columns = get_or(r, "target_columns", cfg.regress.target_columns);
    cfg.regress.inputs = get_or(r, "inputs", cfg.regress.inputs);
    cfg.regress.test_ratio = get_or(r, "test_ratio", cfg.regress.test_ratio);
    cfg.regress.seed = seed_of(r);
    cfg.regress.forest =
        params_from_json(r.contains("forest") ? r["forest"] : nlohmann::json::object(), cfg.regress.forest);
    cfg.regress.forest.task = Task::kRegress;
    if (overrides.seed || !(r.contains("forest") && r["forest"].contains("seed")))
      cfg.regress.forest.seed = cfg.regress.seed;

    const auto& e = section(root, "explain");
    cfg.explain.model = get_or<std::string>(e, "model", cfg.explain.model);
    if (cfg.explain.model != "regress" && cfg.explain.model != "classify")
      throw Error(Errc::kInvalidConfig, "explain.model must be 'regress' or 'classify'");
    cfg.explain.output = get_or(e, "output", cfg.explain.output);
    cfg.explain.background_cap = get_or(e, "background_cap", cfg.explain.background_cap);
    const auto mode = get_or<std::string>(e, "mode", "exact");
    if (mode == "exact") cfg.explain.mode = ShapMode::kExact;
    else if (mode == "sampled") cfg.explain.mode = ShapMode::kSampled;
    else throw Error(Errc::kInvalidConfig, "explain.mode must be 'exact' or 'sampled'");
    cfg.explain.n_permutations = get_or(e, "n_permutations", cfg.explain.n_permutations);
    cfg.explain.max_instances = get_or(e, "max_instances", cfg.explain.max_instances);
    cfg.explain.seed = seed_of(e);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::kInvalidConfig, std::string("config: ") + ex.what());
  }

  if (cfg.cluster.k && *cfg.cluster.k < 1) throw Error(Errc::kInvalidConfig, "cluster.k must be >= 1");
  if (cfg.classify.inputs.empty()) throw Error(Errc::kInvalidConfig, "classify.inputs is empty");
  if (cfg.classify.k < 2) throw Error(Errc::kInvalidConfig, "classify.k must be >= 2");
  if (cfg.regress.inputs.empty()) throw Error(Errc::kInvalidConfig, "regress.inputs is empty");
  if (cfg.regress.target_columns.empty()) throw Error(Errc::kInvalidConfig, "regress.target_columns is empty");
  for (const auto& t : cfg.regress.target_columns)
    if (std::find(cfg.regress.inputs.begin(), cfg.regress.inputs.end(), t) != cfg.regress.inputs.end())
      throw Error(Errc::kInvalidConfig, "target column '" + t + "' is also an input");
  for (double ratio : {cfg.classify.test_ratio, cfg.regress.test_ratio})
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(Errc::kInvalidConfig, "test_ratio must lie in (0, 1)");
  if (cfg.explain.background_cap < 1 || cfg.explain.max_instances < 1 || cfg.explain.n_permutations < 1)
    throw Error(Errc::kInvalidConfig, "explain caps and n_permutations must be >= 1");
  return cfg;
}

inline PipelineConfig load_config(const std::string& path, const ConfigOverrides& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kInvalidConfig, "cannot read config '" + path + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(root, overrides);
}

// Fully resolved config, embedded in every report.
inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  using pipeline_detail::mode_name;
  nlohmann::json j;
  j["out"] = cfg.out.string();
  j["seed"] = cfg.seed;
  j["data"] = {{"csv", cfg.data.csv}, {"schema", cfg.data.schema}, {"truth", cfg.data.truth}};
  if (cfg.synth) j["synth"] = gen_config_to_json(*cfg.synth);
  nlohmann::json cl = {{"profile_inputs", cfg.cluster.profile_inputs}};
  if (cfg.cluster.height) cl["height"] = *cfg.cluster.height;
  else cl["k"] = cfg.cluster.k.value_or(3);
  j["cluster"] = cl;
  j["classify"] = {{"inputs", cfg.classify.inputs},
                   {"test_ratio", cfg.classify.test_ratio},
                   {"seed", cfg.classify.seed},
                   {"labels", cfg.classify.labels == LabelSource::kCluster ? "cluster" : "truth"},
                   {"k", cfg.classify.k},
                   {"stratify", cfg.classify.stratify},
                   {"forest", params_to_json(cfg.classify.forest)}};
  j["regress"] = {{"target_columns", cfg.regress.target_columns},
                  {"inputs", cfg.regress.inputs},
                  {"test_ratio", cfg.regress.test_ratio},
                  {"seed", cfg.regress.seed},
                  {"forest", params_to_json(cfg.regress.forest)}};
  j["explain"] = {{"model", cfg.explain.model},
                  {"output", cfg.explain.output},
                  {"background_cap", cfg.explain.background_cap},
                  {"mode", mode_name(cfg.explain.mode)},
                  {"n_permutations", cfg.explain.n_permutations},
                  {"max_instances", cfg.explain.max_instances},
                  {"seed", cfg.explain.seed}};
  return j;
}

namespace pipeline_detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::kIoError, "cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error(Errc::kIoError, "write failed for '" + path.string() + "'");
}

inline nlohmann::json read_json(const std::filesystem::path& path, const std::string& hint) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read '" + path.string() + "'" + hint);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kIoError, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline nlohmann::json report_header(const PipelineConfig& cfg, const std::string& command) {
  return {{"tool", "critproc"}, {"version", kToolVersion}, {"command", command}, {"config", config_to_json(cfg)}};
}

inline void write_report(const std::filesystem::path& dir, const nlohmann::json& report) {
  write_file(dir / "report.json", report.dump(2) + "\n");
}

struct Dataset {
  RunTable table;
  std::optional<std::vector<int>> truth;
};

inline Dataset load_dataset(const PipelineConfig& cfg) {
  std::ifstream sf(cfg.data.schema);
  if (!sf) throw Error(Errc::kIoError, "cannot read schema '" + cfg.data.schema + "'");
  nlohmann::json sj;
  try {
    sj = nlohmann::json::parse(sf);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidSchema, std::string("schema is not valid JSON: ") + e.what());
  }
  const auto schema = schema_from_json(sj);
  auto table = load_csv(cfg.data.csv, schema);
  const bool has_disks = schema.find("disk_areas") && schema.at("disk_areas").kind == ColumnKind::kNumericVector &&
                         schema.find("nominal_area");
  Dataset ds{has_disks ? augment(table) : std::move(table), std::nullopt};
  if (!cfg.data.truth.empty() && std::filesystem::exists(cfg.data.truth)) {
    ds.truth = read_truth_csv(cfg.data.truth);
    if (ds.truth->size() != ds.table.rows())
      throw Error(Errc::kDimensionMismatch, "truth.csv has " + std::to_string(ds.truth->size()) +
                                                " labels for " + std::to_string(ds.table.rows()) + " runs");
  }
  return ds;
}

inline void require_columns(const RunTable& table, std::span<const std::string> names, const std::string& what) {
  for (const auto& n : names)
    if (!table.schema().find(n))
      throw Error(Errc::kInvalidConfig, what + " column '" + n + "' is not in the data");
}

inline std::vector<double> row_mean(const RunTable& table, std::span<const std::string> columns) {
  const Matrix m = table.numeric_matrix(columns);
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double v : m.row(r)) y[r] += v;
    y[r] /= static_cast<double>(m.cols());
  }
  return y;
}

template <typename T>
std::vector<T> pick(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

inline std::vector<std::string> class_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) names.push_back("cluster " + std::to_string(c));
  return names;
}

}  // namespace pipeline_detail

// ---------------------------------------------------------------------------
// Commands. Each writes its artifacts under <out>/<command>/ and returns the
// report it wrote.

inline nlohmann::json run_synth(const PipelineConfig& cfg) {
  if (!cfg.synth) throw Error(Errc::kInvalidConfig, "config has no 'synth' section");
  const auto data = generate(*cfg.synth);
  const auto dir = cfg.command_dir("synth");
  export_dataset(data.table, data.true_labels, dir);
  std::vector<std::size_t> counts(cfg.synth->clusters.size(), 0);
  for (int l : data.true_labels) ++counts[static_cast<std::size_t>(l)];
  auto report = pipeline_detail::report_header(cfg, "synth");
  report["n_runs"] = data.table.rows();
  report["cluster_counts"] = counts;
  report["files"] = {"runs.csv", "schema.json", "truth.csv"};
  pipeline_detail::write_report(dir, report);
  return report;
}

inline nlohmann::json run_cluster(const PipelineConfig& cfg) {
  using namespace pipeline_detail;
  const auto ds = load_dataset(cfg);
  const Matrix x = ds.table.output_matrix();
  if (x.cols() == 0) throw Error(Errc::kInvalidSchema, "schema declares no output columns");
  const auto d = ward_linkage(x);
  const auto labels = cfg.cluster.height ? cut_height(d, *cfg.cluster.height, x)
                                         : cut_k(d, cfg.cluster.k.value_or(3), x);

  std::vector<std::string> inputs = cfg.cluster.profile_inputs;
  if (inputs.empty()) {
    for (const auto& c : ds.table.schema().columns())
      if (c.role == Role::kInput && c.kind != ColumnKind::kNumericVector) inputs.push_back(c.name);
  }
  require_columns(ds.table, inputs, "profile input");
  const auto profile = profile_clusters(ds.table, labels, inputs);

  const auto dir = cfg.command_dir("cluster");
  auto report = report_header(cfg, "cluster");
  report["n_runs"] = ds.table.rows();
  report["k"] = labels.k;
  report["dendrogram"] = dendrogram_to_json(d);
  report["labels"] = labels.labels;
  report["profile"] = to_json(profile);
  if (ds.truth) report["truth_ari"] = adjusted_rand_index(labels.labels, *ds.truth);
  write_file(dir / "dendrogram.svg", render_dendrogram(d, labels.labels, labels.k));

  const std::size_t q = std::min<std::size_t>({3, x.rows() > 0 ? x.rows() - 1 : 0, x.cols()});
  if (q >= 2) {
    const auto model = pca_fit(x, q);
    const auto scores = pca_transform(model, x);
    const auto full = pca_fit(x, std::min(x.rows() - 1, x.cols()));
    double total = 0.0;
    for (double v : full.explained_variance) total += v;
    std::vector<double> ratio;
    for (double v : model.explained_variance) ratio.push_back(total > 0.0 ? v / total : 0.0);
    report["pca"] = {{"explained_variance", model.explained_variance},
                     {"explained_variance_ratio", ratio},
                     {"components", nlohmann::json(std::vector<std::vector<double>>())}};
    for (std::size_t k = 0; k < q; ++k) {
      const auto row = model.components.row(k);
      report["pca"]["components"].push_back(std::vector<double>(row.begin(), row.end()));
    }
    write_file(dir / "pca_panels.svg", render_pca_panels(scores, labels.labels, full.explained_variance));
  } else {
    report["pca"] = nullptr;
  }
  write_report(dir, report);
  return report;
}

inline nlohmann::json run_classify(const PipelineConfig& cfg) {
  using namespace pipeline_detail;
  const auto& s = cfg.classify;
  const auto ds = load_dataset(cfg);
  require_columns(ds.table, s.inputs, "classify input");

  std::vector<int> labels;
  std::size_t k = 0;
  if (s.labels == LabelSource::kTruth) {
    if (!ds.truth) throw Error(Errc::kIoError, "classify.labels = truth but no truth file at '" + cfg.data.truth + "'");
    labels = *ds.truth;
    k = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  } else {
    const auto cluster_report = read_json(cfg.command_dir("cluster") / "report.json", " (run `critproc cluster` first)");
    const auto d = dendrogram_from_json(cluster_report.at("dendrogram"));
    if (d.n_leaves != ds.table.rows())
      throw Error(Errc::kDimensionMismatch, "cluster report does not match the data");
    const auto cut = cut_k(d, s.k, ds.table.output_matrix());
    labels = cut.labels;
    k = cut.k;
  }

  const auto idx = s.stratify ? split_indices(ds.table.rows(), s.test_ratio, s.seed, std::span<const int>(labels))
                              : split_indices(ds.table.rows(), s.test_ratio, s.seed);
  if (idx.test.empty()) throw Error(Errc::kEmptyData, "test partition would be empty");
  const auto train = ds.table.select_rows(idx.train), test = ds.table.select_rows(idx.test);
  const auto enc = Encoder::fit(train, s.inputs);
  const auto xtr = enc.transform(train), xte = enc.transform(test);
  const auto ytr_i = pick<int>(labels, idx.train), yte_i = pick<int>(labels, idx.test);
  std::vector<double> ytr(ytr_i.begin(), ytr_i.end());
  const auto forest = fit_forest(xtr.values, ytr, s.forest, enc.feature_names(), k);

  auto evaluate = [&](const Matrix& xm, const std::vector<int>& truth) {
    const auto pred = predict(forest, xm);
    std::vector<int> p(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) p[i] = static_cast<int>(pred[i]);
    return confusion(truth, p, k);
  };
  const auto cm_train = evaluate(xtr.values, ytr_i);
  const auto cm_test = evaluate(xte.values, yte_i);
  auto block = [&](const ConfusionMatrix& cm) {
    nlohmann::json j = to_json(classification_metrics(cm));
    j["confusion"] = to_json(cm);
    if (k == 2) {
      const auto b = classification_metrics(cm, Averaging::binary(1));
      j["binary_positive_1"] = {{"precision", b.precision}, {"recall", b.recall}, {"f1", b.f1}};
    }
    return j;
  };

  const auto dir = cfg.command_dir("classify");
  auto report = report_header(cfg, "classify");
  report["k"] = k;
  report["label_source"] = s.labels == LabelSource::kCluster ? "cluster" : "truth";
  report["n_train"] = idx.train.size();
  report["n_test"] = idx.test.size();
  report["features"] = enc.feature_names();
  report["features_per_split_resolved"] = s.forest.resolve_features(enc.width());
  report["train"] = block(cm_train);
  report["test"] = block(cm_test);
  report["unknown_categories"] = xte.warnings;
  const auto names = class_names(k);
  write_file(dir / "confusion_train.svg", render_confusion(cm_train, names, "Confusion matrix (train)"));
  write_file(dir / "confusion_test.svg", render_confusion(cm_test, names, "Confusion matrix (test)"));
  write_file(dir / "model.json",
             nlohmann::json{{"forest", forest_to_json(forest)},
                            {"encoder", encoder_to_json(enc)},
                            {"train_rows", idx.train},
                            {"test_rows", idx.test}}
                     .dump() + "\n");
  write_report(dir, report);
  return report;
}

inline nlohmann::json run_regress(const PipelineConfig& cfg) {
  using namespace pipeline_detail;
  const auto& s = cfg.regress;
  const auto ds = load_dataset(cfg);
  require_columns(ds.table, s.inputs, "regress input");
  require_columns(ds.table, s.target_columns, "regress target");
  const auto y = row_mean(ds.table, s.target_columns);

  const auto idx = split_indices(ds.table.rows(), s.test_ratio, s.seed);
  if (idx.test.empty()) throw Error(Errc::kEmptyData, "test partition would be empty");
  const auto train = ds.table.select_rows(idx.train), test = ds.table.select_rows(idx.test);
  const auto enc = Encoder::fit(train, s.inputs);
  const auto xtr = enc.transform(train), xte = enc.transform(test);
  const auto ytr = pick<double>(y, idx.train), yte = pick<double>(y, idx.test);
  const auto forest = fit_forest(xtr.values, ytr, s.forest, enc.feature_names());
  const auto ptr = predict(forest, xtr.values), pte = predict(forest, xte.values);

  const auto dir = cfg.command_dir("regress");
  auto report = report_header(cfg, "regress");
  report["target"] = {{"definition", "row mean"}, {"columns", s.target_columns}};
  report["n_train"] = idx.train.size();
  report["n_test"] = idx.test.size();
  report["features"] = enc.feature_names();
  report["features_per_split_resolved"] = s.forest.resolve_features(enc.width());
  report["train"] = to_json(regression_metrics(ytr, ptr));
  report["test"] = to_json(regression_metrics(yte, pte));
  report["unknown_categories"] = xte.warnings;
  write_file(dir / "pred_vs_actual.svg",
             render_pred_vs_actual(ytr, ptr, yte, pte, "Average thickness: predicted vs actual"));
  write_file(dir / "model.json",
             nlohmann::json{{"forest", forest_to_json(forest)},
                            {"encoder", encoder_to_json(enc)},
                            {"target_columns", s.target_columns},
                            {"train_rows", idx.train},
                            {"test_rows", idx.test}}
                     .dump() + "\n");
  write_report(dir, report);
  return report;
}

// Attributions of the saved regression (or classification) forest. The
// background is a seeded subsample of the training rows; the explained
// instances are the test rows. Exact mode uses the closed-form forest path,
// which equals coalition enumeration on the same model.
inline nlohmann::json run_explain(const PipelineConfig& cfg) {
  using namespace pipeline_detail;
  const auto& s = cfg.explain;
  const auto ds = load_dataset(cfg);
  const auto model = read_json(cfg.command_dir(s.model) / "model.json",
                               " (run `critproc " + s.model + "` first)");
  Forest forest;
  Encoder enc;
  std::vector<std::size_t> train_rows, test_rows;
  try {
    forest = forest_from_json(model.at("forest"));
    enc = encoder_from_json(model.at("encoder"));
    train_rows = model.at("train_rows").get<std::vector<std::size_t>>();
    test_rows = model.at("test_rows").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kIoError, std::string("model artifact: ") + e.what());
  }
  for (auto r : train_rows)
    if (r >= ds.table.rows()) throw Error(Errc::kDimensionMismatch, "model artifact does not match the data");
  for (auto r : test_rows)
    if (r >= ds.table.rows()) throw Error(Errc::kDimensionMismatch, "model artifact does not match the data");

  const auto x = enc.transform(ds.table).values;
  if (x.cols() != forest.n_features) throw Error(Errc::kDimensionMismatch, "encoder and forest disagree");

  Rng rng(derive_seed(s.seed, 0xB6));
  std::vector<std::size_t> bg_rows = train_rows;
  rng.shuffle(std::span(bg_rows));
  if (bg_rows.size() > s.background_cap) bg_rows.resize(s.background_cap);
  std::sort(bg_rows.begin(), bg_rows.end());
  std::vector<std::size_t> inst_rows = test_rows;
  if (inst_rows.size() > s.max_instances) inst_rows.resize(s.max_instances);

  ShapConfig sc;
  sc.background = x.select_rows(bg_rows);
  sc.mode = s.mode;
  sc.n_permutations = s.n_permutations;
  sc.seed = s.seed;
  sc.groups = groups_from_blocks(enc.blocks());

  ShapReport rep;
  for (const auto& g : sc.groups) rep.feature_names.push_back(g.name);
  const std::size_t output = s.model == "classify" ? s.output : 0;
  double max_gap = 0.0;
  std::vector<std::vector<double>> std_errors;
  for (auto r : inst_rows) {
    const auto inst = x.row(r);
    ShapValues v;
    if (s.mode == ShapMode::kExact) {
      v = shap_forest(forest, output, inst, sc);
    } else {
      v = shap_sampled([&](std::span<const double> z) { return forest_output(forest, z)[output]; }, inst, sc);
      std_errors.push_back(v.std_error);
    }
    double total = v.base_value;
    for (double p : v.phi) total += p;
    max_gap = std::max(max_gap, std::abs(total - v.prediction));
    rep.base_value = v.base_value;
    rep.instance_ids.push_back(std::to_string(r));
    rep.phi.push_back(std::move(v.phi));
  }
  if (rep.phi.empty()) throw Error(Errc::kEmptyData, "no instances to explain");
  rep.global = global_ranking(rep.feature_names, rep.phi);

  const auto dir = cfg.command_dir("explain");
  auto report = report_header(cfg, "explain");
  report["model"] = s.model;
  report["output"] = output;
  report["background_rows"] = bg_rows.size();
  report["instances"] = inst_rows.size();
  report["value_function"] = "interventional";
  report["max_efficiency_gap"] = max_gap;
  report["shap"] = to_json(rep);
  if (!std_errors.empty()) report["std_error"] = std_errors;
  write_file(dir / "shap_bar.svg", render_shap_bar(rep.global, "Mean |SHAP value| per input"));
  write_report(dir, report);
  return report;
}

inline nlohmann::json run_command(const std::string& command, const PipelineConfig& cfg) {
  if (command == "synth") return run_synth(cfg);
  if (command == "cluster") return run_cluster(cfg);
  if (command == "classify") return run_classify(cfg);
  if (command == "regress") return run_regress(cfg);
  if (command == "explain") return run_explain(cfg);
  throw Error(Errc::kInvalidConfig, "unknown command '" + command + "'");
}

}  // namespace critproc

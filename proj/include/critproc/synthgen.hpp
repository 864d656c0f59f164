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
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "critproc/error.hpp"
#include "critproc/rng.hpp"
#include "critproc/table.hpp"

namespace critproc {

// Measurement layout: three radial positions on each of five disks. R0 is
// the position closest to the gas inlet.
inline constexpr std::size_t kMeasuredDisks = 5;
inline constexpr const char* kRadialPositions[] = {"R0", "R12", "R"};

inline std::string thickness_column(std::size_t disk, std::size_t position) {
  return "thk_d" + std::to_string(disk + 1) + "_" + kRadialPositions[position];
}

inline std::vector<std::string> thickness_columns() {
  std::vector<std::string> names;
  for (std::size_t d = 0; d < kMeasuredDisks; ++d)
    for (std::size_t p = 0; p < 3; ++p) names.push_back(thickness_column(d, p));
  return names;
}

// The five inlet-side measurements.
inline std::vector<std::string> inlet_thickness_columns() {
  std::vector<std::string> names;
  for (std::size_t d = 0; d < kMeasuredDisks; ++d) names.push_back(thickness_column(d, 0));
  return names;
}

// The ten measurements away from the inlet.
inline std::vector<std::string> outer_thickness_columns() {
  std::vector<std::string> names;
  for (std::size_t d = 0; d < kMeasuredDisks; ++d)
    for (std::size_t p = 1; p < 3; ++p) names.push_back(thickness_column(d, p));
  return names;
}

// Zero-mean, unit-RMS radial shape: thicker at the inlet, thinner outside.
inline double radial_profile(std::size_t position) {
  static const double kScale = std::sqrt(1.5);
  return position == 0 ? kScale : position == 1 ? 0.0 : -kScale;
}

struct ClusterSpec {
  double thickness_mean = 0.0;     // um
  double thickness_sd = 0.0;       // um, pooled over all cells
  double profile_amplitude = 0.0;  // um, part of thickness_sd carried by the radial shape
  std::vector<std::string> recipe_pool;
  std::vector<int> year_pool;
  double diff_mean = 0.0;  // cm^2
  double diff_sd = 0.0;    // cm^2
};

struct GenConfig {
  std::size_t n_runs = 603;
  std::vector<double> cluster_weights{0.40, 0.35, 0.25};
  std::vector<ClusterSpec> clusters{
      {16.35, 1.354, 0.0, {"V21"}, {2021, 2022, 2023}, 4892.0, 800.0},
      {15.53, 1.386, 1.0, {"V20", "V19", "V18", "V17"}, {2017, 2018, 2019, 2020, 2021, 2022}, 4628.0, 800.0},
      {14.32, 1.588, 1.0, {"V20", "V19", "V18", "V17"}, {2017, 2018, 2019, 2020, 2021, 2022}, 5526.0, 800.0},
  };
  std::size_t disks_min = 40;
  std::size_t disks_max = 50;
  double disk_area_mean = 2500.0;  // cm^2
  double disk_area_sd = 600.0;
  double area_increment = 10000.0;  // nominal areas are multiples of 1 m^2
  std::vector<std::string> reactors{"R1", "R2", "R3", "R4"};
  double equicorrelation = 0.0;  // within-run correlation of thickness noise
  std::uint64_t seed = 42;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(Errc::kInvalidConfig, what); };
    if (n_runs < 1) fail("n_runs must be >= 1");
    if (cluster_weights.size() != clusters.size() || clusters.empty())
      fail("cluster_weights and clusters must have the same non-zero length");
    double total = 0.0;
    for (double w : cluster_weights) {
      if (!(w >= 0.0)) fail("cluster weights must be non-negative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("cluster weights must sum to 1");
    for (const auto& c : clusters) {
      if (!(c.thickness_sd >= 0.0) || !(c.diff_sd >= 0.0) || !(c.profile_amplitude >= 0.0))
        fail("standard deviations must be non-negative");
      if (c.profile_amplitude > c.thickness_sd) fail("profile_amplitude exceeds thickness_sd");
      if (c.recipe_pool.empty() || c.year_pool.empty()) fail("recipe and year pools must be non-empty");
    }
    if (disks_min < 1 || disks_max < disks_min) fail("need 1 <= disks_min <= disks_max");
    if (!(disk_area_mean > 0.0) || !(disk_area_sd >= 0.0)) fail("invalid disk area distribution");
    if (!(area_increment > 0.0)) fail("area_increment must be positive");
    if (reactors.empty()) fail("reactor pool must be non-empty");
    if (!(equicorrelation >= 0.0 && equicorrelation < 1.0)) fail("equicorrelation must lie in [0, 1)");
  }
};

inline Schema synthetic_schema(const GenConfig& cfg) {
  std::vector<ColumnSpec> cols{
      {"run_id", ColumnKind::kNumeric, Role::kMeta},
      {"year", ColumnKind::kNumeric, Role::kInput},
      {"recipe", ColumnKind::kCategorical, Role::kInput},
      {"reactor", ColumnKind::kCategorical, Role::kInput},
      {"n_disks", ColumnKind::kNumeric, Role::kMeta},
      {"disk_areas", ColumnKind::kNumericVector, Role::kInput, cfg.disks_max},
      {"nominal_area", ColumnKind::kNumeric, Role::kInput},
  };
  for (const auto& name : thickness_columns()) cols.push_back({name, ColumnKind::kNumeric, Role::kOutput});
  return Schema(std::move(cols));
}

struct SyntheticData {
  RunTable table;
  std::vector<int> true_labels;  // generating cluster per run
};

namespace synth_detail {

inline double truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  if (sd == 0.0) return std::clamp(mean, lo, hi);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double v = rng.normal(mean, sd);
    if (v >= lo && v <= hi) return v;
  }
  return std::clamp(mean, lo, hi);
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
  return pool[rng.below(pool.size())];
}

}  // namespace synth_detail

// Draws runs cluster by cluster from one sequential stream. Per run:
// cluster, 15 thicknesses mu + a*profile + noise (noise sd chosen so the
// pooled sd matches thickness_sd), recipe, year, reactor, disk areas, then
// nominal = actual total rounded up to the area increment, after which the
// disks are rescaled so |nominal - actual| equals a draw from the cluster's
// diff distribution.
inline SyntheticData generate(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Schema schema = synthetic_schema(cfg);
  const std::size_t n = cfg.n_runs;
  const std::size_t n_out = kMeasuredDisks * 3;

  ColumnData run_id, year, recipe, reactor, n_disks, disks, nominal;
  std::vector<ColumnData> thick(n_out);
  std::vector<int> labels(n);
  std::vector<double> areas(cfg.disks_max);

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c = rng.categorical(cfg.cluster_weights);
    const auto& spec = cfg.clusters[c];
    labels[r] = static_cast<int>(c);

    const double noise_sd =
        std::sqrt(std::max(0.0, spec.thickness_sd * spec.thickness_sd -
                                    spec.profile_amplitude * spec.profile_amplitude));
    const double shared = rng.normal();
    const double rho = cfg.equicorrelation;
    for (std::size_t j = 0; j < n_out; ++j) {
      const double centre = spec.thickness_mean + spec.profile_amplitude * radial_profile(j % 3);
      double v = -1.0;
      for (int attempt = 0; attempt < 1000 && v < 0.0; ++attempt) {
        const double e = std::sqrt(rho) * shared + std::sqrt(1.0 - rho) * rng.normal();
        v = centre + noise_sd * e;
      }
      thick[j].numbers.push_back(std::max(v, 0.0));
    }

    recipe.labels.push_back(synth_detail::pick(rng, spec.recipe_pool));
    year.numbers.push_back(synth_detail::pick(rng, spec.year_pool));
    reactor.labels.push_back(synth_detail::pick(rng, cfg.reactors));

    const std::size_t used = cfg.disks_min + rng.below(cfg.disks_max - cfg.disks_min + 1);
    double raw_total = 0.0;
    for (std::size_t d = 0; d < cfg.disks_max; ++d) {
      areas[d] = d < used ? synth_detail::truncated_normal(rng, cfg.disk_area_mean, cfg.disk_area_sd,
                                                           0.0, HUGE_VAL)
                          : 0.0;
      raw_total += areas[d];
    }
    const double nominal_area = std::ceil(raw_total / cfg.area_increment) * cfg.area_increment;
    const double diff = synth_detail::truncated_normal(rng, spec.diff_mean, spec.diff_sd, 0.0,
                                                       std::min(cfg.area_increment, nominal_area));
    const double scale = raw_total > 0.0 ? (nominal_area - diff) / raw_total : 0.0;
    for (std::size_t d = 0; d < cfg.disks_max; ++d) disks.numbers.push_back(areas[d] * scale);

    run_id.numbers.push_back(static_cast<double>(r + 1));
    n_disks.numbers.push_back(static_cast<double>(used));
    nominal.numbers.push_back(nominal_area);
  }

  std::vector<ColumnData> cols{std::move(run_id), std::move(year), std::move(recipe), std::move(reactor),
                               std::move(n_disks), std::move(disks), std::move(nominal)};
  for (auto& t : thick) cols.push_back(std::move(t));
  return {RunTable(schema, std::move(cols)), std::move(labels)};
}

inline void write_truth_csv(std::ostream& out, std::span<const int> labels) {
  out << "run_index,cluster\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

inline std::vector<int> read_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (csv_detail::trim(line).empty()) continue;
    const auto fields = csv_detail::split_record(line);
    const auto v = fields.size() == 2 ? csv_detail::parse_number(fields[1]) : std::nullopt;
    if (!v || *v < 0 || *v != std::floor(*v))
      throw CellError(Errc::kTypeMismatch, labels.size() + 1, "cluster");
    labels.push_back(static_cast<int>(*v));
  }
  return labels;
}

// Writes runs.csv, schema.json and truth.csv into `dir`.
inline void export_dataset(const RunTable& table, std::span<const int> labels,
                           const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create '" + dir.string() + "'");
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(Errc::kIoError, "cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("runs.csv");
    write_csv(f, table);
  }
  {
    auto f = open("schema.json");
    f << schema_to_json(table.schema()).dump(2) << '\n';
  }
  {
    auto f = open("truth.csv");
    write_truth_csv(f, labels);
  }
}

inline nlohmann::json gen_config_to_json(const GenConfig& cfg) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : cfg.clusters)
    clusters.push_back({{"thickness_mean", c.thickness_mean},
                        {"thickness_sd", c.thickness_sd},
                        {"profile_amplitude", c.profile_amplitude},
                        {"recipe_pool", c.recipe_pool},
                        {"year_pool", c.year_pool},
                        {"diff_mean", c.diff_mean},
                        {"diff_sd", c.diff_sd}});
  return {{"n_runs", cfg.n_runs},
          {"cluster_weights", cfg.cluster_weights},
          {"clusters", std::move(clusters)},
          {"disks_min", cfg.disks_min},
          {"disks_max", cfg.disks_max},
          {"disk_area_mean", cfg.disk_area_mean},
          {"disk_area_sd", cfg.disk_area_sd},
          {"area_increment", cfg.area_increment},
          {"reactors", cfg.reactors},
          {"equicorrelation", cfg.equicorrelation},
          {"seed", cfg.seed}};
}

// Keys present in `j` override the defaults.
inline GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig cfg;
  try {
    if (!j.is_object()) throw Error(Errc::kInvalidConfig, "synth section must be an object");
    if (j.contains("n_runs")) cfg.n_runs = j["n_runs"].get<std::size_t>();
    if (j.contains("cluster_weights")) cfg.cluster_weights = j["cluster_weights"].get<std::vector<double>>();
    if (j.contains("clusters")) {
      cfg.clusters.clear();
      for (const auto& jc : j["clusters"]) {
        ClusterSpec c;
        c.thickness_mean = jc.at("thickness_mean").get<double>();
        c.thickness_sd = jc.at("thickness_sd").get<double>();
        c.profile_amplitude = jc.value("profile_amplitude", 0.0);
        c.recipe_pool = jc.at("recipe_pool").get<std::vector<std::string>>();
        c.year_pool = jc.at("year_pool").get<std::vector<int>>();
        c.diff_mean = jc.at("diff_mean").get<double>();
        c.diff_sd = jc.at("diff_sd").get<double>();
        cfg.clusters.push_back(std::move(c));
      }
    }
    if (j.contains("disks_min")) cfg.disks_min = j["disks_min"].get<std::size_t>();
    if (j.contains("disks_max")) cfg.disks_max = j["disks_max"].get<std::size_t>();
    if (j.contains("disk_area_mean")) cfg.disk_area_mean = j["disk_area_mean"].get<double>();
    if (j.contains("disk_area_sd")) cfg.disk_area_sd = j["disk_area_sd"].get<double>();
    if (j.contains("area_increment")) cfg.area_increment = j["area_increment"].get<double>();
    if (j.contains("reactors")) cfg.reactors = j["reactors"].get<std::vector<std::string>>();
    if (j.contains("equicorrelation")) cfg.equicorrelation = j["equicorrelation"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidConfig, std::string("synth config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace critproc

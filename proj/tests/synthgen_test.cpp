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

#include "critproc/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "critproc/features.hpp"
#include "critproc/metrics.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace critproc {
namespace {

std::string csv_text(const RunTable& t) {
  std::ostringstream out;
  write_csv(out, t);
  return out.str();
}

std::vector<double> pooled_cells(const SyntheticData& d, int cluster) {
  const auto out = d.table.output_matrix();
  std::vector<double> cells;
  for (std::size_t r = 0; r < out.rows(); ++r)
    if (d.true_labels[r] == cluster)
      for (double v : out.row(r)) cells.push_back(v);
  return cells;
}

TEST(GenerateTest, DefaultShapeAndColumns) {
  const auto d = generate(GenConfig{});
  EXPECT_EQ(d.table.rows(), 603u);
  EXPECT_EQ(d.true_labels.size(), 603u);
  EXPECT_EQ(d.table.output_matrix().cols(), 15u);
  EXPECT_EQ(d.table.schema().output_names(), thickness_columns());
  EXPECT_EQ(thickness_column(0, 0), "thk_d1_R0");
  EXPECT_EQ(inlet_thickness_columns().size(), 5u);
  EXPECT_EQ(outer_thickness_columns().size(), 10u);
}

// Pooled mean per true cluster within 3 standard errors of the targets.
TEST(GenerateTest, PooledMeansNearTableTargets) {
  const GenConfig cfg;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    GenConfig c = cfg;
    c.seed = seed;
    const auto d = generate(c);
    for (int k = 0; k < 3; ++k) {
      const auto cells = pooled_cells(d, k);
      const auto m = moments(cells);
      const auto& spec = cfg.clusters[static_cast<std::size_t>(k)];
      EXPECT_NEAR(m.mean, spec.thickness_mean, 3.0 * spec.thickness_sd / std::sqrt(static_cast<double>(cells.size())))
          << "seed " << seed << " cluster " << k;
    }
  }
}

TEST(GenerateTest, MomentsConvergeAtScale) {
  GenConfig cfg;
  cfg.n_runs = 30000;
  const auto d = generate(cfg);
  for (int k = 0; k < 3; ++k) {
    const auto m = moments(pooled_cells(d, k));
    const auto& spec = cfg.clusters[static_cast<std::size_t>(k)];
    EXPECT_NEAR(m.mean, spec.thickness_mean, 0.01 * spec.thickness_mean);
    EXPECT_NEAR(m.sd, spec.thickness_sd, 0.01 * spec.thickness_sd);
  }
}

TEST(GenerateTest, DegenerateWeights) {
  GenConfig cfg;
  cfg.cluster_weights = {1.0, 0.0, 0.0};
  const auto d = generate(cfg);
  for (int l : d.true_labels) EXPECT_EQ(l, 0);
  EXPECT_NEAR(moments(pooled_cells(d, 0)).mean, 16.35, 0.05);
}

TEST(GenerateTest, SameSeedByteIdenticalCsv) {
  GenConfig cfg;
  cfg.seed = 77;
  EXPECT_EQ(csv_text(generate(cfg).table), csv_text(generate(cfg).table));
  GenConfig other = cfg;
  other.seed = 78;
  EXPECT_NE(csv_text(generate(cfg).table), csv_text(generate(other).table));
}

TEST(GenerateTest, NominalAreasAndDiffs) {
  const GenConfig cfg;
  const auto d = generate(cfg);
  const auto aug = augment(d.table);
  const auto nominal = aug.numeric("nominal_area");
  const auto diff = aug.numeric(kSurfAreaDiff);
  const auto n_disks = aug.numeric("n_disks");
  for (std::size_t r = 0; r < aug.rows(); ++r) {
    const double q = nominal[r] / cfg.area_increment;
    EXPECT_EQ(q, std::round(q));
    EXPECT_GE(nominal[r], cfg.area_increment);
    EXPECT_GE(diff[r], 0.0);
    EXPECT_LE(diff[r], cfg.area_increment + 1e-6);
    EXPECT_GE(n_disks[r], static_cast<double>(cfg.disks_min));
    EXPECT_LE(n_disks[r], static_cast<double>(cfg.disks_max));
    const auto cell = aug.vector_cell("disk_areas", r);
    for (std::size_t i = 0; i < cell.size(); ++i) {
      if (i < static_cast<std::size_t>(n_disks[r]))
        EXPECT_GT(cell[i], 0.0);
      else
        EXPECT_EQ(cell[i], 0.0);
    }
  }
}

TEST(GenerateTest, RecipePoolsRespected) {
  GenConfig cfg;
  cfg.n_runs = 2000;
  const auto d = generate(cfg);
  const auto recipe = d.table.categorical("recipe");
  const auto year = d.table.numeric("year");
  for (std::size_t r = 0; r < d.table.rows(); ++r) {
    EXPECT_EQ(recipe[r] == "V21", d.true_labels[r] == 0);
    if (d.true_labels[r] == 0) {
      EXPECT_GE(year[r], 2021.0);
    }
  }
}

TEST(GenerateTest, ThicknessesNonNegative) {
  GenConfig cfg;
  cfg.clusters[2].thickness_mean = 1.0;
  cfg.clusters[2].thickness_sd = 2.0;
  const auto d = generate(cfg);
  for (double v : d.table.output_matrix().data()) EXPECT_GE(v, 0.0);
}

TEST(GenerateTest, EquicorrelationCouplesCells) {
  GenConfig cfg;
  cfg.n_runs = 4000;
  cfg.cluster_weights = {1.0, 0.0, 0.0};
  cfg.equicorrelation = 0.6;
  const auto out = generate(cfg).table.output_matrix();
  const auto a = out.column(0), b = out.column(7);
  const auto ma = moments(a), mb = moments(b);
  double cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cov += (a[i] - ma.mean) * (b[i] - mb.mean);
  cov /= static_cast<double>(a.size());
  EXPECT_NEAR(cov / (ma.sd * mb.sd), 0.6, 0.05);
}

TEST(GenerateTest, InvalidConfigs) {
  GenConfig cfg;
  cfg.cluster_weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(generate(cfg), Error);
  cfg = GenConfig{};
  cfg.clusters[0].thickness_sd = -1.0;
  EXPECT_THROW(generate(cfg), Error);
  cfg = GenConfig{};
  cfg.disks_min = 10;
  cfg.disks_max = 5;
  try {
    generate(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidConfig);
  }
}

TEST(ExportTest, RoundTripsThroughLoader) {
  GenConfig cfg;
  cfg.n_runs = 120;
  const auto d = generate(cfg);
  const auto dir = testing::scratch_dir("synth_export");
  export_dataset(d.table, d.true_labels, dir);
  std::ifstream sf(dir / "schema.json");
  const auto schema = schema_from_json(nlohmann::json::parse(sf));
  const auto loaded = load_csv((dir / "runs.csv").string(), schema);
  EXPECT_EQ(loaded, d.table);
  const auto truth = read_truth_csv((dir / "truth.csv").string());
  EXPECT_EQ(truth, d.true_labels);
}

TEST(ConfigJsonTest, RoundTripAndPartialOverride) {
  GenConfig cfg;
  cfg.n_runs = 50;
  cfg.seed = 9;
  const auto back = gen_config_from_json(gen_config_to_json(cfg));
  EXPECT_EQ(gen_config_to_json(back), gen_config_to_json(cfg));
  const auto partial = gen_config_from_json(nlohmann::json::parse(R"({"n_runs": 10})"));
  EXPECT_EQ(partial.n_runs, 10u);
  EXPECT_EQ(partial.clusters[1].thickness_mean, 15.53);
  EXPECT_THROW(gen_config_from_json(nlohmann::json::parse(R"({"n_runs": "many"})")), Error);
  EXPECT_THROW(gen_config_from_json(nlohmann::json::parse(R"({"cluster_weights": [1]})")), Error);
}

}  // namespace
}  // namespace critproc

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

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "critproc/error.hpp"
#include "critproc/table.hpp"

namespace critproc {

// Engineered surface-area features of one run, in cm^2.
struct EngineeredFeatures {
  double total_surface_area = 0.0;
  double surface_area_std = 0.0;   // population std over disks
  double surface_area_diff = 0.0;  // |nominal - total|
};

inline EngineeredFeatures engineer(std::span<const double> per_disk_areas, double nominal_area) {
  if (per_disk_areas.empty()) throw Error(Errc::kEmptyDiskList, "no disks");
  double total = 0.0;
  for (double a : per_disk_areas) total += a;
  const double mean = total / static_cast<double>(per_disk_areas.size());
  double ss = 0.0;
  for (double a : per_disk_areas) ss += (a - mean) * (a - mean);
  EngineeredFeatures f;
  f.total_surface_area = total;
  f.surface_area_std = std::sqrt(ss / static_cast<double>(per_disk_areas.size()));
  f.surface_area_diff = std::abs(nominal_area - total);
  return f;
}

struct AugmentColumns {
  std::string disk_areas = "disk_areas";
  std::string nominal_area = "nominal_area";
};

inline constexpr const char* kSurfaceAreaTotal = "surface_area_total";
inline constexpr const char* kSurfaceAreaStd = "surface_area_std";
inline constexpr const char* kSurfAreaDiff = "surf_area_diff";

// Appends surface_area_total, surface_area_std and surf_area_diff as numeric
// input columns. Vector cells are fixed width, so runs with fewer disks are
// zero-padded at the end; trailing zeros are not counted as disks.
inline RunTable augment(const RunTable& table, const AugmentColumns& source = {}) {
  const auto& schema = table.schema();
  const auto disks = schema.find(source.disk_areas);
  const auto nominal = schema.find(source.nominal_area);
  if (!disks || schema.columns()[*disks].kind != ColumnKind::kNumericVector)
    throw Error(Errc::kMissingSourceColumn, "vector column '" + source.disk_areas + "'");
  if (!nominal || schema.columns()[*nominal].kind != ColumnKind::kNumeric)
    throw Error(Errc::kMissingSourceColumn, "numeric column '" + source.nominal_area + "'");
  for (const char* name : {kSurfaceAreaTotal, kSurfaceAreaStd, kSurfAreaDiff})
    if (schema.find(name)) throw Error(Errc::kColumnAlreadyPresent, name);

  const auto nominal_values = table.numeric(source.nominal_area);
  ColumnData total, sd, diff;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    auto cell = table.vector_cell(source.disk_areas, r);
    std::size_t used = cell.size();
    while (used > 1 && cell[used - 1] == 0.0) --used;
    const auto f = engineer(cell.first(used), nominal_values[r]);
    total.numbers.push_back(f.total_surface_area);
    sd.numbers.push_back(f.surface_area_std);
    diff.numbers.push_back(f.surface_area_diff);
  }
  return table.with_column({kSurfaceAreaTotal, ColumnKind::kNumeric, Role::kInput}, std::move(total))
      .with_column({kSurfaceAreaStd, ColumnKind::kNumeric, Role::kInput}, std::move(sd))
      .with_column({kSurfAreaDiff, ColumnKind::kNumeric, Role::kInput}, std::move(diff));
}

}  // namespace critproc

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
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "critproc/error.hpp"
#include "critproc/matrix.hpp"
#include "critproc/rng.hpp"

namespace critproc {

enum class ColumnKind { kNumeric, kCategorical, kNumericVector };
enum class Role { kInput, kOutput, kMeta };

inline std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kNumeric: return "numeric";
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kNumericVector: return "numeric_vector";
  }
  return "numeric";
}

inline std::string to_string(Role role) {
  switch (role) {
    case Role::kInput: return "input";
    case Role::kOutput: return "output";
    case Role::kMeta: return "meta";
  }
  return "input";
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  Role role = Role::kInput;
  std::size_t length = 1;  // numeric_vector only

  bool operator==(const ColumnSpec&) const = default;
};

// Ordered column declarations. Output-role columns form the clustering
// feature space and must be scalar numeric.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
    std::set<std::string> seen;
    for (const auto& c : columns_) {
      if (c.name.empty()) throw Error(Errc::kInvalidSchema, "empty column name");
      if (!seen.insert(c.name).second)
        throw Error(Errc::kInvalidSchema, "duplicate column '" + c.name + "'");
      if (c.kind == ColumnKind::kNumericVector && c.length < 1)
        throw Error(Errc::kInvalidSchema, "vector column '" + c.name + "' needs len >= 1");
      if (c.role == Role::kOutput && c.kind != ColumnKind::kNumeric)
        throw Error(Errc::kInvalidSchema, "output column '" + c.name + "' must be numeric");
    }
  }

  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
  std::size_t size() const noexcept { return columns_.size(); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].name == name) return i;
    return std::nullopt;
  }

  const ColumnSpec& at(std::string_view name) const {
    if (auto i = find(name)) return columns_[*i];
    throw Error(Errc::kMissingColumn, "'" + std::string(name) + "'");
  }

  std::vector<std::string> output_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns_)
      if (c.role == Role::kOutput) names.push_back(c.name);
    return names;
  }

  bool operator==(const Schema&) const = default;

 private:
  std::vector<ColumnSpec> columns_;
};

inline nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns()) {
    nlohmann::json j{{"name", c.name}, {"kind", to_string(c.kind)}, {"role", to_string(c.role)}};
    if (c.kind == ColumnKind::kNumericVector) j["len"] = c.length;
    cols.push_back(std::move(j));
  }
  return {{"columns", std::move(cols)}};
}

inline Schema schema_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array())
    throw Error(Errc::kInvalidSchema, "expected {\"columns\": [...]}");
  std::vector<ColumnSpec> cols;
  for (const auto& j : doc["columns"]) {
    ColumnSpec c;
    try {
      c.name = j.at("name").get<std::string>();
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "numeric") c.kind = ColumnKind::kNumeric;
      else if (kind == "categorical") c.kind = ColumnKind::kCategorical;
      else if (kind == "numeric_vector") c.kind = ColumnKind::kNumericVector;
      else throw Error(Errc::kInvalidSchema, "unknown kind '" + kind + "'");
      const auto role = j.value("role", std::string("input"));
      if (role == "input") c.role = Role::kInput;
      else if (role == "output") c.role = Role::kOutput;
      else if (role == "meta") c.role = Role::kMeta;
      else throw Error(Errc::kInvalidSchema, "unknown role '" + role + "'");
      if (c.kind == ColumnKind::kNumericVector) {
        const auto len = j.at("len").get<long long>();
        if (len < 1) throw Error(Errc::kInvalidSchema, "len must be >= 1 for '" + c.name + "'");
        c.length = static_cast<std::size_t>(len);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kInvalidSchema, e.what());
    }
    cols.push_back(std::move(c));
  }
  return Schema(std::move(cols));
}

// Storage for one column. Numeric columns use `numbers` (n values, or n*len
// for vectors, row-major); categorical columns use `labels`.
struct ColumnData {
  std::vector<double> numbers;
  std::vector<std::string> labels;
};

// Validated, immutable table of production runs.
class RunTable {
 public:
  RunTable(Schema schema, std::vector<ColumnData> columns)
      : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (columns_.size() != schema_.size())
      throw Error(Errc::kMissingColumn, "column data count does not match schema");
    rows_ = 0;
    bool first = true;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const auto& spec = schema_.columns()[c];
      std::size_t n = 0;
      if (spec.kind == ColumnKind::kCategorical) {
        n = columns_[c].labels.size();
        for (std::size_t r = 0; r < n; ++r)
          if (columns_[c].labels[r].empty())
            throw CellError(Errc::kTypeMismatch, r + 1, spec.name);
      } else {
        const std::size_t width = spec.kind == ColumnKind::kNumericVector ? spec.length : 1;
        if (columns_[c].numbers.size() % width != 0)
          throw Error(Errc::kBadVectorLength, "'" + spec.name + "'");
        n = columns_[c].numbers.size() / width;
        for (std::size_t i = 0; i < columns_[c].numbers.size(); ++i)
          if (!std::isfinite(columns_[c].numbers[i]))
            throw CellError(Errc::kNonFiniteValue, i / width + 1, spec.name);
      }
      if (first) {
        rows_ = n;
        first = false;
      } else if (n != rows_) {
        throw Error(Errc::kDimensionMismatch, "column '" + spec.name + "' has " +
                                                  std::to_string(n) + " rows, expected " +
                                                  std::to_string(rows_));
      }
    }
    if (rows_ < 1) throw Error(Errc::kMissingRows, "table has no data rows");
    vocabularies_.resize(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (schema_.columns()[c].kind != ColumnKind::kCategorical) continue;
      std::set<std::string> vocab(columns_[c].labels.begin(), columns_[c].labels.end());
      vocabularies_[c].assign(vocab.begin(), vocab.end());
    }
  }

  const Schema& schema() const noexcept { return schema_; }
  std::size_t rows() const noexcept { return rows_; }

  std::span<const double> numeric(std::string_view name) const {
    const auto c = index_of(name, ColumnKind::kNumeric);
    return columns_[c].numbers;
  }

  std::span<const double> vector_cell(std::string_view name, std::size_t row) const {
    const auto c = index_of(name, ColumnKind::kNumericVector);
    const std::size_t len = schema_.columns()[c].length;
    return std::span<const double>(columns_[c].numbers).subspan(row * len, len);
  }

  std::span<const std::string> categorical(std::string_view name) const {
    return columns_[index_of(name, ColumnKind::kCategorical)].labels;
  }

  // Sorted distinct values observed in a categorical column.
  const std::vector<std::string>& vocabulary(std::string_view name) const {
    return vocabularies_[index_of(name, ColumnKind::kCategorical)];
  }

  const ColumnData& column_data(std::size_t c) const { return columns_[c]; }

  Matrix numeric_matrix(std::span<const std::string> names) const {
    Matrix out(rows_, names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto col = numeric(names[j]);
      for (std::size_t r = 0; r < rows_; ++r) out(r, j) = col[r];
    }
    return out;
  }

  // The n x (#output columns) clustering matrix.
  Matrix output_matrix() const {
    const auto names = schema_.output_names();
    return numeric_matrix(names);
  }

  RunTable select_rows(std::span<const std::size_t> indices) const {
    std::vector<ColumnData> cols(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const auto& spec = schema_.columns()[c];
      if (spec.kind == ColumnKind::kCategorical) {
        cols[c].labels.reserve(indices.size());
        for (auto r : indices) cols[c].labels.push_back(columns_[c].labels.at(r));
      } else {
        const std::size_t w = spec.kind == ColumnKind::kNumericVector ? spec.length : 1;
        cols[c].numbers.reserve(indices.size() * w);
        for (auto r : indices) {
          if (r >= rows_) throw Error(Errc::kDimensionMismatch, "row index out of range");
          cols[c].numbers.insert(cols[c].numbers.end(), columns_[c].numbers.begin() + r * w,
                                 columns_[c].numbers.begin() + (r + 1) * w);
        }
      }
    }
    return RunTable(schema_, std::move(cols));
  }

  RunTable with_column(ColumnSpec spec, ColumnData data) const {
    if (schema_.find(spec.name))
      throw Error(Errc::kColumnAlreadyPresent, "'" + spec.name + "'");
    auto specs = schema_.columns();
    specs.push_back(std::move(spec));
    auto cols = columns_;
    cols.push_back(std::move(data));
    return RunTable(Schema(std::move(specs)), std::move(cols));
  }

  bool operator==(const RunTable& other) const {
    if (!(schema_ == other.schema_) || rows_ != other.rows_) return false;
    for (std::size_t c = 0; c < columns_.size(); ++c)
      if (columns_[c].numbers != other.columns_[c].numbers ||
          columns_[c].labels != other.columns_[c].labels)
        return false;
    return true;
  }

 private:
  std::size_t index_of(std::string_view name, ColumnKind kind) const {
    const auto c = schema_.find(name);
    if (!c) throw Error(Errc::kMissingColumn, "'" + std::string(name) + "'");
    if (schema_.columns()[*c].kind != kind)
      throw Error(Errc::kTypeMismatch, "column '" + std::string(name) + "' is " +
                                           to_string(schema_.columns()[*c].kind) + ", not " +
                                           to_string(kind));
    return *c;
  }

  Schema schema_;
  std::vector<ColumnData> columns_;
  std::vector<std::vector<std::string>> vocabularies_;
  std::size_t rows_ = 0;
};

// ---------------------------------------------------------------------------
// CSV

namespace csv_detail {

// Splits one record; supports RFC 4180 double-quoted fields without
// embedded newlines.
inline std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += '"';
  return out;
}

}  // namespace csv_detail

// Shortest text that reads back to the same double, up to 17 significant
// digits.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// Header names as laid out in CSV; vector columns expand to name_1..name_len.
inline std::vector<std::string> csv_header(const Schema& schema) {
  std::vector<std::string> names;
  for (const auto& c : schema.columns()) {
    if (c.kind == ColumnKind::kNumericVector) {
      for (std::size_t i = 1; i <= c.length; ++i) names.push_back(c.name + "_" + std::to_string(i));
    } else {
      names.push_back(c.name);
    }
  }
  return names;
}

inline RunTable read_csv(std::istream& in, const Schema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::kMissingRows, "empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
    line.erase(0, 3);
  const auto header = csv_detail::split_record(line);
  std::map<std::string, std::size_t, std::less<>> position;
  for (std::size_t i = 0; i < header.size(); ++i)
    position.emplace(std::string(csv_detail::trim(header[i])), i);

  // Source field index for every (column, element).
  std::vector<std::vector<std::size_t>> source(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& spec = schema.columns()[c];
    if (spec.kind == ColumnKind::kNumericVector) {
      for (std::size_t k = 1; k <= spec.length; ++k) {
        const auto it = position.find(spec.name + "_" + std::to_string(k));
        if (it == position.end())
          throw Error(Errc::kBadVectorLength, "'" + spec.name + "' expects " +
                                                  std::to_string(spec.length) +
                                                  " fields; missing " + spec.name + "_" +
                                                  std::to_string(k));
        source[c].push_back(it->second);
      }
      if (position.count(spec.name + "_" + std::to_string(spec.length + 1)))
        throw Error(Errc::kBadVectorLength, "'" + spec.name + "' has more than " +
                                                std::to_string(spec.length) + " fields");
    } else {
      const auto it = position.find(spec.name);
      if (it == position.end()) throw Error(Errc::kMissingColumn, "'" + spec.name + "'");
      source[c].push_back(it->second);
    }
  }

  std::vector<ColumnData> cols(schema.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (csv_detail::trim(line).empty()) continue;
    ++row;
    const auto fields = csv_detail::split_record(line);
    if (fields.size() != header.size())
      throw Error(Errc::kTypeMismatch, "row " + std::to_string(row) + " has " +
                                           std::to_string(fields.size()) + " fields, header has " +
                                           std::to_string(header.size()));
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& spec = schema.columns()[c];
      if (spec.kind == ColumnKind::kCategorical) {
        const auto v = csv_detail::trim(fields[source[c][0]]);
        if (v.empty()) throw CellError(Errc::kTypeMismatch, row, spec.name);
        cols[c].labels.emplace_back(v);
        continue;
      }
      for (std::size_t f : source[c]) {
        const auto v = csv_detail::parse_number(fields[f]);
        if (!v) throw CellError(Errc::kTypeMismatch, row, header[f]);
        if (!std::isfinite(*v)) throw CellError(Errc::kNonFiniteValue, row, header[f]);
        cols[c].numbers.push_back(*v);
      }
    }
  }
  if (row == 0) throw Error(Errc::kMissingRows, "no data rows after header");
  return RunTable(schema, std::move(cols));
}

inline RunTable load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open '" + path + "'");
  return read_csv(in, schema);
}

inline void write_csv(std::ostream& out, const RunTable& table) {
  const auto& schema = table.schema();
  const auto header = csv_header(schema);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << csv_detail::quote_if_needed(header[i]);
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    bool first = true;
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& spec = schema.columns()[c];
      const auto& data = table.column_data(c);
      if (spec.kind == ColumnKind::kCategorical) {
        out << (first ? "" : ",") << csv_detail::quote_if_needed(data.labels[r]);
        first = false;
        continue;
      }
      const std::size_t w = spec.kind == ColumnKind::kNumericVector ? spec.length : 1;
      for (std::size_t k = 0; k < w; ++k) {
        out << (first ? "" : ",") << format_double(data.numbers[r * w + k]);
        first = false;
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Train/test split

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

inline std::size_t test_size(std::size_t n, double test_ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_ratio + 1e-9));
}

// Seeded partition of [0, n). With `strata`, each class contributes
// floor(n_c * ratio) test rows plus one extra for the classes with the
// largest remainders, so the total is still floor(n * ratio).
inline SplitIndices split_indices(std::size_t n, double test_ratio, std::uint64_t seed,
                                  std::optional<std::span<const int>> strata = std::nullopt) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0))
    throw Error(Errc::kInvalidConfig, "test_ratio must lie in (0, 1)");
  if (n < 2) throw Error(Errc::kEmptyData, "split needs at least 2 rows");
  const std::size_t n_test = test_size(n, test_ratio);
  Rng rng(derive_seed(seed, 0x5117));
  std::vector<char> is_test(n, 0);

  if (!strata) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
  } else {
    if (strata->size() != n) throw Error(Errc::kDimensionMismatch, "strata length != rows");
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) members[(*strata)[i]].push_back(i);
    for (const auto& [label, rows] : members)
      if (rows.size() < 2)
        throw Error(Errc::kClassTooSmall, "class " + std::to_string(label) + " has " +
                                              std::to_string(rows.size()) + " member(s)");
    struct Quota {
      int label;
      std::size_t count;
      double remainder;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [label, rows] : members) {
      const double exact = static_cast<double>(rows.size()) * test_ratio;
      const auto base = static_cast<std::size_t>(std::floor(exact + 1e-9));
      quotas.push_back({label, base, exact - static_cast<double>(base)});
      assigned += base;
    }
    std::vector<std::size_t> by_remainder(quotas.size());
    for (std::size_t i = 0; i < quotas.size(); ++i) by_remainder[i] = i;
    std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
      return quotas[a].remainder > quotas[b].remainder;
    });
    for (std::size_t i = 0; assigned < n_test && i < by_remainder.size(); ++i, ++assigned)
      ++quotas[by_remainder[i]].count;
    for (const auto& q : quotas) {
      auto rows = members[q.label];
      rng.shuffle(std::span(rows));
      for (std::size_t i = 0; i < q.count; ++i) is_test[rows[i]] = 1;
    }
  }

  SplitIndices out;
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? out.test : out.train).push_back(i);
  return out;
}

inline std::pair<RunTable, RunTable> split(const RunTable& table, double test_ratio,
                                           std::uint64_t seed,
                                           std::optional<std::string> stratify_by = std::nullopt) {
  SplitIndices idx;
  if (stratify_by) {
    const auto labels = table.categorical(*stratify_by);
    const auto& vocab = table.vocabulary(*stratify_by);
    std::vector<int> strata(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      strata[i] = static_cast<int>(std::lower_bound(vocab.begin(), vocab.end(), labels[i]) -
                                   vocab.begin());
    idx = split_indices(table.rows(), test_ratio, seed, std::span<const int>(strata));
  } else {
    idx = split_indices(table.rows(), test_ratio, seed);
  }
  if (idx.test.empty()) throw Error(Errc::kEmptyData, "test partition would be empty");
  return {table.select_rows(idx.train), table.select_rows(idx.test)};
}

// ---------------------------------------------------------------------------
// Encoding

// Provenance of one source column inside the encoded matrix.
struct EncodedBlock {
  std::string source;
  ColumnKind kind = ColumnKind::kNumeric;
  std::size_t first = 0;
  std::size_t width = 1;
  std::vector<std::string> categories;  // one-hot order, categorical only

  bool operator==(const EncodedBlock&) const = default;
};

struct EncodedMatrix {
  Matrix values;
  std::vector<std::string> feature_names;
  std::vector<EncodedBlock> encoding_map;
  // Rows that carried a category absent at fit time, as "column=value@row".
  std::vector<std::string> warnings;
};

enum class UnknownCategoryPolicy { kZeroBlock, kThrow };

// Fixed numeric encoding learned from a training table: numeric columns pass
// through, categorical columns become one-hot blocks over the training
// vocabulary.
class Encoder {
 public:
  Encoder() = default;

  static Encoder fit(const RunTable& table, std::span<const std::string> selected) {
    if (selected.empty()) throw Error(Errc::kInvalidConfig, "no input columns selected");
    Encoder enc;
    std::size_t offset = 0;
    std::set<std::string> seen;
    for (const auto& name : selected) {
      if (!seen.insert(name).second)
        throw Error(Errc::kInvalidConfig, "column '" + name + "' selected twice");
      const auto& spec = table.schema().at(name);
      EncodedBlock block;
      block.source = name;
      block.kind = spec.kind;
      block.first = offset;
      if (spec.kind == ColumnKind::kNumeric) {
        block.width = 1;
      } else if (spec.kind == ColumnKind::kCategorical) {
        block.categories = table.vocabulary(name);
        block.width = block.categories.size();
      } else {
        throw Error(Errc::kTypeMismatch,
                    "column '" + name + "' is a vector column and cannot be encoded directly");
      }
      offset += block.width;
      enc.blocks_.push_back(std::move(block));
    }
    enc.width_ = offset;
    return enc;
  }

  static Encoder from_blocks(std::vector<EncodedBlock> blocks) {
    Encoder enc;
    std::size_t offset = 0;
    for (auto& b : blocks) {
      if (b.first != offset) throw Error(Errc::kInvalidConfig, "encoding blocks not contiguous");
      offset += b.width;
    }
    enc.blocks_ = std::move(blocks);
    enc.width_ = offset;
    return enc;
  }

  const std::vector<EncodedBlock>& blocks() const noexcept { return blocks_; }
  std::size_t width() const noexcept { return width_; }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> names;
    for (const auto& b : blocks_) {
      if (b.kind == ColumnKind::kCategorical) {
        for (const auto& cat : b.categories) names.push_back(b.source + "=" + cat);
      } else {
        names.push_back(b.source);
      }
    }
    return names;
  }

  EncodedMatrix transform(const RunTable& table,
                          UnknownCategoryPolicy policy = UnknownCategoryPolicy::kZeroBlock) const {
    EncodedMatrix out;
    out.values = Matrix(table.rows(), width_);
    out.feature_names = feature_names();
    out.encoding_map = blocks_;
    for (const auto& b : blocks_) {
      if (b.kind == ColumnKind::kNumeric) {
        const auto col = table.numeric(b.source);
        for (std::size_t r = 0; r < table.rows(); ++r) out.values(r, b.first) = col[r];
        continue;
      }
      const auto col = table.categorical(b.source);
      for (std::size_t r = 0; r < table.rows(); ++r) {
        const auto it = std::lower_bound(b.categories.begin(), b.categories.end(), col[r]);
        if (it == b.categories.end() || *it != col[r]) {
          if (policy == UnknownCategoryPolicy::kThrow)
            throw Error(Errc::kUnknownCategory, b.source + "=" + col[r]);
          out.warnings.push_back(b.source + "=" + col[r] + "@" + std::to_string(r + 1));
          continue;
        }
        out.values(r, b.first + static_cast<std::size_t>(it - b.categories.begin())) = 1.0;
      }
    }
    return out;
  }

 private:
  std::vector<EncodedBlock> blocks_;
  std::size_t width_ = 0;
};

inline EncodedMatrix encode(const RunTable& table, std::span<const std::string> selected) {
  return Encoder::fit(table, selected).transform(table);
}

inline nlohmann::json encoder_to_json(const Encoder& enc) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : enc.blocks()) {
    nlohmann::json j{{"source", b.source}, {"kind", to_string(b.kind)}, {"first", b.first},
                     {"width", b.width}};
    if (b.kind == ColumnKind::kCategorical) j["categories"] = b.categories;
    blocks.push_back(std::move(j));
  }
  return blocks;
}

inline Encoder encoder_from_json(const nlohmann::json& j) {
  std::vector<EncodedBlock> blocks;
  for (const auto& jb : j) {
    EncodedBlock b;
    b.source = jb.at("source").get<std::string>();
    b.kind = jb.at("kind").get<std::string>() == "categorical" ? ColumnKind::kCategorical
                                                                 : ColumnKind::kNumeric;
    b.first = jb.at("first").get<std::size_t>();
    b.width = jb.at("width").get<std::size_t>();
    if (b.kind == ColumnKind::kCategorical)
      b.categories = jb.at("categories").get<std::vector<std::string>>();
    blocks.push_back(std::move(b));
  }
  return Encoder::from_blocks(std::move(blocks));
}

}  // namespace critproc

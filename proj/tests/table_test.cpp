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

#include "critproc/table.hpp"

#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace critproc {
namespace {

Schema thickness_schema() {
  std::vector<ColumnSpec> cols{{"recipe", ColumnKind::kCategorical, Role::kInput},
                               {"areas", ColumnKind::kNumericVector, Role::kInput, 3},
                               {"year", ColumnKind::kNumeric, Role::kInput}};
  for (int i = 1; i <= 15; ++i)
    cols.push_back({"t" + std::to_string(i), ColumnKind::kNumeric, Role::kOutput});
  return Schema(cols);
}

std::string thickness_csv(std::size_t rows) {
  std::ostringstream out;
  out << "recipe,areas_1,areas_2,areas_3,year";
  for (int i = 1; i <= 15; ++i) out << ",t" << i;
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    out << (r % 2 ? "V21" : "V20") << ",1,2,3," << 2015 + r % 7;
    for (int i = 1; i <= 15; ++i) out << ',' << 15.0 + 0.01 * static_cast<double>(r + i);
    out << '\n';
  }
  return out.str();
}

TEST(SchemaTest, JsonRoundTrip) {
  const auto schema = thickness_schema();
  EXPECT_EQ(schema_from_json(schema_to_json(schema)), schema);
  EXPECT_EQ(schema.output_names().size(), 15u);
}

TEST(SchemaTest, RejectsInvalidDeclarations) {
  EXPECT_THROW(Schema({{"a"}, {"a"}}), Error);
  const auto bad_len = nlohmann::json::parse(
      R"({"columns":[{"name":"v","kind":"numeric_vector","role":"input","len":0}]})");
  EXPECT_THROW(schema_from_json(bad_len), Error);
  EXPECT_THROW(Schema({{"o", ColumnKind::kCategorical, Role::kOutput}}), Error);
  const auto bad_kind =
      nlohmann::json::parse(R"({"columns":[{"name":"v","kind":"text","role":"input"}]})");
  try {
    schema_from_json(bad_kind);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidSchema);
  }
}

TEST(LoadCsvTest, OutputBlockIs603By15) {
  std::istringstream in(thickness_csv(603));
  const auto table = read_csv(in, thickness_schema());
  EXPECT_EQ(table.rows(), 603u);
  const auto out = table.output_matrix();
  EXPECT_EQ(out.rows(), 603u);
  EXPECT_EQ(out.cols(), 15u);
  EXPECT_DOUBLE_EQ(out(0, 0), 15.01);
  EXPECT_EQ(table.vocabulary("recipe"), (std::vector<std::string>{"V20", "V21"}));
  EXPECT_EQ(table.vector_cell("areas", 4)[2], 3.0);
}

TEST(LoadCsvTest, HeaderOnlyIsMissingRows) {
  std::istringstream in(thickness_csv(0));
  try {
    read_csv(in, thickness_schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMissingRows);
  }
}

TEST(LoadCsvTest, TextInNumericColumnReportsRowAndColumn) {
  std::istringstream src(thickness_csv(10));
  std::ostringstream patched;
  std::string line;
  for (int i = 0; std::getline(src, line); ++i) {
    if (i == 7) {
      // year is the fifth field
      std::size_t pos = 0;
      for (int f = 0; f < 4; ++f) pos = line.find(',', pos) + 1;
      line.replace(pos, line.find(',', pos) - pos, "abc");
    }
    patched << line << '\n';
  }
  std::istringstream in(patched.str());
  try {
    read_csv(in, thickness_schema());
    FAIL();
  } catch (const CellError& e) {
    EXPECT_EQ(e.code(), Errc::kTypeMismatch);
    EXPECT_EQ(e.row(), 7u);
    EXPECT_EQ(e.column(), "year");
  }
}

TEST(LoadCsvTest, NonFiniteAndMissingCells) {
  const Schema s({{"x"}, {"c", ColumnKind::kCategorical}});
  {
    std::istringstream in("x,c\n1,a\ninf,b\n");
    try {
      read_csv(in, s);
      FAIL();
    } catch (const CellError& e) {
      EXPECT_EQ(e.code(), Errc::kNonFiniteValue);
      EXPECT_EQ(e.row(), 2u);
    }
  }
  {
    std::istringstream in("x,c\n1,\n");
    EXPECT_THROW(read_csv(in, s), CellError);
  }
  {
    std::istringstream in("x,c\n,a\n");
    EXPECT_THROW(read_csv(in, s), CellError);
  }
}

TEST(LoadCsvTest, MissingColumnsAndVectorLength) {
  const Schema s({{"x"}, {"v", ColumnKind::kNumericVector, Role::kInput, 2}});
  {
    std::istringstream in("v_1,v_2\n1,2\n");
    try {
      read_csv(in, s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kMissingColumn);
    }
  }
  for (const char* text : {"x,v_1\n1,2\n", "x,v_1,v_2,v_3\n1,2,3,4\n"}) {
    std::istringstream in(text);
    try {
      read_csv(in, s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kBadVectorLength);
    }
  }
}

TEST(LoadCsvTest, QuotedFieldsAndColumnOrder) {
  const Schema s({{"x"}, {"c", ColumnKind::kCategorical}});
  std::istringstream in("c,x\n\"a,b\",1.5\n\"say \"\"hi\"\"\",2\n");
  const auto t = read_csv(in, s);
  EXPECT_EQ(t.categorical("c")[0], "a,b");
  EXPECT_EQ(t.categorical("c")[1], "say \"hi\"");
  EXPECT_EQ(t.numeric("x")[1], 2.0);
}

// Property: write then read reproduces every cell exactly.
TEST(LoadCsvTest, RoundTripIsExact) {
  Rng rng(7);
  const Schema s({{"a"}, {"c", ColumnKind::kCategorical}, {"v", ColumnKind::kNumericVector, Role::kInput, 3},
                  {"o", ColumnKind::kNumeric, Role::kOutput}});
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<ColumnData> cols(4);
    for (std::size_t r = 0; r < n; ++r) {
      cols[0].numbers.push_back(rng.normal() * std::pow(10.0, rng.uniform(-300, 300)));
      cols[1].labels.push_back("cat" + std::to_string(rng.below(4)));
      for (int k = 0; k < 3; ++k) cols[2].numbers.push_back(rng.uniform(-1e6, 1e6));
      cols[3].numbers.push_back(rng.uniform() / 3.0);
    }
    const RunTable table(s, cols);
    std::stringstream buf;
    write_csv(buf, table);
    EXPECT_EQ(read_csv(buf, s), table);
  }
}

TEST(SplitTest, FloorConvention) {
  const auto idx = split_indices(603, 0.2, 1);
  EXPECT_EQ(idx.train.size(), 483u);
  EXPECT_EQ(idx.test.size(), 120u);
}

TEST(SplitTest, DeterministicGivenSeed) {
  const auto a = split_indices(10, 0.2, 99);
  const auto b = split_indices(10, 0.2, 99);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.test.size(), 2u);
}

TEST(SplitTest, IsPartitionForAllSeeds) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t n = 2 + seed % 50;
    const auto idx = split_indices(n, 0.3, seed);
    std::set<std::size_t> all(idx.train.begin(), idx.train.end());
    for (auto t : idx.test) EXPECT_TRUE(all.insert(t).second);
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), n - 1);
    EXPECT_EQ(idx.test.size(), test_size(n, 0.3));
  }
}

TEST(SplitTest, StratifiedClassTooSmall) {
  std::vector<int> strata(10, 0);
  strata[9] = 1;
  try {
    split_indices(10, 0.2, 1, std::span<const int>(strata));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kClassTooSmall);
  }
}

TEST(SplitTest, StratifiedPreservesProportions) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng.below(200);
    std::vector<int> strata(n);
    for (std::size_t i = 0; i < n; ++i) strata[i] = static_cast<int>(i % (2 + trial % 3));
    const double ratio = rng.uniform(0.1, 0.5);
    const auto idx = split_indices(n, ratio, trial, std::span<const int>(strata));
    EXPECT_EQ(idx.test.size(), test_size(n, ratio));
    std::map<int, double> total, test;
    for (int s : strata) total[s] += 1.0;
    for (auto t : idx.test) test[strata[t]] += 1.0;
    for (const auto& [cls, count] : total) EXPECT_LE(std::abs(test[cls] - count * ratio), 1.0);
  }
}

TEST(SplitTest, TableSplitByCategoricalColumn) {
  std::istringstream in(thickness_csv(40));
  const auto table = read_csv(in, thickness_schema());
  const auto [train, test] = split(table, 0.25, 5, "recipe");
  EXPECT_EQ(train.rows() + test.rows(), 40u);
  EXPECT_EQ(test.rows(), 10u);
  std::size_t v21 = 0;
  for (const auto& r : test.categorical("recipe")) v21 += r == "V21";
  EXPECT_EQ(v21, 5u);
}

RunTable recipe_table(std::vector<std::string> recipes) {
  const Schema s({{"recipe", ColumnKind::kCategorical}, {"a"}, {"b"}});
  std::vector<ColumnData> cols(3);
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    cols[0].labels.push_back(recipes[i]);
    cols[1].numbers.push_back(static_cast<double>(i) + 0.5);
    cols[2].numbers.push_back(-static_cast<double>(i));
  }
  return RunTable(s, cols);
}

TEST(EncodeTest, OneHotBlockSumsToOne) {
  const auto t = recipe_table({"V21", "V20", "older"});
  const std::vector<std::string> sel{"recipe"};
  const auto enc = encode(t, sel);
  ASSERT_EQ(enc.values.rows(), 3u);
  ASSERT_EQ(enc.values.cols(), 3u);
  EXPECT_EQ(enc.feature_names, (std::vector<std::string>{"recipe=V20", "recipe=V21", "recipe=older"}));
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (double v : enc.values.row(r)) s += v;
    EXPECT_EQ(s, 1.0);
  }
  EXPECT_EQ(enc.values(0, 1), 1.0);
  ASSERT_EQ(enc.encoding_map.size(), 1u);
  EXPECT_EQ(enc.encoding_map[0].width, 3u);
}

TEST(EncodeTest, NumericPassThrough) {
  const auto t = recipe_table({"x", "y", "x", "z"});
  const std::vector<std::string> sel{"a", "b"};
  const auto enc = encode(t, sel);
  EXPECT_EQ(enc.values, t.numeric_matrix(sel));
  EXPECT_TRUE(enc.warnings.empty());
}

TEST(EncodeTest, UnseenCategoryEncodesAsZeroBlockWithWarning) {
  const std::vector<std::string> sel{"recipe", "a"};
  const auto enc = Encoder::fit(recipe_table({"V21", "V20"}), sel);
  const auto out = enc.transform(recipe_table({"V19", "V21"}));
  EXPECT_EQ(out.values(0, 0), 0.0);
  EXPECT_EQ(out.values(0, 1), 0.0);
  EXPECT_EQ(out.values(1, 1), 1.0);
  ASSERT_EQ(out.warnings.size(), 1u);
  EXPECT_EQ(out.warnings[0], "recipe=V19@1");
  try {
    enc.transform(recipe_table({"V19"}), UnknownCategoryPolicy::kThrow);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownCategory);
  }
}

TEST(EncodeTest, GroupSumsAreOnesOnRandomTables) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> recipes;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) recipes.push_back("r" + std::to_string(rng.below(6)));
    const std::vector<std::string> sel{"a", "recipe", "b"};
    const auto enc = encode(recipe_table(recipes), sel);
    const auto& block = enc.encoding_map[1];
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < block.width; ++k) s += enc.values(r, block.first + k);
      EXPECT_EQ(s, 1.0);
    }
  }
}

TEST(EncodeTest, EncoderJsonRoundTrip) {
  const std::vector<std::string> sel{"recipe", "a"};
  const auto enc = Encoder::fit(recipe_table({"V21", "V20"}), sel);
  const auto back = encoder_from_json(encoder_to_json(enc));
  EXPECT_EQ(back.blocks(), enc.blocks());
  EXPECT_EQ(back.width(), 3u);
}

TEST(EncodeTest, RejectsVectorAndEmptySelections) {
  std::istringstream in(thickness_csv(3));
  const auto t = read_csv(in, thickness_schema());
  const std::vector<std::string> vec{"areas"};
  EXPECT_THROW(encode(t, vec), Error);
  EXPECT_THROW(encode(t, std::vector<std::string>{}), Error);
  EXPECT_THROW(encode(t, std::vector<std::string>{"nope"}), Error);
}

}  // namespace
}  // namespace critproc

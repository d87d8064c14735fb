// Copyright 2026 The cstgl Authors.
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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cstgl/dataset.hpp"
#include "cstgl/errors.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace cstgl;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(ReadCsv, SmallFileRoundTripsExactly) {
  test::TempDir dir;
  const Matrix values(4, 2, {0.1, -2.5, 3.0, 1e-17, 123456.789, 0.3333333333333333, -0.0, 7});
  write_csv(dir / "a.csv", {"x", "y"}, values);
  const CsvTable t = read_csv(dir / "a.csv");
  EXPECT_EQ(t.names, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(t.values, values);
  EXPECT_FALSE(t.labels.has_value());
}

TEST(ReadCsv, LabelColumnSplitOff) {
  test::TempDir dir;
  write_text(dir / "a.csv", "a,label,b\n1,0,2\n3,1,4\n");
  const CsvTable t = read_csv(dir / "a.csv");
  EXPECT_EQ(t.names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.values, Matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(*t.labels, (std::vector<int>{0, 1}));
}

TEST(ReadCsv, NonNumericCellCitesRow) {
  test::TempDir dir;
  std::string text = "a,b\n";
  for (int r = 1; r <= 8; ++r) text += r == 7 ? "1,oops\n" : "1,2\n";
  write_text(dir / "a.csv", text);
  try {
    read_csv(dir / "a.csv");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST(ReadCsv, RaggedRowCitesRow) {
  test::TempDir dir;
  write_text(dir / "a.csv", "a,b\n1,2\n3\n");
  try {
    read_csv(dir / "a.csv");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, LabelLengthMismatchRejected) {
  test::TempDir dir;
  write_text(dir / "train.csv", "a\n1\n2\n");
  write_text(dir / "test.csv", "a\n1\n2\n3\n");
  write_text(dir / "labels.csv", "0\n1\n");
  LoadOptions opt;
  opt.label_path = dir / "labels.csv";
  EXPECT_THROW(load_dataset(dir / "train.csv", dir / "test.csv", opt), IngestionError);
}

TEST(LoadDataset, SkipAndDownsampleTrainOnlyByDefault) {
  test::TempDir dir;
  std::string train = "a\n", test = "a,label\n";
  for (int r = 0; r < 26; ++r) train += std::to_string(r) + "\n";
  for (int r = 0; r < 9; ++r) test += std::to_string(r) + (r == 4 ? ",1\n" : ",0\n");
  write_text(dir / "train.csv", train);
  write_text(dir / "test.csv", test);
  LoadOptions opt;
  opt.skip_initial = 5;
  opt.downsample_stride = 3;
  const auto ds = load_dataset(dir / "train.csv", dir / "test.csv", opt);
  // train rows 5..25 -> 7 blocks; test untouched by the skip -> 3 blocks
  ASSERT_EQ(ds.train.rows(), 7u);
  EXPECT_EQ(ds.train(0, 0), 6.0);
  ASSERT_EQ(ds.test.rows(), 3u);
  EXPECT_EQ(*ds.test_labels, (std::vector<int>{0, 1, 0}));

  opt.skip_scope = SkipScope::TrainAndTest;
  const auto both = load_dataset(dir / "train.csv", dir / "test.csv", opt);
  EXPECT_EQ(both.test.rows(), 2u);  // rows 5..8 -> blocks [5,6,7], [8]
  EXPECT_EQ(both.test(1, 0), 8.0);
}

// 51 channels, 47,515 / 44,986 rows, 11.97 % anomalous test rows.
TEST(LoadDataset, SwatShapedInput) {
  test::TempDir dir;
  const std::size_t channels = 51, train_rows = 47515, test_rows = 44986;
  const auto anomalous = static_cast<std::size_t>(std::llround(0.1197 * test_rows));
  std::string header;
  for (std::size_t c = 0; c < channels; ++c) header += (c ? "," : "") + ("s" + std::to_string(c));
  auto body = [&](std::size_t rows, bool labels) {
    std::string out = header + (labels ? ",label\n" : "\n");
    std::string row;
    for (std::size_t c = 0; c < channels; ++c) row += c ? ",1" : "1";
    for (std::size_t r = 0; r < rows; ++r) {
      out += row;
      if (labels) out += (r >= 1000 && r < 1000 + anomalous) ? ",1" : ",0";
      out += '\n';
    }
    return out;
  };
  write_text(dir / "train.csv", body(train_rows, false));
  write_text(dir / "test.csv", body(test_rows, true));
  const auto ds = load_dataset(dir / "train.csv", dir / "test.csv");
  EXPECT_EQ(ds.num_channels(), 51u);
  EXPECT_EQ(ds.train.rows(), 47515u);
  EXPECT_EQ(ds.test.rows(), 44986u);
  const double rate = std::accumulate(ds.test_labels->begin(), ds.test_labels->end(), 0.0) /
                      static_cast<double>(test_rows);
  EXPECT_NEAR(rate, 0.1197, 5e-5);
}

TEST(MedianDownsample, StrideOneIsIdentity) {
  const Matrix m(3, 2, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(median_downsample(m, 1), m);
}

TEST(MedianDownsample, BlockMedianMatchesSortOracle) {
  EXPECT_EQ(median_downsample(Matrix(3, 1, {1, 2, 100}), 3)(0, 0), 2.0);
  oracle::Gen g(11);
  const Matrix m = g.matrix(23, 3);
  const Matrix d = median_downsample(m, 4);
  ASSERT_EQ(d.rows(), 6u);
  for (std::size_t b = 0; b < 6; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> block;
      for (std::size_t r = b * 4; r < std::min<std::size_t>(23, b * 4 + 4); ++r) block.push_back(m(r, c));
      std::sort(block.begin(), block.end());
      const std::size_t n = block.size();
      const double med = n % 2 ? block[n / 2] : 0.5 * (block[n / 2 - 1] + block[n / 2]);
      EXPECT_DOUBLE_EQ(d(b, c), med);
    }
  }
}

TEST(MedianDownsample, EmptySeriesRejected) {
  EXPECT_THROW(median_downsample(Matrix(), 2), ContractError);
}

TEST(DownsampleLabels, MaxRule) {
  EXPECT_EQ(downsample_labels({0, 1, 0}, 3), (std::vector<int>{1}));
  EXPECT_EQ(downsample_labels({0, 0, 0, 1, 0}, 3), (std::vector<int>{0, 1}));
}

// Segments survive downsampling: the set of blocks that touch a segment is
// exactly the set of downsampled positive labels.
TEST(DownsampleLabels, CommutesWithSegmentLabeling) {
  oracle::Gen g(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> labels(g.index(5, 60), 0);
    for (int s = 0; s < 3; ++s) {
      const std::size_t a = g.index(0, labels.size() - 1), len = g.index(1, 6);
      for (std::size_t t = a; t < std::min(labels.size(), a + len); ++t) labels[t] = 1;
    }
    const std::size_t stride = g.index(1, 5);
    std::vector<int> expect((labels.size() + stride - 1) / stride, 0);
    for (const auto& [first, last] : label_segments(labels))
      for (std::size_t t = first; t <= last; ++t) expect[t / stride] = 1;
    EXPECT_EQ(downsample_labels(labels, stride), expect);
  }
}

TEST(Scaler, MinMaxCases) {
  const Matrix train(3, 2, {0, 3, 5, 3, 10, 3});
  const auto s = MinMaxScaler::fit(train);
  EXPECT_EQ(s.apply(train), Matrix(3, 2, {0, 0, 0.5, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(s.apply(Matrix(1, 2, {12, 3}))(0, 0), 1.2);
}

TEST(Scaler, UnfittedRejected) {
  EXPECT_THROW(MinMaxScaler{}.apply(Matrix(1, 1)), ContractError);
}

TEST(Scaler, FittedOnTrainOnly) {
  auto ds = generate_synthetic_clean([] {
    SyntheticSpec s;
    s.train_length = 300;
    s.test_length = 100;
    s.anomaly_rate = 0.0;
    return s;
  }());
  const auto before = MinMaxScaler::fit(ds.train);
  for (double& v : ds.test.data()) v = 1e9;  // poison
  const auto scaled = scale_dataset(ds);
  EXPECT_EQ(scaled.scaler.min, before.min);
  EXPECT_EQ(scaled.scaler.max, before.max);
}

TEST(SplitValidation, ChronologicalTail) {
  Matrix m(100, 1);
  for (std::size_t r = 0; r < 100; ++r) m(r, 0) = static_cast<double>(r);
  auto [tr, val] = split_validation(m, 0.1);
  EXPECT_EQ(tr.rows(), 90u);
  EXPECT_EQ(val.rows(), 10u);
  EXPECT_EQ(val(0, 0), 90.0);
  Matrix joined = tr;
  for (std::size_t r = 0; r < val.rows(); ++r) joined.append_row(val.row(r));
  EXPECT_EQ(joined, m);

  auto [tr2, val2] = split_validation(m.slice_rows(0, 10), 0.3);
  EXPECT_EQ(val2.rows(), 3u);
  EXPECT_EQ(val2(0, 0), 7.0);  // rows 8-10, 1-based
}

TEST(SplitValidation, RatioOutOfRange) {
  EXPECT_THROW(split_validation(Matrix(10, 1), 0.0), ContractError);
  EXPECT_THROW(split_validation(Matrix(10, 1), 1.0), ContractError);
}

TEST(Windows, CountsAndFirstPair) {
  Matrix m(10, 2);
  for (std::size_t r = 0; r < 10; ++r) m(r, 0) = m(r, 1) = static_cast<double>(r + 1);
  WindowStream s(m, 3, 4);
  EXPECT_EQ(s.num_pairs(), 7u);
  EXPECT_EQ(s.num_batches(), 2u);
  const WindowBatch b = s.batch(0);
  // inputs [batch, 1, node, time]: rows 1..3, target row 4
  EXPECT_EQ(std::vector<double>(b.inputs.begin(), b.inputs.begin() + 3),
            (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(b.targets[0], 4.0);
  EXPECT_EQ(b.end_indices[0], 3u);
}

TEST(Windows, TargetsEnumerateEachRowOnce) {
  Matrix m(37, 1);
  for (std::size_t seed : {0, 1}) {
    WindowStream s(m, 5, 8, seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
    std::vector<std::size_t> seen;
    for (std::size_t b = 0; b < s.num_batches(); ++b) {
      const auto batch = s.batch(b);
      seen.insert(seen.end(), batch.end_indices.begin(), batch.end_indices.end());
    }
    if (!seed) EXPECT_TRUE(std::is_sorted(seen.begin(), seen.end()));
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> expect(32);
    std::iota(expect.begin(), expect.end(), 5);
    EXPECT_EQ(seen, expect);
  }
}

TEST(Windows, ShuffleReproducible) {
  Matrix m(50, 1);
  WindowStream a(m, 3, 5, 42), b(m, 3, 5, 42);
  EXPECT_EQ(a.batch(2).end_indices, b.batch(2).end_indices);
}

TEST(Windows, TooShortRejected) {
  EXPECT_THROW(WindowStream(Matrix(3, 1), 3, 2), ContractError);
}

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s = benchmark_spec();
  s.train_length = 2000;
  s.test_length = 1500;
  return s;
}

}  // namespace

TEST(Synthetic, ZeroRateGivesNoLabels) {
  SyntheticSpec s = small_spec();
  s.anomaly_rate = 0.0;
  const auto ds = generate_synthetic(s);
  EXPECT_TRUE(std::all_of(ds.test_labels->begin(), ds.test_labels->end(), [](int v) { return v == 0; }));
  EXPECT_TRUE(ds.root_causes.empty());
}

TEST(Synthetic, DeterministicInSeed) {
  const auto a = generate_synthetic(small_spec());
  const auto b = generate_synthetic(small_spec());
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.test_labels, b.test_labels);
  EXPECT_EQ(a.root_causes, b.root_causes);
  SyntheticSpec other = small_spec();
  other.seed += 1;
  EXPECT_NE(generate_synthetic(other).train, a.train);
}

TEST(Synthetic, AnomaliesOnlyInTestSpan) {
  const auto anomalous = generate_synthetic(small_spec());
  const auto clean = generate_synthetic_clean(small_spec());
  EXPECT_EQ(anomalous.train, clean.train);
  const auto segments = label_segments(*anomalous.test_labels);
  EXPECT_EQ(segments.size(), anomalous.root_causes.size());
  // Rows outside segments may differ only through lagged propagation, which
  // the inter-segment gap bounds; the first row of the test span is clean.
  for (std::size_t c = 0; c < clean.test.cols(); ++c)
    EXPECT_EQ(anomalous.test(0, c), clean.test(0, c));
}

TEST(Synthetic, CorrelationBreakBlamesHiddenRoot) {
  SyntheticSpec s = small_spec();
  s.anomaly_types = {AnomalyType::CorrelationBreak};
  const auto anomalous = generate_synthetic(s);
  const auto clean = generate_synthetic_clean(s);
  const auto segments = label_segments(*anomalous.test_labels);
  ASSERT_FALSE(segments.empty());
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const std::size_t root = *anomalous.root_causes.at(k).begin();
    double root_dev = 0.0, leaf_dev = 0.0;
    for (std::size_t t = segments[k].first; t <= segments[k].second; ++t) {
      root_dev += std::abs(anomalous.test(t, root) - clean.test(t, root));
      for (const auto& e : s.edges)
        if (e.source == root) leaf_dev += std::abs(anomalous.test(t, e.target) - clean.test(t, e.target));
    }
    EXPECT_EQ(root_dev, 0.0) << "segment " << k;  // root reading stays normal
    EXPECT_GT(leaf_dev, 0.0) << "segment " << k;  // symptoms deviate
  }
}

TEST(Synthetic, LagViolationLeavesSourceMarginal) {
  SyntheticSpec s;
  s.channels = 2;
  s.edges = parse_edges("1>0:2:0.9");  // C2 -> C1
  s.anomaly_types = {AnomalyType::LagViolation};
  s.train_length = 1000;
  s.test_length = 3000;
  s.min_segment = s.max_segment = 500;
  s.anomaly_rate = 1000.0 / 3000.0;
  s.seed = 3;
  const auto anomalous = generate_synthetic(s);
  const auto clean = generate_synthetic_clean(s);
  const auto segments = label_segments(*anomalous.test_labels);
  ASSERT_EQ(segments.size(), 2u);
  for (const auto& [first, last] : segments) {
    std::vector<double> a, b, ta, tb;
    for (std::size_t t = first; t <= last; ++t) {
      a.push_back(anomalous.test(t, 1));
      b.push_back(clean.test(t, 1));
      ta.push_back(anomalous.test(t, 0));
      tb.push_back(clean.test(t, 0));
    }
    EXPECT_LT(oracle::ks_statistic(a, b), 0.1);
    EXPECT_NE(ta, tb);  // the target does move
  }
}

TEST(Synthetic, ZeroLagCycleRejected) {
  SyntheticSpec s;
  s.channels = 3;
  s.edges = parse_edges("0>1:0:0.5,1>2:0:0.5,2>0:0:0.5");
  EXPECT_THROW(generate_synthetic(s), SpecError);
}

TEST(Synthetic, WriteAndReadBack) {
  test::TempDir dir;
  const auto spec = small_spec();
  const auto ds = generate_synthetic(spec);
  write_synthetic(dir.path(), ds, spec);
  LoadOptions opt;
  opt.metadata_path = dir / "metadata.txt";
  const auto back = load_dataset(dir / "train.csv", dir / "test.csv", opt);
  EXPECT_EQ(back.train, ds.train);
  EXPECT_EQ(back.test, ds.test);
  EXPECT_EQ(back.test_labels, ds.test_labels);
  EXPECT_EQ(back.root_causes, ds.root_causes);
}

TEST(Synthetic, EdgeTextRoundTrip) {
  const auto edges = parse_edges("0>1:2:0.8,5>6:0:-1.25");
  EXPECT_EQ(parse_edges(format_edges(edges)).size(), 2u);
  EXPECT_EQ(parse_edges(format_edges(edges))[1].gain, -1.25);
  EXPECT_THROW(parse_edges("0-1"), SpecError);
}

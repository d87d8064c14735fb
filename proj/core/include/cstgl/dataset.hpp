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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cstgl/matrix.hpp"

namespace cstgl {

// Per-channel min-max scaler. Channels with zero range on the fitting data
// keep unit scale, so they map to 0 there and keep test deviations visible.
struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;

  bool fitted() const { return !min.empty(); }
  static MinMaxScaler fit(const Matrix& train);
  Matrix apply(const Matrix& series) const;
};

// Maps anomaly-segment index (chronological order in the test labels) to the
// set of channels that caused it.
using RootCauseMap = std::map<std::size_t, std::set<std::size_t>>;

struct TimeSeriesDataset {
  std::vector<std::string> channel_names;
  Matrix train;
  Matrix test;
  std::optional<std::vector<int>> test_labels;
  RootCauseMap root_causes;
  double sample_interval_seconds = 1.0;
  MinMaxScaler scaler;

  std::size_t num_channels() const { return channel_names.size(); }
  // Throws ContractError if the documented invariants do not hold.
  void validate() const;
};

// One parsed CSV file: header names, numeric body, optional label column.
struct CsvTable {
  std::vector<std::string> names;
  Matrix values;
  std::optional<std::vector<int>> labels;
};

// Reads a CSV with a header row. A column named `label_column` (if present)
// is split off as 0/1 labels. Errors cite the 1-based data row.
CsvTable read_csv(const std::filesystem::path& path,
                  const std::string& label_column = "label");
// Single-column 0/1 file, optionally with a header line.
std::vector<int> read_label_file(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& names, const Matrix& values,
               const std::optional<std::vector<int>>& labels = std::nullopt);

enum class SkipScope { TrainOnly, TrainAndTest };

struct LoadOptions {
  // Sibling single-column label file for the test split; when unset the
  // test CSV's "label" column is used, if any.
  std::optional<std::filesystem::path> label_path;
  std::string label_column = "label";
  double sample_interval_seconds = 1.0;
  // Leading raw samples dropped before downsampling (21,600 for SWaT/WADI).
  std::size_t skip_initial = 0;
  SkipScope skip_scope = SkipScope::TrainOnly;
  std::size_t downsample_stride = 1;
  // Optional key=value file carrying root causes (as written by
  // write_synthetic).
  std::optional<std::filesystem::path> metadata_path;
};

// Loads train/test CSVs, applies skipping and median downsampling, and fits
// the scaler on the (processed) train split. The returned values are NOT
// scaled; call scale_dataset for that.
TimeSeriesDataset load_dataset(const std::filesystem::path& train_path,
                               const std::filesystem::path& test_path,
                               const LoadOptions& options = {});

// Per-channel median over consecutive blocks of `stride` rows; the trailing
// partial block uses the median of what remains.
Matrix median_downsample(const Matrix& series, std::size_t stride);
// Any anomaly in a block marks the block.
std::vector<int> downsample_labels(const std::vector<int>& labels,
                                   std::size_t stride);

// Fits the scaler on train and rescales both splits.
TimeSeriesDataset scale_dataset(TimeSeriesDataset dataset);

// Chronological split: validation is the last floor(ratio * rows) rows.
std::pair<Matrix, Matrix> split_validation(const Matrix& train, double ratio);

// Maximal runs of 1-labels as inclusive [first, last] index pairs.
std::vector<std::pair<std::size_t, std::size_t>> label_segments(
    const std::vector<int>& labels);

struct WindowBatch {
  std::size_t batch = 0;
  std::size_t nodes = 0;
  std::size_t window = 0;
  // [batch, 1, nodes, window]
  std::vector<double> inputs;
  // [batch, nodes]
  std::vector<double> targets;
  // Row index of each target within the source series.
  std::vector<std::size_t> end_indices;
};

// (window -> next row) pairs over a single split. Targets enumerate rows
// w..T-1 exactly once; order is chronological unless a shuffle seed is set.
class WindowStream {
 public:
  WindowStream(const Matrix& series, std::size_t window, std::size_t batch_size,
               std::optional<std::uint64_t> shuffle_seed = std::nullopt);

  std::size_t num_pairs() const { return targets_.size(); }
  std::size_t num_batches() const;
  WindowBatch batch(std::size_t index) const;
  // Reshuffles for a new epoch (no-op when unshuffled).
  void reshuffle(std::uint64_t seed);

 private:
  const Matrix* series_;
  std::size_t window_;
  std::size_t batch_size_;
  bool shuffled_;
  std::vector<std::size_t> targets_;
};

// ---- synthetic data -------------------------------------------------------

struct DependencyEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  std::size_t lag = 1;
  double gain = 1.0;
};

enum class AnomalyType { PointSpike, CorrelationBreak, LagViolation };

std::string to_string(AnomalyType type);
AnomalyType parse_anomaly_type(const std::string& name);

struct SyntheticSpec {
  std::size_t channels = 8;
  std::size_t train_length = 20000;
  std::size_t test_length = 5000;
  std::vector<DependencyEdge> edges;
  std::vector<AnomalyType> anomaly_types;
  double anomaly_rate = 0.05;
  std::size_t min_segment = 20;
  std::size_t max_segment = 60;
  // Minimum clean gap before the first and between anomaly segments.
  std::size_t min_gap = 60;
  // Stationary standard deviation of each channel's AR(1) component.
  double noise = 0.05;
  double spike_magnitude = 4.0;
  double sample_interval_seconds = 10.0;
  std::uint64_t seed = 0;
};

// Bundled benchmark: 8 channels, 20,000 train / 5,000 test rows, 5 %
// anomalies cycling through all three types, a 4-leaf star rooted at c0 plus
// the chain c5 -> c6 -> c7, AR noise 0.3 so dependents are predictable only
// through their sources, fixed seed.
SyntheticSpec benchmark_spec();

// "0>1:2:0.8,0>2:1:0.9" (source>target:lag:gain).
std::vector<DependencyEdge> parse_edges(const std::string& text);
std::string format_edges(const std::vector<DependencyEdge>& edges);

// Deterministic in `spec.seed`. Anomalies are confined to the test span.
// Point spikes offset one sensor's readings by +-spike_magnitude standard
// deviations, with a fresh random sign at every step of the segment.
// Correlation breaks drive the dependents of a hidden root with a mirrored
// copy of its signal while the root's own reading stays normal; the root is recorded as cause. Lag
// violations make an edge's target follow its source with the wrong lag; the
// target is recorded as cause and the source is untouched.
TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec);
// Same series with every anomaly suppressed (shared noise draws).
TimeSeriesDataset generate_synthetic_clean(const SyntheticSpec& spec);

// Writes train.csv, test.csv (with label column) and metadata.txt.
void write_synthetic(const std::filesystem::path& directory,
                     const TimeSeriesDataset& dataset, const SyntheticSpec& spec);
RootCauseMap read_root_causes(const std::filesystem::path& metadata_path);
std::map<std::string, std::string> read_key_values(
    const std::filesystem::path& path);

}  // namespace cstgl

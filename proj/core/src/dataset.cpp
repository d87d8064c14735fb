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

#include "cstgl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "cstgl/errors.hpp"
#include "cstgl/text.hpp"

namespace cstgl {

namespace {

using text::parse_double;
using text::split;
using text::trim;

int parse_label(const std::string& cell, std::size_t row,
                const std::filesystem::path& path) {
  const auto v = parse_double(cell);
  if (!v || (*v != 0.0 && *v != 1.0)) {
    throw IngestionError(path.string() + ": data row " + std::to_string(row) +
                         ": label '" + cell + "' is not 0 or 1");
  }
  return *v == 1.0 ? 1 : 0;
}

using text::format_double;

double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

// ---------------------------------------------------------------------------
// scaler and dataset

MinMaxScaler MinMaxScaler::fit(const Matrix& train) {
  if (train.rows() == 0) throw ContractError("MinMaxScaler::fit: empty train split");
  MinMaxScaler s;
  s.min.assign(train.cols(), 0.0);
  s.max.assign(train.cols(), 0.0);
  for (std::size_t c = 0; c < train.cols(); ++c) {
    double lo = train(0, c), hi = train(0, c);
    for (std::size_t r = 1; r < train.rows(); ++r) {
      lo = std::min(lo, train(r, c));
      hi = std::max(hi, train(r, c));
    }
    s.min[c] = lo;
    s.max[c] = hi;
  }
  return s;
}

Matrix MinMaxScaler::apply(const Matrix& series) const {
  if (!fitted()) throw ContractError("MinMaxScaler::apply: scaler is not fitted");
  if (series.cols() != min.size()) {
    throw DimensionError("MinMaxScaler::apply: " + std::to_string(series.cols()) +
                         " channels, scaler fitted on " + std::to_string(min.size()));
  }
  Matrix out = series;
  for (std::size_t c = 0; c < series.cols(); ++c) {
    const double range = max[c] - min[c];
    const double inv = range > 0.0 ? 1.0 / range : 1.0;
    for (std::size_t r = 0; r < series.rows(); ++r) {
      out(r, c) = (series(r, c) - min[c]) * inv;
    }
  }
  return out;
}

void TimeSeriesDataset::validate() const {
  const std::size_t n = num_channels();
  if (train.cols() != n || test.cols() != n) {
    throw ContractError("dataset: train has " + std::to_string(train.cols()) +
                        " channels, test has " + std::to_string(test.cols()) +
                        ", names list " + std::to_string(n));
  }
  if (test_labels) {
    if (test_labels->size() != test.rows()) {
      throw ContractError("dataset: " + std::to_string(test_labels->size()) +
                          " labels for " + std::to_string(test.rows()) +
                          " test rows");
    }
    for (int v : *test_labels) {
      if (v != 0 && v != 1) throw ContractError("dataset: labels must be 0 or 1");
    }
  }
  if (!(sample_interval_seconds > 0.0)) {
    throw ContractError("dataset: sample interval must be positive");
  }
  for (const auto& [segment, causes] : root_causes) {
    for (std::size_t c : causes) {
      if (c >= n) {
        throw ContractError("dataset: root cause channel " + std::to_string(c) +
                            " of segment " + std::to_string(segment) +
                            " is out of range");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// CSV

CsvTable read_csv(const std::filesystem::path& path,
                  const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path.string() + ": empty file");
  const auto header = split(line, ',');
  CsvTable table;
  std::optional<std::size_t> label_index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_index = i;
    } else {
      table.names.push_back(header[i]);
    }
  }
  if (label_index) table.labels.emplace();
  table.values = Matrix(0, table.names.size());

  std::vector<double> row(table.names.size());
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++data_row;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw IngestionError(path.string() + ": data row " + std::to_string(data_row) +
                           " has " + std::to_string(cells.size()) +
                           " cells, header has " + std::to_string(header.size()));
    }
    std::size_t out = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (label_index && i == *label_index) {
        table.labels->push_back(parse_label(cells[i], data_row, path));
        continue;
      }
      const auto v = parse_double(cells[i]);
      if (!v) {
        throw IngestionError(path.string() + ": data row " +
                             std::to_string(data_row) + ", column '" + header[i] +
                             "': non-numeric cell '" + cells[i] + "'");
      }
      row[out++] = *v;
    }
    table.values.append_row(row);
  }
  return table;
}

std::vector<int> read_label_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  bool first = true;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    const std::string cell = trim(line);
    if (cell.empty()) continue;
    if (first && !parse_double(cell)) {
      first = false;  // header line
      continue;
    }
    first = false;
    labels.push_back(parse_label(cell, ++data_row, path));
  }
  return labels;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& names, const Matrix& values,
               const std::optional<std::vector<int>>& labels) {
  if (names.size() != values.cols()) {
    throw DimensionError("write_csv: " + std::to_string(names.size()) +
                         " names for " + std::to_string(values.cols()) + " columns");
  }
  if (labels && labels->size() != values.rows()) {
    throw DimensionError("write_csv: label count does not match row count");
  }
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  if (labels) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < values.cols(); ++c) {
      out << (c ? "," : "") << format_double(values(r, c));
    }
    if (labels) out << ',' << (*labels)[r];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// preprocessing

Matrix median_downsample(const Matrix& series, std::size_t stride) {
  if (stride == 0) throw ContractError("median_downsample: stride must be >= 1");
  if (series.rows() == 0) throw ContractError("median_downsample: empty series");
  if (stride == 1) return series;
  const std::size_t blocks = (series.rows() + stride - 1) / stride;
  Matrix out(blocks, series.cols());
  std::vector<double> buf;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t begin = b * stride;
    const std::size_t end = std::min(series.rows(), begin + stride);
    for (std::size_t c = 0; c < series.cols(); ++c) {
      buf.clear();
      for (std::size_t r = begin; r < end; ++r) buf.push_back(series(r, c));
      out(b, c) = median_of(buf);
    }
  }
  return out;
}

std::vector<int> downsample_labels(const std::vector<int>& labels,
                                   std::size_t stride) {
  if (stride == 0) throw ContractError("downsample_labels: stride must be >= 1");
  if (labels.empty()) throw ContractError("downsample_labels: empty labels");
  std::vector<int> out;
  for (std::size_t begin = 0; begin < labels.size(); begin += stride) {
    const std::size_t end = std::min(labels.size(), begin + stride);
    out.push_back(*std::max_element(labels.begin() + begin, labels.begin() + end));
  }
  return out;
}

TimeSeriesDataset load_dataset(const std::filesystem::path& train_path,
                               const std::filesystem::path& test_path,
                               const LoadOptions& options) {
  CsvTable train = read_csv(train_path, options.label_column);
  CsvTable test = read_csv(test_path, options.label_column);
  if (train.names != test.names) {
    throw IngestionError(test_path.string() + ": header does not match " +
                         train_path.string());
  }
  std::optional<std::vector<int>> labels = test.labels;
  if (options.label_path) labels = read_label_file(*options.label_path);
  if (labels && labels->size() != test.values.rows()) {
    throw IngestionError((options.label_path ? *options.label_path : test_path).string() +
                         ": " + std::to_string(labels->size()) + " labels for " +
                         std::to_string(test.values.rows()) + " test rows");
  }

  auto skip = [&](Matrix& m, std::optional<std::vector<int>>* l, const char* what) {
    if (options.skip_initial == 0) return;
    if (options.skip_initial >= m.rows()) {
      throw IngestionError(std::string("cannot skip ") +
                           std::to_string(options.skip_initial) + " rows of a " +
                           std::to_string(m.rows()) + "-row " + what + " split");
    }
    m = m.slice_rows(options.skip_initial, m.rows());
    if (l && *l) (*l)->erase((*l)->begin(), (*l)->begin() + options.skip_initial);
  };
  skip(train.values, nullptr, "train");
  if (options.skip_scope == SkipScope::TrainAndTest) skip(test.values, &labels, "test");

  TimeSeriesDataset ds;
  ds.channel_names = train.names;
  ds.train = median_downsample(train.values, options.downsample_stride);
  ds.test = median_downsample(test.values, options.downsample_stride);
  if (labels) ds.test_labels = downsample_labels(*labels, options.downsample_stride);
  ds.sample_interval_seconds =
      options.sample_interval_seconds * static_cast<double>(options.downsample_stride);
  if (options.metadata_path) ds.root_causes = read_root_causes(*options.metadata_path);
  ds.scaler = MinMaxScaler::fit(ds.train);
  ds.validate();
  return ds;
}

TimeSeriesDataset scale_dataset(TimeSeriesDataset dataset) {
  dataset.scaler = MinMaxScaler::fit(dataset.train);
  dataset.train = dataset.scaler.apply(dataset.train);
  dataset.test = dataset.scaler.apply(dataset.test);
  return dataset;
}

std::pair<Matrix, Matrix> split_validation(const Matrix& train, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ContractError("split_validation: ratio must lie in (0, 1)");
  }
  const auto n_val =
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(train.rows())));
  const std::size_t cut = train.rows() - n_val;
  return {train.slice_rows(0, cut), train.slice_rows(cut, train.rows())};
}

std::vector<std::pair<std::size_t, std::size_t>> label_segments(
    const std::vector<int>& labels) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    std::size_t j = i;
    while (j + 1 < labels.size() && labels[j + 1] == 1) ++j;
    out.emplace_back(i, j);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// windows

WindowStream::WindowStream(const Matrix& series, std::size_t window,
                           std::size_t batch_size,
                           std::optional<std::uint64_t> shuffle_seed)
    : series_(&series), window_(window), batch_size_(batch_size),
      shuffled_(shuffle_seed.has_value()) {
  if (window == 0) throw ContractError("windows: window length must be >= 1");
  if (batch_size == 0) throw ContractError("windows: batch size must be >= 1");
  if (series.rows() < window + 1) {
    throw ContractError("windows: series of " + std::to_string(series.rows()) +
                        " rows is shorter than window + 1 = " +
                        std::to_string(window + 1));
  }
  targets_.resize(series.rows() - window);
  std::iota(targets_.begin(), targets_.end(), window);
  if (shuffle_seed) reshuffle(*shuffle_seed);
}

std::size_t WindowStream::num_batches() const {
  return (targets_.size() + batch_size_ - 1) / batch_size_;
}

void WindowStream::reshuffle(std::uint64_t seed) {
  if (!shuffled_) return;
  std::sort(targets_.begin(), targets_.end());
  std::mt19937_64 rng(seed);
  std::shuffle(targets_.begin(), targets_.end(), rng);
}

WindowBatch WindowStream::batch(std::size_t index) const {
  if (index >= num_batches()) throw ContractError("windows: batch index out of range");
  const std::size_t begin = index * batch_size_;
  const std::size_t end = std::min(targets_.size(), begin + batch_size_);
  const Matrix& s = *series_;
  WindowBatch b;
  b.batch = end - begin;
  b.nodes = s.cols();
  b.window = window_;
  b.inputs.resize(b.batch * b.nodes * b.window);
  b.targets.resize(b.batch * b.nodes);
  for (std::size_t k = 0; k < b.batch; ++k) {
    const std::size_t target = targets_[begin + k];
    b.end_indices.push_back(target);
    for (std::size_t n = 0; n < b.nodes; ++n) {
      for (std::size_t t = 0; t < window_; ++t) {
        b.inputs[(k * b.nodes + n) * window_ + t] = s(target - window_ + t, n);
      }
      b.targets[k * b.nodes + n] = s(target, n);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// synthetic generator

std::string to_string(AnomalyType type) {
  switch (type) {
    case AnomalyType::PointSpike: return "point_spike";
    case AnomalyType::CorrelationBreak: return "correlation_break";
    case AnomalyType::LagViolation: return "lag_violation";
  }
  return "unknown";
}

AnomalyType parse_anomaly_type(const std::string& name) {
  if (name == "point_spike") return AnomalyType::PointSpike;
  if (name == "correlation_break") return AnomalyType::CorrelationBreak;
  if (name == "lag_violation") return AnomalyType::LagViolation;
  throw SpecError("unknown anomaly type '" + name + "'");
}

std::vector<DependencyEdge> parse_edges(const std::string& text) {
  std::vector<DependencyEdge> edges;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    DependencyEdge e;
    const auto gt = item.find('>');
    const auto c1 = item.find(':', gt == std::string::npos ? 0 : gt);
    const auto c2 = c1 == std::string::npos ? c1 : item.find(':', c1 + 1);
    if (gt == std::string::npos || c1 == std::string::npos || c2 == std::string::npos) {
      throw SpecError("edge '" + item + "' is not of the form source>target:lag:gain");
    }
    const auto src = parse_double(item.substr(0, gt));
    const auto dst = parse_double(item.substr(gt + 1, c1 - gt - 1));
    const auto lag = parse_double(item.substr(c1 + 1, c2 - c1 - 1));
    const auto gain = parse_double(item.substr(c2 + 1));
    if (!src || !dst || !lag || !gain || *src < 0 || *dst < 0 || *lag < 0) {
      throw SpecError("edge '" + item + "' has invalid fields");
    }
    e.source = static_cast<std::size_t>(*src);
    e.target = static_cast<std::size_t>(*dst);
    e.lag = static_cast<std::size_t>(*lag);
    e.gain = *gain;
    edges.push_back(e);
  }
  return edges;
}

std::string format_edges(const std::vector<DependencyEdge>& edges) {
  std::string out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(edges[i].source) + '>' + std::to_string(edges[i].target) +
           ':' + std::to_string(edges[i].lag) + ':' + format_double(edges[i].gain);
  }
  return out;
}

namespace {

struct PlannedAnomaly {
  std::size_t start = 0;  // absolute row index in the full series
  std::size_t length = 0;
  AnomalyType type = AnomalyType::PointSpike;
  std::size_t channel = 0;   // spiked channel or hidden root
  std::size_t edge = 0;      // violated edge
  std::vector<double> signs;  // per-step spike direction
};

// Channel evaluation order for one time step: zero-lag edges must be
// resolved source-first; a zero-lag cycle is unsatisfiable.
std::vector<std::size_t> zero_lag_order(const SyntheticSpec& spec) {
  const std::size_t n = spec.channels;
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& e : spec.edges)
    if (e.lag == 0) ++indegree[e.target];
  std::vector<std::size_t> order, ready;
  for (std::size_t i = n; i-- > 0;)
    if (indegree[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    const std::size_t i = ready.back();
    ready.pop_back();
    order.push_back(i);
    for (const auto& e : spec.edges) {
      if (e.lag == 0 && e.source == i && --indegree[e.target] == 0) {
        ready.push_back(e.target);
      }
    }
  }
  if (order.size() != n) {
    throw SpecError("dependency edges contain a cycle with zero total lag");
  }
  return order;
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.channels == 0) throw SpecError("synthetic: channel count must be >= 1");
  if (spec.train_length == 0 || spec.test_length == 0) {
    throw SpecError("synthetic: train and test lengths must be positive");
  }
  if (!(spec.anomaly_rate >= 0.0 && spec.anomaly_rate < 1.0)) {
    throw SpecError("synthetic: anomaly rate must lie in [0, 1)");
  }
  if (spec.min_segment == 0 || spec.max_segment < spec.min_segment) {
    throw SpecError("synthetic: invalid segment length range");
  }
  for (const auto& e : spec.edges) {
    if (e.source >= spec.channels || e.target >= spec.channels) {
      throw SpecError("synthetic: edge " + std::to_string(e.source) + ">" +
                      std::to_string(e.target) + " references a missing channel");
    }
    if (e.source == e.target && e.lag == 0) {
      throw SpecError("dependency edges contain a cycle with zero total lag");
    }
  }
  if (spec.anomaly_rate > 0.0 && spec.anomaly_types.empty()) {
    throw SpecError("synthetic: positive anomaly rate but no anomaly types");
  }
}

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec)
      : spec_(spec), length_(spec.train_length + spec.test_length),
        order_(zero_lag_order(spec)) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t n = spec.channels;
    has_parent_.assign(n, false);
    for (const auto& e : spec.edges) has_parent_[e.target] = true;
    own_ = Matrix(length_, n);
    period_.resize(n);
    constexpr double kTwoPi = 6.283185307179586;
    for (std::size_t c = 0; c < n; ++c) {
      const double p1 = 30.0 + 90.0 * unit(rng);
      const double p2 = 100.0 + 300.0 * unit(rng);
      const double a1 = 0.6 + 0.4 * unit(rng);
      const double a2 = 0.2 + 0.3 * unit(rng);
      const double ph1 = kTwoPi * unit(rng);
      const double ph2 = kTwoPi * unit(rng);
      const double amp = has_parent_[c] ? 0.3 : 1.0;
      period_[c] = p1;
      double ar = 0.0;
      constexpr double kRho = 0.8;
      const double innovation = spec.noise * std::sqrt(1.0 - kRho * kRho);
      for (std::size_t t = 0; t < length_; ++t) {
        ar = kRho * ar + innovation * gauss(rng);
        const double tt = static_cast<double>(t);
        own_(t, c) = amp * (a1 * std::sin(kTwoPi * tt / p1 + ph1) +
                            a2 * std::sin(kTwoPi * tt / p2 + ph2)) +
                     ar;
      }
    }
    plan_anomalies(rng);
  }

  // Physical propagation; `inject` toggles the planned anomalies.
  Matrix run(bool inject) const {
    const std::size_t n = spec_.channels;
    Matrix physical(length_, n), reported(length_, n);
    std::vector<const PlannedAnomaly*> active(length_, nullptr);
    if (inject) {
      for (const auto& a : anomalies_)
        for (std::size_t t = a.start; t < a.start + a.length; ++t) active[t] = &a;
    }
    for (std::size_t t = 0; t < length_; ++t) {
      const PlannedAnomaly* a = active[t];
      for (std::size_t c : order_) {
        double v = own_(t, c);
        for (std::size_t k = 0; k < spec_.edges.size(); ++k) {
          const auto& e = spec_.edges[k];
          if (e.target != c) continue;
          std::size_t lag = e.lag;
          if (a && a->type == AnomalyType::LagViolation && a->edge == k) {
            lag += lag_shift(e.source);
          }
          const double src = t >= lag ? physical(t - lag, e.source) : 0.0;
          v += e.gain * src;
        }
        physical(t, c) = v;
        reported(t, c) = v;
        if (a && a->channel == c) {
          if (a->type == AnomalyType::PointSpike) {
            reported(t, c) = v + a->signs[t - a->start] * spec_.spike_magnitude * std_[c];
          } else if (a->type == AnomalyType::CorrelationBreak) {
            physical(t, c) = 2.0 * mean_[c] - v;
          }
        }
      }
    }
    return reported;
  }

  // Clean-run statistics over the train span, used to size anomalies.
  void calibrate() {
    const Matrix clean = run(false);
    const std::size_t n = spec_.channels;
    mean_.assign(n, 0.0);
    std_.assign(n, 0.0);
    const double count = static_cast<double>(spec_.train_length);
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0, sq = 0.0;
      for (std::size_t t = 0; t < spec_.train_length; ++t) {
        s += clean(t, c);
        sq += clean(t, c) * clean(t, c);
      }
      mean_[c] = s / count;
      std_[c] = std::sqrt(std::max(0.0, sq / count - mean_[c] * mean_[c]));
    }
  }

  TimeSeriesDataset build(bool inject) const {
    const Matrix series = run(inject);
    TimeSeriesDataset ds;
    for (std::size_t c = 0; c < spec_.channels; ++c) {
      ds.channel_names.push_back("c" + std::to_string(c));
    }
    ds.train = series.slice_rows(0, spec_.train_length);
    ds.test = series.slice_rows(spec_.train_length, length_);
    std::vector<int> labels(spec_.test_length, 0);
    if (inject) {
      for (std::size_t k = 0; k < anomalies_.size(); ++k) {
        const auto& a = anomalies_[k];
        for (std::size_t t = a.start; t < a.start + a.length; ++t) {
          labels[t - spec_.train_length] = 1;
        }
        ds.root_causes[k] = {cause_of(a)};
      }
    }
    ds.test_labels = std::move(labels);
    ds.sample_interval_seconds = spec_.sample_interval_seconds;
    ds.scaler = MinMaxScaler::fit(ds.train);
    ds.validate();
    return ds;
  }

  const std::vector<PlannedAnomaly>& anomalies() const { return anomalies_; }

  std::size_t cause_of(const PlannedAnomaly& a) const {
    return a.type == AnomalyType::LagViolation ? spec_.edges[a.edge].target : a.channel;
  }

 private:
  std::size_t lag_shift(std::size_t source) const {
    return std::max<std::size_t>(3, static_cast<std::size_t>(period_[source] / 4.0));
  }

  void plan_anomalies(std::mt19937_64& rng) {
    const auto target_points = static_cast<std::size_t>(
        std::llround(spec_.anomaly_rate * static_cast<double>(spec_.test_length)));
    if (target_points == 0) return;
    std::uniform_int_distribution<std::size_t> seg_len(spec_.min_segment,
                                                       spec_.max_segment);
    std::vector<std::size_t> lengths;
    std::size_t total = 0;
    while (total < target_points) {
      const std::size_t l = std::min(seg_len(rng), target_points - total);
      lengths.push_back(l);
      total += l;
    }
    const std::size_t needed = total + lengths.size() * spec_.min_gap;
    if (needed > spec_.test_length) {
      throw SpecError("synthetic: anomaly rate too high to fit " +
                      std::to_string(lengths.size()) + " segments with gap " +
                      std::to_string(spec_.min_gap));
    }
    const std::size_t slack = spec_.test_length - needed;
    std::uniform_int_distribution<std::size_t> cut(0, slack);
    std::vector<std::size_t> cuts(lengths.size());
    for (auto& c : cuts) c = cut(rng);
    std::sort(cuts.begin(), cuts.end());

    std::vector<std::size_t> roots, lag_edges;
    for (std::size_t c = 0; c < spec_.channels; ++c) {
      for (const auto& e : spec_.edges) {
        if (e.source == c) {
          roots.push_back(c);
          break;
        }
      }
    }
    for (std::size_t k = 0; k < spec_.edges.size(); ++k) lag_edges.push_back(k);

    std::size_t cursor = spec_.train_length;
    std::size_t previous_cut = 0;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      cursor += spec_.min_gap + (cuts[k] - previous_cut);
      previous_cut = cuts[k];
      PlannedAnomaly a;
      a.start = cursor;
      a.length = lengths[k];
      a.type = spec_.anomaly_types[k % spec_.anomaly_types.size()];
      for (std::size_t t = 0; t < a.length; ++t) {
        a.signs.push_back(std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : -1.0);
      }
      switch (a.type) {
        case AnomalyType::PointSpike:
          a.channel = std::uniform_int_distribution<std::size_t>(0, spec_.channels - 1)(rng);
          break;
        case AnomalyType::CorrelationBreak:
          if (roots.empty()) {
            throw SpecError("synthetic: correlation_break needs a channel with dependents");
          }
          a.channel = roots[std::uniform_int_distribution<std::size_t>(0, roots.size() - 1)(rng)];
          break;
        case AnomalyType::LagViolation:
          if (lag_edges.empty()) throw SpecError("synthetic: lag_violation needs an edge");
          a.edge = lag_edges[std::uniform_int_distribution<std::size_t>(0, lag_edges.size() - 1)(rng)];
          a.channel = spec_.channels;  // no channel-level corruption
          break;
      }
      anomalies_.push_back(a);
      cursor += a.length;
    }
  }

  const SyntheticSpec& spec_;
  std::size_t length_;
  std::vector<std::size_t> order_;
  std::vector<bool> has_parent_;
  Matrix own_;
  std::vector<double> period_;
  std::vector<double> mean_;
  std::vector<double> std_;
  std::vector<PlannedAnomaly> anomalies_;
};

}  // namespace

SyntheticSpec benchmark_spec() {
  SyntheticSpec spec;
  spec.edges = parse_edges("0>1:2:0.8,0>2:3:0.7,0>3:1:0.9,0>4:4:0.6,5>6:2:0.8,6>7:3:0.7");
  spec.anomaly_types = {AnomalyType::PointSpike, AnomalyType::CorrelationBreak,
                        AnomalyType::LagViolation};
  spec.noise = 0.3;
  spec.seed = 7;
  return spec;
}

TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  Generator gen(spec);
  gen.calibrate();
  return gen.build(true);
}

TimeSeriesDataset generate_synthetic_clean(const SyntheticSpec& spec) {
  validate_spec(spec);
  Generator gen(spec);
  gen.calibrate();
  return gen.build(false);
}

void write_synthetic(const std::filesystem::path& directory,
                     const TimeSeriesDataset& dataset, const SyntheticSpec& spec) {
  std::filesystem::create_directories(directory);
  write_csv(directory / "train.csv", dataset.channel_names, dataset.train);
  write_csv(directory / "test.csv", dataset.channel_names, dataset.test,
            dataset.test_labels);
  std::ofstream meta(directory / "metadata.txt");
  if (!meta) throw IngestionError("cannot write " + (directory / "metadata.txt").string());
  std::string types;
  for (std::size_t i = 0; i < spec.anomaly_types.size(); ++i) {
    types += (i ? "," : "") + to_string(spec.anomaly_types[i]);
  }
  meta << "format = cstgl-synthetic-1\n"
       << "seed = " << spec.seed << '\n'
       << "channels = " << spec.channels << '\n'
       << "train_length = " << spec.train_length << '\n'
       << "test_length = " << spec.test_length << '\n'
       << "edges = " << format_edges(spec.edges) << '\n'
       << "anomaly_types = " << types << '\n'
       << "anomaly_rate = " << format_double(spec.anomaly_rate) << '\n'
       << "min_segment = " << spec.min_segment << '\n'
       << "max_segment = " << spec.max_segment << '\n'
       << "min_gap = " << spec.min_gap << '\n'
       << "noise = " << format_double(spec.noise) << '\n'
       << "spike_magnitude = " << format_double(spec.spike_magnitude) << '\n'
       << "sample_interval_seconds = " << format_double(spec.sample_interval_seconds)
       << '\n';
  const auto segments = dataset.test_labels ? label_segments(*dataset.test_labels)
                                            : decltype(label_segments({})){};
  meta << "segments = " << segments.size() << '\n';
  for (const auto& [segment, causes] : dataset.root_causes) {
    meta << "root_cause." << segment << " =";
    for (std::size_t c : causes) meta << ' ' << c;
    meta << '\n';
  }
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw IngestionError(path.string() + ": line " + std::to_string(line_no) +
                           " is not key = value");
    }
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

RootCauseMap read_root_causes(const std::filesystem::path& metadata_path) {
  RootCauseMap causes;
  const std::string prefix = "root_cause.";
  for (const auto& [key, value] : read_key_values(metadata_path)) {
    if (key.rfind(prefix, 0) != 0) continue;
    const auto segment = parse_double(key.substr(prefix.size()));
    if (!segment || *segment < 0) {
      throw IngestionError(metadata_path.string() + ": bad key '" + key + "'");
    }
    auto& set = causes[static_cast<std::size_t>(*segment)];
    std::istringstream in(value);
    std::string item;
    while (in >> item) {
      const auto c = parse_double(item);
      if (!c || *c < 0) {
        throw IngestionError(metadata_path.string() + ": bad channel '" + item +
                             "' in " + key);
      }
      set.insert(static_cast<std::size_t>(*c));
    }
  }
  return causes;
}

}  // namespace cstgl

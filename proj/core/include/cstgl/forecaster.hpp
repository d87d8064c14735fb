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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cstgl/graph_conv.hpp"
#include "cstgl/matrix.hpp"
#include "cstgl/mtcl.hpp"
#include "cstgl/temporal_conv.hpp"
#include "cstgl/tensor.hpp"

namespace cstgl {

enum class Ablation { None, NoMtcl, NoGcn, ModTcn, NoPca, NoStgnn };

std::string to_string(Ablation ablation);
Ablation parse_ablation(const std::string& name);

struct ModelConfig {
  std::size_t num_nodes = 0;
  std::size_t window = 5;
  std::size_t layers = 2;
  std::size_t residual_channels = 16;  // TCN and GCN output dims
  std::size_t skip_channels = 32;
  std::size_t end_channels = 64;
  std::size_t node_dim = 256;
  double saturation = 20.0;  // alpha
  std::size_t top_k = 15;
  std::size_t propagation_depth = 2;  // K
  double retain_ratio = 0.1;          // beta
  std::size_t dilation_base = 1;      // r
  std::vector<std::size_t> kernel_widths{2, 3, 6, 7};
  bool share_direction_weights = false;
  Ablation ablation = Ablation::None;
  std::uint64_t seed = 0;

  // Kernel widths actually used (mod_tcn collapses them to {1}).
  std::vector<std::size_t> active_widths() const;
  ReceptiveField receptive_field() const;
  // Time length entering the first layer: max(window, R).
  std::size_t input_length() const;

  std::map<std::string, std::string> to_metadata() const;
  static ModelConfig from_metadata(const std::map<std::string, std::string>& meta);
};

// Interlaced TCN/GCN forecaster:
//   Z^0 = 1x1 conv of the (left-padded) window
//   Z^{l+1} = truncate(Z^l, Q^{l+1}) + GCN(TCN(Z^l))
//   S = sum_l skip_l(Z^l), each skip conv spanning Z^l's full time length
//   x^ = W2 relu(W1 relu(S) + b1) + b2
class ForecastModel {
 public:
  ForecastModel() = default;
  explicit ForecastModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  // window: [batch, 1, nodes, window] scaled values -> [batch, nodes].
  DiffArray forward(const DiffArray& window) const;
  // Adjacency fed to the GCN (top-k learned, complete digraph for no_mtcl);
  // undefined for no_gcn.
  DiffArray gcn_adjacency() const;

  const LearnedGraph* graph() const { return has_graph_ ? &graph_ : nullptr; }
  LearnedGraph* graph() { return has_graph_ ? &graph_ : nullptr; }
  // Refreshes cached graph matrices after parameter updates.
  void refresh_graph();

  std::vector<std::pair<std::string, DiffArray>>& named_parameters() { return named_; }
  const std::vector<std::pair<std::string, DiffArray>>& named_parameters() const {
    return named_;
  }
  std::vector<DiffArray> parameters() const;
  std::size_t parameter_count() const;

  // Parameter values in named_parameters() order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  struct Layer {
    TemporalLayer temporal;
    MixHopLayer mixhop;
    DiffArray linear_kernel;  // no_gcn replacement
    DiffArray linear_bias;
  };

  void register_parameters();

  ModelConfig config_;
  bool has_graph_ = false;
  LearnedGraph graph_;
  DiffArray complete_graph_;
  DiffArray start_kernel, start_bias;
  std::vector<Layer> layers_;
  std::vector<DiffArray> skip_kernels_, skip_biases_;
  DiffArray end1_kernel_, end1_bias_, end2_kernel_, end2_bias_;
  std::vector<std::pair<std::string, DiffArray>> named_;
};

// Packs rows [end - w, end) of `series` for each end index into a
// [count, 1, N, w] array.
DiffArray pack_windows(const Matrix& series, std::size_t window,
                       const std::vector<std::size_t>& end_indices);

// One-step forecasts for every row t in [w, T); row t - w of the result is
// the forecast of row t.
Matrix forecast_series(const ForecastModel& model, const Matrix& series,
                       std::size_t batch_size = 256);
// RMSE of forecast_series against the series (targets w..T-1).
double forecast_rmse(const ForecastModel& model, const Matrix& series);
// RMSE of the previous-row forecast over the same targets.
double persistence_rmse(const Matrix& series, std::size_t window);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  AdamOptions adam{};
  bool shuffle = true;
  double clip_grad_norm = 0.0;  // 0 disables clipping
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_rmse = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation_rmse = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam on mean squared one-step error over windows of `train`; keeps the
// parameters of the epoch with the lowest validation RMSE. Throws
// NumericError naming the epoch and batch on a non-finite loss.
TrainResult train(ForecastModel& model, const Matrix& train, const Matrix& validation,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Plain-text table: epoch, train loss, validation RMSE.
std::string format_history(const TrainResult& result);

// ---- checkpoints ----------------------------------------------------------

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Self-describing binary container: magic, format version, key/value
// metadata, then named float64 arrays with their shapes.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;
  std::map<std::string, std::string> metadata;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  const NamedArray& require(const std::string& name) const;
  const std::string& require_meta(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Model parameters (prefixed "model.") plus model config metadata.
void export_model(const ForecastModel& model, Checkpoint& checkpoint);
ForecastModel import_model(const Checkpoint& checkpoint);

}  // namespace cstgl

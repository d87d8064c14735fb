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

#include "cstgl/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "cstgl/dataset.hpp"
#include "cstgl/errors.hpp"

namespace cstgl {

std::string to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::None: return "none";
    case Ablation::NoMtcl: return "no_mtcl";
    case Ablation::NoGcn: return "no_gcn";
    case Ablation::ModTcn: return "mod_tcn";
    case Ablation::NoPca: return "no_pca";
    case Ablation::NoStgnn: return "no_stgnn";
  }
  return "none";
}

Ablation parse_ablation(const std::string& name) {
  for (auto a : {Ablation::None, Ablation::NoMtcl, Ablation::NoGcn, Ablation::ModTcn,
                 Ablation::NoPca, Ablation::NoStgnn}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown ablation '" + name +
                    "' (expected none, no_mtcl, no_gcn, mod_tcn, no_pca, no_stgnn)");
}

// ---------------------------------------------------------------------------
// ModelConfig

std::vector<std::size_t> ModelConfig::active_widths() const {
  if (ablation == Ablation::ModTcn) return {1};
  return kernel_widths;
}

ReceptiveField ModelConfig::receptive_field() const {
  const auto widths = active_widths();
  return {layers, *std::max_element(widths.begin(), widths.end()), dilation_base};
}

std::size_t ModelConfig::input_length() const {
  return std::max(window, receptive_field().length());
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i ? "," : "") + std::to_string(values[i]);
  }
  return out;
}

std::string exact(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

const std::string& meta_at(const std::map<std::string, std::string>& meta,
                           const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

std::size_t meta_size(const std::map<std::string, std::string>& meta, const std::string& key) {
  const std::string& v = meta_at(meta, key);
  try {
    std::size_t used = 0;
    const auto out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(out);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint metadata '" + key + "' is not an integer: " + v);
  }
}

double meta_double(const std::map<std::string, std::string>& meta, const std::string& key) {
  const std::string& v = meta_at(meta, key);
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint metadata '" + key + "' is not a number: " + v);
  }
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_metadata() const {
  return {
      {"model.num_nodes", std::to_string(num_nodes)},
      {"model.window", std::to_string(window)},
      {"model.layers", std::to_string(layers)},
      {"model.residual_channels", std::to_string(residual_channels)},
      {"model.skip_channels", std::to_string(skip_channels)},
      {"model.end_channels", std::to_string(end_channels)},
      {"model.node_dim", std::to_string(node_dim)},
      {"model.saturation", exact(saturation)},
      {"model.top_k", std::to_string(top_k)},
      {"model.propagation_depth", std::to_string(propagation_depth)},
      {"model.retain_ratio", exact(retain_ratio)},
      {"model.dilation_base", std::to_string(dilation_base)},
      {"model.kernel_widths", join_sizes(kernel_widths)},
      {"model.share_direction_weights", share_direction_weights ? "true" : "false"},
      {"model.ablation", to_string(ablation)},
      {"model.seed", std::to_string(seed)},
  };
}

ModelConfig ModelConfig::from_metadata(const std::map<std::string, std::string>& meta) {
  ModelConfig c;
  c.num_nodes = meta_size(meta, "model.num_nodes");
  c.window = meta_size(meta, "model.window");
  c.layers = meta_size(meta, "model.layers");
  c.residual_channels = meta_size(meta, "model.residual_channels");
  c.skip_channels = meta_size(meta, "model.skip_channels");
  c.end_channels = meta_size(meta, "model.end_channels");
  c.node_dim = meta_size(meta, "model.node_dim");
  c.saturation = meta_double(meta, "model.saturation");
  c.top_k = meta_size(meta, "model.top_k");
  c.propagation_depth = meta_size(meta, "model.propagation_depth");
  c.retain_ratio = meta_double(meta, "model.retain_ratio");
  c.dilation_base = meta_size(meta, "model.dilation_base");
  c.kernel_widths.clear();
  std::istringstream widths(meta_at(meta, "model.kernel_widths"));
  std::string item;
  while (std::getline(widths, item, ',')) c.kernel_widths.push_back(std::stoul(item));
  c.share_direction_weights = meta_at(meta, "model.share_direction_weights") == "true";
  try {
    c.ablation = parse_ablation(meta_at(meta, "model.ablation"));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint metadata 'model.ablation': ") + e.what());
  }
  c.seed = meta_size(meta, "model.seed");
  return c;
}

// ---------------------------------------------------------------------------
// ForecastModel

namespace {

DiffArray uniform_kernel(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> uni(-bound, bound);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = uni(rng);
  return DiffArray(std::move(shape), std::move(v), true);
}

DiffArray conv_bias(const DiffArray& x, const DiffArray& kernel, const DiffArray& bias) {
  return add_channel_bias(conv1d_dilated(x, kernel, 1), bias);
}

}  // namespace

ForecastModel::ForecastModel(ModelConfig config) : config_(std::move(config)) {
  const auto& c = config_;
  if (c.num_nodes == 0) throw ContractError("ForecastModel: num_nodes must be positive");
  if (c.layers == 0) throw ContractError("ForecastModel: at least one layer is required");
  if (c.window == 0) throw ContractError("ForecastModel: window must be >= 1");
  std::mt19937_64 rng(c.seed);
  const std::size_t ch = c.residual_channels;
  const auto widths = c.active_widths();

  switch (c.ablation) {
    case Ablation::NoGcn:
      break;
    case Ablation::NoMtcl: {
      std::vector<double> full(c.num_nodes * c.num_nodes, 1.0);
      for (std::size_t i = 0; i < c.num_nodes; ++i) full[i * c.num_nodes + i] = 0.0;
      complete_graph_ = DiffArray({c.num_nodes, c.num_nodes}, std::move(full));
      break;
    }
    default:
      has_graph_ = true;
      graph_ = LearnedGraph(c.num_nodes, c.node_dim, c.saturation, c.top_k, rng);
  }

  start_kernel = uniform_kernel({ch, 1, 1, 1}, 1, rng);
  start_bias = DiffArray::zeros({ch}, true);

  const std::size_t q0 = c.input_length();
  std::vector<std::size_t> lengths{q0};
  for (std::size_t q : c.receptive_field().lengths(q0)) lengths.push_back(q);

  std::size_t dilation = 1;
  for (std::size_t l = 0; l < c.layers; ++l) {
    Layer layer;
    layer.temporal = TemporalLayer::create(ch, ch, widths, dilation, rng);
    if (c.ablation == Ablation::NoGcn) {
      layer.linear_kernel = uniform_kernel({ch, ch, 1, 1}, ch, rng);
      layer.linear_bias = DiffArray::zeros({ch}, true);
    } else {
      layer.mixhop = MixHopLayer::create(ch, ch, c.propagation_depth, c.retain_ratio,
                                         c.share_direction_weights, rng);
    }
    layers_.push_back(std::move(layer));
    dilation *= c.dilation_base;
  }
  for (std::size_t l = 0; l <= c.layers; ++l) {
    skip_kernels_.push_back(uniform_kernel({c.skip_channels, ch, 1, lengths[l]},
                                           ch * lengths[l], rng));
    skip_biases_.push_back(DiffArray::zeros({c.skip_channels}, true));
  }
  end1_kernel_ = uniform_kernel({c.end_channels, c.skip_channels, 1, 1}, c.skip_channels, rng);
  end1_bias_ = DiffArray::zeros({c.end_channels}, true);
  end2_kernel_ = uniform_kernel({1, c.end_channels, 1, 1}, c.end_channels, rng);
  end2_bias_ = DiffArray::zeros({1}, true);
  register_parameters();
}

void ForecastModel::register_parameters() {
  named_.clear();
  auto add_param = [&](std::string name, const DiffArray& p) {
    named_.emplace_back(std::move(name), p);
  };
  if (has_graph_) {
    add_param("graph.n1", graph_.n1);
    add_param("graph.n2", graph_.n2);
    add_param("graph.w1", graph_.w1);
    add_param("graph.w2", graph_.w2);
  }
  add_param("start.kernel", start_kernel);
  add_param("start.bias", start_bias);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    const auto& t = layers_[l].temporal;
    for (std::size_t i = 0; i < t.widths.size(); ++i) {
      add_param(p + "filter." + std::to_string(i), t.filter_kernels[i]);
      add_param(p + "gate." + std::to_string(i), t.gate_kernels[i]);
    }
    add_param(p + "filter_bias", t.filter_bias);
    add_param(p + "gate_bias", t.gate_bias);
    if (config_.ablation == Ablation::NoGcn) {
      add_param(p + "linear.kernel", layers_[l].linear_kernel);
      add_param(p + "linear.bias", layers_[l].linear_bias);
    } else {
      const auto& m = layers_[l].mixhop;
      for (std::size_t k = 0; k < m.theta_fwd.size(); ++k) {
        add_param(p + "theta_fwd." + std::to_string(k), m.theta_fwd[k]);
      }
      for (std::size_t k = 0; k < m.theta_bwd.size(); ++k) {
        add_param(p + "theta_bwd." + std::to_string(k), m.theta_bwd[k]);
      }
    }
  }
  for (std::size_t l = 0; l < skip_kernels_.size(); ++l) {
    add_param("skip" + std::to_string(l) + ".kernel", skip_kernels_[l]);
    add_param("skip" + std::to_string(l) + ".bias", skip_biases_[l]);
  }
  add_param("end1.kernel", end1_kernel_);
  add_param("end1.bias", end1_bias_);
  add_param("end2.kernel", end2_kernel_);
  add_param("end2.bias", end2_bias_);
}

std::vector<DiffArray> ForecastModel::parameters() const {
  std::vector<DiffArray> out;
  for (const auto& [name, p] : named_) out.push_back(p);
  return out;
}

std::size_t ForecastModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : named_) n += p.size();
  return n;
}

std::vector<std::vector<double>> ForecastModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& [name, p] : named_) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

void ForecastModel::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != named_.size()) throw ContractError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = named_[i].second.mutable_values();
    if (dst.size() != values[i].size()) {
      throw ContractError("restore: size mismatch for " + named_[i].first);
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
  refresh_graph();
}

void ForecastModel::refresh_graph() {
  if (has_graph_) graph_.refresh();
}

DiffArray ForecastModel::gcn_adjacency() const {
  if (has_graph_) return graph_.sparse_adjacency();
  if (config_.ablation == Ablation::NoMtcl) return complete_graph_;
  return {};
}

DiffArray ForecastModel::forward(const DiffArray& window) const {
  const auto& c = config_;
  if (window.rank() != 4 || window.dim(1) != 1 || window.dim(2) != c.num_nodes ||
      window.dim(3) != c.window) {
    throw ContractError("forward: window " + shape_to_string(window.shape()) +
                        " does not match model [batch, 1, " + std::to_string(c.num_nodes) +
                        ", " + std::to_string(c.window) + "]");
  }
  const std::size_t batch = window.dim(0);
  const DiffArray x = pad_to_receptive_field(window, c.input_length());
  DiffArray z = conv_bias(x, start_kernel, start_bias);
  DiffArray skip = conv_bias(z, skip_kernels_[0], skip_biases_[0]);
  const DiffArray adjacency = gcn_adjacency();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const DiffArray block = tcn_block(z, layer.temporal);
    const DiffArray spatial =
        c.ablation == Ablation::NoGcn
            ? conv_bias(block, layer.linear_kernel, layer.linear_bias)
            : bidirectional_gcn(block, adjacency, layer.mixhop);
    z = add(truncate_time(z, block.dim(3)), spatial);
    skip = add(skip, conv_bias(z, skip_kernels_[l + 1], skip_biases_[l + 1]));
  }
  DiffArray h = relu(skip);
  h = relu(conv_bias(h, end1_kernel_, end1_bias_));
  h = conv_bias(h, end2_kernel_, end2_bias_);
  return reshape(h, {batch, c.num_nodes});
}

// ---------------------------------------------------------------------------
// forecasting helpers

DiffArray pack_windows(const Matrix& series, std::size_t window,
                       const std::vector<std::size_t>& end_indices) {
  const std::size_t n = series.cols();
  std::vector<double> data(end_indices.size() * n * window);
  for (std::size_t k = 0; k < end_indices.size(); ++k) {
    const std::size_t end = end_indices[k];
    if (end < window || end > series.rows()) {
      throw ContractError("pack_windows: window ending at row " + std::to_string(end) +
                          " does not fit the series");
    }
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t t = 0; t < window; ++t)
        data[(k * n + c) * window + t] = series(end - window + t, c);
  }
  return DiffArray({end_indices.size(), 1, n, window}, std::move(data));
}

Matrix forecast_series(const ForecastModel& model, const Matrix& series,
                       std::size_t batch_size) {
  const std::size_t w = model.config().window;
  if (series.cols() != model.config().num_nodes) {
    throw ContractError("forecast_series: series has " + std::to_string(series.cols()) +
                        " channels, model expects " +
                        std::to_string(model.config().num_nodes));
  }
  if (series.rows() <= w) {
    throw ContractError("forecast_series: series of " + std::to_string(series.rows()) +
                        " rows is shorter than window + 1");
  }
  NoGradGuard no_grad;
  Matrix out(series.rows() - w, series.cols());
  for (std::size_t begin = w; begin < series.rows(); begin += batch_size) {
    const std::size_t end = std::min(series.rows(), begin + batch_size);
    std::vector<std::size_t> ends;
    for (std::size_t t = begin; t < end; ++t) ends.push_back(t);
    const DiffArray pred = model.forward(pack_windows(series, w, ends));
    const auto v = pred.values();
    std::copy(v.begin(), v.end(), out.row(begin - w).begin());
  }
  return out;
}

double forecast_rmse(const ForecastModel& model, const Matrix& series) {
  const Matrix pred = forecast_series(model, series);
  const std::size_t w = model.config().window;
  double sq = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r)
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double d = pred(r, c) - series(r + w, c);
      sq += d * d;
    }
  return std::sqrt(sq / static_cast<double>(pred.rows() * pred.cols()));
}

double persistence_rmse(const Matrix& series, std::size_t window) {
  if (series.rows() <= window) throw ContractError("persistence_rmse: series too short");
  double sq = 0.0;
  for (std::size_t r = window; r < series.rows(); ++r)
    for (std::size_t c = 0; c < series.cols(); ++c) {
      const double d = series(r, c) - series(r - 1, c);
      sq += d * d;
    }
  return std::sqrt(sq / static_cast<double>((series.rows() - window) * series.cols()));
}

// ---------------------------------------------------------------------------
// training

TrainResult train(ForecastModel& model, const Matrix& train_split,
                  const Matrix& validation, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  const std::size_t w = model.config().window;
  WindowStream stream(train_split, w, config.batch_size,
                      config.shuffle ? std::optional<std::uint64_t>(config.seed)
                                     : std::nullopt);
  if (validation.rows() <= w) {
    throw ContractError("train: validation split of " + std::to_string(validation.rows()) +
                        " rows is shorter than window + 1");
  }
  std::vector<DiffArray> params = model.parameters();
  AdamState adam = AdamState::for_params(params, config.adam);

  TrainResult result;
  std::vector<std::vector<double>> best;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    stream.reshuffle(config.seed + epoch);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < stream.num_batches(); ++b) {
      const WindowBatch batch = stream.batch(b);
      for (auto& p : params) p.zero_grad();
      const DiffArray inputs({batch.batch, 1, batch.nodes, batch.window}, batch.inputs);
      const DiffArray targets({batch.batch, batch.nodes}, batch.targets);
      const DiffArray diff = sub(model.forward(inputs), targets);
      const DiffArray loss = mean(mul(diff, diff));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b));
      }
      backward(loss);
      if (config.clip_grad_norm > 0.0) clip_grad_norm(params, config.clip_grad_norm);
      try {
        adam_step(params, adam);
      } catch (const NumericError& e) {
        throw NumericError("train: epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + ": " + e.what());
      }
      loss_sum += value * static_cast<double>(batch.batch);
      seen += batch.batch;
    }
    model.refresh_graph();
    EpochRecord record{epoch, loss_sum / static_cast<double>(seen),
                       forecast_rmse(model, validation)};
    result.history.push_back(record);
    if (result.best_epoch == 0 || record.validation_rmse < result.best_validation_rmse) {
      result.best_epoch = epoch;
      result.best_validation_rmse = record.validation_rmse;
      best = model.snapshot();
    }
    if (on_epoch) on_epoch(record);
  }
  if (!best.empty()) {
    model.restore(best);
  } else {
    result.best_validation_rmse = forecast_rmse(model, validation);
  }
  return result;
}

std::string format_history(const TrainResult& result) {
  std::ostringstream out;
  out << "epoch\ttrain_loss\tvalidation_rmse\n";
  out << std::setprecision(10);
  for (const auto& r : result.history) {
    out << r.epoch << '\t' << r.train_loss << '\t' << r.validation_rmse << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[8] = {'C', 'S', 'T', 'G', 'L', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get(const std::string& field) {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) throw CheckpointError("checkpoint truncated while reading " + field);
    return value;
  }

  std::string get_string(const std::string& field) {
    const auto n = get<std::uint32_t>(field + " length");
    if (n > (1u << 24)) throw CheckpointError("checkpoint corrupt: oversized " + field);
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw CheckpointError("checkpoint truncated while reading " + field);
    return s;
  }

  void get_doubles(std::vector<double>& out, const std::string& field) {
    in_.read(reinterpret_cast<char*>(out.data()),
             static_cast<std::streamsize>(out.size() * sizeof(double)));
    if (!in_) throw CheckpointError("checkpoint truncated while reading " + field);
  }

 private:
  std::istream& in_;
};

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const NamedArray& Checkpoint::require(const std::string& name) const {
  const NamedArray* a = find(name);
  if (!a) throw CheckpointError("checkpoint lacks array '" + name + "'");
  return *a;
}

const std::string& Checkpoint::require_meta(const std::string& key) const {
  return meta_at(metadata, key);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.metadata.size()));
  for (const auto& [k, v] : checkpoint.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.arrays.size()));
  for (const auto& a : checkpoint.arrays) {
    if (shape_size(a.shape) != a.values.size()) {
      throw CheckpointError("array '" + a.name + "' shape does not match its values");
    }
    put_string(out, a.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(a.values.data()),
              static_cast<std::streamsize>(a.values.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(in);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + " is not a cstgl checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("format version");
  if (version != Checkpoint::kFormatVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " is unsupported (expected " +
                          std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  Checkpoint cp;
  const auto n_meta = r.get<std::uint32_t>("metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = r.get_string("metadata key " + std::to_string(i));
    cp.metadata[key] = r.get_string("metadata value '" + key + "'");
  }
  const auto n_arrays = r.get<std::uint32_t>("array count");
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    NamedArray a;
    a.name = r.get_string("array name " + std::to_string(i));
    const auto rank = r.get<std::uint32_t>("rank of '" + a.name + "'");
    if (rank > 8) throw CheckpointError("checkpoint corrupt: rank of '" + a.name + "'");
    for (std::uint32_t d = 0; d < rank; ++d) {
      a.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>("shape of '" + a.name + "'")));
    }
    const std::size_t count = shape_size(a.shape);
    if (count > (std::size_t{1} << 32)) {
      throw CheckpointError("checkpoint corrupt: shape of '" + a.name + "'");
    }
    a.values.resize(count);
    r.get_doubles(a.values, "values of '" + a.name + "'");
    cp.arrays.push_back(std::move(a));
  }
  return cp;
}

void export_model(const ForecastModel& model, Checkpoint& checkpoint) {
  for (const auto& [k, v] : model.config().to_metadata()) checkpoint.metadata[k] = v;
  for (const auto& [name, p] : model.named_parameters()) {
    checkpoint.arrays.push_back(
        {"model." + name, p.shape(), std::vector<double>(p.values().begin(), p.values().end())});
  }
  if (const LearnedGraph* g = model.graph()) {
    std::ostringstream edges;
    edges << std::setprecision(17);
    bool first = true;
    for (const auto& e : g->edges()) {
      edges << (first ? "" : ",") << e.source << '>' << e.target << ':' << e.weight;
      first = false;
    }
    checkpoint.metadata["graph.topk_edges"] = edges.str();
  }
}

ForecastModel import_model(const Checkpoint& checkpoint) {
  ForecastModel model(ModelConfig::from_metadata(checkpoint.metadata));
  for (auto& [name, p] : model.named_parameters()) {
    const NamedArray& a = checkpoint.require("model." + name);
    if (a.shape != p.shape()) {
      throw CheckpointError("checkpoint array 'model." + name + "' has shape " +
                            shape_to_string(a.shape) + ", model expects " +
                            shape_to_string(p.shape()));
    }
    auto dst = p.mutable_values();
    std::copy(a.values.begin(), a.values.end(), dst.begin());
  }
  model.refresh_graph();
  return model;
}

}  // namespace cstgl

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

#include "cstgl/temporal_conv.hpp"

#include <algorithm>
#include <cmath>

#include "cstgl/errors.hpp"

namespace cstgl {

TemporalLayer TemporalLayer::create(std::size_t in_channels, std::size_t out_channels,
                                    std::vector<std::size_t> widths, std::size_t dilation,
                                    std::mt19937_64& rng) {
  if (widths.empty()) throw ContractError("TemporalLayer: no kernel widths");
  if (dilation == 0) throw ContractError("TemporalLayer: dilation must be >= 1");
  if (out_channels == 0 || out_channels % widths.size() != 0) {
    throw ContractError("TemporalLayer: out_channels " + std::to_string(out_channels) +
                        " is not divisible by " + std::to_string(widths.size()) +
                        " kernel widths");
  }
  TemporalLayer layer;
  layer.widths = std::move(widths);
  layer.dilation = dilation;
  layer.in_channels = in_channels;
  layer.out_channels = out_channels;
  const std::size_t per_width = out_channels / layer.widths.size();
  for (std::size_t w : layer.widths) {
    if (w == 0) throw ContractError("TemporalLayer: kernel width 0");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * w));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (auto* bank : {&layer.filter_kernels, &layer.gate_kernels}) {
      std::vector<double> v(per_width * in_channels * w);
      for (double& x : v) x = uni(rng);
      bank->emplace_back(Shape{per_width, in_channels, 1, w}, std::move(v), true);
    }
  }
  layer.filter_bias = DiffArray::zeros({out_channels}, true);
  layer.gate_bias = DiffArray::zeros({out_channels}, true);
  return layer;
}

std::size_t TemporalLayer::max_width() const {
  return *std::max_element(widths.begin(), widths.end());
}

std::vector<DiffArray> TemporalLayer::parameters() const {
  std::vector<DiffArray> out = filter_kernels;
  out.insert(out.end(), gate_kernels.begin(), gate_kernels.end());
  out.push_back(filter_bias);
  out.push_back(gate_bias);
  return out;
}

std::size_t ReceptiveField::length() const {
  if (kernel_width == 0 || dilation_base == 0) {
    throw ContractError("ReceptiveField: kernel width and dilation base must be >= 1");
  }
  if (dilation_base == 1) return layers * (kernel_width - 1) + 1;
  std::size_t power = 1;
  for (std::size_t l = 0; l < layers; ++l) power *= dilation_base;
  return 1 + (kernel_width - 1) * (power - 1) / (dilation_base - 1);
}

std::vector<std::size_t> ReceptiveField::lengths(std::size_t q0) const {
  std::vector<std::size_t> out;
  std::size_t q = q0;
  std::size_t dilation = 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t shrink = dilation * (kernel_width - 1);
    if (q < shrink + 1) {
      throw DimensionError("ReceptiveField: input length " + std::to_string(q0) +
                           " is below the required minimum " + std::to_string(length()));
    }
    q -= shrink;
    out.push_back(q);
    dilation *= dilation_base;
  }
  return out;
}

namespace {

void require_length(const DiffArray& z, const TemporalLayer& layer) {
  if (z.rank() != 4) {
    throw DimensionError("tcn_block: expected [batch, channel, node, time], got " +
                         shape_to_string(z.shape()));
  }
  const std::size_t minimum = layer.shrink() + 1;
  if (z.dim(3) < minimum) {
    throw DimensionError("tcn_block: input time length " + std::to_string(z.dim(3)) +
                         " is below the required minimum " + std::to_string(minimum));
  }
}

}  // namespace

DiffArray tcn_block(const DiffArray& z, const TemporalLayer& layer) {
  require_length(z, layer);
  // All filter and gate kernels run as one conv over max-width taps.
  std::vector<DiffArray> kernels = layer.filter_kernels;
  kernels.insert(kernels.end(), layer.gate_kernels.begin(), layer.gate_kernels.end());
  const DiffArray both =
      conv1d_dilated(z, stack_kernels(kernels, layer.max_width()), layer.dilation);
  const std::size_t half = layer.out_channels;
  const DiffArray filter = cstgl::tanh(
      add_channel_bias(slice_channels(both, 0, half), layer.filter_bias));
  const DiffArray gate =
      sigmoid(add_channel_bias(slice_channels(both, half, half), layer.gate_bias));
  return mul(filter, gate);
}

DiffArray residual_temporal_layer(const DiffArray& z, const TemporalLayer& layer) {
  const DiffArray block = tcn_block(z, layer);
  if (layer.in_channels != layer.out_channels) {
    throw DimensionError("residual_temporal_layer: residual needs in == out channels");
  }
  return add(truncate_time(z, block.dim(3)), block);
}

DiffArray pad_to_receptive_field(const DiffArray& window, std::size_t receptive_field) {
  return pad_time_left(window, receptive_field);
}

}  // namespace cstgl

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
#include <random>
#include <vector>

#include "cstgl/tensor.hpp"

namespace cstgl {

// Gated dilated-inception temporal layer. Each kernel width owns
// out_channels / widths.size() filter and gate channels; every branch is cut
// to the widest branch's output length before concatenation.
struct TemporalLayer {
  std::vector<std::size_t> widths{2, 3, 6, 7};
  std::size_t dilation = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<DiffArray> filter_kernels;  // per width: [out/|widths|, in, 1, width]
  std::vector<DiffArray> gate_kernels;
  DiffArray filter_bias;  // [out]
  DiffArray gate_bias;    // [out]

  static TemporalLayer create(std::size_t in_channels, std::size_t out_channels,
                              std::vector<std::size_t> widths, std::size_t dilation,
                              std::mt19937_64& rng);

  std::size_t max_width() const;
  // Time steps consumed by the layer: dilation * (k_eff - 1).
  std::size_t shrink() const { return dilation * (max_width() - 1); }
  std::vector<DiffArray> parameters() const;
};

struct ReceptiveField {
  std::size_t layers = 2;
  std::size_t kernel_width = 7;  // k_eff
  std::size_t dilation_base = 1;

  // L(k-1)+1 when r = 1, else 1 + (k-1)(r^L - 1)/(r - 1).
  std::size_t length() const;
  // Q^1..Q^L for an input of length q0: Q^{l+1} = Q^l - r^l (k-1).
  std::vector<std::size_t> lengths(std::size_t q0) const;
};

// tanh(filter conv + b_c) * sigmoid(gate conv + b_g).
DiffArray tcn_block(const DiffArray& z, const TemporalLayer& layer);
// truncate(z, Q^{l+1}) + tcn_block(z).
DiffArray residual_temporal_layer(const DiffArray& z, const TemporalLayer& layer);
// Left zero-padding of a [batch, channel, node, time] window up to R steps.
DiffArray pad_to_receptive_field(const DiffArray& window, std::size_t receptive_field);

}  // namespace cstgl

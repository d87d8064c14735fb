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
#include <span>
#include <vector>

#include "cstgl/tensor.hpp"

namespace cstgl {

// A~ = D~^-1 (A + I) with D~_ii = 1 + sum_j A_ij. Differentiable in A.
// Rows of the result sum to 1. Throws ContractError on negative entries.
DiffArray normalize_adjacency(const DiffArray& adjacency);

// Mix-hop propagation with gated retention, applied along A (inflow) and
// A^T (outflow). Theta matrices are stored as 1x1 kernels
// [d_out, d_in, 1, 1], so Theta[i][o] == kernel[o][i].
struct MixHopLayer {
  std::size_t depth = 2;       // K
  double retain = 0.1;         // beta
  bool shared = false;         // one Theta set for both directions
  std::vector<DiffArray> theta_fwd;
  std::vector<DiffArray> theta_bwd;

  static MixHopLayer create(std::size_t d_in, std::size_t d_out, std::size_t depth,
                            double retain, bool shared, std::mt19937_64& rng);
  std::vector<DiffArray> parameters() const;
  const std::vector<DiffArray>& backward_thetas() const {
    return shared ? theta_fwd : theta_bwd;
  }
};

// Hop states H^0..H^K of the gated propagation below.
std::vector<DiffArray> mixhop_states(const DiffArray& h_in, const DiffArray& normalized,
                                     std::size_t depth, double retain);

// H^0 = H_in; H^{k+1} = beta * H_in + (1 - beta) * A~ H^k;
// H_out = sum_{k=0..K} H^k Theta^k.
// h_in is [batch, d_in, nodes, time]; thetas.size() == K + 1.
DiffArray mixhop_forward(const DiffArray& h_in, const DiffArray& normalized,
                         std::span<const DiffArray> thetas, double retain);

// mixhop along normalize(A) with theta_fwd plus mixhop along normalize(A^T)
// with theta_bwd.
DiffArray bidirectional_gcn(const DiffArray& h_in, const DiffArray& adjacency,
                            const MixHopLayer& layer);

}  // namespace cstgl

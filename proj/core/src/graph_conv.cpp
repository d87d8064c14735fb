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

#include "cstgl/graph_conv.hpp"

#include <cmath>

#include "cstgl/errors.hpp"

namespace cstgl {

DiffArray normalize_adjacency(const DiffArray& adjacency) {
  if (adjacency.rank() != 2 || adjacency.dim(0) != adjacency.dim(1)) {
    throw DimensionError("normalize_adjacency: expected a square matrix, got " +
                         shape_to_string(adjacency.shape()));
  }
  const std::size_t n = adjacency.dim(0);
  const auto a = adjacency.values();
  for (double v : a) {
    if (v < 0.0) throw ContractError("normalize_adjacency: negative adjacency entry");
  }
  std::vector<double> out(n * n);
  std::vector<double> degree(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;
    for (std::size_t j = 0; j < n; ++j) d += a[i * n + j];
    degree[i] = d;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = (a[i * n + j] + (i == j ? 1.0 : 0.0)) / d;
    }
  }
  return detail::make_result(
      {n, n}, std::move(out), {adjacency}, [n, degree](detail::Node& self) {
        // dL/dA_ij = (g_ij - sum_k g_ik A~_ik) / d_i
        auto& g = detail::grad_of(*self.parents[0]);
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t k = 0; k < n; ++k) dot += self.grad[i * n + k] * self.value[i * n + k];
          for (std::size_t j = 0; j < n; ++j) {
            g[i * n + j] += (self.grad[i * n + j] - dot) / degree[i];
          }
        }
      });
}

MixHopLayer MixHopLayer::create(std::size_t d_in, std::size_t d_out, std::size_t depth,
                                double retain, bool shared, std::mt19937_64& rng) {
  if (!(retain >= 0.0 && retain <= 1.0)) {
    throw ContractError("MixHopLayer: retain ratio must lie in [0, 1]");
  }
  MixHopLayer layer;
  layer.depth = depth;
  layer.retain = retain;
  layer.shared = shared;
  // Fan-in covers all K+1 hops feeding one output.
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in * (depth + 1)));
  std::uniform_real_distribution<double> uni(-bound, bound);
  auto make = [&] {
    std::vector<double> v(d_out * d_in);
    for (double& x : v) x = uni(rng);
    return DiffArray({d_out, d_in, 1, 1}, std::move(v), true);
  };
  for (std::size_t k = 0; k <= depth; ++k) layer.theta_fwd.push_back(make());
  if (!shared) {
    for (std::size_t k = 0; k <= depth; ++k) layer.theta_bwd.push_back(make());
  }
  return layer;
}

std::vector<DiffArray> MixHopLayer::parameters() const {
  std::vector<DiffArray> out = theta_fwd;
  out.insert(out.end(), theta_bwd.begin(), theta_bwd.end());
  return out;
}

std::vector<DiffArray> mixhop_states(const DiffArray& h_in, const DiffArray& normalized,
                                     std::size_t depth, double retain) {
  // beta * H_in + (1 - beta) * A~ H^k written as H_in + (1 - beta)(A~ H^k - H_in)
  // so the fixed points (beta = 1, A~ = I) reproduce H_in bit for bit.
  std::vector<DiffArray> hops{h_in};
  for (std::size_t k = 1; k <= depth; ++k) {
    const DiffArray spread = propagate_nodes(normalized, hops.back());
    hops.push_back(add(h_in, scale(sub(spread, h_in), 1.0 - retain)));
  }
  return hops;
}

DiffArray mixhop_forward(const DiffArray& h_in, const DiffArray& normalized,
                         std::span<const DiffArray> thetas, double retain) {
  if (thetas.empty()) throw ContractError("mixhop_forward: no Theta matrices");
  if (h_in.rank() != 4 || thetas[0].rank() != 4 || thetas[0].dim(1) != h_in.dim(1)) {
    throw DimensionError("mixhop_forward: H_in " + shape_to_string(h_in.shape()) +
                         " does not match Theta^0 " +
                         shape_to_string(thetas[0].shape()));
  }
  const auto hops = mixhop_states(h_in, normalized, thetas.size() - 1, retain);
  DiffArray out = conv1d_dilated(hops[0], thetas[0], 1);
  for (std::size_t k = 1; k < thetas.size(); ++k) {
    out = add(out, conv1d_dilated(hops[k], thetas[k], 1));
  }
  return out;
}

DiffArray bidirectional_gcn(const DiffArray& h_in, const DiffArray& adjacency,
                            const MixHopLayer& layer) {
  const DiffArray inflow = normalize_adjacency(adjacency);
  const DiffArray outflow = normalize_adjacency(transpose(adjacency));
  return add(mixhop_forward(h_in, inflow, layer.theta_fwd, layer.retain),
             mixhop_forward(h_in, outflow, layer.backward_thetas(), layer.retain));
}

}  // namespace cstgl

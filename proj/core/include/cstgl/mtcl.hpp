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
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cstgl/matrix.hpp"
#include "cstgl/tensor.hpp"

namespace cstgl {

struct WeightedEdge {
  std::size_t source = 0;  // column j of A[i][j]: the node information flows from
  std::size_t target = 0;  // row i
  double weight = 0.0;
};

// Learned directed dependency graph over N channels.
//
//   N1~ = tanh(alpha * N1 W1),  N2~ = tanh(alpha * N2 W2)
//   A   = relu(tanh(alpha * (N1~ N2~^T - N2~ N1~^T)))
//
// The antisymmetric argument makes A uni-directional: A[i][j] > 0 forces
// A[j][i] = 0, and the diagonal is 0. Each row is then restricted to its
// top-k entries; that mask is recomputed on every forward pass and treated
// as a constant by backward.
class LearnedGraph {
 public:
  LearnedGraph() = default;
  // Embeddings ~ N(0, 1/d); mixing matrices uniform in +-1/sqrt(d).
  LearnedGraph(std::size_t nodes, std::size_t embedding_dim, double alpha,
               std::size_t top_k, std::mt19937_64& rng);

  std::size_t nodes() const { return nodes_; }
  std::size_t embedding_dim() const { return dim_; }
  double alpha() const { return alpha_; }
  std::size_t top_k() const { return top_k_; }

  DiffArray build_adjacency() const;
  // build_adjacency() masked to each row's top-k entries.
  DiffArray sparse_adjacency() const;

  // Recomputes the cached dense/sparse matrices from current parameters.
  void refresh();
  const Matrix& dense() const { return dense_cache_; }
  const Matrix& sparse() const { return sparse_cache_; }

  // Nonzero entries of the cached sparse adjacency, row-major order.
  std::vector<WeightedEdge> edges() const;

  DiffArray n1, n2, w1, w2;

  std::vector<DiffArray> parameters() const { return {n1, n2, w1, w2}; }

 private:
  std::size_t nodes_ = 0;
  std::size_t dim_ = 0;
  double alpha_ = 20.0;
  std::size_t top_k_ = 1;
  Matrix dense_cache_;
  Matrix sparse_cache_;
};

// Row-wise top-k selection: keeps the k largest entries of each row (ties
// go to the lowest column index) and zeroes the rest.
Matrix sparsify_topk(const Matrix& dense, std::size_t k);
// 0/1 mask of the entries sparsify_topk keeps.
Matrix topk_mask(const Matrix& dense, std::size_t k);

// "source<TAB>target<TAB>weight" lines, channel names when given.
void write_edge_list(const std::filesystem::path& path,
                     const std::vector<WeightedEdge>& edges,
                     const std::vector<std::string>& names = {});
std::vector<WeightedEdge> read_edge_list(const std::filesystem::path& path,
                                         const std::vector<std::string>& names = {});

// Dense N x N matrix from an edge list.
Matrix adjacency_from_edges(const std::vector<WeightedEdge>& edges, std::size_t nodes);

}  // namespace cstgl

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

#include "cstgl/mtcl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cstgl/errors.hpp"

namespace cstgl {

namespace {

// tanh rounds to exactly 1 for arguments above ~19; entries are capped at the
// largest double below 1 so A stays in [0, 1). tanh's own derivative is
// already 0 there, so the cap passes gradients through unchanged.
DiffArray cap_below_one(const DiffArray& a) {
  constexpr double kCap = 1.0 - 0x1p-53;
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = std::min(v, kCap);
  return detail::make_result(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    auto& g = detail::grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

}  // namespace

LearnedGraph::LearnedGraph(std::size_t nodes, std::size_t embedding_dim, double alpha,
                           std::size_t top_k, std::mt19937_64& rng)
    : nodes_(nodes), dim_(embedding_dim), alpha_(alpha), top_k_(top_k) {
  if (nodes == 0 || embedding_dim == 0) {
    throw ContractError("LearnedGraph: nodes and embedding dim must be positive");
  }
  if (top_k == 0) throw ContractError("LearnedGraph: top-k must be >= 1");
  if (!(alpha > 0.0)) throw ContractError("LearnedGraph: alpha must be positive");
  const double stdev = 1.0 / std::sqrt(static_cast<double>(embedding_dim));
  std::normal_distribution<double> gauss(0.0, stdev);
  std::uniform_real_distribution<double> uni(-stdev, stdev);
  auto draw = [&](std::size_t r, std::size_t c, auto& dist) {
    std::vector<double> v(r * c);
    for (double& x : v) x = dist(rng);
    return DiffArray({r, c}, std::move(v), true);
  };
  n1 = draw(nodes, embedding_dim, gauss);
  n2 = draw(nodes, embedding_dim, gauss);
  w1 = draw(embedding_dim, embedding_dim, uni);
  w2 = draw(embedding_dim, embedding_dim, uni);
  refresh();
}

DiffArray LearnedGraph::build_adjacency() const {
  for (const auto* p : {&n1, &n2, &w1, &w2}) {
    for (double v : p->values()) {
      if (!std::isfinite(v)) {
        throw ContractError("build_adjacency: non-finite graph embedding parameters");
      }
    }
  }
  const DiffArray e1 = cstgl::tanh(scale(matmul(n1, w1), alpha_));
  const DiffArray e2 = cstgl::tanh(scale(matmul(n2, w2), alpha_));
  // N2~ N1~^T is the transpose of N1~ N2~^T; subtracting the transpose keeps
  // the argument exactly antisymmetric in floating point.
  const DiffArray forward_term = matmul(e1, transpose(e2));
  const DiffArray backward_term = transpose(forward_term);
  return cap_below_one(relu(cstgl::tanh(scale(sub(forward_term, backward_term), alpha_))));
}

DiffArray LearnedGraph::sparse_adjacency() const {
  const DiffArray dense = build_adjacency();
  const Matrix values(nodes_, nodes_,
                      std::vector<double>(dense.values().begin(), dense.values().end()));
  const Matrix mask = topk_mask(values, top_k_);
  return mul(dense, DiffArray({nodes_, nodes_}, mask.data()));
}

void LearnedGraph::refresh() {
  NoGradGuard no_grad;
  const DiffArray dense = build_adjacency();
  dense_cache_ = Matrix(nodes_, nodes_,
                        std::vector<double>(dense.values().begin(), dense.values().end()));
  sparse_cache_ = sparsify_topk(dense_cache_, top_k_);
}

std::vector<WeightedEdge> LearnedGraph::edges() const {
  std::vector<WeightedEdge> out;
  for (std::size_t i = 0; i < nodes_; ++i)
    for (std::size_t j = 0; j < nodes_; ++j)
      if (sparse_cache_(i, j) != 0.0) out.push_back({j, i, sparse_cache_(i, j)});
  return out;
}

Matrix topk_mask(const Matrix& dense, std::size_t k) {
  if (k == 0) throw ContractError("sparsify_topk: k must be >= 1");
  Matrix mask(dense.rows(), dense.cols(), 0.0);
  std::vector<std::size_t> idx(dense.cols());
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    std::iota(idx.begin(), idx.end(), 0);
    const auto row = dense.row(i);
    const std::size_t keep = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep),
                      idx.end(), [&](std::size_t a, std::size_t b) {
                        return row[a] > row[b] || (row[a] == row[b] && a < b);
                      });
    for (std::size_t r = 0; r < keep; ++r) mask(i, idx[r]) = 1.0;
  }
  return mask;
}

Matrix sparsify_topk(const Matrix& dense, std::size_t k) {
  const Matrix mask = topk_mask(dense, k);
  Matrix out = dense;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] *= mask.data()[i];
  return out;
}

void write_edge_list(const std::filesystem::path& path,
                     const std::vector<WeightedEdge>& edges,
                     const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  auto label = [&](std::size_t i) {
    return i < names.size() ? names[i] : std::to_string(i);
  };
  out << "source\ttarget\tweight\n";
  out.precision(17);
  for (const auto& e : edges) {
    out << label(e.source) << '\t' << label(e.target) << '\t' << e.weight << '\n';
  }
}

std::vector<WeightedEdge> read_edge_list(const std::filesystem::path& path,
                                         const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  auto index_of = [&](const std::string& token) -> std::size_t {
    const auto it = std::find(names.begin(), names.end(), token);
    if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
    try {
      std::size_t used = 0;
      const auto v = std::stoul(token, &used);
      if (used == token.size()) return v;
    } catch (const std::exception&) {
    }
    throw IngestionError(path.string() + ": unknown channel '" + token + "'");
  };
  std::vector<WeightedEdge> edges;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string s, t;
    double w = 0.0;
    if (!(row >> s >> t >> w)) throw IngestionError(path.string() + ": bad edge line '" + line + "'");
    edges.push_back({index_of(s), index_of(t), w});
  }
  return edges;
}

Matrix adjacency_from_edges(const std::vector<WeightedEdge>& edges, std::size_t nodes) {
  Matrix a(nodes, nodes, 0.0);
  for (const auto& e : edges) {
    if (e.source >= nodes || e.target >= nodes) {
      throw DimensionError("adjacency_from_edges: edge references node outside " +
                           std::to_string(nodes));
    }
    a(e.target, e.source) = e.weight;
  }
  return a;
}

}  // namespace cstgl

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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cstgl/errors.hpp"
#include "cstgl/graph_conv.hpp"
#include "oracles.hpp"

using namespace cstgl;

namespace {

// Features [B, C, N, T] as nested loops; hop recurrence and Theta mixing
// written out per entry.
std::vector<double> loop_mixhop(const std::vector<double>& h, std::size_t B, std::size_t C,
                                std::size_t N, std::size_t T, const std::vector<double>& a_norm,
                                const std::vector<std::vector<double>>& thetas, std::size_t D,
                                double beta) {
  auto at = [&](std::size_t b, std::size_t c, std::size_t n, std::size_t t) {
    return ((b * C + c) * N + n) * T + t;
  };
  std::vector<std::vector<double>> hops{h};
  for (std::size_t k = 1; k < thetas.size(); ++k) {
    std::vector<double> next(h.size());
    const auto& prev = hops.back();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < N; ++i)
          for (std::size_t t = 0; t < T; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < N; ++j) acc += a_norm[i * N + j] * prev[at(b, c, j, t)];
            next[at(b, c, i, t)] = beta * h[at(b, c, i, t)] + (1.0 - beta) * acc;
          }
    hops.push_back(std::move(next));
  }
  std::vector<double> out(B * D * N * T, 0.0);
  for (std::size_t k = 0; k < thetas.size(); ++k)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t o = 0; o < D; ++o)
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t t = 0; t < T; ++t) {
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) acc += hops[k][at(b, c, n, t)] * thetas[k][o * C + c];
            out[((b * D + o) * N + n) * T + t] += acc;
          }
  return out;
}

std::vector<double> to_vec(const DiffArray& a) { return {a.values().begin(), a.values().end()}; }

DiffArray random_adjacency(oracle::Gen& gen, std::size_t n, double density = 0.5) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && gen.coin(density)) v[i * n + j] = gen.uniform(0.0, 1.0);
  return DiffArray({n, n}, std::move(v), true);
}

// x * sum_k Theta^k applied per node and step, i.e. a 1x1 conv with the
// summed kernels.
std::vector<double> times_theta_sum(const DiffArray& h, const std::vector<DiffArray>& thetas) {
  std::vector<double> sum_k(thetas[0].size(), 0.0);
  for (const auto& t : thetas)
    for (std::size_t i = 0; i < sum_k.size(); ++i) sum_k[i] += t.values()[i];
  return oracle::naive_conv(to_vec(h), h.shape(), sum_k, thetas[0].shape(), 1);
}

void expect_all_near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace

TEST(NormalizeAdjacency, ZeroGraphBecomesIdentity) {
  const DiffArray n = normalize_adjacency(DiffArray::zeros({4, 4}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(n.values()[i * 4 + j], i == j ? 1.0 : 0.0);
}

TEST(NormalizeAdjacency, TwoNodeHandValue) {
  const DiffArray n = normalize_adjacency(DiffArray({2, 2}, {0, 1, 0, 0}));
  EXPECT_EQ(to_vec(n), (std::vector<double>{0.5, 0.5, 0.0, 1.0}));
}

TEST(NormalizeAdjacency, RowsSumToOne) {
  oracle::Gen gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = gen.index(1, 12);
    const DiffArray a(Shape{n, n}, gen.vec(n * n, 0.0, gen.uniform(0.0, 50.0)));
    const DiffArray normalized = normalize_adjacency(a);
    const auto v = normalized.values();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::accumulate(v.begin() + i * n, v.begin() + (i + 1) * n, 0.0);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(NormalizeAdjacency, NegativeEntryIsContractError) {
  EXPECT_THROW(normalize_adjacency(DiffArray({2, 2}, {0, -0.1, 0, 0})), ContractError);
  EXPECT_THROW(normalize_adjacency(DiffArray::zeros({2, 3})), DimensionError);
}

TEST(NormalizeAdjacency, GradientMatchesFiniteDifferences) {
  oracle::Gen gen(5);
  DiffArray a = random_adjacency(gen, 5, 0.7);
  // Keep every entry strictly positive so the FD step stays non-negative.
  for (double& v : a.mutable_values()) v += 0.05;
  const double err = oracle::max_relative_gradient_error(
      [&] { return oracle::weighted_sum(normalize_adjacency(a)); }, {a});
  EXPECT_LT(err, 1e-4);
}

TEST(MixhopForward, FullRetentionCollapsesToThetaSum) {
  oracle::Gen gen(7);
  const DiffArray h = gen.array({2, 3, 5, 4}, false);
  const DiffArray a_norm = normalize_adjacency(random_adjacency(gen, 5));
  std::vector<DiffArray> thetas;
  for (int k = 0; k < 4; ++k) thetas.push_back(gen.array({6, 3, 1, 1}));
  expect_all_near(to_vec(mixhop_forward(h, a_norm, thetas, 1.0)), times_theta_sum(h, thetas),
                  1e-12);
}

TEST(MixhopForward, EmptyGraphIsFixedPointForAnyRetention) {
  oracle::Gen gen(8);
  const DiffArray h = gen.array({1, 2, 4, 3}, false);
  const DiffArray a_norm = normalize_adjacency(DiffArray::zeros({4, 4}));
  std::vector<DiffArray> thetas;
  for (int k = 0; k < 3; ++k) thetas.push_back(gen.array({2, 2, 1, 1}));
  for (double beta : {0.0, 0.1, 0.5, 0.9}) {
    for (const auto& hop : mixhop_states(h, a_norm, 2, beta)) {
      EXPECT_EQ(to_vec(hop), to_vec(h));
    }
    expect_all_near(to_vec(mixhop_forward(h, a_norm, thetas, beta)),
                    times_theta_sum(h, thetas), 1e-12);
  }
}

TEST(MixhopForward, MatchesLoopOracle) {
  oracle::Gen gen(9);
  const std::size_t B = 2, C = 3, N = 6, T = 4, D = 5, K = 3;
  const DiffArray h = gen.array({B, C, N, T}, false);
  const DiffArray a_norm = normalize_adjacency(random_adjacency(gen, N));
  std::vector<DiffArray> thetas;
  std::vector<std::vector<double>> raw;
  for (std::size_t k = 0; k <= K; ++k) {
    thetas.push_back(gen.array({D, C, 1, 1}));
    raw.push_back(to_vec(thetas.back()));
  }
  const double beta = 0.1;
  expect_all_near(to_vec(mixhop_forward(h, a_norm, thetas, beta)),
                  loop_mixhop(to_vec(h), B, C, N, T, to_vec(a_norm), raw, D, beta), 1e-12);
}

TEST(MixhopForward, ThetaMismatchIsDimensionError) {
  oracle::Gen gen(10);
  const DiffArray h = gen.array({1, 3, 4, 2}, false);
  const DiffArray a_norm = normalize_adjacency(DiffArray::zeros({4, 4}));
  std::vector<DiffArray> thetas{gen.array({2, 4, 1, 1})};
  EXPECT_THROW(mixhop_forward(h, a_norm, thetas, 0.1), DimensionError);
  EXPECT_THROW(mixhop_forward(h, a_norm, std::vector<DiffArray>{}, 0.1), ContractError);
}

TEST(MixhopStates, HopsBoundedByInputSupNorm) {
  oracle::Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = gen.index(2, 8);
    const DiffArray h = gen.array({1, 2, n, 3}, false, -5.0, 5.0);
    const DiffArray a_norm = normalize_adjacency(random_adjacency(gen, n, 0.6));
    const double beta = gen.uniform(0.01, 1.0);
    const auto in = h.values();
    const double bound = std::abs(*std::max_element(
        in.begin(), in.end(), [](double x, double y) { return std::abs(x) < std::abs(y); }));
    for (const auto& hop : mixhop_states(h, a_norm, 4, beta)) {
      for (double v : hop.values()) EXPECT_LE(std::abs(v), bound + 1e-12);
    }
  }
}

TEST(BidirectionalGcn, SymmetricGraphSumsBothBranchesOnSameOperator) {
  oracle::Gen gen(12);
  std::mt19937_64 rng(1);
  const MixHopLayer layer = MixHopLayer::create(3, 4, 2, 0.1, false, rng);
  const DiffArray h = gen.array({1, 3, 5, 2}, false);
  DiffArray a = random_adjacency(gen, 5);
  auto v = a.mutable_values();
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < i; ++j) v[i * 5 + j] = v[j * 5 + i];
  const DiffArray a_norm = normalize_adjacency(a);
  const auto fwd = to_vec(mixhop_forward(h, a_norm, layer.theta_fwd, 0.1));
  const auto bwd = to_vec(mixhop_forward(h, a_norm, layer.theta_bwd, 0.1));
  std::vector<double> want(fwd.size());
  for (std::size_t i = 0; i < want.size(); ++i) want[i] = fwd[i] + bwd[i];
  expect_all_near(to_vec(bidirectional_gcn(h, a, layer)), want, 1e-12);
}

TEST(BidirectionalGcn, EmptyGraphUsesBothThetaSums) {
  oracle::Gen gen(13);
  std::mt19937_64 rng(2);
  const MixHopLayer layer = MixHopLayer::create(2, 3, 2, 0.1, false, rng);
  const DiffArray h = gen.array({2, 2, 4, 3}, false);
  std::vector<DiffArray> all = layer.theta_fwd;
  all.insert(all.end(), layer.theta_bwd.begin(), layer.theta_bwd.end());
  expect_all_near(to_vec(bidirectional_gcn(h, DiffArray::zeros({4, 4}), layer)),
                  times_theta_sum(h, all), 1e-12);
}

TEST(BidirectionalGcn, DirectionsDifferOnAsymmetricGraph) {
  oracle::Gen gen(14);
  std::mt19937_64 rng(3);
  MixHopLayer layer = MixHopLayer::create(2, 2, 2, 0.1, true, rng);
  const DiffArray h = gen.array({1, 2, 3, 1}, false);
  const DiffArray a({3, 3}, {0, 1, 0, 0, 0, 1, 0, 0, 0});
  // Shared weights: output = mixhop(A~) + mixhop((A^T)~), which differs from
  // twice either branch when A is not symmetric.
  const auto both = to_vec(bidirectional_gcn(h, a, layer));
  const auto fwd = to_vec(mixhop_forward(h, normalize_adjacency(a), layer.theta_fwd, 0.1));
  double gap = 0.0;
  for (std::size_t i = 0; i < both.size(); ++i) gap = std::max(gap, std::abs(both[i] - 2 * fwd[i]));
  EXPECT_GT(gap, 1e-6);
  EXPECT_EQ(layer.parameters().size(), 3u);
  EXPECT_EQ(&layer.backward_thetas(), &layer.theta_fwd);
}

TEST(BidirectionalGcn, GradientMatchesFiniteDifferences) {
  oracle::Gen gen(15);
  std::mt19937_64 rng(4);
  const MixHopLayer layer = MixHopLayer::create(3, 2, 2, 0.1, false, rng);
  const DiffArray h = gen.array({2, 3, 5, 2});
  DiffArray a = random_adjacency(gen, 5, 0.6);
  for (double& v : a.mutable_values()) v += 0.05;
  std::vector<DiffArray> params = layer.parameters();
  params.push_back(h);
  params.push_back(a);
  const double err = oracle::max_relative_gradient_error(
      [&] { return oracle::weighted_sum(bidirectional_gcn(h, a, layer)); }, params);
  EXPECT_LT(err, 1e-4);
}

TEST(BidirectionalGcn, NodePermutationEquivariance) {
  oracle::Gen gen(16);
  std::mt19937_64 rng(5);
  const MixHopLayer layer = MixHopLayer::create(2, 3, 2, 0.1, false, rng);
  const std::size_t B = 1, C = 2, N = 6, T = 3, D = 3;
  for (int trial = 0; trial < 10; ++trial) {
    const DiffArray h = gen.array({B, C, N, T}, false);
    const DiffArray a = random_adjacency(gen, N);
    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen.rng);
    // Node p in the permuted instance is node perm[p] in the original.
    std::vector<double> hp(h.size()), ap(N * N);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < N; ++p)
        for (std::size_t t = 0; t < T; ++t)
          hp[(c * N + p) * T + t] = h.values()[(c * N + perm[p]) * T + t];
    for (std::size_t p = 0; p < N; ++p)
      for (std::size_t q = 0; q < N; ++q) ap[p * N + q] = a.values()[perm[p] * N + perm[q]];
    const auto base = to_vec(bidirectional_gcn(h, a, layer));
    const auto moved =
        to_vec(bidirectional_gcn(DiffArray(h.shape(), hp), DiffArray({N, N}, ap), layer));
    for (std::size_t o = 0; o < D; ++o)
      for (std::size_t p = 0; p < N; ++p)
        for (std::size_t t = 0; t < T; ++t)
          EXPECT_NEAR(moved[(o * N + p) * T + t], base[(o * N + perm[p]) * T + t], 1e-12);
  }
}

TEST(MixHopLayer, CreateHoldsKPlusOneThetasPerDirection) {
  std::mt19937_64 rng(6);
  const MixHopLayer unshared = MixHopLayer::create(4, 5, 3, 0.2, false, rng);
  EXPECT_EQ(unshared.theta_fwd.size(), 4u);
  EXPECT_EQ(unshared.theta_bwd.size(), 4u);
  EXPECT_EQ(unshared.parameters().size(), 8u);
  EXPECT_EQ(unshared.theta_fwd[0].shape(), (Shape{5, 4, 1, 1}));
  const MixHopLayer k0 = MixHopLayer::create(4, 5, 0, 0.2, false, rng);
  EXPECT_EQ(k0.theta_fwd.size(), 1u);
}

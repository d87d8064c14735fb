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

#include <cmath>

#include "cstgl/errors.hpp"
#include "cstgl/temporal_conv.hpp"
#include "oracles.hpp"

using namespace cstgl;

namespace {

std::vector<double> to_vec(const DiffArray& a) { return {a.values().begin(), a.values().end()}; }

// Naive conv per width, keep the last `keep` steps, concatenate widths along
// channels, then tanh(filter + b) * sigmoid(gate + b).
std::vector<double> composed_oracle(const DiffArray& z, const TemporalLayer& layer) {
  const std::size_t B = z.dim(0), N = z.dim(2), T = z.dim(3);
  const std::size_t keep = T - layer.shrink();
  const std::size_t per = layer.out_channels / layer.widths.size();
  auto branch = [&](const std::vector<DiffArray>& kernels, std::size_t o) {
    // Returns channel o of the concatenated map, [B, N, keep].
    const std::size_t w = o / per, local = o % per;
    const auto& k = kernels[w];
    const auto full = oracle::naive_conv(to_vec(z), z.shape(), to_vec(k), k.shape(), layer.dilation);
    const std::size_t t_full = T - layer.dilation * (layer.widths[w] - 1);
    std::vector<double> out(B * N * keep);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < keep; ++t)
          out[(b * N + n) * keep + t] = full[((b * per + local) * N + n) * t_full + t_full - keep + t];
    return out;
  };
  std::vector<double> out(B * layer.out_channels * N * keep);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    const auto f = branch(layer.filter_kernels, o);
    const auto g = branch(layer.gate_kernels, o);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < keep; ++t) {
          const std::size_t i = (b * N + n) * keep + t;
          const double fv = std::tanh(f[i] + layer.filter_bias.values()[o]);
          const double gv = 1.0 / (1.0 + std::exp(-(g[i] + layer.gate_bias.values()[o])));
          out[((b * layer.out_channels + o) * N + n) * keep + t] = fv * gv;
        }
  }
  return out;
}

void zero_all(const TemporalLayer& layer) {
  for (auto p : layer.parameters())
    for (double& v : p.mutable_values()) v = 0.0;
}

void randomize_biases(TemporalLayer& layer, oracle::Gen& gen) {
  for (auto* b : {&layer.filter_bias, &layer.gate_bias})
    for (double& v : b->mutable_values()) v = gen.uniform(-0.5, 0.5);
}

}  // namespace

TEST(TcnBlock, ZeroWeightsGiveZeroOutput) {
  std::mt19937_64 rng(1);
  oracle::Gen gen(1);
  const TemporalLayer layer = TemporalLayer::create(3, 8, {2, 3, 6, 7}, 1, rng);
  zero_all(layer);
  const DiffArray out = tcn_block(gen.array({2, 3, 4, 10}, false), layer);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(TcnBlock, LengthNineteenGivesThirteen) {
  std::mt19937_64 rng(2);
  oracle::Gen gen(2);
  const TemporalLayer layer = TemporalLayer::create(2, 4, {2, 3, 6, 7}, 1, rng);
  EXPECT_EQ(tcn_block(gen.array({1, 2, 3, 19}, false), layer).shape(), (Shape{1, 4, 3, 13}));
}

TEST(TcnBlock, TooShortInputNamesMinimum) {
  std::mt19937_64 rng(3);
  oracle::Gen gen(3);
  const TemporalLayer layer = TemporalLayer::create(2, 4, {2, 3, 6, 7}, 2, rng);
  try {
    tcn_block(gen.array({1, 2, 3, 12}, false), layer);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("minimum 13"), std::string::npos) << e.what();
  }
}

TEST(TcnBlock, MatchesComposedOracle) {
  oracle::Gen gen(4);
  for (std::size_t dilation : {1u, 2u, 3u}) {
    std::mt19937_64 rng(dilation);
    TemporalLayer layer = TemporalLayer::create(3, 8, {2, 3, 6, 7}, dilation, rng);
    randomize_biases(layer, gen);
    const DiffArray z = gen.array({2, 3, 4, layer.shrink() + 6}, false);
    const auto got = to_vec(tcn_block(z, layer));
    const auto want = composed_oracle(z, layer);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(TcnBlock, OutputStrictlyInsideUnitInterval) {
  oracle::Gen gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(trial);
    TemporalLayer layer = TemporalLayer::create(2, 4, {2, 3, 6, 7}, 1, rng);
    randomize_biases(layer, gen);
    const DiffArray out = tcn_block(gen.array({1, 2, 3, 9}, false, -20.0, 20.0), layer);
    for (double v : out.values()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(TcnBlock, KernelGradientMatchesFiniteDifferences) {
  oracle::Gen gen(6);
  std::mt19937_64 rng(6);
  TemporalLayer layer = TemporalLayer::create(2, 4, {2, 3, 6, 7}, 2, rng);
  randomize_biases(layer, gen);
  const DiffArray z = gen.array({2, 2, 3, 15});
  std::vector<DiffArray> params = layer.parameters();
  params.push_back(z);
  const double err = oracle::max_relative_gradient_error(
      [&] { return oracle::weighted_sum(tcn_block(z, layer)); }, params);
  EXPECT_LT(err, 1e-4);
}

TEST(TemporalLayer, CreateValidatesArguments) {
  std::mt19937_64 rng(7);
  EXPECT_THROW(TemporalLayer::create(2, 6, {2, 3, 6, 7}, 1, rng), ContractError);
  EXPECT_THROW(TemporalLayer::create(2, 4, {2, 3, 6, 7}, 0, rng), ContractError);
  EXPECT_THROW(TemporalLayer::create(2, 4, {}, 1, rng), ContractError);
  const TemporalLayer layer = TemporalLayer::create(2, 8, {2, 3, 6, 7}, 1, rng);
  EXPECT_EQ(layer.max_width(), 7u);
  EXPECT_EQ(layer.filter_kernels[2].shape(), (Shape{2, 2, 1, 6}));
}

TEST(ResidualTemporalLayer, ZeroBlockLeavesTruncatedResidual) {
  std::mt19937_64 rng(8);
  oracle::Gen gen(8);
  const TemporalLayer layer = TemporalLayer::create(4, 4, {2, 3, 6, 7}, 1, rng);
  zero_all(layer);
  const DiffArray z = gen.array({1, 4, 2, 13}, false);
  const DiffArray out = residual_temporal_layer(z, layer);
  ASSERT_EQ(out.shape(), (Shape{1, 4, 2, 7}));
  for (std::size_t row = 0; row < 8; ++row)
    for (std::size_t t = 0; t < 7; ++t) EXPECT_EQ(out.values()[row * 7 + t], z.values()[row * 13 + 6 + t]);
}

TEST(ResidualTemporalLayer, OutputLengthFollowsRecurrence) {
  oracle::Gen gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(trial);
    const std::size_t dilation = gen.index(1, 3);
    const TemporalLayer layer = TemporalLayer::create(4, 4, {2, 3, 6, 7}, dilation, rng);
    const std::size_t q0 = layer.shrink() + gen.index(1, 10);
    const DiffArray out = residual_temporal_layer(gen.array({1, 4, 2, q0}, false), layer);
    EXPECT_EQ(out.dim(3), q0 - dilation * 6);
  }
}

TEST(ResidualTemporalLayer, ChannelMismatchIsDimensionError) {
  std::mt19937_64 rng(10);
  oracle::Gen gen(10);
  const TemporalLayer layer = TemporalLayer::create(2, 4, {2, 3, 6, 7}, 1, rng);
  EXPECT_THROW(residual_temporal_layer(gen.array({1, 2, 2, 9}, false), layer), DimensionError);
}

TEST(ReceptiveField, LengthFormula) {
  EXPECT_EQ((ReceptiveField{2, 7, 1}).length(), 13u);
  EXPECT_EQ((ReceptiveField{3, 7, 1}).length(), 19u);
  EXPECT_EQ((ReceptiveField{1, 2, 1}).length(), 2u);
  // 1 + 6 * (2^3 - 1) / (2 - 1)
  EXPECT_EQ((ReceptiveField{3, 7, 2}).length(), 43u);
  EXPECT_EQ((ReceptiveField{2, 7, 3}).length(), 25u);
}

TEST(ReceptiveField, QSequence) {
  EXPECT_EQ((ReceptiveField{2, 7, 1}).lengths(13), (std::vector<std::size_t>{7, 1}));
  EXPECT_EQ((ReceptiveField{3, 7, 2}).lengths(43), (std::vector<std::size_t>{37, 25, 1}));
  EXPECT_THROW((ReceptiveField{2, 7, 1}).lengths(12), DimensionError);
}

TEST(ReceptiveField, PerturbationProbe) {
  for (std::size_t base : {1u, 2u}) {
    for (std::size_t layers : {1u, 2u, 3u}) {
      const ReceptiveField rf{layers, 7, base};
      const std::size_t R = rf.length();
      const std::size_t T = R + 5;
      std::mt19937_64 rng(layers * 10 + base);
      oracle::Gen gen(layers);
      std::vector<TemporalLayer> stack;
      std::size_t dilation = 1;
      for (std::size_t l = 0; l < layers; ++l) {
        stack.push_back(TemporalLayer::create(4, 4, {2, 3, 6, 7}, dilation, rng));
        randomize_biases(stack.back(), gen);
        dilation *= base;
      }
      auto last_output = [&](const DiffArray& x) {
        DiffArray z = x;
        for (const auto& layer : stack) z = residual_temporal_layer(z, layer);
        const std::size_t tq = z.dim(3);
        std::vector<double> out;
        for (std::size_t row = 0; row < 4 * 2; ++row) out.push_back(z.values()[row * tq + tq - 1]);
        return out;
      };
      const DiffArray x = gen.array({1, 4, 2, T}, false);
      const auto base_out = last_output(x);
      for (std::size_t t = 0; t < T; ++t) {
        DiffArray y(x.shape(), to_vec(x));
        for (std::size_t c = 0; c < 4; ++c) y.mutable_values()[(c * 2 + 1) * T + t] += 0.5;
        const auto out = last_output(y);
        double change = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) change = std::max(change, std::abs(out[i] - base_out[i]));
        const bool inside = T - 1 - t < R;
        if (inside) {
          EXPECT_GT(change, 0.0) << "L=" << layers << " r=" << base << " t=" << t;
        } else {
          EXPECT_EQ(change, 0.0) << "L=" << layers << " r=" << base << " t=" << t;
        }
      }
    }
  }
}

TEST(PadToReceptiveField, WindowFiveBecomesThirteen) {
  oracle::Gen gen(11);
  const DiffArray w = gen.array({1, 1, 3, 5}, false);
  const DiffArray p = pad_to_receptive_field(w, 13);
  ASSERT_EQ(p.shape(), (Shape{1, 1, 3, 13}));
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t t = 0; t < 8; ++t) EXPECT_EQ(p.values()[n * 13 + t], 0.0);
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(p.values()[n * 13 + 8 + t], w.values()[n * 5 + t]);
  }
}

TEST(PadToReceptiveField, FullWindowIsIdentity) {
  oracle::Gen gen(12);
  const DiffArray w = gen.array({2, 1, 3, 13}, false);
  EXPECT_EQ(to_vec(pad_to_receptive_field(w, 13)), to_vec(w));
  EXPECT_EQ(to_vec(pad_to_receptive_field(w, 7)), to_vec(w));
}

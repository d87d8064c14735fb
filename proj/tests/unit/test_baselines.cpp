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

#include "cstgl/baselines.hpp"
#include "cstgl/errors.hpp"
#include "oracles.hpp"

using namespace cstgl;

namespace {

Matrix structured(oracle::Gen& gen, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double f = gen.normal();
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = 0.5 + 0.2 * f * (c + 1) + 0.05 * gen.normal();
  }
  return m;
}

}  // namespace

TEST(StackRows, Concatenates) {
  const Matrix a(1, 2, {1, 2}), b(2, 2, {3, 4, 5, 6});
  EXPECT_EQ(stack_rows(a, b), Matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(stack_rows(a, Matrix(1, 3)), DimensionError);
}

TEST(RawSignalBaseline, MeanIsMinimalAndScoresMonotone) {
  oracle::Gen gen(1);
  const Matrix fit = gen.matrix(100, 3, 0.0, 1.0);
  const RawSignalBaseline b = RawSignalBaseline::fit(fit, fit);
  const auto& mu = b.gaussian().mean();
  const double at_mean = b.score(mu).score;
  for (int t = 0; t < 50; ++t) EXPECT_GE(b.score(gen.vec(3, -1.0, 2.0)).score, at_mean);
  double prev = at_mean;
  for (double d = 0.1; d < 3.0; d += 0.1) {
    std::vector<double> x = mu;
    x[1] -= d;
    const double s = b.score(x).score;
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(RawSignalBaseline, MatchesScalarLogPdfOracle) {
  oracle::Gen gen(2);
  const Matrix fit = gen.matrix(80, 4, -1.0, 1.0);
  const Matrix thr = gen.matrix(20, 4, -1.0, 1.0);
  const RawSignalBaseline b = RawSignalBaseline::fit(fit, thr);
  for (int t = 0; t < 30; ++t) {
    const auto x = gen.vec(4, -3.0, 3.0);
    double want = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      double mu = 0.0, var = 0.0;
      for (std::size_t r = 0; r < 80; ++r) mu += fit(r, c) / 80.0;
      for (std::size_t r = 0; r < 80; ++r) var += (fit(r, c) - mu) * (fit(r, c) - mu) / 80.0;
      want += oracle::gaussian_nll(x[c], mu, var);
    }
    EXPECT_NEAR(b.score(x).score, want, 1e-10);
  }
  double mx = -1e300;
  for (std::size_t r = 0; r < 20; ++r) mx = std::max(mx, b.score(thr.row(r)).score);
  EXPECT_EQ(b.threshold(), mx);
  const ScoreStream s = b.score_all(thr);
  for (int f : s.flags) EXPECT_EQ(f, 0);
}

TEST(PcaBaseline, FullRankAndMeanScoreZero) {
  oracle::Gen gen(3);
  const Matrix fit = structured(gen, 100, 4);
  const PcaBaseline b = PcaBaseline::fit(fit, fit);
  EXPECT_EQ(b.score(b.basis().mean).score, 0.0);
  const PcaBaseline full = PcaBaseline::from_parts(b.basis(), 4, 0.0);
  EXPECT_EQ(full.score(gen.vec(4)).score, 0.0);
}

TEST(PcaBaseline, RmsMatchesEigenOracle) {
  oracle::Gen gen(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = gen.index(2, 7);
    const Matrix fit = structured(gen, 90, n);
    const PcaBaseline b = PcaBaseline::fit(fit, fit);
    const auto ref = oracle::jacobi_eigen(oracle::naive_covariance(fit));
    std::vector<double> mean(n, 0.0);
    for (std::size_t r = 0; r < 90; ++r)
      for (std::size_t c = 0; c < n; ++c) mean[c] += fit(r, c) / 90.0;
    const auto x = gen.vec(n, -1.0, 2.0);
    const auto recon = oracle::reconstruct(ref, mean, x, b.n_components());
    double ss = 0.0;
    for (std::size_t c = 0; c < n; ++c) ss += (recon[c] - x[c]) * (recon[c] - x[c]);
    EXPECT_NEAR(b.score(x).score, std::sqrt(ss / n), 1e-8);
  }
}

TEST(PcaBaseline, ThresholdFromThresholdRowsAndUnfittedError) {
  oracle::Gen gen(5);
  const Matrix fit = structured(gen, 100, 3);
  const Matrix thr = structured(gen, 30, 3);
  const PcaBaseline b = PcaBaseline::fit(fit, thr);
  double mx = 0.0;
  for (std::size_t r = 0; r < 30; ++r) mx = std::max(mx, b.score(thr.row(r)).score);
  EXPECT_EQ(b.threshold(), mx);
  EXPECT_THROW(PcaBaseline().score(std::vector<double>{1, 2, 3}), ContractError);
  EXPECT_THROW(PcaBaseline::from_parts(b.basis(), 0, 0.0), ContractError);
}

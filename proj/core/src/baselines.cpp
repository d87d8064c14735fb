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

#include "cstgl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cstgl/errors.hpp"

namespace cstgl {

Matrix stack_rows(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.cols() != b.cols()) throw DimensionError("stack_rows: column counts differ");
  std::vector<double> data = a.data();
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Matrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

namespace {

template <typename Scorer>
ScoreStream score_rows(const Scorer& scorer, const Matrix& rows, double threshold) {
  ScoreStream out;
  out.contributions = Matrix(rows.rows(), rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const ScoreResult s = scorer.score(rows.row(r));
    out.scores.push_back(s.score);
    out.flags.push_back(classify(s.score, threshold));
    std::copy(s.contributions.begin(), s.contributions.end(), out.contributions.row(r).begin());
  }
  return out;
}

template <typename Scorer>
double max_score(const Scorer& scorer, const Matrix& rows) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < rows.rows(); ++r) m = std::max(m, scorer.score(rows.row(r)).score);
  return m;
}

}  // namespace

RawSignalBaseline RawSignalBaseline::fit(const Matrix& fit_rows, const Matrix& threshold_rows) {
  RawSignalBaseline b;
  b.gaussian_ = GaussianScorer::fit(fit_rows);
  b.threshold_ = max_score(b.gaussian_, threshold_rows);
  return b;
}

RawSignalBaseline RawSignalBaseline::from_parts(GaussianScorer gaussian, double threshold) {
  RawSignalBaseline b;
  b.gaussian_ = std::move(gaussian);
  b.threshold_ = threshold;
  return b;
}

ScoreStream RawSignalBaseline::score_all(const Matrix& rows) const {
  return score_rows(*this, rows, threshold_);
}

PcaBaseline PcaBaseline::fit(const Matrix& fit_rows, const Matrix& threshold_rows,
                             const ComponentRule& rule) {
  if (fit_rows.rows() < 2) throw ContractError("PcaBaseline::fit: needs at least 2 rows");
  PcaBaseline b;
  b.basis_ = fit_pca_basis(fit_rows);
  b.n_components_ = choose_components(b.basis_, fit_rows, rule);
  b.fitted_ = true;
  b.threshold_ = max_score(b, threshold_rows);
  return b;
}

PcaBaseline PcaBaseline::from_parts(PcaBasis basis, std::size_t n_components,
                                    double threshold) {
  if (n_components == 0 || n_components > basis.dim()) {
    throw ContractError("PcaBaseline: component count outside [1, N]");
  }
  PcaBaseline b;
  b.basis_ = std::move(basis);
  b.n_components_ = n_components;
  b.threshold_ = threshold;
  b.fitted_ = true;
  return b;
}

ScoreResult PcaBaseline::score(std::span<const double> x) const {
  if (!fitted_) throw ContractError("PcaBaseline: baseline is not fitted");
  const auto recon = basis_.reconstruct(x, n_components_);
  ScoreResult out;
  out.contributions.resize(x.size());
  double sq = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = recon[j] - x[j];
    out.contributions[j] = std::abs(d);
    sq += d * d;
  }
  out.score = std::sqrt(sq / static_cast<double>(x.size()));
  return out;
}

ScoreStream PcaBaseline::score_all(const Matrix& rows) const {
  return score_rows(*this, rows, threshold_);
}

}  // namespace cstgl

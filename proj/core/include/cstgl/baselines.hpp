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
#include <span>
#include <vector>

#include "cstgl/matrix.hpp"
#include "cstgl/scorer.hpp"

namespace cstgl {

// Per-channel Gaussian on scaled raw signals; score = summed negative
// log-likelihood. Equivalent to a reconstructor that predicts zero error.
class RawSignalBaseline {
 public:
  RawSignalBaseline() = default;
  // Fits on `fit_rows` (train plus validation); the threshold is the max
  // score over `threshold_rows`.
  static RawSignalBaseline fit(const Matrix& fit_rows, const Matrix& threshold_rows);

  const GaussianScorer& gaussian() const { return gaussian_; }
  double threshold() const { return threshold_; }
  ScoreResult score(std::span<const double> x) const { return gaussian_.score(x); }
  ScoreStream score_all(const Matrix& rows) const;

  static RawSignalBaseline from_parts(GaussianScorer gaussian, double threshold);

 private:
  GaussianScorer gaussian_;
  double threshold_ = 0.0;
};

// PCA on scaled raw signals; score = root-mean-square reconstruction error
// over channels, keeping the components chosen by `rule`.
class PcaBaseline {
 public:
  PcaBaseline() = default;
  static PcaBaseline fit(const Matrix& fit_rows, const Matrix& threshold_rows,
                         const ComponentRule& rule = {});
  static PcaBaseline from_parts(PcaBasis basis, std::size_t n_components, double threshold);

  bool fitted() const { return fitted_; }
  const PcaBasis& basis() const { return basis_; }
  std::size_t n_components() const { return n_components_; }
  double threshold() const { return threshold_; }

  // Contributions are per-channel absolute reconstruction errors.
  ScoreResult score(std::span<const double> x) const;
  ScoreStream score_all(const Matrix& rows) const;

 private:
  bool fitted_ = false;
  PcaBasis basis_;
  std::size_t n_components_ = 0;
  double threshold_ = 0.0;
};

// Rows of a followed by rows of b.
Matrix stack_rows(const Matrix& a, const Matrix& b);

}  // namespace cstgl

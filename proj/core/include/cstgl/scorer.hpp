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
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cstgl/matrix.hpp"

namespace cstgl {

// Quantile of sorted data by linear interpolation between order statistics
// (position q * (n - 1)).
double quantile_sorted(std::span<const double> sorted, double q);

// Causal per-channel median/IQR standardization of absolute forecast errors.
// Statistics come from the buffered errors strictly before the current one
// (the current value alone when the buffer is empty); the current error is
// pushed afterwards and the oldest dropped beyond window_length.
class ErrorNormalizer {
 public:
  ErrorNormalizer() = default;
  ErrorNormalizer(std::size_t channels, std::size_t window_length, double epsilon = 1e-2);

  std::size_t channels() const { return buffers_.size(); }
  std::size_t window_length() const { return window_length_; }
  double epsilon() const { return epsilon_; }
  std::size_t buffered() const { return buffers_.empty() ? 0 : buffers_[0].size(); }

  std::vector<double> normalize(std::span<const double> abs_errors);

  // Buffered errors, oldest first (rows = time).
  Matrix buffer_contents() const;
  void load_buffer(const Matrix& contents);

 private:
  std::size_t window_length_ = 0;
  double epsilon_ = 1e-2;
  std::vector<std::deque<double>> buffers_;
  std::vector<std::vector<double>> sorted_;  // rebuilt lazily from buffers_
};

// Row-by-row normalize() over a block of absolute errors.
Matrix normalize_errors(ErrorNormalizer& normalizer, const Matrix& abs_errors);

// |actual(offset + r, c) - forecast(r, c)|.
Matrix absolute_errors(const Matrix& forecast, const Matrix& actual, std::size_t offset);

// Mean over cells of 2|a - b| / (|a| + |b| + 1e-8).
double smape(const Matrix& reconstructed, const Matrix& original);

// Centered eigenbasis of a sample: rows of `components` are unit eigenvectors
// of the covariance in descending eigenvalue order; negative eigenvalues from
// round-off are clamped to 0.
struct PcaBasis {
  std::vector<double> mean;
  Matrix components;
  std::vector<double> eigenvalues;

  std::size_t dim() const { return mean.size(); }
  // Reconstruction of x from its first n_components projections.
  std::vector<double> reconstruct(std::span<const double> x, std::size_t n_components) const;
};

// Requires at least two rows.
PcaBasis fit_pca_basis(const Matrix& samples);
Matrix sample_covariance(const Matrix& samples);

// Smallest L whose reconstruction of `samples` has sMAPE below `target`.
std::size_t select_components(const PcaBasis& basis, const Matrix& samples,
                              double target = 0.10);
// Number of eigenvalues above the mean eigenvalue, at least 1.
std::size_t kaiser_components(const PcaBasis& basis);

// How many principal components a reconstruction keeps.
struct ComponentRule {
  double smape_target = 0.10;
  // On nearly independent channels the sMAPE rule keeps all N components,
  // which makes every residual zero. In that case use kaiser_components.
  bool full_rank_fallback = true;
  // Overrides the rules above when set.
  std::optional<std::size_t> fixed;
};
std::size_t choose_components(const PcaBasis& basis, const Matrix& samples,
                              const ComponentRule& rule);

struct ScoreResult {
  double score = 0.0;
  std::vector<double> contributions;
};

// PCA reconstruction scorer fitted on normalized validation errors. Score is
// the L1 distance between a normalized error vector and its reconstruction.
class PcaScorer {
 public:
  PcaScorer() = default;
  // Fits basis, component count and threshold = max validation score.
  // Throws ContractError when fewer than two rows are given.
  static PcaScorer fit(const Matrix& validation_errors, const ComponentRule& rule = {});
  static PcaScorer from_parts(PcaBasis basis, std::size_t n_components, double threshold);

  bool fitted() const { return fitted_; }
  const PcaBasis& basis() const { return basis_; }
  std::size_t n_components() const { return n_components_; }
  double threshold() const { return threshold_; }
  void set_n_components(std::size_t n);

  ScoreResult score(std::span<const double> normalized_error) const;

 private:
  void require_fitted() const;

  bool fitted_ = false;
  PcaBasis basis_;
  std::size_t n_components_ = 0;
  double threshold_ = 0.0;
};

// Sum over channels of -log N(x_i; mu_i, sigma_i^2), sigma^2 floored at 1e-6.
// Contributions are the per-channel excess over each channel's minimum
// (0.5 z^2), so they stay non-negative.
class GaussianScorer {
 public:
  static constexpr double kVarianceFloor = 1e-6;

  GaussianScorer() = default;
  // Per-channel mean and (population) variance; threshold = max score on
  // `samples`.
  static GaussianScorer fit(const Matrix& samples);
  static GaussianScorer from_parts(std::vector<double> mean, std::vector<double> variance,
                                   double threshold);

  bool fitted() const { return !mean_.empty(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& variance() const { return variance_; }
  double threshold() const { return threshold_; }

  ScoreResult score(std::span<const double> x) const;

 private:
  std::vector<double> mean_;
  std::vector<double> variance_;
  double threshold_ = 0.0;
};

// 1 iff score > threshold.
inline int classify(double score, double threshold) { return score > threshold ? 1 : 0; }

struct ScoreStream {
  std::vector<double> scores;
  std::vector<int> flags;
  Matrix contributions;  // rows = timestamps
};

enum class ScorerKind { Pca, Gaussian };

// Normalizer plus fitted scorer. fit() consumes the validation errors in
// order (warming the normalizer); score() continues from that state.
class AnomalyDetector {
 public:
  AnomalyDetector() = default;

  static AnomalyDetector fit(const Matrix& validation_abs_errors, ScorerKind kind,
                             std::optional<std::size_t> window_length = std::nullopt,
                             double epsilon = 1e-2, const ComponentRule& rule = {});

  ScorerKind kind() const { return kind_; }
  double threshold() const;
  const ErrorNormalizer& normalizer() const { return normalizer_; }
  const PcaScorer& pca() const { return pca_; }
  const GaussianScorer& gaussian() const { return gaussian_; }
  // Validation scores seen during fit().
  const ScoreStream& validation() const { return validation_; }

  // Scores a block that immediately follows the validation span. The stored
  // normalizer state is copied, so repeated calls give identical output.
  ScoreStream score(const Matrix& abs_errors) const;

  static AnomalyDetector from_parts(ScorerKind kind, ErrorNormalizer normalizer,
                                    PcaScorer pca, GaussianScorer gaussian);

 private:
  ScoreResult score_one(std::span<const double> normalized) const;

  ScorerKind kind_ = ScorerKind::Pca;
  ErrorNormalizer normalizer_;
  PcaScorer pca_;
  GaussianScorer gaussian_;
  ScoreStream validation_;
};

// Indices of the `m` largest entries, ties to the lowest index.
std::vector<std::size_t> top_channels(std::span<const double> values, std::size_t m);

// Tab-separated score table: timestamp, score, flag, top1..top3 (channel
// names). Timestamps are first_timestamp + row.
void write_score_stream(const std::filesystem::path& path, const ScoreStream& stream,
                        const std::vector<std::string>& channel_names,
                        std::size_t first_timestamp = 0);
// Tab-separated contributions: timestamp then one column per channel.
void write_contributions(const std::filesystem::path& path, const Matrix& contributions,
                         const std::vector<std::string>& channel_names,
                         std::size_t first_timestamp = 0);

struct ScoreTable {
  std::vector<std::size_t> timestamps;
  std::vector<double> scores;
  std::vector<int> flags;
};
ScoreTable read_score_stream(const std::filesystem::path& path);
// Returns the contributions matrix; channel names are stored into `names`
// when non-null.
Matrix read_contributions(const std::filesystem::path& path,
                          std::vector<std::string>* names = nullptr);

}  // namespace cstgl

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

#include "cstgl/scorer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "cstgl/errors.hpp"
#include "cstgl/text.hpp"

namespace cstgl {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ContractError("quantile_sorted: empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// ---------------------------------------------------------------------------
// ErrorNormalizer

ErrorNormalizer::ErrorNormalizer(std::size_t channels, std::size_t window_length,
                                 double epsilon)
    : window_length_(window_length), epsilon_(epsilon), buffers_(channels) {
  if (window_length == 0) throw ContractError("ErrorNormalizer: window length must be >= 1");
  if (!(epsilon > 0.0)) throw ContractError("ErrorNormalizer: epsilon must be positive");
}

namespace {

// Sorted copy of a deque, kept in step with it by the caller.
struct SortedWindow {
  static void insert(std::vector<double>& sorted, double v) {
    sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), v), v);
  }
  static void erase(std::vector<double>& sorted, double v) {
    sorted.erase(std::lower_bound(sorted.begin(), sorted.end(), v));
  }
};

}  // namespace

std::vector<double> ErrorNormalizer::normalize(std::span<const double> abs_errors) {
  if (abs_errors.size() != buffers_.size()) {
    throw DimensionError("ErrorNormalizer: got " + std::to_string(abs_errors.size()) +
                         " errors for " + std::to_string(buffers_.size()) + " channels");
  }
  if (sorted_.size() != buffers_.size()) {
    sorted_.assign(buffers_.size(), {});
    for (std::size_t c = 0; c < buffers_.size(); ++c) {
      sorted_[c].assign(buffers_[c].begin(), buffers_[c].end());
      std::sort(sorted_[c].begin(), sorted_[c].end());
    }
  }
  std::vector<double> out(abs_errors.size(), 0.0);
  for (std::size_t c = 0; c < abs_errors.size(); ++c) {
    const double e = abs_errors[c];
    auto& sorted = sorted_[c];
    if (!sorted.empty()) {
      const double median = quantile_sorted(sorted, 0.5);
      const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
      out[c] = (e - median) / (iqr + epsilon_);
    }
    buffers_[c].push_back(e);
    SortedWindow::insert(sorted, e);
    if (buffers_[c].size() > window_length_) {
      SortedWindow::erase(sorted, buffers_[c].front());
      buffers_[c].pop_front();
    }
  }
  return out;
}

Matrix ErrorNormalizer::buffer_contents() const {
  Matrix out(buffered(), channels());
  for (std::size_t c = 0; c < channels(); ++c)
    for (std::size_t r = 0; r < buffers_[c].size(); ++r) out(r, c) = buffers_[c][r];
  return out;
}

void ErrorNormalizer::load_buffer(const Matrix& contents) {
  if (contents.cols() != channels() && contents.rows() > 0) {
    throw DimensionError("ErrorNormalizer::load_buffer: channel count mismatch");
  }
  if (contents.rows() > window_length_) {
    throw ContractError("ErrorNormalizer::load_buffer: more rows than the window length");
  }
  for (std::size_t c = 0; c < channels(); ++c) {
    buffers_[c].clear();
    for (std::size_t r = 0; r < contents.rows(); ++r) buffers_[c].push_back(contents(r, c));
  }
  sorted_.clear();
}

Matrix normalize_errors(ErrorNormalizer& normalizer, const Matrix& abs_errors) {
  Matrix out(abs_errors.rows(), abs_errors.cols());
  for (std::size_t r = 0; r < abs_errors.rows(); ++r) {
    const auto v = normalizer.normalize(abs_errors.row(r));
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

Matrix absolute_errors(const Matrix& forecast, const Matrix& actual, std::size_t offset) {
  if (forecast.cols() != actual.cols() || offset + forecast.rows() > actual.rows()) {
    throw DimensionError("absolute_errors: forecast does not fit the actual series");
  }
  Matrix out(forecast.rows(), forecast.cols());
  for (std::size_t r = 0; r < forecast.rows(); ++r)
    for (std::size_t c = 0; c < forecast.cols(); ++c)
      out(r, c) = std::abs(actual(offset + r, c) - forecast(r, c));
  return out;
}

double smape(const Matrix& reconstructed, const Matrix& original) {
  if (reconstructed.rows() != original.rows() || reconstructed.cols() != original.cols()) {
    throw DimensionError("smape: shape mismatch");
  }
  if (original.empty()) throw ContractError("smape: empty input");
  double sum = 0.0;
  const auto& a = reconstructed.data();
  const auto& b = original.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += 2.0 * std::abs(a[i] - b[i]) / (std::abs(a[i]) + std::abs(b[i]) + 1e-8);
  }
  return sum / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// PCA

Matrix sample_covariance(const Matrix& samples) {
  const std::size_t t = samples.rows();
  const std::size_t n = samples.cols();
  if (t < 2) throw ContractError("covariance needs at least 2 rows, got " + std::to_string(t));
  std::vector<double> mean(n, 0.0);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c = 0; c < n; ++c) mean[c] += samples(r, c);
  for (double& m : mean) m /= static_cast<double>(t);
  Matrix cov(n, n);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t i = 0; i < n; ++i) {
      const double di = samples(r, i) - mean[i];
      for (std::size_t j = i; j < n; ++j) cov(i, j) += di * (samples(r, j) - mean[j]);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      cov(i, j) /= static_cast<double>(t - 1);
      cov(j, i) = cov(i, j);
    }
  return cov;
}

PcaBasis fit_pca_basis(const Matrix& samples) {
  const std::size_t n = samples.cols();
  const Matrix cov = sample_covariance(samples);
  PcaBasis basis;
  basis.mean.assign(n, 0.0);
  for (std::size_t r = 0; r < samples.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) basis.mean[c] += samples(r, c);
  for (double& m : basis.mean) m /= static_cast<double>(samples.rows());

  Eigen::MatrixXd c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = cov(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success) {
    throw NumericError("PCA: eigendecomposition of the covariance failed");
  }
  basis.components = Matrix(n, n);
  basis.eigenvalues.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = n - 1 - k;  // Eigen sorts ascending
    basis.eigenvalues[k] = std::max(0.0, solver.eigenvalues()(src));
    // Sign convention: the largest-magnitude coordinate is positive.
    std::size_t arg = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (std::abs(solver.eigenvectors()(j, src)) > std::abs(solver.eigenvectors()(arg, src))) {
        arg = j;
      }
    }
    const double sign = solver.eigenvectors()(arg, src) < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      basis.components(k, j) = sign * solver.eigenvectors()(j, src);
    }
  }
  return basis;
}

std::vector<double> PcaBasis::reconstruct(std::span<const double> x,
                                          std::size_t n_components) const {
  const std::size_t n = dim();
  if (x.size() != n) {
    throw DimensionError("PCA reconstruct: got " + std::to_string(x.size()) +
                         " values for " + std::to_string(n) + " channels");
  }
  // A complete orthonormal basis reproduces x exactly; skip the rounding.
  if (n_components >= n) return {x.begin(), x.end()};
  std::vector<double> centered(n);
  for (std::size_t j = 0; j < n; ++j) centered[j] = x[j] - mean[j];
  std::vector<double> out = mean;
  for (std::size_t k = 0; k < std::min(n_components, n); ++k) {
    double p = 0.0;
    for (std::size_t j = 0; j < n; ++j) p += centered[j] * components(k, j);
    for (std::size_t j = 0; j < n; ++j) out[j] += p * components(k, j);
  }
  return out;
}

std::size_t select_components(const PcaBasis& basis, const Matrix& samples, double target) {
  const std::size_t n = basis.dim();
  const std::size_t t = samples.rows();
  Matrix centered(t, n);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t j = 0; j < n; ++j) centered(r, j) = samples(r, j) - basis.mean[j];
  Matrix recon(t, n);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t j = 0; j < n; ++j) recon(r, j) = basis.mean[j];
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t r = 0; r < t; ++r) {
      double p = 0.0;
      for (std::size_t j = 0; j < n; ++j) p += centered(r, j) * basis.components(k, j);
      for (std::size_t j = 0; j < n; ++j) recon(r, j) += p * basis.components(k, j);
    }
    if (smape(recon, samples) < target) return k + 1;
  }
  return n;
}

std::size_t kaiser_components(const PcaBasis& basis) {
  const auto& ev = basis.eigenvalues;
  if (ev.empty()) return 0;
  double mean = 0.0;
  for (double v : ev) mean += v;
  mean /= static_cast<double>(ev.size());
  std::size_t count = 0;
  for (double v : ev) count += v > mean ? 1 : 0;
  return std::max<std::size_t>(count, 1);
}

std::size_t choose_components(const PcaBasis& basis, const Matrix& samples,
                              const ComponentRule& rule) {
  const std::size_t n = basis.dim();
  if (rule.fixed) {
    if (*rule.fixed == 0 || *rule.fixed > n) {
      throw ContractError("component count " + std::to_string(*rule.fixed) +
                          " outside [1, " + std::to_string(n) + "]");
    }
    return *rule.fixed;
  }
  const std::size_t l = select_components(basis, samples, rule.smape_target);
  if (l == n && n > 1 && rule.full_rank_fallback) return kaiser_components(basis);
  return l;
}

PcaScorer PcaScorer::fit(const Matrix& validation_errors, const ComponentRule& rule) {
  if (validation_errors.rows() < 2) {
    throw ContractError("PcaScorer::fit: needs at least 2 validation rows, got " +
                        std::to_string(validation_errors.rows()));
  }
  PcaScorer s;
  s.basis_ = fit_pca_basis(validation_errors);
  s.n_components_ = choose_components(s.basis_, validation_errors, rule);
  s.fitted_ = true;
  double threshold = 0.0;
  for (std::size_t r = 0; r < validation_errors.rows(); ++r) {
    threshold = std::max(threshold, s.score(validation_errors.row(r)).score);
  }
  s.threshold_ = threshold;
  return s;
}

PcaScorer PcaScorer::from_parts(PcaBasis basis, std::size_t n_components, double threshold) {
  if (basis.components.rows() != basis.dim() || basis.components.cols() != basis.dim() ||
      basis.eigenvalues.size() != basis.dim()) {
    throw DimensionError("PcaScorer::from_parts: inconsistent basis shapes");
  }
  PcaScorer s;
  s.basis_ = std::move(basis);
  s.fitted_ = true;
  s.set_n_components(n_components);
  s.threshold_ = threshold;
  return s;
}

void PcaScorer::set_n_components(std::size_t n) {
  if (n == 0 || n > basis_.dim()) {
    throw ContractError("PcaScorer: component count " + std::to_string(n) +
                        " outside [1, " + std::to_string(basis_.dim()) + "]");
  }
  n_components_ = n;
}

void PcaScorer::require_fitted() const {
  if (!fitted_) throw ContractError("PcaScorer: scorer is not fitted");
}

ScoreResult PcaScorer::score(std::span<const double> normalized_error) const {
  require_fitted();
  const auto recon = basis_.reconstruct(normalized_error, n_components_);
  ScoreResult out;
  out.contributions.resize(recon.size());
  for (std::size_t j = 0; j < recon.size(); ++j) {
    out.contributions[j] = std::abs(recon[j] - normalized_error[j]);
    out.score += out.contributions[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian

GaussianScorer GaussianScorer::fit(const Matrix& samples) {
  if (samples.rows() == 0) throw ContractError("GaussianScorer::fit: empty sample");
  const std::size_t n = samples.cols();
  GaussianScorer g;
  g.mean_.assign(n, 0.0);
  g.variance_.assign(n, 0.0);
  const double t = static_cast<double>(samples.rows());
  for (std::size_t r = 0; r < samples.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) g.mean_[c] += samples(r, c);
  for (double& m : g.mean_) m /= t;
  for (std::size_t r = 0; r < samples.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double d = samples(r, c) - g.mean_[c];
      g.variance_[c] += d * d;
    }
  for (double& v : g.variance_) v = std::max(v / t, kVarianceFloor);
  double threshold = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    threshold = std::max(threshold, g.score(samples.row(r)).score);
  }
  g.threshold_ = threshold;
  return g;
}

GaussianScorer GaussianScorer::from_parts(std::vector<double> mean,
                                          std::vector<double> variance, double threshold) {
  if (mean.size() != variance.size() || mean.empty()) {
    throw DimensionError("GaussianScorer::from_parts: mean/variance size mismatch");
  }
  GaussianScorer g;
  g.mean_ = std::move(mean);
  g.variance_ = std::move(variance);
  for (double& v : g.variance_) v = std::max(v, kVarianceFloor);
  g.threshold_ = threshold;
  return g;
}

ScoreResult GaussianScorer::score(std::span<const double> x) const {
  if (!fitted()) throw ContractError("GaussianScorer: scorer is not fitted");
  if (x.size() != mean_.size()) throw DimensionError("GaussianScorer: channel count mismatch");
  ScoreResult out;
  out.contributions.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean_[i];
    const double excess = 0.5 * d * d / variance_[i];
    out.contributions[i] = excess;
    out.score += 0.5 * std::log(2.0 * std::numbers::pi * variance_[i]) + excess;
  }
  return out;
}

// ---------------------------------------------------------------------------
// AnomalyDetector

AnomalyDetector AnomalyDetector::fit(const Matrix& validation_abs_errors, ScorerKind kind,
                                     std::optional<std::size_t> window_length,
                                     double epsilon, const ComponentRule& rule) {
  const std::size_t t = validation_abs_errors.rows();
  if (t < 2) {
    throw ContractError("AnomalyDetector::fit: needs at least 2 validation rows, got " +
                        std::to_string(t));
  }
  AnomalyDetector d;
  d.kind_ = kind;
  d.normalizer_ = ErrorNormalizer(validation_abs_errors.cols(),
                                  window_length.value_or(std::min<std::size_t>(t, 5000)),
                                  epsilon);
  const Matrix normalized = normalize_errors(d.normalizer_, validation_abs_errors);
  if (kind == ScorerKind::Pca) {
    d.pca_ = PcaScorer::fit(normalized, rule);
  } else {
    d.gaussian_ = GaussianScorer::fit(normalized);
  }
  d.validation_.contributions = Matrix(t, normalized.cols());
  for (std::size_t r = 0; r < t; ++r) {
    const ScoreResult s = d.score_one(normalized.row(r));
    d.validation_.scores.push_back(s.score);
    d.validation_.flags.push_back(classify(s.score, d.threshold()));
    std::copy(s.contributions.begin(), s.contributions.end(),
              d.validation_.contributions.row(r).begin());
  }
  return d;
}

AnomalyDetector AnomalyDetector::from_parts(ScorerKind kind, ErrorNormalizer normalizer,
                                            PcaScorer pca, GaussianScorer gaussian) {
  AnomalyDetector d;
  d.kind_ = kind;
  d.normalizer_ = std::move(normalizer);
  d.pca_ = std::move(pca);
  d.gaussian_ = std::move(gaussian);
  return d;
}

double AnomalyDetector::threshold() const {
  return kind_ == ScorerKind::Pca ? pca_.threshold() : gaussian_.threshold();
}

ScoreResult AnomalyDetector::score_one(std::span<const double> normalized) const {
  return kind_ == ScorerKind::Pca ? pca_.score(normalized) : gaussian_.score(normalized);
}

ScoreStream AnomalyDetector::score(const Matrix& abs_errors) const {
  ErrorNormalizer normalizer = normalizer_;
  ScoreStream out;
  out.contributions = Matrix(abs_errors.rows(), abs_errors.cols());
  const double thr = threshold();
  for (std::size_t r = 0; r < abs_errors.rows(); ++r) {
    const auto normalized = normalizer.normalize(abs_errors.row(r));
    const ScoreResult s = score_one(normalized);
    out.scores.push_back(s.score);
    out.flags.push_back(classify(s.score, thr));
    std::copy(s.contributions.begin(), s.contributions.end(),
              out.contributions.row(r).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// score tables

std::vector<std::size_t> top_channels(std::span<const double> values, std::size_t m) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(std::min(m, order.size()));
  return order;
}

void write_score_stream(const std::filesystem::path& path, const ScoreStream& stream,
                        const std::vector<std::string>& channel_names,
                        std::size_t first_timestamp) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "timestamp\tscore\tflag\ttop1\ttop2\ttop3\n";
  for (std::size_t r = 0; r < stream.scores.size(); ++r) {
    out << first_timestamp + r << '\t' << text::format_double(stream.scores[r]) << '\t'
        << stream.flags[r];
    const auto top = top_channels(stream.contributions.row(r), 3);
    for (std::size_t k = 0; k < 3; ++k) {
      out << '\t' << (k < top.size() ? channel_names.at(top[k]) : std::string("-"));
    }
    out << '\n';
  }
}

void write_contributions(const std::filesystem::path& path, const Matrix& contributions,
                         const std::vector<std::string>& channel_names,
                         std::size_t first_timestamp) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "timestamp";
  for (const auto& name : channel_names) out << '\t' << name;
  out << '\n';
  for (std::size_t r = 0; r < contributions.rows(); ++r) {
    out << first_timestamp + r;
    for (double v : contributions.row(r)) out << '\t' << text::format_double(v);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(text::trim(line.substr(start, tab - start)));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double parse_cell(const std::string& cell, const std::filesystem::path& path,
                  std::size_t line) {
  const auto v = text::parse_double(cell);
  if (!v) {
    throw IngestionError(path.string() + ": line " + std::to_string(line) + ": '" + cell +
                         "' is not a number");
  }
  return *v;
}

}  // namespace

ScoreTable read_score_stream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open score stream " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_tabs(line).at(0) != "timestamp") {
    throw IngestionError(path.string() + ": missing score table header");
  }
  ScoreTable table;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    const auto cells = split_tabs(line);
    if (cells.size() < 3) {
      throw IngestionError(path.string() + ": line " + std::to_string(n) + ": too few columns");
    }
    table.timestamps.push_back(static_cast<std::size_t>(parse_cell(cells[0], path, n)));
    table.scores.push_back(parse_cell(cells[1], path, n));
    table.flags.push_back(parse_cell(cells[2], path, n) != 0.0 ? 1 : 0);
  }
  return table;
}

Matrix read_contributions(const std::filesystem::path& path, std::vector<std::string>* names) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open contributions " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path.string() + ": empty file");
  auto header = split_tabs(line);
  if (header.empty() || header[0] != "timestamp") {
    throw IngestionError(path.string() + ": missing contributions header");
  }
  header.erase(header.begin());
  Matrix out(0, header.size());
  std::size_t n = 1;
  std::vector<double> row(header.size());
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    const auto cells = split_tabs(line);
    if (cells.size() != header.size() + 1) {
      throw IngestionError(path.string() + ": line " + std::to_string(n) + ": expected " +
                           std::to_string(header.size() + 1) + " columns");
    }
    for (std::size_t c = 0; c < header.size(); ++c) row[c] = parse_cell(cells[c + 1], path, n);
    out.append_row(row);
  }
  if (names) *names = header;
  return out;
}

}  // namespace cstgl

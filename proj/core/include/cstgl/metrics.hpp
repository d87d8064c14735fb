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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cstgl {

// Probability that a random positive outscores a random negative, ties
// counted one half. Throws ContractError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over distinct thresholds of (R_k - R_{k-1}) P_k.
double prc_auc(std::span<const double> scores, std::span<const int> labels);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;  // predictions are score >= threshold; +inf = none
  double precision = 0.0;
  double recall = 0.0;
};

// Pointwise F1 of binary predictions.
F1Result f1_from_predictions(std::span<const int> predictions, std::span<const int> labels);

// Best pointwise F1 over thresholds at each distinct score (plus predict
// nothing); the lowest achieving threshold wins ties.
F1Result best_f1(std::span<const double> scores, std::span<const int> labels);

// Delay-constrained point adjustment of binary predictions: a segment whose
// first detection is within `delay` steps of its start becomes all 1, any
// other segment all 0; predictions outside segments are untouched.
// nullopt = unbounded delay (classic point adjust).
std::vector<int> point_adjust(std::span<const int> predictions, std::span<const int> labels,
                              std::optional<std::size_t> delay);

// Best point-adjusted F1 over all thresholds.
F1Result point_adjust_f1(std::span<const double> scores, std::span<const int> labels,
                         std::optional<std::size_t> delay);

struct RcTopK {
  double hit_rate = 0.0;
  std::size_t hits = 0;
  std::size_t evaluated = 0;
  std::vector<std::size_t> skipped;  // segments without a known cause
};

// Fraction of segments whose top-k ranked channels meet the true causes.
RcTopK rc_topk(const std::vector<std::vector<std::size_t>>& rankings,
               const std::vector<std::set<std::size_t>>& causes, std::size_t k = 3);

inline const std::vector<double> kDefaultDelayMinutes{0, 1, 5, 10, 20, 30, 60};

// Minutes to whole steps at the given sample interval (rounded).
std::size_t delay_steps(double minutes, double sample_interval_seconds);

struct DelayRow {
  double minutes = 0.0;
  std::size_t steps = 0;
  double best_f1 = 0.0;
  std::optional<double> auto_f1;
};

struct EvaluationReport {
  double roc_auc = 0.0;
  double prc_auc = 0.0;
  F1Result best;
  std::optional<F1Result> automatic;
  std::vector<DelayRow> delays;
  DelayRow unbounded;  // classic point adjust
};

EvaluationReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                                 std::optional<std::span<const int>> flags,
                                 const std::vector<double>& delay_minutes,
                                 double sample_interval_seconds);

std::string format_report(const EvaluationReport& report);

}  // namespace cstgl

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

#include "cstgl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "cstgl/errors.hpp"

namespace cstgl {

namespace {

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const int> labels,
                         const char* who, bool need_negatives) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::string(who) + ": " + std::to_string(scores.size()) +
                         " scores for " + std::to_string(labels.size()) + " labels");
  }
  ClassCounts c;
  for (int l : labels) {
    if (l == 1) {
      ++c.positives;
    } else if (l == 0) {
      ++c.negatives;
    } else {
      throw ContractError(std::string(who) + ": labels must be 0 or 1");
    }
  }
  if (c.positives == 0 || (need_negatives && c.negatives == 0)) {
    throw ContractError(std::string(who) + ": labels must contain both classes");
  }
  return c;
}

// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

F1Result f1_of(std::size_t tp, std::size_t fp, std::size_t positives, double threshold) {
  F1Result r;
  r.threshold = threshold;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = positives > 0 ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
  const std::size_t denom = 2 * tp + fp + (positives - tp);
  r.f1 = denom > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  return r;
}

struct Segment {
  std::size_t first, last;
};

std::vector<Segment> segments_of(std::span<const int> labels) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    std::size_t j = i;
    while (j + 1 < labels.size() && labels[j + 1] == 1) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

std::size_t window_end(const Segment& s, std::optional<std::size_t> delay) {
  if (!delay || *delay >= s.last - s.first) return s.last;
  return s.first + *delay;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, "roc_auc", true);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with mid-ranks for ties.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum += mid_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(counts.positives);
  const double n = static_cast<double>(counts.negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double prc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, "prc_auc", false);
  const auto order = descending(scores);
  double ap = 0.0;
  std::size_t tp = 0, fp = 0, i = 0;
  double prev_recall = 0.0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(counts.positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

F1Result f1_from_predictions(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("f1_from_predictions: length mismatch");
  }
  std::size_t tp = 0, fp = 0, pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pos += labels[i] == 1;
    if (predictions[i] == 1) (labels[i] == 1 ? tp : fp) += 1;
  }
  return f1_of(tp, fp, pos, std::numeric_limits<double>::quiet_NaN());
}

F1Result best_f1(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, "best_f1", true);
  const auto order = descending(scores);
  F1Result best = f1_of(0, 0, counts.positives, std::numeric_limits<double>::infinity());
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    const F1Result r = f1_of(tp, fp, counts.positives, thr);
    if (r.f1 >= best.f1) best = r;
  }
  return best;
}

std::vector<int> point_adjust(std::span<const int> predictions, std::span<const int> labels,
                              std::optional<std::size_t> delay) {
  if (predictions.size() != labels.size()) throw DimensionError("point_adjust: length mismatch");
  std::vector<int> out(predictions.begin(), predictions.end());
  for (const auto& s : segments_of(labels)) {
    bool hit = false;
    for (std::size_t t = s.first; t <= window_end(s, delay); ++t) hit = hit || predictions[t] == 1;
    for (std::size_t t = s.first; t <= s.last; ++t) out[t] = hit ? 1 : 0;
  }
  return out;
}

F1Result point_adjust_f1(std::span<const double> scores, std::span<const int> labels,
                         std::optional<std::size_t> delay) {
  const auto counts = check_inputs(scores, labels, "point_adjust_f1", true);
  // A segment is credited at threshold thr iff the max score inside its
  // delay window is >= thr; negatives count as false positives when >= thr.
  struct Credit {
    double value;
    std::size_t length;
  };
  std::vector<Credit> credits;
  for (const auto& s : segments_of(labels)) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t t = s.first; t <= window_end(s, delay); ++t) m = std::max(m, scores[t]);
    credits.push_back({m, s.last - s.first + 1});
  }
  std::sort(credits.begin(), credits.end(),
            [](const Credit& a, const Credit& b) { return a.value > b.value; });
  std::vector<double> negatives;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (labels[i] == 0) negatives.push_back(scores[i]);
  std::sort(negatives.begin(), negatives.end(), std::greater<>());

  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  F1Result best = f1_of(0, 0, counts.positives, std::numeric_limits<double>::infinity());
  std::size_t tp = 0, fp = 0, ci = 0, ni = 0;
  for (double thr : thresholds) {
    while (ci < credits.size() && credits[ci].value >= thr) tp += credits[ci++].length;
    while (ni < negatives.size() && negatives[ni] >= thr) {
      ++fp;
      ++ni;
    }
    const F1Result r = f1_of(tp, fp, counts.positives, thr);
    if (r.f1 >= best.f1) best = r;
  }
  return best;
}

RcTopK rc_topk(const std::vector<std::vector<std::size_t>>& rankings,
               const std::vector<std::set<std::size_t>>& causes, std::size_t k) {
  if (rankings.size() != causes.size()) {
    throw DimensionError("rc_topk: " + std::to_string(rankings.size()) + " rankings for " +
                         std::to_string(causes.size()) + " cause sets");
  }
  RcTopK out;
  for (std::size_t s = 0; s < rankings.size(); ++s) {
    if (causes[s].empty()) {
      out.skipped.push_back(s);
      continue;
    }
    ++out.evaluated;
    const std::size_t m = std::min(k, rankings[s].size());
    for (std::size_t i = 0; i < m; ++i) {
      if (causes[s].count(rankings[s][i])) {
        ++out.hits;
        break;
      }
    }
  }
  out.hit_rate = out.evaluated > 0
                     ? static_cast<double>(out.hits) / static_cast<double>(out.evaluated)
                     : 0.0;
  return out;
}

std::size_t delay_steps(double minutes, double sample_interval_seconds) {
  if (!(sample_interval_seconds > 0.0)) {
    throw ContractError("delay_steps: sample interval must be positive");
  }
  if (minutes < 0.0) throw ContractError("delay_steps: negative delay");
  return static_cast<std::size_t>(std::llround(minutes * 60.0 / sample_interval_seconds));
}

EvaluationReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                                 std::optional<std::span<const int>> flags,
                                 const std::vector<double>& delay_minutes,
                                 double sample_interval_seconds) {
  EvaluationReport report;
  report.roc_auc = roc_auc(scores, labels);
  report.prc_auc = prc_auc(scores, labels);
  report.best = best_f1(scores, labels);
  if (flags) report.automatic = f1_from_predictions(*flags, labels);
  auto row = [&](std::optional<std::size_t> steps, double minutes) {
    DelayRow r;
    r.minutes = minutes;
    r.steps = steps.value_or(0);
    r.best_f1 = point_adjust_f1(scores, labels, steps).f1;
    if (flags) r.auto_f1 = f1_from_predictions(point_adjust(*flags, labels, steps), labels).f1;
    return r;
  };
  for (double m : delay_minutes) {
    report.delays.push_back(row(delay_steps(m, sample_interval_seconds), m));
  }
  report.unbounded = row(std::nullopt, std::numeric_limits<double>::infinity());
  return report;
}

std::string format_report(const EvaluationReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "metric\tvalue\n";
  out << "roc_auc\t" << report.roc_auc << '\n';
  out << "prc_auc\t" << report.prc_auc << '\n';
  out << "best_f1\t" << report.best.f1 << '\n';
  out << "best_f1_precision\t" << report.best.precision << '\n';
  out << "best_f1_recall\t" << report.best.recall << '\n';
  if (report.automatic) {
    out << "auto_f1\t" << report.automatic->f1 << '\n';
    out << "auto_f1_precision\t" << report.automatic->precision << '\n';
    out << "auto_f1_recall\t" << report.automatic->recall << '\n';
  }
  out << '\n' << "delay_minutes\tdelay_steps\tpa_best_f1";
  if (report.automatic) out << "\tpa_auto_f1";
  out << '\n';
  auto print = [&](const DelayRow& r, bool unbounded) {
    if (unbounded) {
      out << "inf\tinf";
    } else {
      out << std::setprecision(0) << r.minutes << std::setprecision(4) << '\t' << r.steps;
    }
    out << '\t' << r.best_f1;
    if (r.auto_f1) out << '\t' << *r.auto_f1;
    out << '\n';
  };
  for (const auto& r : report.delays) print(r, false);
  print(report.unbounded, true);
  return out.str();
}

}  // namespace cstgl

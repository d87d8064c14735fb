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

#include "cstgl/diagnosis.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cstgl/errors.hpp"

namespace cstgl {

std::string to_string(DiagnosisMode mode) {
  return mode == DiagnosisMode::Direct ? "direct" : "mtcl_graph";
}

namespace {

CauseRanking make_ranking(std::vector<double> scores, DiagnosisMode mode,
                          std::size_t timestamp) {
  CauseRanking r;
  r.timestamp = timestamp;
  r.mode = mode;
  const std::size_t n = scores.size();
  for (double s : scores) {
    if (s < 0.0) throw ContractError("cause ranking: contributions must be non-negative");
  }
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  r.percentages.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.percentages[i] = total > 0.0 ? scores[i] / total : 1.0 / static_cast<double>(n);
  }
  r.order.resize(n);
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.scores = std::move(scores);
  return r;
}

}  // namespace

CauseRanking rank_direct(std::span<const double> contributions, std::size_t timestamp) {
  return make_ranking({contributions.begin(), contributions.end()}, DiagnosisMode::Direct,
                      timestamp);
}

std::vector<std::vector<std::size_t>> one_hop_neighborhoods(const Matrix& adjacency) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw DimensionError("neighborhoods: adjacency is not square");
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || adjacency(i, j) > 0.0 || adjacency(j, i) > 0.0) out[i].push_back(j);
    }
  }
  return out;
}

CauseRanking rank_neighborhood(std::span<const double> contributions, const Matrix& adjacency,
                               std::size_t timestamp) {
  if (adjacency.rows() != contributions.size()) {
    throw DimensionError("rank_neighborhood: " + std::to_string(contributions.size()) +
                         " contributions for a " + std::to_string(adjacency.rows()) +
                         "-node graph");
  }
  const auto hoods = one_hop_neighborhoods(adjacency);
  std::vector<double> scores(contributions.size(), 0.0);
  for (std::size_t i = 0; i < hoods.size(); ++i)
    for (std::size_t j : hoods[i]) scores[i] += contributions[j];
  return make_ranking(std::move(scores), DiagnosisMode::MtclGraph, timestamp);
}

std::vector<SegmentDiagnosis> diagnose_segments(
    const std::vector<double>& scores, const Matrix& contributions,
    const std::vector<std::pair<std::size_t, std::size_t>>& segments,
    const Matrix& adjacency, RankingPoint point, std::size_t onset_steps) {
  if (scores.size() != contributions.rows()) {
    throw DimensionError("diagnose_segments: score and contribution lengths differ");
  }
  std::vector<SegmentDiagnosis> out;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto [first, last] = segments[s];
    if (first > last || last >= scores.size()) {
      throw ContractError("diagnose_segments: segment " + std::to_string(s) +
                          " lies outside the score stream");
    }
    std::vector<double> contrib(contributions.cols(), 0.0);
    std::size_t at = first;
    if (point == RankingPoint::Peak) {
      for (std::size_t t = first; t <= last; ++t)
        if (scores[t] > scores[at]) at = t;
      const auto row = contributions.row(at);
      contrib.assign(row.begin(), row.end());
    } else {
      const std::size_t end = std::min(last, first + std::max<std::size_t>(onset_steps, 1) - 1);
      for (std::size_t t = first; t <= end; ++t)
        for (std::size_t c = 0; c < contrib.size(); ++c) contrib[c] += contributions(t, c);
    }
    SegmentDiagnosis d;
    d.segment = s;
    d.first = first;
    d.last = last;
    d.direct = rank_direct(contrib, at);
    d.graph = rank_neighborhood(contrib, adjacency, at);
    out.push_back(std::move(d));
  }
  return out;
}

std::string format_diagnosis(const std::vector<SegmentDiagnosis>& diagnoses,
                             const std::vector<std::string>& channel_names,
                             std::size_t top_m) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  for (const auto& d : diagnoses) {
    out << "segment " << d.segment << " [" << d.first << ", " << d.last << "] ranked at "
        << d.direct.timestamp << '\n';
    out << "rank\tdirect\tpct\tmtcl_graph\tpct\n";
    const std::size_t m = std::min(top_m, d.direct.order.size());
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t a = d.direct.order[k];
      const std::size_t b = d.graph.order[k];
      out << k + 1 << '\t' << channel_names.at(a) << '\t' << d.direct.percentages[a] << '\t'
          << channel_names.at(b) << '\t' << d.graph.percentages[b] << '\n';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cstgl

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
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cstgl/matrix.hpp"

namespace cstgl {

enum class DiagnosisMode { Direct, MtclGraph };

std::string to_string(DiagnosisMode mode);

struct CauseRanking {
  std::size_t timestamp = 0;
  DiagnosisMode mode = DiagnosisMode::Direct;
  std::vector<double> scores;
  std::vector<double> percentages;
  std::vector<std::size_t> order;  // descending score, ties to the lowest index
};

CauseRanking rank_direct(std::span<const double> contributions, std::size_t timestamp = 0);

// N(i): i plus every j with A(i, j) > 0 or A(j, i) > 0.
std::vector<std::vector<std::size_t>> one_hop_neighborhoods(const Matrix& adjacency);

// R_i = sum of contributions over N(i).
CauseRanking rank_neighborhood(std::span<const double> contributions,
                               const Matrix& adjacency, std::size_t timestamp = 0);

// Where within a segment the ranking is taken.
enum class RankingPoint {
  Peak,   // timestamp of the highest anomaly score
  Onset,  // contributions summed over the first onset_steps of the segment
};

struct SegmentDiagnosis {
  std::size_t segment = 0;  // index into the segment list
  std::size_t first = 0;
  std::size_t last = 0;
  CauseRanking direct;
  CauseRanking graph;
};

// One diagnosis per inclusive [first, last] segment.
std::vector<SegmentDiagnosis> diagnose_segments(
    const std::vector<double>& scores, const Matrix& contributions,
    const std::vector<std::pair<std::size_t, std::size_t>>& segments,
    const Matrix& adjacency, RankingPoint point = RankingPoint::Peak,
    std::size_t onset_steps = 30);

// Plain-text report: one block per segment with the top-m channels and
// percentages in both modes.
std::string format_diagnosis(const std::vector<SegmentDiagnosis>& diagnoses,
                             const std::vector<std::string>& channel_names,
                             std::size_t top_m = 5);

}  // namespace cstgl

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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cstgl/dataset.hpp"
#include "cstgl/pipeline.hpp"

namespace cstgl::cli {

struct DataSection {
  // Directory holding train.csv, test.csv and metadata.txt (generate's
  // layout); explicit paths below take precedence.
  std::string dir;
  std::string train;
  std::string test;
  std::string labels;
  std::string label_column = "label";
  std::string metadata;
  double sample_interval_seconds = 10.0;
  std::size_t skip_initial = 0;
  std::string skip_scope = "train_only";
  std::size_t downsample_stride = 1;
  double validation_ratio = 0.1;
};

struct EvaluateSection {
  std::vector<double> delays_minutes{0, 1, 5, 10, 20, 30, 60};
};

struct DiagnoseSection {
  std::size_t top_m = 5;
  std::size_t rc_k = 3;
  std::string ranking_point = "peak";
  double onset_minutes = 5.0;
};

struct RunConfig {
  DataSection data;
  SyntheticSpec synthetic;
  ModelConfig model;
  TrainConfig train;
  std::size_t scorer_window = 0;  // 0: min(validation rows, 5000)
  double scorer_epsilon = 1e-2;
  ComponentRule components;
  std::size_t fixed_components = 0;  // 0: choose from the data
  EvaluateSection evaluate;
  DiagnoseSection diagnose;
  std::uint64_t seed = 0;
  std::string output_dir = "cstgl-out";

  RunConfig();
  RunConfig(const RunConfig&) = delete;  // fields_ capture this
  RunConfig& operator=(const RunConfig&) = delete;

  // "section.key" = "value"; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  std::vector<std::string> keys() const;

  // INI-style text: [section] headers, key = value lines, '#' or ';' comments.
  void merge_text(const std::string& text, const std::string& origin);
  void merge_file(const std::filesystem::path& path);
  // Fully resolved config in the same format.
  std::string to_text() const;

  PipelineConfig pipeline() const;
  LoadOptions load_options() const;
  std::filesystem::path train_path() const;
  std::filesystem::path test_path() const;
  std::filesystem::path metadata_path() const;  // empty when none

 private:
  struct Field {
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
  };
  std::vector<Field> fields_;
  void register_fields();
};

}  // namespace cstgl::cli

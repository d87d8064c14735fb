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
#include <string>
#include <vector>

#include "cstgl/baselines.hpp"
#include "cstgl/dataset.hpp"
#include "cstgl/forecaster.hpp"
#include "cstgl/scorer.hpp"

namespace cstgl {

struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  double validation_ratio = 0.1;
  // Normalizer window; unset = min(validation rows, 5000).
  std::optional<std::size_t> normalizer_window;
  double epsilon = 1e-2;
  ComponentRule components;
};

enum class ScoreMethod { Model, RawSignal, PcaBaseline };

std::string to_string(ScoreMethod method);
ScoreMethod parse_score_method(const std::string& name);

// Everything needed to score new data: scaler, trained forecaster (absent
// for no_stgnn), warmed normalizer and fitted scorer, and both baselines.
struct FittedPipeline {
  std::vector<std::string> channel_names;
  double sample_interval_seconds = 1.0;
  MinMaxScaler scaler;
  std::optional<ForecastModel> model;
  AnomalyDetector detector;
  PcaBaseline pca_baseline;
  RawSignalBaseline raw_baseline;
  TrainResult history;
  // Last `window` scaled validation rows: forecasting context for the first
  // test rows.
  Matrix context;
  // Validation score stream of the default method; its max is the threshold.
  ScoreStream validation;

  ScoreMethod default_method() const {
    return model ? ScoreMethod::Model : ScoreMethod::PcaBaseline;
  }
  double threshold(ScoreMethod method) const;
};

// `dataset` must carry unscaled values and a fitted scaler (load_dataset or
// generate_synthetic); scaling happens here.
FittedPipeline fit_pipeline(const TimeSeriesDataset& dataset, const PipelineConfig& config,
                            const EpochCallback& on_epoch = {});

// Scores unscaled test rows that follow the validation span.
ScoreStream score_series(const FittedPipeline& pipeline, const Matrix& raw_test,
                         ScoreMethod method);

// Forecast of every test row (scaled units), using the stored context.
Matrix forecast_test(const FittedPipeline& pipeline, const Matrix& raw_test);

Checkpoint to_checkpoint(const FittedPipeline& pipeline);
FittedPipeline from_checkpoint(const Checkpoint& checkpoint);

}  // namespace cstgl

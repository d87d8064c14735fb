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

#include "cstgl/pipeline.hpp"

#include <sstream>

#include "cstgl/errors.hpp"
#include "cstgl/text.hpp"

namespace cstgl {

std::string to_string(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::Model: return "model";
    case ScoreMethod::RawSignal: return "raw_signal";
    case ScoreMethod::PcaBaseline: return "pca";
  }
  return "model";
}

ScoreMethod parse_score_method(const std::string& name) {
  for (auto m : {ScoreMethod::Model, ScoreMethod::RawSignal, ScoreMethod::PcaBaseline}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown scoring method '" + name + "' (expected model, raw_signal, pca)");
}

double FittedPipeline::threshold(ScoreMethod method) const {
  switch (method) {
    case ScoreMethod::Model: return detector.threshold();
    case ScoreMethod::RawSignal: return raw_baseline.threshold();
    case ScoreMethod::PcaBaseline: return pca_baseline.threshold();
  }
  return 0.0;
}

FittedPipeline fit_pipeline(const TimeSeriesDataset& dataset, const PipelineConfig& config,
                            const EpochCallback& on_epoch) {
  dataset.validate();
  const TimeSeriesDataset scaled = scale_dataset(dataset);
  auto [train_rows, validation_rows] = split_validation(scaled.train, config.validation_ratio);

  FittedPipeline p;
  p.channel_names = scaled.channel_names;
  p.sample_interval_seconds = scaled.sample_interval_seconds;
  p.scaler = scaled.scaler;
  p.raw_baseline = RawSignalBaseline::fit(scaled.train, validation_rows);
  p.pca_baseline = PcaBaseline::fit(scaled.train, validation_rows, config.components);

  if (config.model.ablation == Ablation::NoStgnn) {
    p.validation = p.pca_baseline.score_all(validation_rows);
    return p;
  }

  ModelConfig mc = config.model;
  mc.num_nodes = scaled.num_channels();
  const std::size_t w = mc.window;
  if (train_rows.rows() <= w || validation_rows.rows() <= w) {
    throw ContractError("fit_pipeline: train (" + std::to_string(train_rows.rows()) +
                        " rows) and validation (" + std::to_string(validation_rows.rows()) +
                        " rows) must each exceed the window " + std::to_string(w));
  }
  ForecastModel model(mc);
  p.history = train(model, train_rows, validation_rows, config.train, on_epoch);

  const Matrix ctx =
      stack_rows(train_rows.slice_rows(train_rows.rows() - w, train_rows.rows()),
                 validation_rows);
  const Matrix errors = absolute_errors(forecast_series(model, ctx), ctx, w);
  const ScorerKind kind =
      mc.ablation == Ablation::NoPca ? ScorerKind::Gaussian : ScorerKind::Pca;
  p.detector = AnomalyDetector::fit(errors, kind, config.normalizer_window, config.epsilon,
                                    config.components);
  p.validation = p.detector.validation();
  p.context = validation_rows.slice_rows(validation_rows.rows() - w, validation_rows.rows());
  p.model = std::move(model);
  return p;
}

Matrix forecast_test(const FittedPipeline& pipeline, const Matrix& raw_test) {
  if (!pipeline.model) throw ContractError("forecast_test: pipeline has no forecaster");
  const Matrix ctx = stack_rows(pipeline.context, pipeline.scaler.apply(raw_test));
  return forecast_series(*pipeline.model, ctx);
}

ScoreStream score_series(const FittedPipeline& pipeline, const Matrix& raw_test,
                         ScoreMethod method) {
  if (raw_test.cols() != pipeline.channel_names.size()) {
    throw DimensionError("score_series: data has " + std::to_string(raw_test.cols()) +
                         " channels, pipeline was fitted on " +
                         std::to_string(pipeline.channel_names.size()));
  }
  switch (method) {
    case ScoreMethod::RawSignal:
      return pipeline.raw_baseline.score_all(pipeline.scaler.apply(raw_test));
    case ScoreMethod::PcaBaseline:
      return pipeline.pca_baseline.score_all(pipeline.scaler.apply(raw_test));
    case ScoreMethod::Model: break;
  }
  if (!pipeline.model) {
    throw ContractError("score_series: checkpoint holds no forecaster (no_stgnn); "
                        "use the pca baseline");
  }
  const Matrix ctx = stack_rows(pipeline.context, pipeline.scaler.apply(raw_test));
  const Matrix errors =
      absolute_errors(forecast_series(*pipeline.model, ctx), ctx, pipeline.model->config().window);
  return pipeline.detector.score(errors);
}

// ---------------------------------------------------------------------------
// checkpoint mapping

namespace {

NamedArray vec(const std::string& name, const std::vector<double>& v) {
  return {name, {v.size()}, v};
}

NamedArray mat(const std::string& name, const Matrix& m) {
  return {name, {m.rows(), m.cols()}, m.data()};
}

NamedArray scalar(const std::string& name, double v) { return {name, {1}, {v}}; }

std::vector<double> get_vec(const Checkpoint& cp, const std::string& name, std::size_t n) {
  const NamedArray& a = cp.require(name);
  if (a.shape.size() != 1 || a.shape[0] != n) {
    throw CheckpointError("checkpoint array '" + name + "' has shape " +
                          shape_to_string(a.shape) + ", expected [" + std::to_string(n) + "]");
  }
  return a.values;
}

Matrix get_mat(const Checkpoint& cp, const std::string& name, std::optional<std::size_t> rows,
               std::size_t cols) {
  const NamedArray& a = cp.require(name);
  if (a.shape.size() != 2 || (rows && a.shape[0] != *rows) || a.shape[1] != cols) {
    throw CheckpointError("checkpoint array '" + name + "' has shape " +
                          shape_to_string(a.shape) + ", expected " +
                          (rows ? std::to_string(*rows) : std::string("?")) + " x " +
                          std::to_string(cols));
  }
  return Matrix(a.shape[0], a.shape[1], a.values);
}

double get_scalar(const Checkpoint& cp, const std::string& name) {
  return get_vec(cp, name, 1)[0];
}

std::size_t get_size(const Checkpoint& cp, const std::string& key) {
  const std::string& v = cp.require_meta(key);
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint metadata '" + key + "' is not an integer: " + v);
  }
}

void put_basis(Checkpoint& cp, const std::string& prefix, const PcaBasis& b) {
  cp.arrays.push_back(vec(prefix + ".mean", b.mean));
  cp.arrays.push_back(mat(prefix + ".components", b.components));
  cp.arrays.push_back(vec(prefix + ".eigenvalues", b.eigenvalues));
}

PcaBasis get_basis(const Checkpoint& cp, const std::string& prefix, std::size_t n) {
  PcaBasis b;
  b.mean = get_vec(cp, prefix + ".mean", n);
  b.components = get_mat(cp, prefix + ".components", n, n);
  b.eigenvalues = get_vec(cp, prefix + ".eigenvalues", n);
  return b;
}

}  // namespace

Checkpoint to_checkpoint(const FittedPipeline& p) {
  Checkpoint cp;
  const std::size_t n = p.channel_names.size();
  std::string names;
  for (std::size_t i = 0; i < n; ++i) names += (i ? "\n" : "") + p.channel_names[i];
  cp.metadata["data.channels"] = names;
  cp.metadata["data.num_channels"] = std::to_string(n);
  cp.metadata["data.sample_interval_seconds"] = text::format_double(p.sample_interval_seconds);
  cp.metadata["pipeline.has_model"] = p.model ? "true" : "false";
  cp.arrays.push_back(vec("scaler.min", p.scaler.min));
  cp.arrays.push_back(vec("scaler.max", p.scaler.max));

  put_basis(cp, "baseline.pca", p.pca_baseline.basis());
  cp.metadata["baseline.pca.n_components"] = std::to_string(p.pca_baseline.n_components());
  cp.arrays.push_back(scalar("baseline.pca.threshold", p.pca_baseline.threshold()));
  cp.arrays.push_back(vec("baseline.raw.mean", p.raw_baseline.gaussian().mean()));
  cp.arrays.push_back(vec("baseline.raw.variance", p.raw_baseline.gaussian().variance()));
  cp.arrays.push_back(scalar("baseline.raw.gaussian_threshold", p.raw_baseline.gaussian().threshold()));
  cp.arrays.push_back(scalar("baseline.raw.threshold", p.raw_baseline.threshold()));

  cp.arrays.push_back(vec("validation.scores", p.validation.scores));
  cp.arrays.push_back(mat("validation.contributions", p.validation.contributions));

  if (p.model) {
    export_model(*p.model, cp);
    cp.arrays.push_back(mat("context", p.context));
    const AnomalyDetector& d = p.detector;
    cp.metadata["scorer.kind"] = d.kind() == ScorerKind::Pca ? "pca" : "gaussian";
    cp.metadata["scorer.window_length"] = std::to_string(d.normalizer().window_length());
    cp.arrays.push_back(scalar("scorer.epsilon", d.normalizer().epsilon()));
    cp.arrays.push_back(mat("scorer.buffer", d.normalizer().buffer_contents()));
    if (d.kind() == ScorerKind::Pca) {
      put_basis(cp, "scorer.pca", d.pca().basis());
      cp.metadata["scorer.pca.n_components"] = std::to_string(d.pca().n_components());
      cp.arrays.push_back(scalar("scorer.threshold", d.pca().threshold()));
    } else {
      cp.arrays.push_back(vec("scorer.gaussian.mean", d.gaussian().mean()));
      cp.arrays.push_back(vec("scorer.gaussian.variance", d.gaussian().variance()));
      cp.arrays.push_back(scalar("scorer.threshold", d.gaussian().threshold()));
    }
    cp.metadata["train.best_epoch"] = std::to_string(p.history.best_epoch);
    cp.arrays.push_back(scalar("train.best_validation_rmse", p.history.best_validation_rmse));
  }
  return cp;
}

FittedPipeline from_checkpoint(const Checkpoint& cp) {
  FittedPipeline p;
  const std::size_t n = get_size(cp, "data.num_channels");
  std::istringstream names(cp.require_meta("data.channels"));
  for (std::string line; std::getline(names, line);) p.channel_names.push_back(line);
  if (p.channel_names.size() != n) {
    throw CheckpointError("checkpoint metadata 'data.channels' lists " +
                          std::to_string(p.channel_names.size()) + " names for " +
                          std::to_string(n) + " channels");
  }
  const auto interval = text::parse_double(cp.require_meta("data.sample_interval_seconds"));
  if (!interval) throw CheckpointError("checkpoint metadata 'data.sample_interval_seconds' is invalid");
  p.sample_interval_seconds = *interval;
  p.scaler.min = get_vec(cp, "scaler.min", n);
  p.scaler.max = get_vec(cp, "scaler.max", n);

  p.pca_baseline = PcaBaseline::from_parts(get_basis(cp, "baseline.pca", n),
                                           get_size(cp, "baseline.pca.n_components"),
                                           get_scalar(cp, "baseline.pca.threshold"));
  p.raw_baseline = RawSignalBaseline::from_parts(
      GaussianScorer::from_parts(get_vec(cp, "baseline.raw.mean", n),
                                 get_vec(cp, "baseline.raw.variance", n),
                                 get_scalar(cp, "baseline.raw.gaussian_threshold")),
      get_scalar(cp, "baseline.raw.threshold"));

  const NamedArray& vs = cp.require("validation.scores");
  p.validation.scores = vs.values;
  p.validation.contributions = get_mat(cp, "validation.contributions", vs.values.size(), n);

  if (cp.require_meta("pipeline.has_model") == "true") {
    ForecastModel model = import_model(cp);
    if (model.config().num_nodes != n) {
      throw CheckpointError("checkpoint model has " + std::to_string(model.config().num_nodes) +
                            " nodes but " + std::to_string(n) + " channels");
    }
    p.context = get_mat(cp, "context", model.config().window, n);
    const std::string& kind_name = cp.require_meta("scorer.kind");
    if (kind_name != "pca" && kind_name != "gaussian") {
      throw CheckpointError("checkpoint metadata 'scorer.kind' is invalid: " + kind_name);
    }
    const ScorerKind kind = kind_name == "pca" ? ScorerKind::Pca : ScorerKind::Gaussian;
    ErrorNormalizer normalizer(n, get_size(cp, "scorer.window_length"),
                               get_scalar(cp, "scorer.epsilon"));
    normalizer.load_buffer(get_mat(cp, "scorer.buffer", std::nullopt, n));
    PcaScorer pca;
    GaussianScorer gaussian;
    if (kind == ScorerKind::Pca) {
      pca = PcaScorer::from_parts(get_basis(cp, "scorer.pca", n),
                                  get_size(cp, "scorer.pca.n_components"),
                                  get_scalar(cp, "scorer.threshold"));
    } else {
      gaussian = GaussianScorer::from_parts(get_vec(cp, "scorer.gaussian.mean", n),
                                            get_vec(cp, "scorer.gaussian.variance", n),
                                            get_scalar(cp, "scorer.threshold"));
    }
    p.detector = AnomalyDetector::from_parts(kind, std::move(normalizer), std::move(pca),
                                             std::move(gaussian));
    p.history.best_epoch = get_size(cp, "train.best_epoch");
    p.history.best_validation_rmse = get_scalar(cp, "train.best_validation_rmse");
    p.model = std::move(model);
  }
  for (double s : p.validation.scores) {
    p.validation.flags.push_back(classify(s, p.threshold(p.default_method())));
  }
  return p;
}

}  // namespace cstgl

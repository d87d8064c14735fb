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

#include <gtest/gtest.h>

#include <algorithm>

#include "cstgl/errors.hpp"
#include "cstgl/pipeline.hpp"

using namespace cstgl;

namespace {

SyntheticSpec tiny_spec() {
  SyntheticSpec s;
  s.channels = 5;
  s.train_length = 500;
  s.test_length = 300;
  s.edges = parse_edges("0>1:2:0.8,0>2:1:0.7");
  s.anomaly_types = {AnomalyType::PointSpike};
  s.noise = 0.3;
  s.seed = 3;
  return s;
}

PipelineConfig tiny_config(Ablation ablation = Ablation::None) {
  PipelineConfig pc;
  pc.model.window = 13;
  pc.model.layers = 1;
  pc.model.residual_channels = 4;
  pc.model.skip_channels = 4;
  pc.model.end_channels = 8;
  pc.model.node_dim = 4;
  pc.model.top_k = 3;
  pc.model.ablation = ablation;
  pc.train.epochs = 2;
  pc.train.batch_size = 32;
  return pc;
}

}  // namespace

TEST(Pipeline, ThresholdIsMaxValidationScore) {
  const TimeSeriesDataset ds = generate_synthetic(tiny_spec());
  const FittedPipeline p = fit_pipeline(ds, tiny_config());
  ASSERT_TRUE(p.model.has_value());
  const auto& v = p.validation.scores;
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(p.threshold(ScoreMethod::Model), *std::max_element(v.begin(), v.end()));
  for (int f : p.validation.flags) EXPECT_EQ(f, 0);
}

TEST(Pipeline, CheckpointRoundTripScoresIdentically) {
  const TimeSeriesDataset ds = generate_synthetic(tiny_spec());
  const FittedPipeline p = fit_pipeline(ds, tiny_config());
  const FittedPipeline q = from_checkpoint(to_checkpoint(p));
  for (ScoreMethod m : {ScoreMethod::Model, ScoreMethod::RawSignal, ScoreMethod::PcaBaseline}) {
    const ScoreStream a = score_series(p, ds.test, m), b = score_series(q, ds.test, m);
    EXPECT_EQ(a.scores, b.scores) << to_string(m);
    EXPECT_EQ(a.flags, b.flags) << to_string(m);
    EXPECT_EQ(p.threshold(m), q.threshold(m));
  }
}

TEST(Pipeline, ScoresAreCausal) {
  const TimeSeriesDataset ds = generate_synthetic(tiny_spec());
  const FittedPipeline p = fit_pipeline(ds, tiny_config());
  const ScoreStream full = score_series(p, ds.test, ScoreMethod::Model);
  Matrix poisoned = ds.test;
  const std::size_t cut = 150;
  for (std::size_t r = cut; r < poisoned.rows(); ++r)
    for (std::size_t c = 0; c < poisoned.cols(); ++c) poisoned(r, c) = 1e3;
  const ScoreStream part = score_series(p, poisoned, ScoreMethod::Model);
  for (std::size_t t = 0; t < cut; ++t) EXPECT_EQ(part.scores[t], full.scores[t]) << t;
}

TEST(Pipeline, NoStgnnHasNoModelAndDefaultsToPca) {
  const TimeSeriesDataset ds = generate_synthetic(tiny_spec());
  const FittedPipeline p = fit_pipeline(ds, tiny_config(Ablation::NoStgnn));
  EXPECT_FALSE(p.model.has_value());
  EXPECT_EQ(p.default_method(), ScoreMethod::PcaBaseline);
  EXPECT_THROW(score_series(p, ds.test, ScoreMethod::Model), ContractError);
  EXPECT_EQ(score_series(p, ds.test, ScoreMethod::PcaBaseline).scores.size(), ds.test.rows());
}

TEST(Pipeline, ScoreMethodNames) {
  for (ScoreMethod m : {ScoreMethod::Model, ScoreMethod::RawSignal, ScoreMethod::PcaBaseline}) {
    EXPECT_EQ(parse_score_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_score_method("nope"), ConfigError);
}

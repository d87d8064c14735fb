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

#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cstgl/diagnosis.hpp"
#include "cstgl/errors.hpp"
#include "cstgl/metrics.hpp"
#include "cstgl/mtcl.hpp"
#include "cstgl/pipeline.hpp"

namespace cstgl::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << content;
}

void echo_config(const Context& ctx) {
  fs::create_directories(ctx.output_dir);
  write_text(ctx.output_dir / "resolved_config.ini", ctx.config.to_text());
}

TimeSeriesDataset load(const Context& ctx) {
  return load_dataset(ctx.config.train_path(), ctx.config.test_path(),
                      ctx.config.load_options());
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

void require_channels(const FittedPipeline& p, const std::vector<std::string>& names) {
  if (names != p.channel_names) {
    std::ostringstream msg;
    msg << "channel mismatch: checkpoint has " << p.channel_names.size()
        << " channels, data has " << names.size();
    if (names.size() == p.channel_names.size()) msg << " with different names";
    throw IngestionError(msg.str());
  }
}

// Graph used for neighborhood diagnosis.
Matrix diagnosis_graph(const FittedPipeline& p) {
  const std::size_t n = p.channel_names.size();
  if (p.model) {
    if (const LearnedGraph* g = p.model->graph()) return g->sparse();
    if (p.model->config().ablation == Ablation::NoMtcl) {
      Matrix full(n, n, 1.0);
      for (std::size_t i = 0; i < n; ++i) full(i, i) = 0.0;
      return full;
    }
  }
  return Matrix(n, n, 0.0);
}

}  // namespace

void cmd_generate(const Context& ctx) {
  echo_config(ctx);
  const auto& spec = ctx.config.synthetic;
  const TimeSeriesDataset ds = generate_synthetic(spec);
  write_synthetic(ctx.output_dir, ds, spec);
  std::size_t positives = 0;
  for (int l : *ds.test_labels) positives += l;
  ctx.out << "wrote " << ds.num_channels() << " channels, " << ds.train.rows() << " train / "
          << ds.test.rows() << " test rows (" << positives << " anomalous, "
          << ds.root_causes.size() << " segments) to " << ctx.output_dir.string() << '\n';
}

void cmd_train(const Context& ctx) {
  echo_config(ctx);
  const TimeSeriesDataset ds = load(ctx);
  const PipelineConfig pc = ctx.config.pipeline();
  ctx.out << "training on " << ds.num_channels() << " channels, " << ds.train.rows()
          << " rows (ablation " << to_string(pc.model.ablation) << ")\n";
  const FittedPipeline p = fit_pipeline(ds, pc, [&](const EpochRecord& r) {
    ctx.out << "epoch " << r.epoch << "  train_loss " << std::setprecision(6) << r.train_loss
            << "  validation_rmse " << r.validation_rmse << '\n'
            << std::flush;
  });
  write_checkpoint(ctx.output_dir / "model.ckpt", to_checkpoint(p));
  if (p.model) {
    write_text(ctx.output_dir / "history.tsv", format_history(p.history));
    if (const LearnedGraph* g = p.model->graph()) {
      write_edge_list(ctx.output_dir / "graph_edges.tsv", g->edges(), p.channel_names);
    }
    ctx.out << "best epoch " << p.history.best_epoch << ", validation RMSE "
            << p.history.best_validation_rmse << '\n';
  } else {
    ctx.out << "no_stgnn: fitted the PCA baseline only ("
            << p.pca_baseline.n_components() << " components)\n";
  }
  ctx.out << "threshold " << p.threshold(p.default_method()) << "; checkpoint "
          << (ctx.output_dir / "model.ckpt").string() << '\n';
}

void cmd_score(const Context& ctx, const ScoreArgs& args) {
  echo_config(ctx);
  const FittedPipeline p =
      from_checkpoint(read_checkpoint(or_default(args.checkpoint, ctx.output_dir / "model.ckpt")));
  const TimeSeriesDataset ds = load(ctx);
  require_channels(p, ds.channel_names);
  const ScoreMethod method =
      args.baseline.empty() ? p.default_method() : parse_score_method(args.baseline);
  const ScoreStream stream = score_series(p, ds.test, method);
  const std::string stem = args.baseline.empty() ? "scores" : "scores_" + args.baseline;
  const fs::path out_path = or_default(args.output, ctx.output_dir / (stem + ".tsv"));
  write_score_stream(out_path, stream, p.channel_names);
  fs::path contrib_path = out_path;
  contrib_path.replace_filename(out_path.stem().string() + "_contributions.tsv");
  write_contributions(contrib_path, stream.contributions, p.channel_names);
  std::size_t flagged = 0;
  for (int f : stream.flags) flagged += f;
  ctx.out << "scored " << stream.scores.size() << " rows with " << to_string(method) << ": "
          << flagged << " flagged (threshold " << p.threshold(method) << ")\n"
          << "wrote " << out_path.string() << " and " << contrib_path.string() << '\n';
}

void cmd_evaluate(const Context& ctx, const EvaluateArgs& args) {
  echo_config(ctx);
  const ScoreTable table = read_score_stream(or_default(args.scores, ctx.output_dir / "scores.tsv"));
  const TimeSeriesDataset ds = load(ctx);
  if (!ds.test_labels) throw IngestionError("evaluate: the test data carries no labels");
  const auto& labels = *ds.test_labels;
  if (labels.size() != table.scores.size()) {
    throw IngestionError("evaluate: " + std::to_string(table.scores.size()) + " scores for " +
                         std::to_string(labels.size()) + " labels");
  }
  const EvaluationReport report =
      evaluate_scores(table.scores, labels, std::span<const int>(table.flags),
                      ctx.config.evaluate.delays_minutes, ds.sample_interval_seconds);
  const std::string text = format_report(report);
  write_text(ctx.output_dir / "report.txt", text);
  ctx.out << text;
}

void cmd_diagnose(const Context& ctx, const DiagnoseArgs& args) {
  echo_config(ctx);
  const FittedPipeline p =
      from_checkpoint(read_checkpoint(or_default(args.checkpoint, ctx.output_dir / "model.ckpt")));
  const fs::path scores_path = or_default(args.scores, ctx.output_dir / "scores.tsv");
  const ScoreTable table = read_score_stream(scores_path);
  fs::path default_contrib = scores_path;
  default_contrib.replace_filename(scores_path.stem().string() + "_contributions.tsv");
  std::vector<std::string> names;
  const Matrix contributions =
      read_contributions(or_default(args.contributions, default_contrib), &names);
  if (names != p.channel_names) {
    throw IngestionError("diagnose: contribution columns do not match the checkpoint channels");
  }
  if (contributions.rows() != table.scores.size()) {
    throw IngestionError("diagnose: score and contribution tables differ in length");
  }

  std::vector<std::pair<std::size_t, std::size_t>> segments;
  RootCauseMap causes;
  bool from_labels = false;
  try {
    const TimeSeriesDataset ds = load(ctx);
    if (ds.test_labels && ds.test_labels->size() == table.scores.size()) {
      segments = label_segments(*ds.test_labels);
      causes = ds.root_causes;
      from_labels = true;
    }
  } catch (const ConfigError&) {
    // No dataset configured: diagnose flagged segments only.
  }
  if (!from_labels) segments = label_segments(table.flags);

  const auto& dc = ctx.config.diagnose;
  const RankingPoint point = dc.ranking_point == "peak" ? RankingPoint::Peak : RankingPoint::Onset;
  const std::size_t onset = std::max<std::size_t>(
      1, delay_steps(dc.onset_minutes, p.sample_interval_seconds));
  const auto diagnoses =
      diagnose_segments(table.scores, contributions, segments, diagnosis_graph(p), point, onset);

  std::ostringstream report;
  report << "segments from " << (from_labels ? "labels" : "flags") << ": " << segments.size()
         << '\n' << '\n'
         << format_diagnosis(diagnoses, p.channel_names, dc.top_m);
  if (causes.empty()) {
    ctx.err << "warning: true root causes unknown; RC-Top" << dc.rc_k << " omitted\n";
  } else {
    std::vector<std::vector<std::size_t>> direct, graph;
    std::vector<std::set<std::size_t>> truth;
    for (const auto& d : diagnoses) {
      direct.push_back(d.direct.order);
      graph.push_back(d.graph.order);
      const auto it = causes.find(d.segment);
      truth.push_back(it == causes.end() ? std::set<std::size_t>{} : it->second);
    }
    const RcTopK rd = rc_topk(direct, truth, dc.rc_k);
    const RcTopK rg = rc_topk(graph, truth, dc.rc_k);
    for (std::size_t s : rd.skipped) {
      ctx.err << "warning: segment " << s << " has no recorded cause; skipped\n";
    }
    report << std::fixed << std::setprecision(4) << "rc_top" << dc.rc_k << "\tdirect\t"
           << rd.hit_rate << "\tmtcl_graph\t" << rg.hit_rate << "\tsegments\t" << rd.evaluated
           << '\n';
  }
  write_text(ctx.output_dir / "diagnosis.txt", report.str());
  ctx.out << report.str();
}

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cstgl: graph-learning anomaly detection for multivariate time series"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file, output_dir;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_file, "INI config file");
  app.add_option("--set", overrides, "Override a config key: section.key=value");
  app.add_option("-o,--output-dir", output_dir,
                 "Output directory (else $CSTGL_OUTPUT_DIR, else run.output_dir)");
  std::string data_dir;
  app.add_option("-d,--data-dir", data_dir, "Dataset directory (sets data.dir)");

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  auto* trn = app.add_subcommand("train", "Train the forecaster and fit the scorer");
  auto* scr = app.add_subcommand("score", "Score the test split");
  auto* evl = app.add_subcommand("evaluate", "Evaluate a score stream against labels");
  auto* dia = app.add_subcommand("diagnose", "Rank root causes per anomaly segment");
  ScoreArgs score_args;
  scr->add_option("--checkpoint", score_args.checkpoint, "Checkpoint path");
  scr->add_option("--baseline", score_args.baseline, "Score with a baseline instead")
      ->check(CLI::IsMember({"raw_signal", "pca"}));
  scr->add_option("--output", score_args.output, "Score table path");
  EvaluateArgs eval_args;
  evl->add_option("--scores", eval_args.scores, "Score table path");
  DiagnoseArgs diag_args;
  dia->add_option("--checkpoint", diag_args.checkpoint, "Checkpoint path");
  dia->add_option("--scores", diag_args.scores, "Score table path");
  dia->add_option("--contributions", diag_args.contributions, "Contribution table path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config;
    if (!config_file.empty()) config.merge_file(config_file);
    if (const char* env = std::getenv("CSTGL_OUTPUT_DIR"); env && *env) {
      config.set("run.output_dir", env);
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + o + "'");
      config.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (!data_dir.empty()) config.set("data.dir", data_dir);
    if (!output_dir.empty()) config.set("run.output_dir", output_dir);
    const Context ctx{config, config.output_dir, out, err};
    if (*gen) cmd_generate(ctx);
    if (*trn) cmd_train(ctx);
    if (*scr) cmd_score(ctx, score_args);
    if (*evl) cmd_evaluate(ctx, eval_args);
    if (*dia) cmd_diagnose(ctx, diag_args);
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const SpecError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cstgl::cli

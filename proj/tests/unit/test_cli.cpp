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

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "cstgl/dataset.hpp"
#include "cstgl/scorer.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

// Small enough that generate + train + score takes well under a second.
const std::vector<std::string> kTiny{
    "--set", "synthetic.channels=6",
    "--set", "synthetic.edges=0>1:2:0.8,0>2:3:0.7,3>4:1:0.9",
    "--set", "synthetic.train_length=600",
    "--set", "synthetic.test_length=400",
    "--set", "model.layers=1",
    "--set", "model.residual_channels=4",
    "--set", "model.skip_channels=4",
    "--set", "model.end_channels=8",
    "--set", "model.node_dim=4",
    "--set", "model.top_k=3",
    "--set", "train.epochs=2",
    "--set", "train.batch_size=32"};

Outcome cli(const fs::path& dir, const std::vector<std::string>& command,
            std::vector<std::string> extra = {}, const fs::path& data = {}) {
  const fs::path data_dir = data.empty() ? dir : data;
  std::vector<std::string> args{"cstgl", "-o", dir.string(), "-d", data_dir.string()};
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  args.insert(args.end(), extra.begin(), extra.end());
  args.insert(args.end(), command.begin(), command.end());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cstgl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::path(::testing::TempDir()) /
            ("cstgl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

}  // namespace

TEST_F(Cli, FullWorkflowSucceeds) {
  const fs::path d = root_ / "run";
  for (const char* step : {"generate", "train", "score", "evaluate", "diagnose"}) {
    const Outcome o = cli(d, {step});
    ASSERT_EQ(o.code, 0) << step << ": " << o.err;
  }
  for (const char* f : {"train.csv", "test.csv", "metadata.txt", "model.ckpt", "history.tsv",
                        "graph_edges.tsv", "scores.tsv", "scores_contributions.tsv",
                        "report.txt", "diagnosis.txt", "resolved_config.ini"}) {
    EXPECT_TRUE(fs::exists(d / f)) << f;
  }
  EXPECT_NE(slurp(d / "diagnosis.txt").find("rc_top3"), std::string::npos);
}

TEST_F(Cli, EvaluateReportsSevenDelaysPlusUnbounded) {
  const fs::path d = root_ / "run";
  for (const char* step : {"generate", "train", "score"}) ASSERT_EQ(cli(d, {step}).code, 0);
  const Outcome o = cli(d, {"evaluate"});
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream lines(o.out);
  std::string line;
  bool in_table = false;
  std::vector<std::string> first_cols;
  while (std::getline(lines, line)) {
    if (line.rfind("delay_minutes", 0) == 0) { in_table = true; continue; }
    if (in_table && !line.empty()) first_cols.push_back(line.substr(0, line.find('\t')));
  }
  EXPECT_EQ(first_cols, (std::vector<std::string>{"0", "1", "5", "10", "20", "30", "60", "inf"}));
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
  const fs::path a = root_ / "a", b = root_ / "b";
  for (const fs::path& d : {a, b}) {
    for (const char* step : {"generate", "train", "score"}) ASSERT_EQ(cli(d, {step}).code, 0);
  }
  for (const char* f : {"train.csv", "test.csv", "model.ckpt", "history.tsv", "scores.tsv",
                        "scores_contributions.tsv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST_F(Cli, UnknownConfigKeyExitsWithConfigCode) {
  const Outcome o = cli(root_ / "run", {"generate"}, {"--set", "model.no_such_key=3"});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("model.no_such_key"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(cli(root_ / "run", {"frobnicate"}).code, 2);
}

TEST_F(Cli, ChannelMismatchIsRejected) {
  const fs::path d = root_ / "run", other = root_ / "other";
  for (const char* step : {"generate", "train"}) ASSERT_EQ(cli(d, {step}).code, 0);
  ASSERT_EQ(cli(other, {"generate"}, {"--set", "synthetic.channels=5"}).code, 0);
  const Outcome o = cli(d, {"score"}, {}, other);
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find("channel mismatch"), std::string::npos);
  EXPECT_NE(o.err.find("6"), std::string::npos);
  EXPECT_NE(o.err.find("5"), std::string::npos);
}

TEST_F(Cli, NoStgnnFitsBaselineOnly) {
  const fs::path d = root_ / "run";
  ASSERT_EQ(cli(d, {"generate"}).code, 0);
  const std::vector<std::string> ab{"--set", "model.ablation=no_stgnn"};
  const Outcome t = cli(d, {"train"}, ab);
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("no_stgnn"), std::string::npos);
  EXPECT_FALSE(fs::exists(d / "history.tsv"));
  const Outcome s = cli(d, {"score"}, ab);
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("pca"), std::string::npos);
}

TEST_F(Cli, BaselineScoresWrittenSeparately) {
  const fs::path d = root_ / "run";
  for (const char* step : {"generate", "train"}) ASSERT_EQ(cli(d, {step}).code, 0);
  ASSERT_EQ(cli(d, {"score", "--baseline", "raw_signal"}).code, 0);
  ASSERT_EQ(cli(d, {"score", "--baseline", "pca"}).code, 0);
  EXPECT_TRUE(fs::exists(d / "scores_raw_signal.tsv"));
  EXPECT_TRUE(fs::exists(d / "scores_pca.tsv"));
  EXPECT_EQ(cli(d, {"score", "--baseline", "bogus"}).code, 2);
}

TEST_F(Cli, MissingRootCausesWarnAndOmitHitRate) {
  const fs::path d = root_ / "run";
  for (const char* step : {"generate", "train", "score"}) ASSERT_EQ(cli(d, {step}).code, 0);
  std::istringstream meta(slurp(d / "metadata.txt"));
  std::ostringstream kept;
  for (std::string line; std::getline(meta, line);) {
    if (line.rfind("root_cause", 0) != 0) kept << line << '\n';
  }
  std::ofstream(d / "metadata.txt") << kept.str();
  const Outcome o = cli(d, {"diagnose"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.err.find("warning"), std::string::npos);
  EXPECT_EQ(o.out.find("rc_top"), std::string::npos);
}

TEST_F(Cli, PerfectScoresGivePerfectReport) {
  const fs::path d = root_ / "run";
  ASSERT_EQ(cli(d, {"generate"}).code, 0);
  std::istringstream csv(slurp(d / "test.csv"));
  std::string line;
  std::getline(csv, line);  // header
  cstgl::ScoreStream stream;
  while (std::getline(csv, line)) {
    const int label = line.back() == '1' ? 1 : 0;
    stream.scores.push_back(label);
    stream.flags.push_back(label);
  }
  stream.contributions = cstgl::Matrix(stream.scores.size(), 6);
  cstgl::write_score_stream(d / "perfect.tsv", stream, {"c0", "c1", "c2", "c3", "c4", "c5"});
  const Outcome o = cli(d, {"evaluate", "--scores", (d / "perfect.tsv").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream lines(o.out);
  std::size_t checked = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line.rfind("metric", 0) == 0 || line.rfind("delay", 0) == 0) continue;
    std::istringstream cols(line);
    std::string name, cell;
    cols >> name;
    // Delay rows lead with minutes and steps; metric rows with a name.
    if (name == "inf" || std::isdigit(static_cast<unsigned char>(name[0]))) cols >> cell;
    while (cols >> cell) {
      EXPECT_EQ(cell, "1.0000") << line;
      ++checked;
    }
  }
  EXPECT_GE(checked, 8u + 16u);
}

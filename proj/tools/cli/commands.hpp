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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace cstgl::cli {

struct Context {
  RunConfig& config;
  std::filesystem::path output_dir;
  std::ostream& out;
  std::ostream& err;
};

struct ScoreArgs {
  std::string checkpoint;  // default <output>/model.ckpt
  std::string baseline;    // "", "raw_signal" or "pca"
  std::string output;      // default <output>/scores.tsv (scores_<baseline>.tsv)
};

struct EvaluateArgs {
  std::string scores;  // default <output>/scores.tsv
};

struct DiagnoseArgs {
  std::string checkpoint;
  std::string scores;
  std::string contributions;
};

void cmd_generate(const Context& ctx);
void cmd_train(const Context& ctx);
void cmd_score(const Context& ctx, const ScoreArgs& args);
void cmd_evaluate(const Context& ctx, const EvaluateArgs& args);
void cmd_diagnose(const Context& ctx, const DiagnoseArgs& args);

// Parses argv, runs one subcommand and maps errors to exit codes:
// 0 ok, 2 config, 3 data, 4 numeric, 1 anything else.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cstgl::cli

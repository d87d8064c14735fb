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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cstgl::text {

// Strips surrounding whitespace and one pair of double quotes.
std::string trim(std::string_view s);
std::vector<std::string> split(const std::string& line, char sep);
// Whole-string parse; nullopt on any trailing garbage.
std::optional<double> parse_double(const std::string& text);
// Shortest representation that round-trips exactly.
std::string format_double(double v);

}  // namespace cstgl::text

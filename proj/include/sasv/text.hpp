// Copyright 2026  sasv-backend authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Small helpers for the line-oriented text formats.

#ifndef SASV_TEXT_HPP_
#define SASV_TEXT_HPP_

#include <charconv>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sasv {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double x);

/// Whole-token decimal parse; nullopt on trailing garbage or non-finite input.
std::optional<double> parse_double(std::string_view token);

std::vector<std::string_view> split(std::string_view line, char sep);
/// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_whitespace(std::string_view line);

/// Reads a whole file as lines (a trailing '\r' is stripped). Throws IoError.
std::vector<std::string> read_lines(const std::filesystem::path& path);
/// Writes text atomically enough for our purposes. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sasv

#endif  // SASV_TEXT_HPP_

/* Copyright 2026 The xpuscope Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xpu/error.hpp"

namespace xpu::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// A logical line with its 1-based row number in the source text.
struct Row {
  std::size_t line_no;
  std::string_view text;
};

// Non-empty lines, with '#' comment lines reported separately.
struct Lines {
  std::vector<Row> data;
  std::vector<Row> comments;
};

inline Lines lines(std::string_view text) {
  Lines out;
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto raw = text.substr(start, end == std::string_view::npos ? end : end - start);
    ++line_no;
    const auto t = trim(raw);
    if (!t.empty()) (t.front() == '#' ? out.comments : out.data).push_back({line_no, t});
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

inline double to_double(std::string_view s, std::size_t line_no, std::string_view column) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || s.empty()) {
    throw ParseError("row " + std::to_string(line_no) + ": column '" + std::string(column) +
                     "' is not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::optional<double> to_optional_double(std::string_view s, std::size_t line_no,
                                                std::string_view column) {
  if (s.empty() || s == "NA" || s == "na" || s == "unsupported") return std::nullopt;
  return to_double(s, line_no, column);
}

inline void expect_header(const Lines& l, std::string_view expected, std::string_view what) {
  if (l.data.empty()) throw ParseError(std::string(what) + ": empty file");
  std::string got;
  for (auto f : split(l.data.front().text)) {
    if (!got.empty()) got += ',';
    got += f;
  }
  if (got != expected) {
    throw ParseError(std::string(what) + ": expected header '" + std::string(expected) +
                     "', got '" + got + "'");
  }
}

}  // namespace xpu::csv

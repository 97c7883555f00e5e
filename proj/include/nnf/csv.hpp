/*
 * Copyright 2026 The nnframe Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Small CSV helpers shared by the readers and writers of the artifact files.

#ifndef NNF_CSV_HPP_
#define NNF_CSV_HPP_

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "nnf/common.hpp"

namespace nnf {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

// RFC-4180-ish field splitter: double quotes group, "" escapes a quote.
inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Reads a whole CSV file, checking the header line and the field count of
/// every row. Blank lines are skipped.
inline std::vector<CsvRow> read_csv(const std::filesystem::path& path, std::string_view header) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 1;
  for (char c : header) width += c == ',' ? 1 : 0;
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (lineno == 1) {
      if (text != header)
        throw DataError(fmt::format("{}:1: expected header '{}'", path.string(), header));
      continue;
    }
    if (text.empty()) continue;
    auto fields = split_csv(text);
    if (fields.size() != width)
      throw DataError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), lineno, width,
                                  fields.size()));
    rows.push_back({lineno, std::move(fields)});
  }
  if (lineno == 0) throw DataError(fmt::format("{}: empty file, header missing", path.string()));
  return rows;
}

template <typename T>
T field_as(const CsvRow& row, std::size_t k, const std::filesystem::path& path) {
  T out{};
  if (!parse_number(row.fields.at(k), out))
    throw DataError(fmt::format("{}:{}: bad number '{}'", path.string(), row.line, row.fields[k]));
  return out;
}

}  // namespace nnf

#endif  // NNF_CSV_HPP_

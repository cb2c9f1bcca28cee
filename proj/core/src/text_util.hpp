/*
 * Copyright 2026 The OXDS Authors.
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

// Private helpers for the whitespace-separated text formats.

#ifndef OXDS_SRC_TEXT_UTIL_HPP_
#define OXDS_SRC_TEXT_UTIL_HPP_

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "oxds/error.hpp"

namespace oxds::detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r' || line[i] == '\n')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
           line[i] != '\r' && line[i] != '\n') {
      ++i;
    }
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::string where(const std::string& source, std::size_t line_no) {
  return source + ":" + std::to_string(line_no);
}

inline double parse_double(std::string_view tok, const std::string& ctx) {
  double value = 0.0;
  const auto* end = tok.data() + tok.size();
  // from_chars rejects a leading '+', which some writers emit.
  const char* begin = tok.data();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::kParseError,
                ctx + ": not a number '" + std::string(tok) + "'");
  }
  return value;
}

inline std::uint64_t parse_uint(std::string_view tok, const std::string& ctx) {
  std::uint64_t value = 0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::kParseError,
                ctx + ": not a non-negative integer '" + std::string(tok) +
                    "'");
  }
  return value;
}

inline std::ifstream open_input(const std::filesystem::path& path,
                                std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) {
    throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  }
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path,
                                 std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  }
  return out;
}

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 14695981039346656037ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace oxds::detail

#endif  // OXDS_SRC_TEXT_UTIL_HPP_

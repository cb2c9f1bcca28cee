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

#include "oxds/prototypes.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "oxds/error.hpp"
#include "text_util.hpp"

namespace oxds {

namespace {

constexpr double kDistinctTolerance = 1e-9;

bool valid_category_name(std::string_view name) {
  return !name.empty() &&
         std::none_of(name.begin(), name.end(), [](char c) {
           return c == ' ' || c == '\t' || c == '\n' || c == '\r';
         });
}

}  // namespace

PrototypeBook PrototypeBook::from_entries(
    std::vector<std::pair<std::string, UnitVector>> entries) {
  if (entries.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "prototype book is empty");
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  PrototypeBook book;
  book.dim_ = entries.front().second.dim();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, proto] = entries[i];
    if (!valid_category_name(name)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "category names must be nonempty and free of whitespace: '" +
                      name + "'");
    }
    if (i > 0 && entries[i - 1].first == name) {
      throw Error(ErrorKind::kDuplicateCategory, "category '" + name +
                                                     "' appears twice");
    }
    if (proto.dim() != book.dim_) {
      throw Error(ErrorKind::kDimensionMismatch,
                  fmt::format("prototype '{}' has dimension {}, expected {}",
                              name, proto.dim(), book.dim_));
    }
  }

  const auto n = static_cast<Eigen::Index>(entries.size());
  book.matrix_.resize(n, book.dim_);
  for (Eigen::Index i = 0; i < n; ++i) {
    book.matrix_.row(i) = entries[i].second.vec().transpose();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double gap =
          (book.matrix_.row(i) - book.matrix_.row(j)).cwiseAbs().maxCoeff();
      if (gap <= kDistinctTolerance) {
        throw Error(ErrorKind::kDegeneratePrototypes,
                    "categories '" + entries[i].first + "' and '" +
                        entries[j].first + "' share a prototype");
      }
    }
  }

  book.names_.reserve(entries.size());
  book.prototypes_.reserve(entries.size());
  for (auto& [name, proto] : entries) {
    book.names_.push_back(std::move(name));
    book.prototypes_.push_back(std::move(proto));
  }
  return book;
}

std::optional<std::size_t> PrototypeBook::index_of(
    std::string_view category) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), category);
  if (it == names_.end() || *it != category) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

bool PrototypeBook::contains(std::string_view category) const {
  return index_of(category).has_value();
}

const UnitVector& PrototypeBook::at(std::string_view category) const {
  const auto idx = index_of(category);
  if (!idx) {
    throw Error(ErrorKind::kUnknownCategory,
                "no prototype for category '" + std::string(category) + "'");
  }
  return prototypes_[*idx];
}

PrototypeBook PrototypeBook::restricted_to(
    const std::set<std::string>& categories) const {
  std::vector<std::pair<std::string, UnitVector>> entries;
  entries.reserve(categories.size());
  for (const auto& name : categories) entries.emplace_back(name, at(name));
  return from_entries(std::move(entries));
}

PrototypeBook PrototypeBook::with_replacements(
    std::span<const std::pair<std::string, UnitVector>> replacements) const {
  std::vector<std::pair<std::string, UnitVector>> entries;
  entries.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    entries.emplace_back(names_[i], prototypes_[i]);
  }
  for (const auto& [name, proto] : replacements) {
    const auto idx = index_of(name);
    if (!idx) {
      throw Error(ErrorKind::kUnknownCategory,
                  "cannot replace unknown category '" + name + "'");
    }
    entries[*idx].second = proto;
  }
  return from_entries(std::move(entries));
}

std::uint64_t PrototypeBook::checksum() const {
  std::uint64_t h = detail::fnv1a("");
  for (std::size_t i = 0; i < size(); ++i) {
    h = detail::fnv1a(names_[i], h);
    const auto& v = prototypes_[i].vec();
    h = detail::fnv1a(
        std::string_view(reinterpret_cast<const char*>(v.data()),
                         sizeof(double) * static_cast<std::size_t>(v.size())),
        h);
  }
  return h;
}

PrototypeBook read_prototypes(std::istream& in, const std::string& source,
                              std::optional<Eigen::Index> expected_dim) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::kParseError, source + ": empty prototype file");
  }
  ++line_no;
  const auto header = detail::split_ws(line);
  if (header.size() != 4 || header[0] != "OXDS-PROTO" || header[1] != "1") {
    throw Error(ErrorKind::kParseError,
                detail::where(source, line_no) +
                    ": expected header 'OXDS-PROTO 1 <C> <D>'");
  }
  const auto count = detail::parse_uint(header[2], detail::where(source, 1));
  const auto dim = static_cast<Eigen::Index>(
      detail::parse_uint(header[3], detail::where(source, 1)));
  if (expected_dim && *expected_dim != dim) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("{}: prototypes have dimension {}, expected {}",
                            source, dim, *expected_dim));
  }

  std::vector<std::pair<std::string, UnitVector>> entries;
  entries.reserve(count);
  Eigen::VectorXd row(dim);
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    const auto ctx = detail::where(source, line_no);
    if (static_cast<Eigen::Index>(tokens.size()) != dim + 1) {
      throw Error(ErrorKind::kDimensionMismatch,
                  fmt::format("{}: expected {} values, found {}", ctx, dim,
                              tokens.size() - 1));
    }
    for (Eigen::Index k = 0; k < dim; ++k) {
      row[k] = detail::parse_double(tokens[static_cast<std::size_t>(k) + 1],
                                    ctx);
    }
    try {
      entries.emplace_back(std::string(tokens[0]), normalize(row));
    } catch (const Error& e) {
      throw Error(e.kind(), ctx + ": category '" + std::string(tokens[0]) +
                                "': " + e.what());
    }
  }
  if (entries.size() != count) {
    throw Error(ErrorKind::kParseError,
                fmt::format("{}: header announces {} categories, found {}",
                            source, count, entries.size()));
  }
  return PrototypeBook::from_entries(std::move(entries));
}

PrototypeBook load_prototypes(const std::filesystem::path& path,
                              std::optional<Eigen::Index> expected_dim) {
  auto in = detail::open_input(path);
  return read_prototypes(in, path.string(), expected_dim);
}

void write_prototypes(const PrototypeBook& book, std::ostream& out) {
  fmt::print(out, "OXDS-PROTO 1 {} {}\n", book.size(), book.dim());
  for (std::size_t i = 0; i < book.size(); ++i) {
    out << book.categories()[i];
    for (double x : book.prototype(i).values()) fmt::print(out, " {:.17g}", x);
    out << '\n';
  }
}

void save_prototypes(const PrototypeBook& book,
                     const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_prototypes(book, out);
}

UnitVector exemplar_prototype(std::span<const UnitVector> embeddings) {
  return spherical_average(embeddings);
}

UnitVector refine_support(const UnitVector& p0, std::string_view category,
                          const PrototypeBook& book, double lambda) {
  return slerp(p0, book.at(category), lambda);
}

std::string_view split_mode_name(SplitMode mode) {
  switch (mode) {
    case SplitMode::kZeroShot: return "zero_shot";
    case SplitMode::kManyShot: return "many_shot";
    case SplitMode::kGeneralized: return "generalized";
  }
  return "zero_shot";
}

SplitMode parse_split_mode(std::string_view name) {
  if (name == "zero_shot") return SplitMode::kZeroShot;
  if (name == "many_shot") return SplitMode::kManyShot;
  if (name == "generalized") return SplitMode::kGeneralized;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown split mode '" + std::string(name) + "'");
}

void CategorySplit::validate() const {
  if (train.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "split has no train categories");
  }
  if (test.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "split has no test categories");
  }
  switch (mode) {
    case SplitMode::kManyShot:
      if (train != test) {
        throw Error(ErrorKind::kInvalidArgument,
                    "many_shot split needs identical train and test sets");
      }
      break;
    case SplitMode::kZeroShot:
    case SplitMode::kGeneralized:
      for (const auto& c : test) {
        if (train.count(c) != 0) {
          throw Error(ErrorKind::kInvalidArgument,
                      "category '" + c + "' is both seen and unseen");
        }
      }
      break;
  }
}

}  // namespace oxds

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

#ifndef OXDS_PROTOTYPES_HPP_
#define OXDS_PROTOTYPES_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oxds/hypersphere.hpp"

namespace oxds {

/// Category name -> fixed prototype on the hypersphere.
///
/// Categories are kept in lexicographic order; posterior vectors and
/// prototype matrices use that order. A book never changes after it is
/// built. Derived books (restrictions, few-shot replacements) are copies.
class PrototypeBook {
 public:
  /// Validates and builds a book. Throws DuplicateCategory, InvalidArgument
  /// (empty name or empty book), DimensionMismatch, DegeneratePrototypes
  /// (two prototypes equal within 1e-9).
  static PrototypeBook from_entries(
      std::vector<std::pair<std::string, UnitVector>> entries);

  Eigen::Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& categories() const noexcept {
    return names_;
  }

  bool contains(std::string_view category) const;
  std::optional<std::size_t> index_of(std::string_view category) const;
  /// Throws UnknownCategory.
  const UnitVector& at(std::string_view category) const;
  const UnitVector& prototype(std::size_t index) const {
    return prototypes_.at(index);
  }

  /// size() x dim() matrix whose rows are the prototypes.
  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }

  /// Sub-book over the given categories; throws UnknownCategory.
  PrototypeBook restricted_to(const std::set<std::string>& categories) const;

  /// Copy of this book with some prototypes swapped out (few-shot
  /// exemplars). Every replaced category must already exist.
  PrototypeBook with_replacements(
      std::span<const std::pair<std::string, UnitVector>> replacements) const;

  /// FNV-1a over names and the raw bytes of every component.
  std::uint64_t checksum() const;

 private:
  PrototypeBook() = default;

  Eigen::Index dim_ = 0;
  std::vector<std::string> names_;
  std::vector<UnitVector> prototypes_;
  Eigen::MatrixXd matrix_;
};

/// Reads the `OXDS-PROTO 1 <C> <D>` text format. Rows are L2-normalized on
/// load. Throws ParseError, DimensionMismatch, DuplicateCategory, ZeroVector.
PrototypeBook load_prototypes(const std::filesystem::path& path,
                              std::optional<Eigen::Index> expected_dim = {});
PrototypeBook read_prototypes(std::istream& in, const std::string& source,
                              std::optional<Eigen::Index> expected_dim = {});

void save_prototypes(const PrototypeBook& book,
                     const std::filesystem::path& path);
void write_prototypes(const PrototypeBook& book, std::ostream& out);

/// n-shot class prototype: spherical mean of the support embeddings.
UnitVector exemplar_prototype(std::span<const UnitVector> embeddings);

/// Pulls a support prototype towards the semantic prototype of its
/// (known) category: slerp(p0, book[category], lambda).
UnitVector refine_support(const UnitVector& p0, std::string_view category,
                          const PrototypeBook& book, double lambda);

enum class SplitMode { kZeroShot, kManyShot, kGeneralized };

std::string_view split_mode_name(SplitMode mode);
/// Accepts zero_shot, many_shot, generalized; throws InvalidArgument.
SplitMode parse_split_mode(std::string_view name);

/// Which categories train the mappers and which are searched.
///
/// zero_shot and generalized require disjoint train/test sets. many_shot
/// requires them to be equal. In generalized mode the gallery additionally
/// holds reserved seen-class samples; that is decided by the workflows.
struct CategorySplit {
  std::set<std::string> train;
  std::set<std::string> test;
  SplitMode mode = SplitMode::kZeroShot;

  /// Throws InvalidArgument when the mode invariants do not hold.
  void validate() const;
};

}  // namespace oxds

#endif  // OXDS_PROTOTYPES_HPP_

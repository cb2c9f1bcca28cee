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

// Exact cosine search in the shared space. Galleries may hold any mix of
// domains; queries may be built from any number of source domains.

#ifndef OXDS_SEARCH_HPP_
#define OXDS_SEARCH_HPP_

#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oxds/hypersphere.hpp"
#include "oxds/mapper.hpp"
#include "oxds/prototypes.hpp"

namespace oxds {

/// Top-k sentinel for "rank the whole gallery".
inline constexpr std::size_t kAll = std::numeric_limits<std::size_t>::max();

struct ItemRecord {
  std::string item_id;
  std::string domain;
  std::string category;
  Eigen::VectorXd feature;
};

struct GalleryEntry {
  std::string item_id;
  std::string domain;
  std::string category;
  UnitVector embedding;
};

/// Immutable set of embedded items, stored in ascending item_id order.
class GalleryIndex {
 public:
  /// Throws EmptyGallery, DimensionMismatch and InvalidArgument on
  /// duplicate item ids.
  static GalleryIndex build(std::vector<GalleryEntry> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  Eigen::Index dim() const noexcept { return dim_; }
  const std::vector<GalleryEntry>& entries() const noexcept {
    return entries_;
  }
  const GalleryEntry& entry(std::size_t i) const { return entries_.at(i); }

  std::set<std::string> domains() const;
  /// Number of entries of `category`, optionally within one domain.
  std::size_t count(const std::string& category) const;
  std::size_t count(const std::string& category,
                    const std::string& domain) const;

 private:
  GalleryIndex() = default;

  Eigen::Index dim_ = 0;
  std::vector<GalleryEntry> entries_;
  std::map<std::pair<std::string, std::string>, std::size_t> counts_;
  std::map<std::string, std::size_t> category_counts_;
};

struct RankedItem {
  std::string item_id;
  double score = 0.0;  // <q, g>
  std::string domain;
  std::string category;
};

/// Descending score, ties by ascending item_id.
using RankedList = std::vector<RankedItem>;

/// Embeds every item whose domain is in `domains` with that domain's mapper.
/// Throws EmptyGallery (nothing selected), MissingMapper, DimensionMismatch.
GalleryIndex embed_gallery(const std::map<std::string, DomainMapper>& mappers,
                           std::span<const ItemRecord> items,
                           const std::set<std::string>& domains);

struct QuerySource {
  const DomainMapper* mapper;
  Eigen::VectorXd feature;
};

/// One source: its embedding. Several: their spherical average.
UnitVector build_query(std::span<const QuerySource> sources);

/// Mixes the query with its unlabeled nearest gallery neighbour:
/// slerp(q, nn(q), lambda). Entries listed in `exclude` are not candidates.
UnitVector refine_query(const UnitVector& query, const GalleryIndex& index,
                        double lambda,
                        std::span<const std::string> exclude = {});

/// Exact top-k by <q, g>. Entries listed in `exclude` are skipped.
RankedList search(const UnitVector& query, const GalleryIndex& index,
                  std::size_t k = kAll,
                  std::span<const std::string> exclude = {});

/// Same ranking for an arbitrary (not necessarily unit) query direction.
RankedList search_direction(std::span<const double> query,
                            const GalleryIndex& index, std::size_t k = kAll,
                            std::span<const std::string> exclude = {});

/// Nearest prototype, ties broken by lexicographic category name.
std::string classify(const UnitVector& query, const PrototypeBook& book);

/// The book as a gallery (item_id = category name, domain "prototype").
GalleryIndex prototype_gallery(const PrototypeBook& book);

}  // namespace oxds

#endif  // OXDS_SEARCH_HPP_

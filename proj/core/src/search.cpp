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

#include "oxds/search.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "oxds/error.hpp"

namespace oxds {

namespace {

std::vector<char> excluded_mask(const GalleryIndex& index,
                                std::span<const std::string> exclude) {
  std::vector<char> mask(index.size(), 0);
  const auto& entries = index.entries();
  for (const auto& id : exclude) {
    auto it = std::lower_bound(
        entries.begin(), entries.end(), id,
        [](const GalleryEntry& e, const std::string& key) {
          return e.item_id < key;
        });
    if (it != entries.end() && it->item_id == id) {
      mask[static_cast<std::size_t>(it - entries.begin())] = 1;
    }
  }
  return mask;
}

}  // namespace

GalleryIndex GalleryIndex::build(std::vector<GalleryEntry> entries) {
  if (entries.empty()) {
    throw Error(ErrorKind::kEmptyGallery, "gallery has no entries");
  }
  std::sort(entries.begin(), entries.end(),
            [](const GalleryEntry& a, const GalleryEntry& b) {
              return a.item_id < b.item_id;
            });
  GalleryIndex index;
  index.dim_ = entries.front().embedding.dim();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].embedding.dim() != index.dim_) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "gallery entry '" + entries[i].item_id +
                      "' has a different dimension");
    }
    if (i > 0 && entries[i - 1].item_id == entries[i].item_id) {
      throw Error(ErrorKind::kInvalidArgument,
                  "duplicate gallery item '" + entries[i].item_id + "'");
    }
    ++index.counts_[{entries[i].category, entries[i].domain}];
    ++index.category_counts_[entries[i].category];
  }
  index.entries_ = std::move(entries);
  return index;
}

std::set<std::string> GalleryIndex::domains() const {
  std::set<std::string> out;
  for (const auto& e : entries_) out.insert(e.domain);
  return out;
}

std::size_t GalleryIndex::count(const std::string& category) const {
  auto it = category_counts_.find(category);
  return it == category_counts_.end() ? 0 : it->second;
}

std::size_t GalleryIndex::count(const std::string& category,
                                const std::string& domain) const {
  auto it = counts_.find({category, domain});
  return it == counts_.end() ? 0 : it->second;
}

GalleryIndex embed_gallery(const std::map<std::string, DomainMapper>& mappers,
                           std::span<const ItemRecord> items,
                           const std::set<std::string>& domains) {
  std::vector<GalleryEntry> entries;
  std::optional<Eigen::Index> dim;
  for (const auto& item : items) {
    if (domains.count(item.domain) == 0) continue;
    auto it = mappers.find(item.domain);
    if (it == mappers.end()) {
      throw Error(ErrorKind::kMissingMapper,
                  "no mapper for domain '" + item.domain + "'");
    }
    if (dim && it->second.d_out() != *dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "mappers disagree on the output dimension");
    }
    dim = it->second.d_out();
    entries.push_back(GalleryEntry{item.item_id, item.domain, item.category,
                                   it->second.forward(item.feature)});
  }
  if (entries.empty()) {
    throw Error(ErrorKind::kEmptyGallery,
                "no items belong to the requested gallery domains");
  }
  return GalleryIndex::build(std::move(entries));
}

UnitVector build_query(std::span<const QuerySource> sources) {
  if (sources.empty()) {
    throw Error(ErrorKind::kEmptyInput, "a query needs at least one source");
  }
  const Eigen::Index d_out = sources.front().mapper->d_out();
  std::vector<UnitVector> embedded;
  embedded.reserve(sources.size());
  for (const auto& s : sources) {
    if (s.mapper->d_out() != d_out) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "query sources map to different dimensions");
    }
    embedded.push_back(s.mapper->forward(s.feature));
  }
  if (embedded.size() == 1) return embedded.front();
  return spherical_average(embedded);
}

RankedList search_direction(std::span<const double> query,
                            const GalleryIndex& index, std::size_t k,
                            std::span<const std::string> exclude) {
  if (index.size() == 0) {
    throw Error(ErrorKind::kEmptyGallery, "search over an empty gallery");
  }
  if (static_cast<Eigen::Index>(query.size()) != index.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("query has dimension {}, gallery {}",
                            query.size(), index.dim()));
  }
  if (k == 0) {
    throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  }
  const auto mask = excluded_mask(index, exclude);
  std::vector<double> scores(index.size());
  std::vector<std::size_t> order;
  order.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (mask[i]) continue;
    scores[i] = dot(query, index.entry(i).embedding.values());
    order.push_back(i);
  }
  // Entries are stored by item_id, so the index is the tie-break.
  auto before = [&scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(),
                    order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), before);
  RankedList out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const auto& e = index.entry(order[r]);
    out.push_back(RankedItem{e.item_id, scores[order[r]], e.domain,
                             e.category});
  }
  return out;
}

RankedList search(const UnitVector& query, const GalleryIndex& index,
                  std::size_t k, std::span<const std::string> exclude) {
  return search_direction(query.values(), index, k, exclude);
}

UnitVector refine_query(const UnitVector& query, const GalleryIndex& index,
                        double lambda, std::span<const std::string> exclude) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "lambda must lie in [0, 1]");
  }
  const RankedList top = search(query, index, 1, exclude);
  if (top.empty()) {
    throw Error(ErrorKind::kEmptyGallery,
                "no gallery neighbour left to refine with");
  }
  if (lambda == 0.0) return query;
  const auto& entries = index.entries();
  auto it = std::lower_bound(entries.begin(), entries.end(),
                             top.front().item_id,
                             [](const GalleryEntry& e, const std::string& key) {
                               return e.item_id < key;
                             });
  return slerp(query, it->embedding, lambda);
}

std::string classify(const UnitVector& query, const PrototypeBook& book) {
  if (query.dim() != book.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "query and prototypes differ in dimension");
  }
  // Minimum cosine distance == maximum dot product; the book is sorted by
  // name, so the first maximum wins ties.
  std::size_t best = 0;
  double best_score = dot(query, book.prototype(0));
  for (std::size_t c = 1; c < book.size(); ++c) {
    const double score = dot(query, book.prototype(c));
    if (score > best_score) {
      best = c;
      best_score = score;
    }
  }
  return book.categories()[best];
}

GalleryIndex prototype_gallery(const PrototypeBook& book) {
  std::vector<GalleryEntry> entries;
  entries.reserve(book.size());
  for (std::size_t c = 0; c < book.size(); ++c) {
    entries.push_back(GalleryEntry{book.categories()[c], "prototype",
                                   book.categories()[c], book.prototype(c)});
  }
  return GalleryIndex::build(std::move(entries));
}

}  // namespace oxds

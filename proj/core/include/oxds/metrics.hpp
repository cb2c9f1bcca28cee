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

// Retrieval and classification metrics over binary relevance.
//
// Conventions:
//  - AP@all divides by the number of relevant gallery items R; AP@K divides
//    by min(R, K), so a perfect top-K scores 1.
//  - DCG uses binary gains, no discount at rank 1, 1/log2(i) from rank 2 on,
//    and is normalized by the ideal ordering.
//  - First/second tier are recall at R and 2R; E is the harmonic mean of
//    precision@32 and recall@32.
//  - Intent-aware AP weighs per-domain AP@K by the share of the query's
//    category each domain holds in the gallery. Each domain's relevance is
//    read off the same (union) ranking.

#ifndef OXDS_METRICS_HPP_
#define OXDS_METRICS_HPP_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oxds/search.hpp"

namespace oxds {

/// Relevance flags in rank order plus the number of relevant items in the
/// whole gallery (which may exceed the flags set when the list is cut).
struct RelevanceList {
  std::vector<bool> relevant;
  std::size_t total_relevant = 0;

  std::size_t hits() const;
  /// Throws InvalidArgument if more flags are set than total_relevant.
  void validate() const;
};

/// Flags ranked items of `category`, optionally only those in `domain`.
RelevanceList relevance_of(const RankedList& ranking,
                           const std::string& category,
                           std::size_t total_relevant,
                           const std::string* domain = nullptr);

double average_precision(const RelevanceList& rel, std::size_t cutoff = kAll);
double precision_at(const RelevanceList& rel, std::size_t k);

struct TierRecall {
  double first = 0.0;
  double second = 0.0;
};
TierRecall tier_recalls(const RelevanceList& rel);

inline constexpr std::size_t kEMeasureDepth = 32;
double e_measure(const RelevanceList& rel);
double dcg(const RelevanceList& rel);

/// Sum over domains of count_d / sum(count) * AP_d@k. Domains with a zero
/// count carry no weight; all-zero counts throw NoRelevantItems.
double intent_aware_ap(const std::map<std::string, RelevanceList>& per_domain,
                       const std::map<std::string, std::size_t>& counts,
                       std::size_t k);

/// Fraction of (predicted, truth) pairs that agree. Throws EmptyInput.
double accuracy(
    std::span<const std::pair<std::string, std::string>> predictions);

enum class MetricKind {
  kMap,
  kPrecision,
  kNearestNeighbour,
  kFirstTier,
  kSecondTier,
  kEMeasure,
  kDcg,
  kIntentAwareMap,
  kAccuracy,
};

struct MetricRequest {
  MetricKind kind = MetricKind::kMap;
  std::size_t k = kAll;

  friend bool operator==(const MetricRequest&, const MetricRequest&) = default;
};

std::string_view metric_name(MetricKind kind);
/// "all" or the cutoff.
std::string metric_k_label(const MetricRequest& request);

/// Comma-separated names: map, prec, nn, ft, st, e, dcg, ia_map, each
/// optionally suffixed with @K or @all. map defaults to @all, prec and
/// ia_map to `default_k`. Throws UnknownMetric.
std::vector<MetricRequest> parse_metrics(std::string_view list,
                                         std::size_t default_k);

/// Domain and category of every gallery item, keyed by item_id.
class GalleryLabels {
 public:
  void add(const std::string& item_id, const std::string& domain,
           const std::string& category);
  static GalleryLabels from_index(const GalleryIndex& index);

  /// Throws InconsistentLabels for unknown ids.
  const std::pair<std::string, std::string>& at(
      const std::string& item_id) const;
  bool contains(const std::string& item_id) const;
  std::size_t count(const std::string& category,
                    const std::string& domain) const;
  std::set<std::string> domains() const;

 private:
  std::map<std::string, std::pair<std::string, std::string>> items_;
  std::map<std::pair<std::string, std::string>, std::size_t> counts_;
};

struct QueryResult {
  std::string query_id;
  std::string category;
  RankedList ranking;
  // Gallery items withheld from this query (its own record).
  std::vector<std::string> excluded;
};

struct MetricValue {
  MetricRequest metric;
  // Empty when every query was skipped.
  std::optional<double> value;
  std::size_t queries = 0;
  std::size_t skipped = 0;
};

struct MetricsReport {
  std::string source_domains;  // '+'-joined, sorted
  std::string target_domains;
  std::vector<MetricValue> values;
};

/// Scores every query, then takes the unweighted mean per metric. Queries
/// without a relevant gallery item are left out of the mean and counted as
/// skipped. The result does not depend on the order of `queries`.
MetricsReport evaluate(std::span<const QueryResult> queries,
                       const GalleryLabels& labels,
                       std::span<const MetricRequest> metrics,
                       std::string source_domains,
                       std::string target_domains);

std::string join_domains(const std::set<std::string>& domains);

inline constexpr std::string_view kMetricsCsvHeader =
    "metric,source_domains,target_domains,k,value,queries,skipped";

/// Writes the header and one row per value, rows sorted.
void write_metrics_csv(std::span<const MetricsReport> reports,
                       std::ostream& out);

}  // namespace oxds

#endif  // OXDS_METRICS_HPP_

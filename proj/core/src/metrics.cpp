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

#include "oxds/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "oxds/error.hpp"
#include "text_util.hpp"

namespace oxds {

namespace {

void require_relevant(const RelevanceList& rel) {
  rel.validate();
  if (rel.total_relevant == 0) {
    throw Error(ErrorKind::kNoRelevantItems,
                "query has no relevant gallery items");
  }
}

std::size_t hits_in_top(const RelevanceList& rel, std::size_t depth) {
  const std::size_t stop = std::min(depth, rel.relevant.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < stop; ++i) hits += rel.relevant[i] ? 1 : 0;
  return hits;
}

double rank_gain(std::size_t rank) {
  return rank == 1 ? 1.0 : 1.0 / std::log2(static_cast<double>(rank));
}

// Order-independent mean: sum the sorted values.
double stable_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

std::size_t RelevanceList::hits() const {
  return static_cast<std::size_t>(
      std::count(relevant.begin(), relevant.end(), true));
}

void RelevanceList::validate() const {
  if (hits() > total_relevant) {
    throw Error(ErrorKind::kInvalidArgument,
                fmt::format("{} relevant flags but only {} relevant items",
                            hits(), total_relevant));
  }
}

RelevanceList relevance_of(const RankedList& ranking,
                           const std::string& category,
                           std::size_t total_relevant,
                           const std::string* domain) {
  RelevanceList rel;
  rel.total_relevant = total_relevant;
  rel.relevant.reserve(ranking.size());
  for (const auto& item : ranking) {
    rel.relevant.push_back(item.category == category &&
                           (domain == nullptr || item.domain == *domain));
  }
  return rel;
}

double average_precision(const RelevanceList& rel, std::size_t cutoff) {
  require_relevant(rel);
  if (cutoff == 0) {
    throw Error(ErrorKind::kInvalidArgument, "AP cutoff must be positive");
  }
  const std::size_t stop = std::min(cutoff, rel.relevant.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < stop; ++i) {
    if (!rel.relevant[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  const std::size_t norm = std::min(rel.total_relevant, cutoff);
  return sum / static_cast<double>(norm);
}

double precision_at(const RelevanceList& rel, std::size_t k) {
  if (k == 0) {
    throw Error(ErrorKind::kInvalidArgument, "precision cutoff must be >= 1");
  }
  return static_cast<double>(hits_in_top(rel, k)) / static_cast<double>(k);
}

TierRecall tier_recalls(const RelevanceList& rel) {
  require_relevant(rel);
  const std::size_t k = rel.total_relevant;
  const double denom = static_cast<double>(k);
  return TierRecall{
      static_cast<double>(hits_in_top(rel, k)) / denom,
      std::min(1.0, static_cast<double>(hits_in_top(rel, 2 * k)) / denom)};
}

double e_measure(const RelevanceList& rel) {
  require_relevant(rel);
  const auto hits = static_cast<double>(hits_in_top(rel, kEMeasureDepth));
  const double precision = hits / static_cast<double>(kEMeasureDepth);
  const double recall = hits / static_cast<double>(rel.total_relevant);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double dcg(const RelevanceList& rel) {
  require_relevant(rel);
  double gain = 0.0;
  for (std::size_t i = 0; i < rel.relevant.size(); ++i) {
    if (rel.relevant[i]) gain += rank_gain(i + 1);
  }
  double ideal = 0.0;
  for (std::size_t r = 1; r <= rel.total_relevant; ++r) ideal += rank_gain(r);
  return gain / ideal;
}

double intent_aware_ap(const std::map<std::string, RelevanceList>& per_domain,
                       const std::map<std::string, std::size_t>& counts,
                       std::size_t k) {
  std::size_t total = 0;
  for (const auto& [domain, count] : counts) total += count;
  if (total == 0) {
    throw Error(ErrorKind::kNoRelevantItems,
                "query category occurs in no target domain");
  }
  double score = 0.0;
  for (const auto& [domain, count] : counts) {
    if (count == 0) continue;
    auto it = per_domain.find(domain);
    if (it == per_domain.end()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "no relevance list for domain '" + domain + "'");
    }
    const double weight =
        static_cast<double>(count) / static_cast<double>(total);
    score += weight * average_precision(it->second, k);
  }
  return score;
}

double accuracy(
    std::span<const std::pair<std::string, std::string>> predictions) {
  if (predictions.empty()) {
    throw Error(ErrorKind::kEmptyInput, "accuracy of no predictions");
  }
  const auto correct = std::count_if(
      predictions.begin(), predictions.end(),
      [](const auto& p) { return p.first == p.second; });
  return static_cast<double>(correct) /
         static_cast<double>(predictions.size());
}

std::string_view metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::kMap: return "map";
    case MetricKind::kPrecision: return "prec";
    case MetricKind::kNearestNeighbour: return "nn";
    case MetricKind::kFirstTier: return "ft";
    case MetricKind::kSecondTier: return "st";
    case MetricKind::kEMeasure: return "e";
    case MetricKind::kDcg: return "dcg";
    case MetricKind::kIntentAwareMap: return "ia_map";
    case MetricKind::kAccuracy: return "accuracy";
  }
  return "map";
}

std::string metric_k_label(const MetricRequest& request) {
  return request.k == kAll ? std::string("all") : std::to_string(request.k);
}

std::vector<MetricRequest> parse_metrics(std::string_view list,
                                         std::size_t default_k) {
  std::vector<MetricRequest> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    std::string_view token = list.substr(pos, comma - pos);
    pos = comma + 1;
    if (token.empty()) continue;

    std::string_view name = token;
    std::optional<std::size_t> k;
    if (const auto at = token.find('@'); at != std::string_view::npos) {
      name = token.substr(0, at);
      const auto suffix = token.substr(at + 1);
      if (suffix == "all") {
        k = kAll;
      } else {
        try {
          k = detail::parse_uint(suffix, "metric '" + std::string(token) + "'");
        } catch (const Error&) {
          throw Error(ErrorKind::kUnknownMetric,
                      "bad cutoff in metric '" + std::string(token) + "'");
        }
        if (*k == 0) {
          throw Error(ErrorKind::kUnknownMetric,
                      "cutoff must be positive in '" + std::string(token) +
                          "'");
        }
      }
    }

    MetricRequest req;
    if (name == "map") {
      req = {MetricKind::kMap, k.value_or(kAll)};
    } else if (name == "prec") {
      req = {MetricKind::kPrecision, k.value_or(default_k)};
    } else if (name == "ia_map") {
      req = {MetricKind::kIntentAwareMap, k.value_or(default_k)};
    } else if (!k && name == "nn") {
      req = {MetricKind::kNearestNeighbour, 1};
    } else if (!k && name == "ft") {
      req = {MetricKind::kFirstTier, kAll};
    } else if (!k && name == "st") {
      req = {MetricKind::kSecondTier, kAll};
    } else if (!k && name == "e") {
      req = {MetricKind::kEMeasure, kEMeasureDepth};
    } else if (!k && name == "dcg") {
      req = {MetricKind::kDcg, kAll};
    } else {
      throw Error(ErrorKind::kUnknownMetric,
                  "unknown metric '" + std::string(token) + "'");
    }
    if (req.k == kAll && req.kind != MetricKind::kMap &&
        req.kind != MetricKind::kFirstTier &&
        req.kind != MetricKind::kSecondTier && req.kind != MetricKind::kDcg) {
      throw Error(ErrorKind::kUnknownMetric,
                  "metric '" + std::string(token) + "' needs a finite cutoff");
    }
    if (std::find(out.begin(), out.end(), req) == out.end()) {
      out.push_back(req);
    }
  }
  if (out.empty()) {
    throw Error(ErrorKind::kUnknownMetric, "no metrics requested");
  }
  return out;
}

void GalleryLabels::add(const std::string& item_id, const std::string& domain,
                        const std::string& category) {
  auto [it, inserted] = items_.emplace(item_id, std::pair{domain, category});
  if (!inserted) {
    if (it->second != std::pair{domain, category}) {
      throw Error(ErrorKind::kInconsistentLabels,
                  "item '" + item_id + "' labelled twice");
    }
    return;
  }
  ++counts_[{category, domain}];
}

GalleryLabels GalleryLabels::from_index(const GalleryIndex& index) {
  GalleryLabels labels;
  for (const auto& e : index.entries()) {
    labels.add(e.item_id, e.domain, e.category);
  }
  return labels;
}

const std::pair<std::string, std::string>& GalleryLabels::at(
    const std::string& item_id) const {
  auto it = items_.find(item_id);
  if (it == items_.end()) {
    throw Error(ErrorKind::kInconsistentLabels,
                "ranked item '" + item_id + "' has no gallery label");
  }
  return it->second;
}

bool GalleryLabels::contains(const std::string& item_id) const {
  return items_.count(item_id) != 0;
}

std::size_t GalleryLabels::count(const std::string& category,
                                 const std::string& domain) const {
  auto it = counts_.find({category, domain});
  return it == counts_.end() ? 0 : it->second;
}

std::set<std::string> GalleryLabels::domains() const {
  std::set<std::string> out;
  for (const auto& [key, count] : counts_) out.insert(key.second);
  return out;
}

MetricsReport evaluate(std::span<const QueryResult> queries,
                       const GalleryLabels& labels,
                       std::span<const MetricRequest> metrics,
                       std::string source_domains,
                       std::string target_domains) {
  const auto domains = labels.domains();
  std::vector<std::vector<double>> scores(metrics.size());
  std::vector<std::size_t> skipped(metrics.size(), 0);

  for (const auto& q : queries) {
    for (const auto& item : q.ranking) {
      const auto& [domain, category] = labels.at(item.item_id);
      if (domain != item.domain || category != item.category) {
        throw Error(ErrorKind::kInconsistentLabels,
                    "ranked item '" + item.item_id +
                        "' disagrees with the gallery labels");
      }
    }
    std::map<std::string, std::size_t> relevant_per_domain;
    for (const auto& d : domains) {
      relevant_per_domain[d] = labels.count(q.category, d);
    }
    for (const auto& id : q.excluded) {
      if (!labels.contains(id)) continue;
      const auto& [domain, category] = labels.at(id);
      if (category == q.category && relevant_per_domain[domain] > 0) {
        --relevant_per_domain[domain];
      }
    }
    std::size_t total = 0;
    for (const auto& [d, c] : relevant_per_domain) total += c;
    const RelevanceList rel = relevance_of(q.ranking, q.category, total);

    for (std::size_t m = 0; m < metrics.size(); ++m) {
      if (total == 0) {
        ++skipped[m];
        continue;
      }
      const auto& req = metrics[m];
      double value = 0.0;
      switch (req.kind) {
        case MetricKind::kMap: value = average_precision(rel, req.k); break;
        case MetricKind::kPrecision: value = precision_at(rel, req.k); break;
        case MetricKind::kNearestNeighbour:
          value = precision_at(rel, 1);
          break;
        case MetricKind::kFirstTier: value = tier_recalls(rel).first; break;
        case MetricKind::kSecondTier: value = tier_recalls(rel).second; break;
        case MetricKind::kEMeasure: value = e_measure(rel); break;
        case MetricKind::kDcg: value = dcg(rel); break;
        case MetricKind::kIntentAwareMap: {
          std::map<std::string, RelevanceList> per_domain;
          for (const auto& [d, c] : relevant_per_domain) {
            per_domain.emplace(d, relevance_of(q.ranking, q.category, c, &d));
          }
          value = intent_aware_ap(per_domain, relevant_per_domain, req.k);
          break;
        }
        case MetricKind::kAccuracy:
          throw Error(ErrorKind::kUnknownMetric,
                      "accuracy is a classification metric");
      }
      scores[m].push_back(value);
    }
  }

  MetricsReport report;
  report.source_domains = std::move(source_domains);
  report.target_domains = std::move(target_domains);
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    MetricValue v;
    v.metric = metrics[m];
    v.queries = scores[m].size();
    v.skipped = skipped[m];
    if (!scores[m].empty()) v.value = stable_mean(std::move(scores[m]));
    report.values.push_back(v);
  }
  return report;
}

std::string join_domains(const std::set<std::string>& domains) {
  std::string out;
  for (const auto& d : domains) {
    if (!out.empty()) out += '+';
    out += d;
  }
  return out;
}

void write_metrics_csv(std::span<const MetricsReport> reports,
                       std::ostream& out) {
  std::vector<std::string> rows;
  for (const auto& r : reports) {
    for (const auto& v : r.values) {
      rows.push_back(fmt::format(
          "{},{},{},{},{},{},{}", metric_name(v.metric.kind), r.source_domains,
          r.target_domains, metric_k_label(v.metric),
          v.value ? fmt::format("{:.17g}", *v.value) : std::string("NA"),
          v.queries, v.skipped));
    }
  }
  std::sort(rows.begin(), rows.end());
  out << kMetricsCsvHeader << '\n';
  for (const auto& row : rows) out << row << '\n';
}

}  // namespace oxds

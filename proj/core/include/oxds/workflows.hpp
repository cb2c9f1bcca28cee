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

// End-to-end workflows behind the command line tool: per-domain training,
// any-to-any / multi-source / multi-target retrieval evaluation, few-shot
// classification and binary (ITQ) retrieval.
//
// Sample roles per split mode:
//   zero_shot    train on seen categories; query and gallery are the unseen
//                categories.
//   many_shot    a seeded holdout share of every (domain, category) group is
//                kept out of training and serves as query and gallery.
//   generalized  train on the non-held-out seen samples; queries are the
//                unseen categories; the gallery adds the held-out seen
//                samples.

#ifndef OXDS_WORKFLOWS_HPP_
#define OXDS_WORKFLOWS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oxds/dataset.hpp"
#include "oxds/itq.hpp"
#include "oxds/mapper.hpp"
#include "oxds/metrics.hpp"
#include "oxds/search.hpp"

namespace oxds {

inline constexpr double kUnseenLambda = 0.7;
inline constexpr double kSeenLambda = 0.4;

/// 0.4 for many_shot, 0.7 otherwise.
double default_lambda(SplitMode mode);

struct Partition {
  std::vector<const ItemRecord*> train;
  std::vector<const ItemRecord*> query;
  std::vector<const ItemRecord*> gallery;
};

/// Splits `dataset.items` into roles. Pointers stay valid while the dataset
/// lives; each list is in item_id order.
Partition partition(const Dataset& dataset);

std::filesystem::path model_path(const std::filesystem::path& models_dir,
                                 const std::string& domain);

/// Throws MissingModel when a domain has no model file.
std::map<std::string, DomainMapper> load_models(
    const std::filesystem::path& models_dir,
    const std::set<std::string>& domains);

/// Trains one domain on its training samples, against the prototypes of the
/// seen categories only. Throws MissingDomain.
TrainResult train_domain(const Dataset& dataset, const std::string& domain,
                         const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

/// An embedded item. Labelled view groups collapse into one entry whose id
/// is the group name and whose embedding is the spherical mean of the views.
struct EmbeddedItem {
  std::string item_id;
  std::string domain;
  std::string category;
  UnitVector embedding;
  std::vector<std::string> members;
};

/// Throws MissingMapper and InconsistentLabels (a group spanning domains or
/// categories).
std::vector<EmbeddedItem> embed_items(
    const Dataset& dataset, const std::vector<const ItemRecord*>& items,
    const std::map<std::string, DomainMapper>& mappers);

struct EvalOptions {
  // Each entry is one domain set; every (source, target) combination is
  // evaluated.
  std::vector<std::set<std::string>> sources;
  std::vector<std::set<std::string>> targets;
  std::vector<MetricRequest> metrics{MetricRequest{}};
  bool refine = false;
  // Defaults to default_lambda(mode).
  std::optional<double> lambda;
  // Seeds the pairing of multi-source query tuples.
  std::uint64_t seed = 0;
};

/// Real-valued exact cosine retrieval.
std::vector<MetricsReport> evaluate_retrieval(
    const Dataset& dataset, const std::map<std::string, DomainMapper>& mappers,
    const EvalOptions& options);

struct HashOptions {
  std::size_t bits = kDefaultItqBits;
  std::size_t iterations = kDefaultItqIterations;
  std::uint64_t seed = 0;
};

struct BinaryEvaluation {
  std::vector<MetricsReport> reports;
  ItqFit fit;
};

/// Fits ITQ on the training embeddings of every involved domain, encodes
/// the (unrefined) galleries and the (optionally refined) queries and ranks
/// by Hamming distance.
BinaryEvaluation evaluate_binary(
    const Dataset& dataset, const std::map<std::string, DomainMapper>& mappers,
    const EvalOptions& options, const HashOptions& hash);

enum class FewShotMode { kWordVector, kSourceShots, kTargetShots };

std::string_view few_shot_mode_name(FewShotMode mode);
/// w2v, n_shot_source, n_shot_target.
FewShotMode parse_few_shot_mode(std::string_view name);

struct FewShotOptions {
  FewShotMode mode = FewShotMode::kWordVector;
  std::string source;
  std::string target;
  std::size_t shots = 1;
  std::size_t runs = 1;
  // Pull of each support prototype towards its word vector; defaults to the
  // unseen-class value.
  std::optional<double> lambda;
  std::uint64_t seed = 0;
};

struct FewShotReport {
  double mean_accuracy = 0.0;
  std::vector<double> run_accuracy;
  std::size_t evaluated = 0;  // target items classified per run
};

/// Classifies the unseen-category items of the target domain. Throws
/// InsufficientSupport.
FewShotReport evaluate_few_shot(
    const Dataset& dataset, const std::map<std::string, DomainMapper>& mappers,
    const FewShotOptions& options);

MetricsReport few_shot_metrics(const FewShotOptions& options,
                               const FewShotReport& report);

/// Parses "a+b" into {a, b}; "*" stays a single wildcard element.
std::set<std::string> parse_domain_set(std::string_view text);

/// Expands "*" entries into one singleton set per available domain.
std::vector<std::set<std::string>> expand_domain_sets(
    const std::vector<std::set<std::string>>& sets,
    const std::set<std::string>& available);

}  // namespace oxds

#endif  // OXDS_WORKFLOWS_HPP_

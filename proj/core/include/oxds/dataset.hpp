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

// On-disk dataset layout: per-domain feature files, a label manifest, a
// category split and a key=value manifest tying them to a prototype file.
//
//   features   OXDS-FEAT 1 <N> <D_in>, then "<item_id> <f1> ... <fD>"
//   labels     "<item_id> <domain> <category> [group]"
//   split      "<category> train|test"
//   manifest   mode=..., prototypes=..., labels=..., split=...,
//              features.<domain>=..., optional holdout= and seed=

#ifndef OXDS_DATASET_HPP_
#define OXDS_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oxds/prototypes.hpp"
#include "oxds/search.hpp"

namespace oxds {

struct FeatureTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd rows;  // ids.size() x dim
};

FeatureTable read_features(std::istream& in, const std::string& source);
FeatureTable load_features(const std::filesystem::path& path);
void write_features(const FeatureTable& table, std::ostream& out);
void save_features(const FeatureTable& table,
                   const std::filesystem::path& path);

struct LabelRecord {
  std::string item_id;
  std::string domain;
  std::string category;
  std::string group;  // empty unless the item is one view of a group
};

std::vector<LabelRecord> read_labels(std::istream& in,
                                     const std::string& source);
std::vector<LabelRecord> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<LabelRecord>& labels,
                 const std::filesystem::path& path);

/// In many_shot mode every listed category is both seen and searched.
CategorySplit read_split(std::istream& in, const std::string& source,
                         SplitMode mode);
CategorySplit load_split(const std::filesystem::path& path, SplitMode mode);
void save_split(const CategorySplit& split,
                const std::filesystem::path& path);

inline constexpr double kDefaultHoldout = 0.2;

struct DatasetManifest {
  SplitMode mode = SplitMode::kZeroShot;
  std::filesystem::path prototypes;
  std::filesystem::path labels;
  std::filesystem::path split;
  std::map<std::string, std::filesystem::path> features;  // by domain
  // Share of each seen (domain, category) group kept out of training and
  // used for evaluation in many_shot and generalized modes.
  double holdout = kDefaultHoldout;
  std::uint64_t seed = 0;
};

/// Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Writes paths as given.
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

/// Everything a workflow needs, validated against itself.
struct Dataset {
  DatasetManifest manifest;
  PrototypeBook book;
  CategorySplit split;
  std::vector<ItemRecord> items;             // sorted by item_id
  std::map<std::string, std::string> group;  // item_id -> view group
};

/// Loads the prototype book, split, labels and the feature files of
/// `domains` (all manifest domains when empty). Throws MissingDomain,
/// InconsistentLabels, UnknownCategory and the parse errors of each file.
Dataset load_dataset(const DatasetManifest& manifest,
                     const std::set<std::string>& domains = {});

}  // namespace oxds

#endif  // OXDS_DATASET_HPP_

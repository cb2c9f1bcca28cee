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

// Synthetic multi-domain benchmark with known ground truth.
//
// Categories get near-orthogonal unit prototypes. Each domain d owns a hidden
// full-rank matrix M_d (feature_dim x embed_dim) with singular values spread
// over [1, kappa], and emits x = M_d (proto(y) + eps), eps ~ N(0, sigma^2 I).
// Because the corruption is linear, an affine mapper can undo it exactly
// when sigma = 0.

#ifndef OXDS_SYNTH_HPP_
#define OXDS_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oxds/dataset.hpp"
#include "oxds/prototypes.hpp"
#include "oxds/search.hpp"

namespace oxds {

struct SynthConfig {
  std::size_t categories = 20;
  std::size_t domains = 3;
  Eigen::Index embed_dim = 16;
  Eigen::Index feature_dim = 32;
  std::size_t per_class = 50;
  double sigma = 0.05;
  // Per-domain noise overriding `sigma` where given (index = domain).
  std::vector<double> domain_sigma;
  double kappa = 5.0;
  std::uint64_t seed = 0;
  // Share of categories held out as unseen; 0 gives a many-shot split.
  double zero_shot_frac = 0.0;
  // Apply tanh to every feature after the linear map.
  bool nonlinear = false;

  double sigma_of(std::size_t domain) const;
  void validate() const;
};

struct SynthDataset {
  SynthConfig config;
  PrototypeBook book;
  CategorySplit split;
  std::vector<std::string> domains;
  std::vector<ItemRecord> items;  // grouped by domain, then category
  std::map<std::string, Eigen::MatrixXd> transforms;
  double min_prototype_distance = 0.0;
};

/// Names used for generated domains and categories.
std::string synth_domain_name(std::size_t index);
std::string synth_category_name(std::size_t index, std::size_t count);

/// Deterministic in the seed. Domain d's data depends only on (seed, d), so
/// a K-domain set extends the (K-1)-domain one. Throws InvalidArgument and
/// InfeasibleSeparation.
SynthDataset generate(const SynthConfig& config);

/// Writes prototypes.txt, split.txt, labels.txt, features_<domain>.txt and
/// manifest.txt into `dir` (created if needed). Returns the manifest path.
std::filesystem::path write_synth(const SynthDataset& data,
                                  const std::filesystem::path& dir);

}  // namespace oxds

#endif  // OXDS_SYNTH_HPP_

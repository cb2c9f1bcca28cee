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

#include "support/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include "oxds/error.hpp"

namespace oxds::testing {

TrainConfig reference_train_config() {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 300;
  cfg.seed = 1;
  return cfg;
}

SynthConfig reference_synth_config() {
  SynthConfig cfg;
  cfg.categories = 20;
  cfg.domains = 3;
  cfg.embed_dim = 16;
  cfg.feature_dim = 32;
  cfg.per_class = 50;
  cfg.sigma = 0.05;
  cfg.kappa = 5.0;
  cfg.seed = 7;
  return cfg;
}

Dataset to_dataset(const SynthDataset& data) {
  DatasetManifest manifest;
  manifest.mode = data.split.mode;
  manifest.seed = data.config.seed;
  for (const auto& d : data.domains) manifest.features[d] = d;
  std::vector<ItemRecord> items = data.items;
  std::sort(items.begin(), items.end(),
            [](const ItemRecord& a, const ItemRecord& b) {
              return a.item_id < b.item_id;
            });
  return Dataset{manifest, data.book, data.split, std::move(items), {}};
}

std::map<std::string, DomainMapper> train_all(const Dataset& ds,
                                              const TrainConfig& config) {
  std::map<std::string, DomainMapper> out;
  for (const auto& [domain, path] : ds.manifest.features) {
    out.emplace(domain, train_domain(ds, domain, config).mapper);
  }
  return out;
}

EvalOptions all_pairs(const Dataset& ds) {
  EvalOptions opt;
  for (const auto& [domain, path] : ds.manifest.features) {
    opt.sources.push_back({domain});
    opt.targets.push_back({domain});
  }
  return opt;
}

double metric_value(const std::vector<MetricsReport>& reports,
                    const std::string& source, const std::string& target) {
  for (const auto& r : reports) {
    if (r.source_domains == source && r.target_domains == target) {
      return r.values.at(0).value.value();
    }
  }
  throw Error(ErrorKind::kInvalidArgument,
              "no report for " + source + " -> " + target);
}

std::string to_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  write_metrics_csv(reports, out);
  return out.str();
}

}  // namespace oxds::testing

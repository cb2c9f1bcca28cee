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

// oxds command line tool. Exit codes: 0 success, 2 invalid input or
// arguments, 1 internal or I/O failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "oxds/dataset.hpp"
#include "oxds/error.hpp"
#include "oxds/itq.hpp"
#include "oxds/mapper.hpp"
#include "oxds/metrics.hpp"
#include "oxds/search.hpp"
#include "oxds/synth.hpp"
#include "oxds/workflows.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;

// Writes to `path`, or to stdout when it is empty.
template <typename F>
void emit(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw oxds::Error(oxds::ErrorKind::kIoError, "cannot write " + path);
  }
  write(out);
  if (!out) {
    throw oxds::Error(oxds::ErrorKind::kIoError, "write failed: " + path);
  }
}

oxds::Dataset open_dataset(const std::string& manifest) {
  return oxds::load_dataset(oxds::load_manifest(manifest));
}

std::set<std::string> dataset_domains(const oxds::Dataset& ds) {
  std::set<std::string> out;
  for (const auto& [d, path] : ds.manifest.features) out.insert(d);
  return out;
}

std::vector<std::set<std::string>> domain_sets(
    const std::vector<std::string>& specs, const oxds::Dataset& ds) {
  std::vector<std::set<std::string>> sets;
  for (const auto& s : specs) sets.push_back(oxds::parse_domain_set(s));
  return oxds::expand_domain_sets(sets, dataset_domains(ds));
}

std::set<std::string> union_of(
    const std::vector<std::set<std::string>>& a,
    const std::vector<std::set<std::string>>& b) {
  std::set<std::string> out;
  for (const auto* sets : {&a, &b}) {
    for (const auto& s : *sets) out.insert(s.begin(), s.end());
  }
  return out;
}

struct EvalArgs {
  std::string manifest;
  std::string models;
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::string metrics = "map";
  std::size_t k = 100;
  bool refine = false;
  std::optional<double> lambda;
  std::uint64_t seed = 0;
  std::string out;
};

void add_eval_flags(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("--manifest", a.manifest, "dataset manifest")->required();
  cmd->add_option("--models", a.models, "directory of <domain>.map files")
      ->required();
  cmd->add_option("--source", a.sources,
                  "source domain set, e.g. sk or sk+ph; '*' = every domain")
      ->required();
  cmd->add_option("--target", a.targets,
                  "target domain set, e.g. ph or ph+cl; '*' = every domain")
      ->required();
  cmd->add_option("--metrics", a.metrics,
                  "comma list of map[@K|@all], prec[@K], nn, ft, st, e, dcg, "
                  "ia_map[@K]")
      ->capture_default_str();
  cmd->add_option("--k", a.k, "cutoff for metrics given without @K")
      ->capture_default_str();
  cmd->add_flag("--refine", a.refine, "pull each query towards its gallery");
  cmd->add_option("--lambda", a.lambda,
                  "refinement strength (default 0.7 unseen, 0.4 seen)");
  cmd->add_option("--seed", a.seed, "seed for multi-source query pairing")
      ->capture_default_str();
  cmd->add_option("--out", a.out, "CSV output file (default stdout)");
}

oxds::EvalOptions eval_options(const EvalArgs& a, const oxds::Dataset& ds) {
  oxds::EvalOptions opt;
  opt.sources = domain_sets(a.sources, ds);
  opt.targets = domain_sets(a.targets, ds);
  opt.metrics = oxds::parse_metrics(a.metrics, a.k);
  opt.refine = a.refine;
  opt.lambda = a.lambda;
  opt.seed = a.seed;
  return opt;
}

int run_synth(const oxds::SynthConfig& cfg, const std::string& out) {
  const auto data = oxds::generate(cfg);
  const auto manifest = oxds::write_synth(data, out);
  fmt::print("wrote {} items over {} domains to {}\n", data.items.size(),
             data.domains.size(), manifest.string());
  return kExitOk;
}

int run_train(const std::string& manifest, const std::string& domain,
              const std::string& models, const oxds::TrainConfig& cfg) {
  const auto ds =
      oxds::load_dataset(oxds::load_manifest(manifest), {domain});
  const auto result = oxds::train_domain(
      ds, domain, cfg, [](std::size_t epoch, double loss) {
        fmt::print("epoch {} loss {:.10g}\n", epoch, loss);
      });
  fs::create_directories(models);
  const auto path = oxds::model_path(models, domain);
  oxds::save_mapper(result.mapper, path);
  fmt::print("saved {}\n", path.string());
  return kExitOk;
}

int run_embed(const std::string& manifest, const std::string& models,
              const std::string& domain, const std::string& out) {
  const auto ds = oxds::load_dataset(oxds::load_manifest(manifest), {domain});
  const auto mappers = oxds::load_models(models, {domain});
  std::vector<const oxds::ItemRecord*> items;
  for (const auto& item : ds.items) items.push_back(&item);
  const auto embedded = oxds::embed_items(ds, items, mappers);
  oxds::FeatureTable table;
  table.rows.resize(static_cast<Eigen::Index>(embedded.size()),
                    mappers.at(domain).d_out());
  for (std::size_t i = 0; i < embedded.size(); ++i) {
    table.ids.push_back(embedded[i].item_id);
    table.rows.row(static_cast<Eigen::Index>(i)) =
        embedded[i].embedding.vec().transpose();
  }
  emit(out, [&](std::ostream& os) { oxds::write_features(table, os); });
  return kExitOk;
}

int run_search(const std::string& manifest, const std::string& models,
               const std::string& query_id, const std::string& target,
               std::size_t k, bool refine, std::optional<double> lambda,
               const std::string& out) {
  const auto ds = open_dataset(manifest);
  const auto* query = [&]() -> const oxds::ItemRecord* {
    for (const auto& item : ds.items) {
      if (item.item_id == query_id) return &item;
    }
    throw oxds::Error(oxds::ErrorKind::kInvalidArgument,
                      "unknown query item '" + query_id + "'");
  }();
  auto targets = oxds::expand_domain_sets({oxds::parse_domain_set(target)},
                                          dataset_domains(ds));
  std::set<std::string> target_domains;
  for (const auto& t : targets) target_domains.insert(t.begin(), t.end());
  auto needed = target_domains;
  needed.insert(query->domain);
  const auto mappers = oxds::load_models(models, needed);

  const auto parts = oxds::partition(ds);
  std::vector<const oxds::ItemRecord*> gallery_items;
  for (const auto* item : parts.gallery) {
    if (target_domains.count(item->domain) != 0) gallery_items.push_back(item);
  }
  std::vector<oxds::GalleryEntry> entries;
  for (auto& e : oxds::embed_items(ds, gallery_items, mappers)) {
    entries.push_back(oxds::GalleryEntry{e.item_id, e.domain, e.category,
                                         e.embedding});
  }
  if (entries.empty()) {
    throw oxds::Error(oxds::ErrorKind::kEmptyGallery,
                      "no gallery items in '" + target + "'");
  }
  const auto index = oxds::GalleryIndex::build(std::move(entries));
  std::vector<std::string> exclude{query->item_id};
  if (auto g = ds.group.find(query->item_id); g != ds.group.end()) {
    exclude.push_back(g->second);
  }
  auto q = mappers.at(query->domain).forward(query->feature);
  if (refine) {
    q = oxds::refine_query(q, index, lambda.value_or(oxds::default_lambda(
                                         ds.split.mode)),
                           exclude);
  }
  const auto ranked = oxds::search(q, index, k, exclude);
  emit(out, [&](std::ostream& os) {
    os << "rank,item_id,domain,category,score\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      fmt::print(os, "{},{},{},{},{:.17g}\n", i + 1, ranked[i].item_id,
                 ranked[i].domain, ranked[i].category, ranked[i].score);
    }
  });
  return kExitOk;
}

int run_eval(const EvalArgs& a) {
  const auto ds = open_dataset(a.manifest);
  const auto opt = eval_options(a, ds);
  const auto mappers =
      oxds::load_models(a.models, union_of(opt.sources, opt.targets));
  const auto reports = oxds::evaluate_retrieval(ds, mappers, opt);
  emit(a.out, [&](std::ostream& os) { oxds::write_metrics_csv(reports, os); });
  return kExitOk;
}

int run_hash(const EvalArgs& a, const oxds::HashOptions& hash,
             const std::string& codes_out) {
  const auto ds = open_dataset(a.manifest);
  const auto opt = eval_options(a, ds);
  const auto mappers =
      oxds::load_models(a.models, union_of(opt.sources, opt.targets));
  const auto result = oxds::evaluate_binary(ds, mappers, opt, hash);
  emit(a.out, [&](std::ostream& os) {
    os << "# binary=true\n";
    oxds::write_metrics_csv(result.reports, os);
  });
  if (!codes_out.empty()) {
    std::set<std::string> target_domains;
    for (const auto& t : opt.targets) {
      target_domains.insert(t.begin(), t.end());
    }
    const auto parts = oxds::partition(ds);
    std::vector<const oxds::ItemRecord*> items;
    for (const auto* item : parts.gallery) {
      if (target_domains.count(item->domain) != 0) items.push_back(item);
    }
    std::vector<oxds::BitCode> codes;
    for (const auto& e : oxds::embed_items(ds, items, mappers)) {
      codes.push_back(oxds::encode(result.fit.model, e.embedding, e.item_id));
    }
    oxds::save_codes(codes, codes_out);
  }
  return kExitOk;
}

int run_fewshot(const std::string& manifest, const std::string& models,
                const oxds::FewShotOptions& opt, const std::string& out) {
  const auto ds = open_dataset(manifest);
  const auto mappers = oxds::load_models(models, {opt.source, opt.target});
  const auto report = oxds::evaluate_few_shot(ds, mappers, opt);
  const std::vector<oxds::MetricsReport> rows{
      oxds::few_shot_metrics(opt, report)};
  emit(out, [&](std::ostream& os) { oxds::write_metrics_csv(rows, os); });
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open cross-domain visual search on a shared semantic sphere"};
  app.require_subcommand(1);
  std::function<int()> action;

  oxds::SynthConfig synth;
  std::string synth_out;
  std::vector<double> domain_sigma;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--categories", synth.categories)->capture_default_str();
  synth_cmd->add_option("--domains", synth.domains)->capture_default_str();
  synth_cmd->add_option("--dim", synth.embed_dim, "semantic dimension")
      ->capture_default_str();
  synth_cmd->add_option("--feat-dim", synth.feature_dim, "feature dimension")
      ->capture_default_str();
  synth_cmd->add_option("--per-class", synth.per_class,
                        "samples per (domain, category)")
      ->capture_default_str();
  synth_cmd->add_option("--sigma", synth.sigma, "semantic noise")
      ->capture_default_str();
  synth_cmd->add_option("--domain-sigma", domain_sigma,
                        "per-domain noise, in domain order")
      ->delimiter(',');
  synth_cmd->add_option("--kappa", synth.kappa,
                        "largest singular value of each domain map")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--zero-shot-frac", synth.zero_shot_frac,
                        "share of categories held out as unseen")
      ->capture_default_str();
  synth_cmd->add_flag("--nonlinear", synth.nonlinear,
                      "apply tanh after the domain map");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->callback([&] {
    synth.domain_sigma = domain_sigma;
    action = [&] { return run_synth(synth, synth_out); };
  });

  std::string manifest;
  std::string models;
  std::string domain;
  oxds::TrainConfig train;
  auto* train_cmd = app.add_subcommand("train", "train one domain mapper");
  train_cmd->add_option("--manifest", manifest)->required();
  train_cmd->add_option("--domain", domain)->required();
  train_cmd->add_option("--models", models, "output directory")->required();
  train_cmd->add_option("--scale", train.scale, "softmax scale s")
      ->capture_default_str();
  train_cmd->add_option("--lr", train.learning_rate)->capture_default_str();
  train_cmd->add_option("--momentum", train.momentum)->capture_default_str();
  train_cmd->add_option("--batch", train.batch_size)->capture_default_str();
  train_cmd->add_option("--epochs", train.epochs)->capture_default_str();
  train_cmd->add_option("--seed", train.seed)->capture_default_str();
  train_cmd->callback([&] {
    action = [&] { return run_train(manifest, domain, models, train); };
  });

  std::string out;
  auto* embed_cmd =
      app.add_subcommand("embed", "embed every item of one domain");
  embed_cmd->add_option("--manifest", manifest)->required();
  embed_cmd->add_option("--models", models)->required();
  embed_cmd->add_option("--domain", domain)->required();
  embed_cmd->add_option("--out", out, "feature file (default stdout)");
  embed_cmd->callback(
      [&] { action = [&] { return run_embed(manifest, models, domain, out); }; });

  std::string query_id;
  std::string target;
  std::size_t top_k = 10;
  bool refine = false;
  std::optional<double> lambda;
  auto* search_cmd =
      app.add_subcommand("search", "rank a target gallery for one item");
  search_cmd->add_option("--manifest", manifest)->required();
  search_cmd->add_option("--models", models)->required();
  search_cmd->add_option("--query", query_id, "query item id")->required();
  search_cmd->add_option("--target", target, "target domain set")->required();
  search_cmd->add_option("--k", top_k)->capture_default_str();
  search_cmd->add_flag("--refine", refine);
  search_cmd->add_option("--lambda", lambda);
  search_cmd->add_option("--out", out, "CSV output (default stdout)");
  search_cmd->callback([&] {
    action = [&] {
      return run_search(manifest, models, query_id, target, top_k, refine,
                        lambda, out);
    };
  });

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "real-valued retrieval metrics");
  add_eval_flags(eval_cmd, eval_args);
  eval_cmd->callback([&] { action = [&] { return run_eval(eval_args); }; });

  EvalArgs hash_args;
  oxds::HashOptions hash;
  std::string codes_out;
  auto* hash_cmd = app.add_subcommand("hash", "binary (ITQ) retrieval metrics");
  add_eval_flags(hash_cmd, hash_args);
  hash_cmd->add_option("--bits", hash.bits)->capture_default_str();
  hash_cmd->add_option("--iterations", hash.iterations)->capture_default_str();
  hash_cmd->add_option("--codes", codes_out,
                       "also write the target gallery codes here");
  hash_cmd->callback([&] {
    hash.seed = hash_args.seed;
    action = [&] { return run_hash(hash_args, hash, codes_out); };
  });

  oxds::FewShotOptions few;
  std::string few_mode = "w2v";
  auto* few_cmd = app.add_subcommand("fewshot", "unseen-class classification");
  few_cmd->add_option("--manifest", manifest)->required();
  few_cmd->add_option("--models", models)->required();
  few_cmd->add_option("--mode", few_mode, "w2v, n_shot_source or n_shot_target")
      ->capture_default_str();
  few_cmd->add_option("--source", few.source, "support domain (n_shot_source)");
  few_cmd->add_option("--target", few.target, "classified domain")->required();
  few_cmd->add_option("--shots", few.shots)->capture_default_str();
  few_cmd->add_option("--runs", few.runs)->capture_default_str();
  few_cmd->add_option("--lambda", few.lambda);
  few_cmd->add_option("--seed", few.seed)->capture_default_str();
  few_cmd->add_option("--out", out, "CSV output (default stdout)");
  few_cmd->callback([&] {
    action = [&] {
      few.mode = oxds::parse_few_shot_mode(few_mode);
      if (few.source.empty()) {
        if (few.mode == oxds::FewShotMode::kSourceShots) {
          throw oxds::Error(oxds::ErrorKind::kInvalidArgument,
                            "n_shot_source needs --source");
        }
        few.source = few.target;
      }
      return run_fewshot(manifest, models, few, out);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    return action();
  } catch (const oxds::Error& e) {
    fmt::print(std::cerr, "oxds: {}\n", e.what());
    return e.kind() == oxds::ErrorKind::kIoError ? kExitInternal
                                                 : kExitInvalid;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "oxds: internal error: {}\n", e.what());
    return kExitInternal;
  }
}

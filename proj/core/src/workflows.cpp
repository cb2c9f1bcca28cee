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

#include "oxds/workflows.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>

#include <fmt/format.h>

#include "oxds/error.hpp"
#include "text_util.hpp"

namespace oxds {

namespace {

std::seed_seq make_seed(std::uint64_t a, std::uint64_t b) {
  return std::seed_seq{static_cast<std::uint32_t>(a & 0xFFFFFFFFu),
                       static_cast<std::uint32_t>(a >> 32),
                       static_cast<std::uint32_t>(b & 0xFFFFFFFFu),
                       static_cast<std::uint32_t>(b >> 32)};
}

// Held-out ids of every seen (domain, category) group. Selection depends
// only on the seed and the group's own ids, so adding or removing other rows
// never moves it.
std::set<std::string> held_out_ids(const Dataset& ds) {
  std::set<std::string> out;
  if (ds.manifest.mode == SplitMode::kZeroShot) return out;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>>
      groups;
  for (const auto& item : ds.items) {
    if (ds.split.train.count(item.category) != 0) {
      groups[{item.domain, item.category}].push_back(item.item_id);
    }
  }
  for (auto& [key, ids] : groups) {
    const std::size_t n = ids.size();
    if (n < 2) continue;
    const auto take = std::clamp<std::size_t>(
        static_cast<std::size_t>(
            std::llround(ds.manifest.holdout * static_cast<double>(n))),
        1, n - 1);
    auto seq = make_seed(ds.manifest.seed,
                         detail::fnv1a(key.first + "/" + key.second));
    std::mt19937_64 rng(seq);
    std::shuffle(ids.begin(), ids.end(), rng);
    out.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

const DomainMapper& mapper_for(
    const std::map<std::string, DomainMapper>& mappers,
    const std::string& domain) {
  auto it = mappers.find(domain);
  if (it == mappers.end()) {
    throw Error(ErrorKind::kMissingMapper,
                "no mapper for domain '" + domain + "'");
  }
  return it->second;
}

std::map<std::string, std::vector<EmbeddedItem>> by_domain(
    std::vector<EmbeddedItem> items) {
  std::map<std::string, std::vector<EmbeddedItem>> out;
  for (auto& e : items) out[e.domain].push_back(std::move(e));
  return out;
}

struct QuerySpec {
  std::string id;
  std::string category;
  UnitVector vector;
  std::vector<std::string> exclude;
};

// Single source: one query per item. Several sources: anchored on the first
// domain, each anchor joined by one seeded same-category draw per other
// domain.
std::vector<QuerySpec> build_queries(
    const std::map<std::string, std::vector<EmbeddedItem>>& pool,
    const std::set<std::string>& sources, std::uint64_t seed) {
  auto items_of = [&pool](const std::string& d) -> const auto& {
    static const std::vector<EmbeddedItem> kEmpty;
    auto it = pool.find(d);
    return it == pool.end() ? kEmpty : it->second;
  };

  std::vector<QuerySpec> out;
  const std::string& anchor_domain = *sources.begin();
  std::vector<std::map<std::string, std::vector<const EmbeddedItem*>>> others;
  for (auto it = std::next(sources.begin()); it != sources.end(); ++it) {
    auto& by_cat = others.emplace_back();
    for (const auto& e : items_of(*it)) by_cat[e.category].push_back(&e);
  }
  auto seq = make_seed(seed, detail::fnv1a(join_domains(sources)));
  std::mt19937_64 rng(seq);

  for (const auto& anchor : items_of(anchor_domain)) {
    std::vector<const EmbeddedItem*> members{&anchor};
    bool complete = true;
    for (auto& by_cat : others) {
      auto it = by_cat.find(anchor.category);
      if (it == by_cat.end() || it->second.empty()) {
        complete = false;
        break;
      }
      std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
      members.push_back(it->second[pick(rng)]);
    }
    if (!complete) continue;

    QuerySpec spec{anchor.item_id, anchor.category, anchor.embedding, {}};
    std::vector<UnitVector> vectors;
    for (const auto* m : members) {
      vectors.push_back(m->embedding);
      spec.exclude.push_back(m->item_id);
      spec.exclude.insert(spec.exclude.end(), m->members.begin(),
                          m->members.end());
    }
    if (vectors.size() > 1) spec.vector = spherical_average(vectors);
    out.push_back(std::move(spec));
  }
  return out;
}

void check_domains(const Dataset& ds,
                   const std::vector<std::set<std::string>>& sets) {
  for (const auto& set : sets) {
    if (set.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "empty domain set");
    }
    for (const auto& d : set) {
      if (ds.manifest.features.count(d) == 0) {
        throw Error(ErrorKind::kMissingDomain,
                    "domain '" + d + "' is not in the manifest");
      }
    }
  }
}

using Ranker = std::function<RankedList(
    const UnitVector& query, const std::vector<std::string>& exclude)>;
// Called once per target gallery, which outlives the returned ranker.
using RankerFactory = std::function<Ranker(const GalleryIndex& gallery,
                                           const GalleryLabels& labels)>;

std::vector<MetricsReport> run_pairs(
    const Dataset& ds, const std::map<std::string, DomainMapper>& mappers,
    const EvalOptions& options, const RankerFactory& make_ranker) {
  if (options.sources.empty() || options.targets.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "need at least one source and one target domain set");
  }
  check_domains(ds, options.sources);
  check_domains(ds, options.targets);
  const double lambda = options.lambda.value_or(default_lambda(ds.split.mode));
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "lambda must lie in [0, 1]");
  }

  const Partition parts = partition(ds);
  std::set<std::string> source_domains;
  std::set<std::string> target_domains;
  for (const auto& s : options.sources) source_domains.insert(s.begin(), s.end());
  for (const auto& t : options.targets) target_domains.insert(t.begin(), t.end());
  auto select = [](const std::vector<const ItemRecord*>& items,
                   const std::set<std::string>& domains) {
    std::vector<const ItemRecord*> out;
    for (const auto* item : items) {
      if (domains.count(item->domain) != 0) out.push_back(item);
    }
    return out;
  };
  const auto query_pool =
      by_domain(embed_items(ds, select(parts.query, source_domains), mappers));
  const auto gallery_pool = by_domain(
      embed_items(ds, select(parts.gallery, target_domains), mappers));

  std::vector<MetricsReport> reports;
  for (const auto& targets : options.targets) {
    std::vector<GalleryEntry> entries;
    for (const auto& d : targets) {
      auto it = gallery_pool.find(d);
      if (it == gallery_pool.end()) continue;
      for (const auto& e : it->second) {
        entries.push_back(
            GalleryEntry{e.item_id, e.domain, e.category, e.embedding});
      }
    }
    if (entries.empty()) {
      throw Error(ErrorKind::kEmptyGallery,
                  "no gallery items in target '" + join_domains(targets) +
                      "'");
    }
    const GalleryIndex gallery = GalleryIndex::build(std::move(entries));
    const GalleryLabels labels = GalleryLabels::from_index(gallery);
    const Ranker rank = make_ranker(gallery, labels);

    for (const auto& sources : options.sources) {
      const auto queries = build_queries(query_pool, sources, options.seed);
      std::vector<QueryResult> results;
      results.reserve(queries.size());
      for (const auto& q : queries) {
        const UnitVector query =
            options.refine ? refine_query(q.vector, gallery, lambda, q.exclude)
                           : q.vector;
        results.push_back(QueryResult{q.id, q.category,
                                      rank(query, q.exclude),
                                      q.exclude});
      }
      reports.push_back(evaluate(results, labels, options.metrics,
                                 join_domains(sources),
                                 join_domains(targets)));
    }
  }
  return reports;
}

}  // namespace

double default_lambda(SplitMode mode) {
  return mode == SplitMode::kManyShot ? kSeenLambda : kUnseenLambda;
}

Partition partition(const Dataset& dataset) {
  const auto held_out = held_out_ids(dataset);
  const auto& split = dataset.split;
  Partition p;
  for (const auto& item : dataset.items) {
    const bool seen = split.train.count(item.category) != 0;
    const bool unseen = split.test.count(item.category) != 0;
    const bool held = held_out.count(item.item_id) != 0;
    switch (dataset.manifest.mode) {
      case SplitMode::kZeroShot:
        if (seen) p.train.push_back(&item);
        if (unseen) {
          p.query.push_back(&item);
          p.gallery.push_back(&item);
        }
        break;
      case SplitMode::kManyShot:
        if (held) {
          p.query.push_back(&item);
          p.gallery.push_back(&item);
        } else {
          p.train.push_back(&item);
        }
        break;
      case SplitMode::kGeneralized:
        if (seen && !held) p.train.push_back(&item);
        if (unseen) p.query.push_back(&item);
        if (unseen || held) p.gallery.push_back(&item);
        break;
    }
  }
  return p;
}

std::filesystem::path model_path(const std::filesystem::path& models_dir,
                                 const std::string& domain) {
  return models_dir / (domain + ".map");
}

std::map<std::string, DomainMapper> load_models(
    const std::filesystem::path& models_dir,
    const std::set<std::string>& domains) {
  std::map<std::string, DomainMapper> out;
  for (const auto& d : domains) {
    const auto path = model_path(models_dir, d);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::kMissingModel,
                  "no model for domain '" + d + "' at " + path.string());
    }
    DomainMapper m = load_mapper(path);
    if (m.domain() != d) {
      throw Error(ErrorKind::kMissingModel,
                  path.string() + " holds a model for domain '" + m.domain() +
                      "'");
    }
    out.emplace(d, std::move(m));
  }
  return out;
}

TrainResult train_domain(const Dataset& dataset, const std::string& domain,
                         const TrainConfig& config,
                         const EpochCallback& on_epoch) {
  if (dataset.manifest.features.count(domain) == 0) {
    throw Error(ErrorKind::kMissingDomain,
                "domain '" + domain + "' is not in the manifest");
  }
  const Partition parts = partition(dataset);
  std::vector<const ItemRecord*> rows;
  for (const auto* item : parts.train) {
    if (item->domain == domain) rows.push_back(item);
  }
  if (rows.empty()) {
    throw Error(ErrorKind::kEmptyDataset,
                "no training samples for domain '" + domain + "'");
  }
  LabeledBatch batch;
  batch.features.resize(static_cast<Eigen::Index>(rows.size()),
                        rows.front()->feature.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]->feature.size() != batch.features.cols()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "feature widths differ within domain '" + domain + "'");
    }
    batch.features.row(static_cast<Eigen::Index>(i)) =
        rows[i]->feature.transpose();
    batch.categories.push_back(rows[i]->category);
  }
  const PrototypeBook seen = dataset.book.restricted_to(dataset.split.train);
  return train(domain, batch, seen, config, on_epoch);
}

std::vector<EmbeddedItem> embed_items(
    const Dataset& dataset, const std::vector<const ItemRecord*>& items,
    const std::map<std::string, DomainMapper>& mappers) {
  std::vector<EmbeddedItem> out;
  std::map<std::string, std::vector<const ItemRecord*>> groups;
  std::set<std::string> ids;
  for (const auto* item : items) {
    ids.insert(item->item_id);
    auto g = dataset.group.find(item->item_id);
    if (g != dataset.group.end()) {
      groups[g->second].push_back(item);
      continue;
    }
    out.push_back(EmbeddedItem{item->item_id, item->domain, item->category,
                               mapper_for(mappers, item->domain)
                                   .forward(item->feature),
                               {}});
  }
  for (const auto& [name, views] : groups) {
    if (ids.count(name) != 0) {
      throw Error(ErrorKind::kInconsistentLabels,
                  "group name '" + name + "' collides with an item id");
    }
    std::vector<UnitVector> embedded;
    EmbeddedItem agg{name, views.front()->domain, views.front()->category,
                     mapper_for(mappers, views.front()->domain)
                         .forward(views.front()->feature),
                     {}};
    for (const auto* v : views) {
      if (v->domain != agg.domain || v->category != agg.category) {
        throw Error(ErrorKind::kInconsistentLabels,
                    "view group '" + name +
                        "' mixes domains or categories");
      }
      embedded.push_back(mapper_for(mappers, v->domain).forward(v->feature));
      agg.members.push_back(v->item_id);
    }
    agg.embedding = spherical_average(embedded);
    out.push_back(std::move(agg));
  }
  std::sort(out.begin(), out.end(),
            [](const EmbeddedItem& a, const EmbeddedItem& b) {
              return a.item_id < b.item_id;
            });
  return out;
}

std::vector<MetricsReport> evaluate_retrieval(
    const Dataset& dataset, const std::map<std::string, DomainMapper>& mappers,
    const EvalOptions& options) {
  return run_pairs(
      dataset, mappers, options,
      [](const GalleryIndex& gallery, const GalleryLabels&) -> Ranker {
        return [&gallery](const UnitVector& query,
                          const std::vector<std::string>& exclude) {
          return search(query, gallery, kAll, exclude);
        };
      });
}

BinaryEvaluation evaluate_binary(
    const Dataset& dataset, const std::map<std::string, DomainMapper>& mappers,
    const EvalOptions& options, const HashOptions& hash) {
  check_domains(dataset, options.sources);
  check_domains(dataset, options.targets);
  std::set<std::string> involved;
  for (const auto& s : options.sources) involved.insert(s.begin(), s.end());
  for (const auto& t : options.targets) involved.insert(t.begin(), t.end());

  const Partition parts = partition(dataset);
  std::vector<const ItemRecord*> train_rows;
  for (const auto* item : parts.train) {
    if (involved.count(item->domain) != 0) train_rows.push_back(item);
  }
  const auto embedded = embed_items(dataset, train_rows, mappers);
  if (embedded.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "no training embeddings for ITQ");
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(embedded.size()),
                       embedded.front().embedding.dim());
  for (std::size_t i = 0; i < embedded.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) =
        embedded[i].embedding.vec().transpose();
  }

  BinaryEvaluation out{{}, fit_itq(rows, hash.bits, hash.iterations, hash.seed)};
  const ItqModel& model = out.fit.model;

  out.reports = run_pairs(
      dataset, mappers, options,
      [&model](const GalleryIndex& gallery,
               const GalleryLabels& labels) -> Ranker {
        auto codes = std::make_shared<std::vector<BitCode>>();
        for (const auto& e : gallery.entries()) {
          codes->push_back(encode(model, e.embedding, e.item_id));
        }
        return [&model, &labels, codes](const UnitVector& query,
                                        const std::vector<std::string>& exclude) {
          return hamming_search(encode(model, query), *codes, kAll, exclude,
                                &labels);
        };
      });
  return out;
}

std::string_view few_shot_mode_name(FewShotMode mode) {
  switch (mode) {
    case FewShotMode::kWordVector: return "w2v";
    case FewShotMode::kSourceShots: return "n_shot_source";
    case FewShotMode::kTargetShots: return "n_shot_target";
  }
  return "w2v";
}

FewShotMode parse_few_shot_mode(std::string_view name) {
  if (name == "w2v") return FewShotMode::kWordVector;
  if (name == "n_shot_source") return FewShotMode::kSourceShots;
  if (name == "n_shot_target") return FewShotMode::kTargetShots;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown few-shot mode '" + std::string(name) + "'");
}

FewShotReport evaluate_few_shot(
    const Dataset& dataset, const std::map<std::string, DomainMapper>& mappers,
    const FewShotOptions& options) {
  // Word-vector classification has no support domain.
  for (const auto* d : {&options.source, &options.target}) {
    if (d == &options.source && options.mode == FewShotMode::kWordVector &&
        d->empty()) {
      continue;
    }
    if (dataset.manifest.features.count(*d) == 0) {
      throw Error(ErrorKind::kMissingDomain,
                  "domain '" + *d + "' is not in the manifest");
    }
  }
  if (options.mode != FewShotMode::kWordVector &&
      (options.shots == 0 || options.runs == 0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "shots and runs must be at least 1");
  }
  const double lambda = options.lambda.value_or(kUnseenLambda);
  const PrototypeBook unseen = dataset.book.restricted_to(dataset.split.test);

  const Partition parts = partition(dataset);
  auto unseen_items = [&](const std::string& domain) {
    std::vector<const ItemRecord*> out;
    for (const auto* item : parts.query) {
      if (item->domain == domain &&
          dataset.split.test.count(item->category) != 0) {
        out.push_back(item);
      }
    }
    return embed_items(dataset, out, mappers);
  };
  const auto targets = unseen_items(options.target);
  if (targets.empty()) {
    throw Error(ErrorKind::kEmptyDataset,
                "no unseen-category items in domain '" + options.target + "'");
  }

  auto score = [&](const PrototypeBook& book,
                   const std::set<std::string>& skip) {
    std::vector<std::pair<std::string, std::string>> predictions;
    for (const auto& t : targets) {
      if (skip.count(t.item_id) != 0) continue;
      predictions.emplace_back(classify(t.embedding, book), t.category);
    }
    return std::pair{accuracy(predictions), predictions.size()};
  };

  FewShotReport report;
  if (options.mode == FewShotMode::kWordVector) {
    const auto [acc, n] = score(unseen, {});
    report.run_accuracy.push_back(acc);
    report.evaluated = n;
    report.mean_accuracy = acc;
    return report;
  }

  const std::string& support_domain = options.mode == FewShotMode::kSourceShots
                                          ? options.source
                                          : options.target;
  const auto support_pool = options.mode == FewShotMode::kSourceShots
                                ? unseen_items(options.source)
                                : targets;
  std::map<std::string, std::vector<const EmbeddedItem*>> by_category;
  for (const auto& e : support_pool) by_category[e.category].push_back(&e);
  for (const auto& c : unseen.categories()) {
    if (by_category[c].size() < options.shots) {
      throw Error(ErrorKind::kInsufficientSupport,
                  fmt::format("category '{}' has {} candidates in domain "
                              "'{}', {} shots requested",
                              c, by_category[c].size(), support_domain,
                              options.shots));
    }
  }

  std::vector<double> accs;
  for (std::size_t run = 0; run < options.runs; ++run) {
    auto seq = make_seed(options.seed, run);
    std::mt19937_64 rng(seq);
    std::vector<std::pair<std::string, UnitVector>> replacements;
    std::set<std::string> used;
    for (const auto& c : unseen.categories()) {
      auto candidates = by_category[c];
      std::shuffle(candidates.begin(), candidates.end(), rng);
      std::vector<UnitVector> shots;
      for (std::size_t s = 0; s < options.shots; ++s) {
        shots.push_back(candidates[s]->embedding);
        used.insert(candidates[s]->item_id);
      }
      replacements.emplace_back(
          c, refine_support(exemplar_prototype(shots), c, unseen, lambda));
    }
    const PrototypeBook book = unseen.with_replacements(replacements);
    const auto [acc, n] = score(
        book, options.mode == FewShotMode::kTargetShots ? used
                                                        : std::set<std::string>{});
    accs.push_back(acc);
    report.evaluated = n;
  }
  report.run_accuracy = accs;
  std::sort(accs.begin(), accs.end());
  double sum = 0.0;
  for (double a : accs) sum += a;
  report.mean_accuracy = sum / static_cast<double>(accs.size());
  return report;
}

MetricsReport few_shot_metrics(const FewShotOptions& options,
                               const FewShotReport& report) {
  MetricsReport out;
  switch (options.mode) {
    case FewShotMode::kWordVector: out.source_domains = "w2v"; break;
    case FewShotMode::kSourceShots: out.source_domains = options.source; break;
    case FewShotMode::kTargetShots: out.source_domains = options.target; break;
  }
  out.target_domains = options.target;
  MetricValue v;
  v.metric = MetricRequest{MetricKind::kAccuracy,
                           options.mode == FewShotMode::kWordVector
                               ? kAll
                               : options.shots};
  v.value = report.mean_accuracy;
  v.queries = report.run_accuracy.size();
  out.values.push_back(v);
  return out;
}

std::set<std::string> parse_domain_set(std::string_view text) {
  std::set<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t plus = std::min(text.find('+', pos), text.size());
    const auto name = text.substr(pos, plus - pos);
    if (name.empty()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "empty domain name in '" + std::string(text) + "'");
    }
    out.emplace(name);
    pos = plus + 1;
  }
  if (out.count("*") != 0 && out.size() > 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "'*' cannot be combined with other domains");
  }
  return out;
}

std::vector<std::set<std::string>> expand_domain_sets(
    const std::vector<std::set<std::string>>& sets,
    const std::set<std::string>& available) {
  std::vector<std::set<std::string>> out;
  for (const auto& s : sets) {
    if (s.size() == 1 && *s.begin() == "*") {
      for (const auto& d : available) out.push_back({d});
    } else {
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace oxds

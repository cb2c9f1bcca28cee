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

#include "oxds/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "oxds/error.hpp"

namespace oxds {

namespace {

constexpr double kSeparation = 0.5;
constexpr std::size_t kRestarts = 200;
constexpr std::size_t kAttemptsPerPrototype = 10000;
// Best-of-restarts packings closer than this are rejected outright.
constexpr double kMinFeasibleSeparation = 0.1;

Eigen::VectorXd random_unit(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  do {
    for (Eigen::Index k = 0; k < dim; ++k) v[k] = normal(rng);
  } while (v.norm() < 1e-6);
  return v / v.norm();
}

double min_pairwise_distance(const std::vector<Eigen::VectorXd>& vs) {
  double best = 2.0;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      best = std::min(best, 1.0 - vs[i].dot(vs[j]));
    }
  }
  return best;
}

std::vector<Eigen::VectorXd> sample_prototypes(std::size_t count,
                                               Eigen::Index dim,
                                               std::mt19937_64& rng,
                                               double* separation) {
  if (static_cast<Eigen::Index>(2 * count) <= dim) {
    // Sequential rejection sampling with a hard separation threshold.
    for (std::size_t restart = 0; restart < kRestarts; ++restart) {
      std::vector<Eigen::VectorXd> out;
      bool stuck = false;
      while (out.size() < count && !stuck) {
        std::size_t attempt = 0;
        for (; attempt < kAttemptsPerPrototype; ++attempt) {
          Eigen::VectorXd cand = random_unit(dim, rng);
          const bool ok = std::all_of(
              out.begin(), out.end(), [&cand](const Eigen::VectorXd& p) {
                return 1.0 - cand.dot(p) >= kSeparation;
              });
          if (ok) {
            out.push_back(std::move(cand));
            break;
          }
        }
        stuck = attempt == kAttemptsPerPrototype;
      }
      if (!stuck) {
        *separation = min_pairwise_distance(out);
        return out;
      }
    }
    throw Error(ErrorKind::kInfeasibleSeparation,
                fmt::format("could not place {} prototypes in {} dimensions "
                            "at cosine distance {}",
                            count, dim, kSeparation));
  }

  std::vector<Eigen::VectorXd> best;
  double best_sep = -1.0;
  for (std::size_t restart = 0; restart < kRestarts; ++restart) {
    std::vector<Eigen::VectorXd> cand;
    cand.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
      cand.push_back(random_unit(dim, rng));
    }
    const double sep = min_pairwise_distance(cand);
    if (sep > best_sep) {
      best_sep = sep;
      best = std::move(cand);
    }
  }
  if (best_sep < kMinFeasibleSeparation) {
    throw Error(ErrorKind::kInfeasibleSeparation,
                fmt::format("best of {} packings of {} prototypes in {} "
                            "dimensions only reaches cosine distance {:.4f}",
                            kRestarts, count, dim, best_sep));
  }
  *separation = best_sep;
  return best;
}

Eigen::MatrixXd orthonormal_columns(Eigen::Index rows, Eigen::Index cols,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

Eigen::MatrixXd domain_transform(const SynthConfig& cfg,
                                 std::mt19937_64& rng) {
  const Eigen::Index d = cfg.embed_dim;
  const Eigen::MatrixXd u = orthonormal_columns(cfg.feature_dim, d, rng);
  const Eigen::MatrixXd v = orthonormal_columns(d, d, rng);
  Eigen::VectorXd sv(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    sv[k] = d == 1 ? 1.0
                   : 1.0 + (cfg.kappa - 1.0) * static_cast<double>(k) /
                               static_cast<double>(d - 1);
  }
  return u * sv.asDiagonal() * v.transpose();
}

std::size_t digits(std::size_t n) {
  std::size_t out = 1;
  while (n >= 10) {
    n /= 10;
    ++out;
  }
  return out;
}

}  // namespace

double SynthConfig::sigma_of(std::size_t domain) const {
  return domain < domain_sigma.size() ? domain_sigma[domain] : sigma;
}

void SynthConfig::validate() const {
  if (categories < 2) {
    throw Error(ErrorKind::kInvalidArgument, "need at least 2 categories");
  }
  if (domains < 2) {
    throw Error(ErrorKind::kInvalidArgument, "need at least 2 domains");
  }
  if (per_class < 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "need at least 1 sample per category and domain");
  }
  if (embed_dim < 2 || feature_dim < embed_dim) {
    throw Error(ErrorKind::kInvalidArgument,
                "need embed_dim >= 2 and feature_dim >= embed_dim");
  }
  if (!(kappa >= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "kappa must be >= 1");
  }
  if (domain_sigma.size() > domains) {
    throw Error(ErrorKind::kInvalidArgument,
                "more per-domain noise levels than domains");
  }
  for (std::size_t d = 0; d < domains; ++d) {
    if (!(sigma_of(d) >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "noise must be >= 0");
    }
  }
  if (!(zero_shot_frac >= 0.0 && zero_shot_frac < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "zero-shot fraction must lie in [0, 1)");
  }
}

std::string synth_domain_name(std::size_t index) {
  return fmt::format("d{}", index);
}

std::string synth_category_name(std::size_t index, std::size_t count) {
  return fmt::format("c{:0{}}", index, std::max<std::size_t>(2, digits(count)));
}

SynthDataset generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);

  double separation = 0.0;
  const auto protos =
      sample_prototypes(config.categories, config.embed_dim, rng, &separation);
  std::vector<std::pair<std::string, UnitVector>> entries;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < config.categories; ++c) {
    names.push_back(synth_category_name(c, config.categories));
    entries.emplace_back(names.back(), normalize(protos[c]));
  }

  CategorySplit split;
  std::size_t unseen = 0;
  if (config.zero_shot_frac > 0.0) {
    unseen = static_cast<std::size_t>(
        std::llround(config.zero_shot_frac *
                     static_cast<double>(config.categories)));
    unseen = std::clamp<std::size_t>(unseen, 1, config.categories - 1);
  }
  std::vector<std::size_t> order(config.categories);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < unseen ? split.test : split.train).insert(names[order[i]]);
  }
  if (unseen == 0) {
    split.mode = SplitMode::kManyShot;
    split.test = split.train;
  } else {
    split.mode = SplitMode::kZeroShot;
  }

  SynthDataset out{config,
                   PrototypeBook::from_entries(std::move(entries)),
                   std::move(split),
                   {},
                   {},
                   {},
                   separation};

  const std::size_t id_width = std::max<std::size_t>(4, digits(config.per_class));
  for (std::size_t d = 0; d < config.domains; ++d) {
    const std::string domain = synth_domain_name(d);
    out.domains.push_back(domain);
    // Independent stream per domain: adding domains never perturbs others.
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xFFFFFFFFu),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(d + 1)};
    std::mt19937_64 drng(seq);
    const Eigen::MatrixXd transform = domain_transform(config, drng);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double sigma = config.sigma_of(d);
    for (std::size_t c = 0; c < config.categories; ++c) {
      const Eigen::VectorXd& proto = out.book.prototype(c).vec();
      for (std::size_t n = 0; n < config.per_class; ++n) {
        Eigen::VectorXd z = proto;
        for (Eigen::Index k = 0; k < z.size(); ++k) {
          z[k] += sigma * noise(drng);
        }
        Eigen::VectorXd x = transform * z;
        if (config.nonlinear) x = x.array().tanh();
        out.items.push_back(ItemRecord{
            fmt::format("{}_{}_{:0{}}", domain, out.book.categories()[c], n,
                        id_width),
            domain, out.book.categories()[c], std::move(x)});
      }
    }
    out.transforms.emplace(domain, transform);
  }
  return out;
}

std::filesystem::path write_synth(const SynthDataset& data,
                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  manifest.mode = data.split.mode;
  manifest.prototypes = "prototypes.txt";
  manifest.labels = "labels.txt";
  manifest.split = "split.txt";
  manifest.seed = data.config.seed;

  save_prototypes(data.book, dir / manifest.prototypes);
  save_split(data.split, dir / manifest.split);

  std::vector<LabelRecord> labels;
  labels.reserve(data.items.size());
  for (const auto& domain : data.domains) {
    FeatureTable table;
    std::vector<const ItemRecord*> rows;
    for (const auto& item : data.items) {
      if (item.domain == domain) rows.push_back(&item);
    }
    table.rows.resize(static_cast<Eigen::Index>(rows.size()),
                      data.config.feature_dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      table.ids.push_back(rows[i]->item_id);
      table.rows.row(static_cast<Eigen::Index>(i)) =
          rows[i]->feature.transpose();
      labels.push_back(LabelRecord{rows[i]->item_id, domain,
                                   rows[i]->category, ""});
    }
    const std::filesystem::path file = "features_" + domain + ".txt";
    save_features(table, dir / file);
    manifest.features[domain] = file;
  }
  save_labels(labels, dir / manifest.labels);
  const auto manifest_path = dir / "manifest.txt";
  save_manifest(manifest, manifest_path);
  return manifest_path;
}

}  // namespace oxds

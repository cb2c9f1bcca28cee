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

#include <cmath>
#include <random>

#include <doctest.h>

#include "oxds/error.hpp"
#include "oxds/search.hpp"
#include "oxds/synth.hpp"
#include "oxds/workflows.hpp"
#include "support/oracles.hpp"
#include "support/pipeline.hpp"

using oxds::ErrorKind;
using oxds::GalleryEntry;
using oxds::GalleryIndex;
using oxds::UnitVector;

namespace {

UnitVector unit(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return oxds::normalize(v);
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const oxds::Error& e) {
    return e.kind();
  }
  FAIL("expected oxds::Error");
  return ErrorKind::kInvalidArgument;
}

GalleryIndex random_gallery(std::size_t n, Eigen::Index dim, std::mt19937_64& rng,
                            bool with_duplicates) {
  std::vector<GalleryEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    auto e = oxds::normalize(oxds::testing::random_gaussian(dim, rng));
    if (with_duplicates && i % 3 == 2) e = entries[i - 1].embedding;
    entries.push_back(GalleryEntry{"g" + std::to_string(rng() % 100000) + "_" +
                                       std::to_string(i),
                                   i % 2 ? "a" : "b", "c" + std::to_string(i % 4),
                                   e});
  }
  return GalleryIndex::build(std::move(entries));
}

oxds::DomainMapper identity_mapper(Eigen::Index dim, const std::string& name) {
  return oxds::DomainMapper(name, Eigen::MatrixXd::Identity(dim, dim),
                            Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Zero(dim),
                            Eigen::VectorXd::Ones(dim));
}

}  // namespace

TEST_CASE("three-point gallery ranks by dot product") {
  auto index = GalleryIndex::build({{"x", "d", "a", unit({1, 0})},
                                    {"y", "d", "b", unit({0, 1})},
                                    {"z", "d", "c", unit({-1, 0})}});
  const auto r = oxds::search(unit({1, 0}), index);
  REQUIRE(r.size() == 3);
  CHECK(r[0].item_id == "x");
  CHECK(r[1].item_id == "y");
  CHECK(r[2].item_id == "z");
  CHECK(r[0].score == 1.0);
  CHECK(r[2].score == -1.0);
}

TEST_CASE("search agrees with brute force, ties included") {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 50; ++t) {
    const auto index = random_gallery(40, 5, rng, true);
    const auto q = oxds::normalize(oxds::testing::random_gaussian(5, rng));
    const auto oracle = oxds::testing::brute_force_search(q.vec(), index);
    const auto all = oxds::search(q, index);
    REQUIRE(all.size() == oracle.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(all[i].item_id == oracle[i].item_id);
      CHECK(all[i].score == oracle[i].score);
    }
    const auto top = oxds::search(q, index, 7);
    REQUIRE(top.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(top[i].item_id == oracle[i].item_id);
  }
}

TEST_CASE("self query ranks first and exclusion removes it") {
  std::mt19937_64 rng(47);
  const auto index = random_gallery(30, 4, rng, false);
  const auto& g = index.entry(11);
  CHECK(oxds::search(g.embedding, index)[0].item_id == g.item_id);
  const std::vector<std::string> skip{g.item_id};
  const auto r = oxds::search(g.embedding, index, oxds::kAll, skip);
  CHECK(r.size() == index.size() - 1);
  for (const auto& item : r) CHECK(item.item_id != g.item_id);
}

TEST_CASE("ranking is invariant to positive query scaling") {
  std::mt19937_64 rng(53);
  const auto index = random_gallery(60, 6, rng, true);
  const auto q = oxds::normalize(oxds::testing::random_gaussian(6, rng));
  const auto ref = oxds::search(q, index);
  for (double alpha : {1e-3, 0.5, 7.0, 1e4}) {
    const Eigen::VectorXd scaled = alpha * q.vec();
    const auto r = oxds::search_direction(
        std::span<const double>(scaled.data(), static_cast<std::size_t>(scaled.size())),
        index);
    REQUIRE(r.size() == ref.size());
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i].item_id == ref[i].item_id);
  }
}

TEST_CASE("gallery construction errors") {
  CHECK(kind_of([] { GalleryIndex::build({}); }) == ErrorKind::kEmptyGallery);
  CHECK(kind_of([] {
          GalleryIndex::build({{"x", "d", "a", unit({1, 0})},
                               {"x", "d", "a", unit({0, 1})}});
        }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([] {
          GalleryIndex::build({{"x", "d", "a", unit({1, 0})},
                               {"y", "d", "a", unit({0, 1, 0})}});
        }) == ErrorKind::kDimensionMismatch);
}

TEST_CASE("embed_gallery filters by domain") {
  std::map<std::string, oxds::DomainMapper> mappers{
      {"sketch", identity_mapper(2, "sketch")}, {"photo", identity_mapper(2, "photo")}};
  const std::vector<oxds::ItemRecord> items{
      {"s1", "sketch", "cat", Eigen::Vector2d(1, 0)},
      {"p1", "photo", "cat", Eigen::Vector2d(0, 2)},
      {"p2", "photo", "dog", Eigen::Vector2d(3, 4)}};
  const auto both = oxds::embed_gallery(mappers, items, {"sketch", "photo"});
  CHECK(both.size() == 3);
  CHECK(both.domains() == std::set<std::string>{"photo", "sketch"});
  CHECK(both.count("cat") == 2);
  CHECK(both.count("cat", "photo") == 1);
  const auto sketch = oxds::embed_gallery(mappers, items, {"sketch"});
  CHECK(sketch.size() == 1);
  CHECK(sketch.entry(0).item_id == "s1");
  CHECK(kind_of([&] { oxds::embed_gallery(mappers, items, {}); }) ==
        ErrorKind::kEmptyGallery);
  CHECK(kind_of([&] { oxds::embed_gallery({}, items, {"sketch"}); }) ==
        ErrorKind::kMissingMapper);
}

TEST_CASE("build_query with one and with duplicate sources") {
  const auto m = identity_mapper(2, "d");
  const std::vector<oxds::QuerySource> one{{&m, Eigen::Vector2d(3, 4)}};
  CHECK(oxds::build_query(one) == m.forward(Eigen::VectorXd(Eigen::Vector2d(3, 4))));
  const std::vector<oxds::QuerySource> dup{{&m, Eigen::Vector2d(3, 4)},
                                           {&m, Eigen::Vector2d(6, 8)}};
  CHECK((oxds::build_query(dup).vec() - Eigen::Vector2d(0.6, 0.8)).norm() <= 1e-12);
  CHECK(kind_of([] { oxds::build_query({}); }) == ErrorKind::kEmptyInput);
}

TEST_CASE("a two-source query sits closer to the prototype than the worse source") {
  auto cfg = oxds::testing::reference_synth_config();
  cfg.domain_sigma = {0.5, 0.05, 0.05};
  const auto ds = oxds::testing::to_dataset(oxds::generate(cfg));
  const auto mappers = oxds::testing::train_all(ds, oxds::testing::reference_train_config());
  const auto parts = oxds::partition(ds);
  std::map<std::string, std::vector<const oxds::ItemRecord*>> sketches, photos;
  for (const auto* item : parts.query) {
    if (item->domain == "d0") sketches[item->category].push_back(item);
    if (item->domain == "d1") photos[item->category].push_back(item);
  }
  std::size_t pairs = 0;
  for (const auto& [category, list] : sketches) {
    const auto& proto = ds.book.at(category);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto* sk = list[i];
      const auto* ph = photos.at(category)[i % photos.at(category).size()];
      const std::vector<oxds::QuerySource> src{{&mappers.at("d0"), sk->feature},
                                               {&mappers.at("d1"), ph->feature}};
      const double pair_d = oxds::cosine_distance(oxds::build_query(src), proto);
      const double worst = std::max(
          oxds::cosine_distance(mappers.at("d0").forward(sk->feature), proto),
          oxds::cosine_distance(mappers.at("d1").forward(ph->feature), proto));
      CHECK(pair_d < worst);
      ++pairs;
    }
  }
  CHECK(pairs == 200);
}

TEST_CASE("refine_query endpoints and fixed point") {
  std::mt19937_64 rng(59);
  const auto index = random_gallery(25, 4, rng, false);
  const auto q = oxds::normalize(oxds::testing::random_gaussian(4, rng));
  CHECK(oxds::refine_query(q, index, 0.0) == q);
  const auto& g = index.entry(3).embedding;
  for (double lambda : {0.3, 0.7, 1.0}) {
    CHECK((oxds::refine_query(g, index, lambda).vec() - g.vec()).norm() <= 1e-12);
  }
  // Excluding the query's own record moves it towards its nearest other item.
  const std::vector<std::string> skip{index.entry(3).item_id};
  const auto moved = oxds::refine_query(g, index, 1.0, skip);
  const auto nearest = oxds::search(g, index, 1, skip).at(0).item_id;
  for (const auto& e : index.entries()) {
    if (e.item_id == nearest) CHECK(moved == e.embedding);
  }
  CHECK(moved != g);
}

TEST_CASE("classify: exact hits, singleton and lexicographic ties") {
  auto book = oxds::PrototypeBook::from_entries(
      {{"bee", unit({0, 1})}, {"ant", unit({1, 0})}, {"cow", unit({-1, 0})}});
  CHECK(oxds::classify(unit({0, 1}), book) == "bee");
  CHECK(oxds::classify(unit({-1, 0.01}), book) == "cow");
  CHECK(oxds::classify(unit({1, 1}), book) == "ant");
  auto single = oxds::PrototypeBook::from_entries({{"solo", unit({1, 0})}});
  CHECK(oxds::classify(unit({-1, 0}), single) == "solo");
}

TEST_CASE("argmax posterior equals the nearest prototype") {
  std::mt19937_64 rng(61);
  std::vector<std::pair<std::string, UnitVector>> entries;
  for (int c = 0; c < 12; ++c) {
    entries.emplace_back("k" + std::to_string(c),
                         oxds::normalize(oxds::testing::random_gaussian(6, rng)));
  }
  const auto book = oxds::PrototypeBook::from_entries(std::move(entries));
  for (int t = 0; t < 500; ++t) {
    const auto q = oxds::normalize(oxds::testing::random_gaussian(6, rng));
    const auto p = oxds::posterior_from_embedding(q, book, 20);
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    CHECK(book.categories()[static_cast<std::size_t>(best)] == oxds::classify(q, book));
  }
}

TEST_CASE("prototype gallery holds one entry per category") {
  auto book = oxds::PrototypeBook::from_entries(
      {{"bee", unit({0, 1})}, {"ant", unit({1, 0})}});
  const auto g = oxds::prototype_gallery(book);
  CHECK(g.size() == 2);
  CHECK(g.entry(0).item_id == "ant");
  CHECK(g.entry(0).domain == "prototype");
}

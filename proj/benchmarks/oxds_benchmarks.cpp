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

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "oxds/hypersphere.hpp"
#include "oxds/itq.hpp"
#include "oxds/mapper.hpp"
#include "oxds/search.hpp"

namespace {

Eigen::VectorXd gaussian(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = n(rng);
  return v;
}

oxds::GalleryIndex make_gallery(std::size_t n, Eigen::Index dim) {
  std::mt19937_64 rng(1);
  std::vector<oxds::GalleryEntry> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    entries.push_back({"g" + std::to_string(i), "d", "c" + std::to_string(i % 50),
                       oxds::normalize(gaussian(dim, rng))});
  }
  return oxds::GalleryIndex::build(std::move(entries));
}

void BM_ExactSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto index = make_gallery(n, 64);
  std::mt19937_64 rng(2);
  const auto q = oxds::normalize(gaussian(64, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(oxds::search(q, index, 100));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_ExactSearch)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_Slerp(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto u = oxds::normalize(gaussian(300, rng));
  const auto v = oxds::normalize(gaussian(300, rng));
  for (auto _ : state) benchmark::DoNotOptimize(oxds::slerp(u, v, 0.4));
}
BENCHMARK(BM_Slerp);

void BM_BatchGradient(benchmark::State& state) {
  const auto batch_size = state.range(0);
  std::mt19937_64 rng(4);
  std::vector<std::pair<std::string, oxds::UnitVector>> protos;
  for (int c = 0; c < 100; ++c) {
    protos.emplace_back("c" + std::to_string(c), oxds::normalize(gaussian(64, rng)));
  }
  const auto book = oxds::PrototypeBook::from_entries(std::move(protos));
  oxds::LabeledBatch batch;
  batch.features.resize(batch_size, 256);
  for (Eigen::Index i = 0; i < batch_size; ++i) {
    batch.features.row(i) = gaussian(256, rng).transpose();
    batch.categories.push_back(book.categories()[static_cast<std::size_t>(i % 100)]);
  }
  const auto [mean, scale] = oxds::fit_standardization(batch.features);
  const auto mapper = oxds::DomainMapper::initialize("d", mean, scale, 64, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oxds::batch_gradient(mapper, batch, book, 20.0));
  }
  state.SetItemsProcessed(state.iterations() * batch_size);
}
BENCHMARK(BM_BatchGradient)->Arg(32)->Arg(128);

void BM_HammingSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  auto random_code = [&rng](std::string id) {
    oxds::BitCode c(std::move(id), 64);
    for (std::size_t b = 0; b < 64; ++b) c.set_bit(b, (rng() & 1) != 0);
    return c;
  };
  std::vector<oxds::BitCode> gallery;
  gallery.reserve(n);
  for (std::size_t i = 0; i < n; ++i) gallery.push_back(random_code("g" + std::to_string(i)));
  const auto q = random_code("q");
  for (auto _ : state) {
    benchmark::DoNotOptimize(oxds::hamming_search(q, gallery, 100));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_HammingSearch)->Arg(10000)->Arg(100000);

void BM_FitItq(benchmark::State& state) {
  std::mt19937_64 rng(6);
  Eigen::MatrixXd rows(5000, 128);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    rows.row(i) = oxds::normalize(gaussian(128, rng)).vec().transpose();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(oxds::fit_itq(rows, 64, 50, 1));
  }
}
BENCHMARK(BM_FitItq)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

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
#include <map>
#include <random>
#include <span>
#include <sstream>

#include <doctest.h>

#include "oxds/error.hpp"
#include "oxds/itq.hpp"
#include "oxds/synth.hpp"
#include "support/oracles.hpp"

using oxds::BitCode;
using oxds::ErrorKind;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const oxds::Error& e) {
    return e.kind();
  }
  FAIL("expected oxds::Error");
  return ErrorKind::kInvalidArgument;
}

BitCode code(const std::string& id, const std::string& bits) {
  BitCode c(id, bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) c.set_bit(i, bits[i] == '1');
  return c;
}

// Ideal embeddings of a synthetic set: the generator's own inverse maps.
Eigen::MatrixXd synthetic_embeddings(Eigen::Index dim, std::uint64_t seed) {
  oxds::SynthConfig cfg;
  cfg.categories = 30;
  cfg.domains = 2;
  cfg.embed_dim = dim;
  cfg.feature_dim = dim;
  cfg.per_class = 10;
  cfg.sigma = 0.1;
  cfg.seed = seed;
  const auto data = oxds::generate(cfg);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(data.items.size()), dim);
  std::map<std::string, Eigen::MatrixXd> inverse;
  for (const auto& [d, m] : data.transforms) {
    inverse[d] = m.completeOrthogonalDecomposition().pseudoInverse();
  }
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    const Eigen::VectorXd z = inverse.at(data.items[i].domain) * data.items[i].feature;
    rows.row(static_cast<Eigen::Index>(i)) = z.normalized().transpose();
  }
  return rows;
}

void check_fit_invariants(const oxds::ItqFit& fit, std::size_t iterations) {
  const auto& m = fit.model;
  const auto b = static_cast<Eigen::Index>(m.bits());
  CHECK((m.rotation.transpose() * m.rotation - Eigen::MatrixXd::Identity(b, b)).norm() <= 1e-8);
  CHECK((m.projection * m.projection.transpose() - Eigen::MatrixXd::Identity(b, b)).norm() <= 1e-8);
  REQUIRE(fit.objective.size() == iterations + 1);
  REQUIRE(fit.orthogonality_error.size() == iterations);
  for (double e : fit.orthogonality_error) CHECK(e <= 1e-8);
  for (std::size_t i = 1; i < fit.objective.size(); ++i) {
    CHECK(fit.objective[i] <= fit.objective[i - 1] + 1e-10);
  }
}

}  // namespace

TEST_CASE("64-bit ITQ on synthetic embeddings keeps its invariants") {
  const auto rows = synthetic_embeddings(128, 3);
  const auto fit = oxds::fit_itq(rows, 64, 50, 11);
  CHECK(fit.model.bits() == 64);
  CHECK(fit.model.dim() == 128);
  check_fit_invariants(fit, 50);
  CHECK(fit.objective.back() < fit.objective.front());
}

TEST_CASE("hypercube corners quantize with near-zero loss") {
  // Every row is a +-1 corner along 4 orthogonal (rotated) axes.
  std::mt19937_64 rng(83);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(
      Eigen::MatrixXd::NullaryExpr(6, 6, [&] { return oxds::testing::random_gaussian(1, rng)[0]; }));
  const Eigen::MatrixXd axes = qr.householderQ() * Eigen::MatrixXd::Identity(6, 4);
  Eigen::MatrixXd rows(16 * 8, 6);
  for (int r = 0; r < 16 * 8; ++r) {
    Eigen::VectorXd corner(4);
    for (int k = 0; k < 4; ++k) corner[k] = ((r % 16) >> k) & 1 ? 1.0 : -1.0;
    rows.row(r) = (axes * corner).transpose();
  }
  const auto fit = oxds::fit_itq(rows, 4, 50, 5);
  check_fit_invariants(fit, 50);
  CHECK(fit.objective.back() <= 1e-12 * static_cast<double>(rows.rows()));
}

TEST_CASE("fit_itq argument checks") {
  const Eigen::MatrixXd rows = synthetic_embeddings(16, 1);
  CHECK(kind_of([&] { oxds::fit_itq(rows, 0, 5, 1); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([&] { oxds::fit_itq(rows, 17, 5, 1); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([&] { oxds::fit_itq(rows.topRows(8), 8, 5, 1); }) ==
        ErrorKind::kTooFewSamples);
  Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(40, 4);
  flat.col(0).setLinSpaced(40, -1, 1);
  CHECK(kind_of([&] { oxds::fit_itq(flat, 2, 5, 1); }) == ErrorKind::kRankDeficient);
}

TEST_CASE("encoding is deterministic and stable below the activation margin") {
  const auto rows = synthetic_embeddings(16, 2);
  const auto fit = oxds::fit_itq(rows, 12, 20, 3);
  const auto& m = fit.model;
  std::mt19937_64 rng(89);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd e = rows.row(t).transpose();
    const auto a = oxds::encode(m, std::span<const double>(e.data(), 16), "x");
    CHECK(a == oxds::encode(m, std::span<const double>(e.data(), 16), "x"));
    CHECK(oxds::hamming_distance(a, oxds::encode(m, std::span<const double>(e.data(), 16))) == 0);
    const Eigen::VectorXd act =
        m.rotation.transpose() * (m.projection * (e - m.mean));
    const double margin = act.cwiseAbs().minCoeff();
    Eigen::VectorXd delta = oxds::testing::random_gaussian(16, rng);
    delta *= 0.5 * margin / delta.norm();
    const Eigen::VectorXd moved = e + delta;
    CHECK(oxds::encode(m, std::span<const double>(moved.data(), 16), "x") == a);
  }
}

TEST_CASE("hamming distance by hand and against popcount") {
  CHECK(oxds::hamming_distance(code("a", "1010"), code("b", "1001")) == 2);
  CHECK(kind_of([] { oxds::hamming_distance(code("a", "10"), code("b", "100")); }) ==
        ErrorKind::kWidthMismatch);
  const auto q = code("q", "110011");
  const std::vector<BitCode> gallery{code("z", "000000"), q, code("m", "110010")};
  const auto r = oxds::hamming_search(q, gallery);
  CHECK(r[0].item_id == "q");
  CHECK(r[0].score == 6.0);
  CHECK(r[1].item_id == "m");
}

TEST_CASE("hamming search matches the brute-force popcount oracle") {
  std::mt19937_64 rng(97);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t bits = 1 + rng() % 70;
    const std::size_t n = 1 + rng() % 40;
    auto random_code = [&](const std::string& id) {
      BitCode c(id, bits);
      for (std::size_t i = 0; i < bits; ++i) c.set_bit(i, (rng() & 1) != 0);
      return c;
    };
    std::vector<BitCode> gallery;
    for (std::size_t i = 0; i < n; ++i) {
      gallery.push_back(random_code("id" + std::to_string(rng() % 1000) + "_" + std::to_string(i)));
    }
    const auto q = random_code("q");
    const auto oracle = oxds::testing::brute_force_hamming(q, gallery);
    const auto got = oxds::hamming_search(q, gallery);
    REQUIRE(got.size() == oracle.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].item_id == oracle[i].second);
      CHECK(got[i].score == static_cast<double>(bits - oracle[i].first));
    }
  }
}

TEST_CASE("code files: exact byte layout and round trip") {
  std::vector<BitCode> codes{code("ab", "1000000001"), code("c", "0111111111")};
  std::ostringstream out;
  oxds::write_codes(codes, out);
  const std::string bytes = out.str();
  const std::string expected =
      std::string("OXDSBITS") + std::string("\x01\x00\x00\x00", 4) +
      std::string("\x0a\x00\x00\x00", 4) +
      std::string("\x02\x00\x00\x00\x00\x00\x00\x00", 8) +
      std::string("\x02\x00", 2) + "ab" + std::string("\x01\x02", 2) +
      std::string("\x01\x00", 2) + "c" + std::string("\xfe\x03", 2);
  CHECK(bytes == expected);
  std::istringstream in(bytes);
  CHECK(oxds::read_codes(in, "mem") == codes);

  std::istringstream bad_magic("OXDSBITZ");
  CHECK(kind_of([&] { oxds::read_codes(bad_magic, "m"); }) == ErrorKind::kParseError);
  std::string padded = expected;
  padded[padded.size() - 1] = '\x07';  // bit 10 set beyond B = 10
  std::istringstream pad(padded);
  CHECK(kind_of([&] { oxds::read_codes(pad, "m"); }) == ErrorKind::kParseError);
  std::istringstream cut(expected.substr(0, expected.size() - 1));
  CHECK(kind_of([&] { oxds::read_codes(cut, "m"); }) == ErrorKind::kParseError);
}

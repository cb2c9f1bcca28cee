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

#include "oxds/itq.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "oxds/error.hpp"
#include "text_util.hpp"

namespace oxds {

namespace {

constexpr char kMagic[8] = {'O', 'X', 'D', 'S', 'B', 'I', 'T', 'S'};
constexpr std::uint32_t kCodeVersion = 1;
// Principal values below this fraction of the largest count as zero.
constexpr double kRankTolerance = 1e-10;

Eigen::MatrixXd signs(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

double orthogonality_error(const Eigen::MatrixXd& r) {
  return (r.transpose() * r -
          Eigen::MatrixXd::Identity(r.cols(), r.cols()))
      .norm();
}

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) &
                               0xFF);
  }
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in, const std::string& source) {
  std::array<unsigned char, sizeof(T)> buf{};
  if (!in.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
    throw Error(ErrorKind::kParseError, source + ": truncated code file");
  }
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(value);
}

}  // namespace

ItqFit fit_itq(const Eigen::MatrixXd& train, std::size_t bits,
               std::size_t iterations, std::uint64_t seed) {
  const auto b = static_cast<Eigen::Index>(bits);
  if (bits == 0 || b > train.cols()) {
    throw Error(ErrorKind::kInvalidArgument,
                fmt::format("cannot fit {} bits on {}-dimensional data", bits,
                            train.cols()));
  }
  if (train.rows() <= b) {
    throw Error(ErrorKind::kTooFewSamples,
                fmt::format("ITQ with {} bits needs more than {} samples, "
                            "got {}",
                            bits, bits, train.rows()));
  }
  if (!train.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "non-finite ITQ training data");
  }

  ItqFit fit;
  ItqModel& model = fit.model;
  model.mean = train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(train.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::kRankDeficient, "eigendecomposition failed");
  }
  // Eigenvalues come out ascending.
  const Eigen::Index d = cov.rows();
  const double largest = eig.eigenvalues()[d - 1];
  const double smallest_kept = eig.eigenvalues()[d - b];
  if (!(largest > 0.0) || smallest_kept <= kRankTolerance * largest) {
    throw Error(ErrorKind::kRankDeficient,
                fmt::format("fewer than {} nonzero principal values", bits));
  }
  model.projection.resize(b, d);
  for (Eigen::Index i = 0; i < b; ++i) {
    Eigen::VectorXd dir = eig.eigenvectors().col(d - 1 - i);
    // Canonical sign: the largest-magnitude component is positive.
    Eigen::Index arg = 0;
    dir.cwiseAbs().maxCoeff(&arg);
    if (dir[arg] < 0.0) dir = -dir;
    model.projection.row(i) = dir.transpose();
  }
  const Eigen::MatrixXd projected = centered * model.projection.transpose();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd gauss(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) gauss(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  model.rotation = qr.householderQ() * Eigen::MatrixXd::Identity(b, b);

  for (std::size_t it = 0;; ++it) {
    const Eigen::MatrixXd z = projected * model.rotation;
    const Eigen::MatrixXd codes = signs(z);
    fit.objective.push_back((codes - z).squaredNorm());
    if (it == iterations) break;
    // Procrustes: max tr(B^T V R) over orthogonal R. With B^T V = U S W^T
    // the optimum is R = W U^T.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        codes.transpose() * projected,
        Eigen::ComputeFullU | Eigen::ComputeFullV);
    model.rotation = svd.matrixV() * svd.matrixU().transpose();
    fit.orthogonality_error.push_back(orthogonality_error(model.rotation));
  }
  return fit;
}

BitCode::BitCode(std::string item_id, std::size_t bits)
    : item_id_(std::move(item_id)), bits_(bits), bytes_((bits + 7) / 8, 0) {}

BitCode::BitCode(std::string item_id, std::size_t bits,
                 std::vector<std::uint8_t> bytes)
    : item_id_(std::move(item_id)), bits_(bits), bytes_(std::move(bytes)) {
  if (bytes_.size() != (bits + 7) / 8) {
    throw Error(ErrorKind::kWidthMismatch,
                fmt::format("{} bytes cannot hold exactly {} bits",
                            bytes_.size(), bits));
  }
  if (bits % 8 != 0 && (bytes_.back() >> (bits % 8)) != 0) {
    throw Error(ErrorKind::kWidthMismatch, "padding bits must be zero");
  }
}

bool BitCode::bit(std::size_t i) const {
  return ((bytes_.at(i / 8) >> (i % 8)) & 1U) != 0;
}

void BitCode::set_bit(std::size_t i, bool value) {
  if (i >= bits_) {
    throw Error(ErrorKind::kWidthMismatch, "bit index out of range");
  }
  const auto mask = static_cast<std::uint8_t>(1U << (i % 8));
  if (value) {
    bytes_[i / 8] |= mask;
  } else {
    bytes_[i / 8] &= static_cast<std::uint8_t>(~mask);
  }
}

BitCode encode(const ItqModel& model, std::span<const double> x,
               std::string item_id) {
  if (static_cast<Eigen::Index>(x.size()) != model.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("cannot encode a {}-vector with a {}-dim model",
                            x.size(), model.dim()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(
      x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd z =
      model.rotation.transpose() * (model.projection * (v - model.mean));
  BitCode code(std::move(item_id), model.bits());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    code.set_bit(static_cast<std::size_t>(i), z[i] >= 0.0);
  }
  return code;
}

BitCode encode(const ItqModel& model, const UnitVector& e,
               std::string item_id) {
  return encode(model, e.values(), std::move(item_id));
}

std::size_t hamming_distance(const BitCode& a, const BitCode& b) {
  if (a.bits() != b.bits()) {
    throw Error(ErrorKind::kWidthMismatch,
                fmt::format("codes of {} and {} bits", a.bits(), b.bits()));
  }
  std::size_t dist = 0;
  for (std::size_t i = 0; i < a.bytes().size(); ++i) {
    dist += static_cast<std::size_t>(
        std::popcount(static_cast<std::uint8_t>(a.bytes()[i] ^ b.bytes()[i])));
  }
  return dist;
}

RankedList hamming_search(const BitCode& query,
                          std::span<const BitCode> gallery, std::size_t k,
                          std::span<const std::string> exclude,
                          const GalleryLabels* labels) {
  if (gallery.empty()) {
    throw Error(ErrorKind::kEmptyGallery, "hamming search over no codes");
  }
  if (k == 0) {
    throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  }
  std::vector<std::size_t> distance(gallery.size());
  std::vector<std::size_t> order;
  order.reserve(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (std::find(exclude.begin(), exclude.end(), gallery[i].item_id()) !=
        exclude.end()) {
      continue;
    }
    distance[i] = hamming_distance(query, gallery[i]);
    order.push_back(i);
  }
  auto before = [&](std::size_t a, std::size_t b) {
    if (distance[a] != distance[b]) return distance[a] < distance[b];
    return gallery[a].item_id() < gallery[b].item_id();
  };
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(),
                    order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), before);
  RankedList out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const BitCode& code = gallery[order[r]];
    RankedItem item;
    item.item_id = code.item_id();
    item.score = static_cast<double>(query.bits() - distance[order[r]]);
    if (labels != nullptr) {
      const auto& [domain, category] = labels->at(code.item_id());
      item.domain = domain;
      item.category = category;
    }
    out.push_back(std::move(item));
  }
  return out;
}

void write_codes(std::span<const BitCode> codes, std::ostream& out) {
  const std::uint32_t bits =
      codes.empty() ? 0 : static_cast<std::uint32_t>(codes.front().bits());
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCodeVersion);
  put_le<std::uint32_t>(out, bits);
  put_le<std::uint64_t>(out, codes.size());
  for (const auto& code : codes) {
    if (code.bits() != bits) {
      throw Error(ErrorKind::kWidthMismatch, "mixed code widths in one file");
    }
    if (code.item_id().size() > 0xFFFF) {
      throw Error(ErrorKind::kInvalidArgument, "item id too long");
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(code.item_id().size()));
    out.write(code.item_id().data(),
              static_cast<std::streamsize>(code.item_id().size()));
    out.write(reinterpret_cast<const char*>(code.bytes().data()),
              static_cast<std::streamsize>(code.bytes().size()));
  }
}

void save_codes(std::span<const BitCode> codes,
                const std::filesystem::path& path) {
  auto out = detail::open_output(path, std::ios::out | std::ios::binary);
  write_codes(codes, out);
  if (!out.flush()) {
    throw Error(ErrorKind::kIoError, "failed writing " + path.string());
  }
}

std::vector<BitCode> read_codes(std::istream& in, const std::string& source) {
  char magic[sizeof(kMagic)] = {};
  if (!in.read(magic, sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw Error(ErrorKind::kParseError, source + ": not an OXDSBITS file");
  }
  const auto version = get_le<std::uint32_t>(in, source);
  if (version != kCodeVersion) {
    throw Error(ErrorKind::kParseError,
                fmt::format("{}: unsupported code file version {}", source,
                            version));
  }
  const auto bits = get_le<std::uint32_t>(in, source);
  const auto count = get_le<std::uint64_t>(in, source);
  std::vector<BitCode> codes;
  for (std::uint64_t n = 0; n < count; ++n) {
    const auto id_len = get_le<std::uint16_t>(in, source);
    std::string id(id_len, '\0');
    std::vector<std::uint8_t> bytes((bits + 7) / 8);
    if (!in.read(id.data(), id_len) ||
        !in.read(reinterpret_cast<char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()))) {
      throw Error(ErrorKind::kParseError, source + ": truncated code file");
    }
    if (bits % 8 != 0 && (bytes.back() >> (bits % 8)) != 0) {
      throw Error(ErrorKind::kParseError,
                  source + ": nonzero padding bits in code '" + id + "'");
    }
    codes.emplace_back(std::move(id), bits, std::move(bytes));
  }
  return codes;
}

std::vector<BitCode> load_codes(const std::filesystem::path& path) {
  auto in = detail::open_input(path, std::ios::in | std::ios::binary);
  return read_codes(in, path.string());
}

}  // namespace oxds

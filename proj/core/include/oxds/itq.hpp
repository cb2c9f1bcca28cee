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

// Iterative quantization: PCA to B dimensions followed by an orthogonal
// rotation that minimizes ||sign(V R) - V R||_F^2, learned by alternating
// between the sign assignment and an orthogonal Procrustes update.

#ifndef OXDS_ITQ_HPP_
#define OXDS_ITQ_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oxds/hypersphere.hpp"
#include "oxds/metrics.hpp"
#include "oxds/search.hpp"

namespace oxds {

inline constexpr std::size_t kDefaultItqBits = 64;
inline constexpr std::size_t kDefaultItqIterations = 50;

struct ItqModel {
  Eigen::VectorXd mean;         // D
  Eigen::MatrixXd projection;   // B x D, orthonormal rows
  Eigen::MatrixXd rotation;     // B x B, orthogonal

  std::size_t bits() const noexcept {
    return static_cast<std::size_t>(rotation.rows());
  }
  Eigen::Index dim() const noexcept { return mean.size(); }
};

struct ItqFit {
  ItqModel model;
  // Quantization loss before the first update and after every iteration
  // (iterations + 1 values, non-increasing).
  std::vector<double> objective;
  // ||R^T R - I||_F after every rotation update.
  std::vector<double> orthogonality_error;
};

/// Rows of `train` are samples. Throws TooFewSamples (rows <= bits),
/// InvalidArgument (bits == 0 or bits > columns), RankDeficient.
ItqFit fit_itq(const Eigen::MatrixXd& train, std::size_t bits,
               std::size_t iterations, std::uint64_t seed);

/// Fixed-width binary code. Bit i lives in byte i / 8 at position i % 8.
class BitCode {
 public:
  BitCode() = default;
  BitCode(std::string item_id, std::size_t bits);
  BitCode(std::string item_id, std::size_t bits,
          std::vector<std::uint8_t> bytes);

  const std::string& item_id() const noexcept { return item_id_; }
  std::size_t bits() const noexcept { return bits_; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  bool bit(std::size_t i) const;
  void set_bit(std::size_t i, bool value);

  friend bool operator==(const BitCode&, const BitCode&) = default;

 private:
  std::string item_id_;
  std::size_t bits_ = 0;
  std::vector<std::uint8_t> bytes_;
};

/// bit_i = [((x - mean) P^T R)_i >= 0]. Throws DimensionMismatch.
BitCode encode(const ItqModel& model, std::span<const double> x,
               std::string item_id = {});
BitCode encode(const ItqModel& model, const UnitVector& e,
               std::string item_id = {});

/// Throws WidthMismatch.
std::size_t hamming_distance(const BitCode& a, const BitCode& b);

/// Ascending Hamming distance, ties by ascending item_id. Scores are
/// bits - distance so the list follows the RankedList contract. Domain and
/// category are filled from `labels` when given.
RankedList hamming_search(const BitCode& query,
                          std::span<const BitCode> gallery,
                          std::size_t k = kAll,
                          std::span<const std::string> exclude = {},
                          const GalleryLabels* labels = nullptr);

/// Binary code file: "OXDSBITS", u32 version (1), u32 bits, u64 count, then
/// per code a u16 id length, the id bytes and ceil(bits / 8) code bytes.
/// All integers little-endian.
void write_codes(std::span<const BitCode> codes, std::ostream& out);
void save_codes(std::span<const BitCode> codes,
                const std::filesystem::path& path);
std::vector<BitCode> read_codes(std::istream& in, const std::string& source);
std::vector<BitCode> load_codes(const std::filesystem::path& path);

}  // namespace oxds

#endif  // OXDS_ITQ_HPP_

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

// Per-domain mapping functions onto the prototype hypersphere.
//
// A mapper standardizes its raw input with statistics frozen from the
// training set, applies an affine map and projects onto the sphere:
//
//   f(x) = normalize(W ((x - mean) / scale) + b)
//
// Training minimizes the mean cross-entropy of the scaled-softmax posterior
//
//   p(y | x) = exp(-s c(f(x), proto(y))) / sum_y' exp(-s c(f(x), proto(y')))
//
// where c is the cosine distance. Prototypes are constants of the objective;
// only W and b move.

#ifndef OXDS_MAPPER_HPP_
#define OXDS_MAPPER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oxds/hypersphere.hpp"
#include "oxds/prototypes.hpp"

namespace oxds {

struct TrainConfig {
  double scale = 20.0;
  double learning_rate = 1e-4;
  // Nesterov momentum coefficient.
  double momentum = 0.9;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Rows of `features` are samples; `categories[i]` labels row i.
struct LabeledBatch {
  Eigen::MatrixXd features;
  std::vector<std::string> categories;

  std::size_t size() const noexcept { return categories.size(); }
  void validate() const;
};

class DomainMapper {
 public:
  /// Throws DimensionMismatch on inconsistent shapes and InvalidArgument on
  /// a non-positive input scale or a domain name containing whitespace.
  DomainMapper(std::string domain, Eigen::MatrixXd weight,
               Eigen::VectorXd bias, Eigen::VectorXd input_mean,
               Eigen::VectorXd input_scale);

  /// Glorot-uniform weights in [-a, a], a = sqrt(6 / (d_in + d_out)), zero
  /// bias.
  static DomainMapper initialize(std::string domain,
                                 Eigen::VectorXd input_mean,
                                 Eigen::VectorXd input_scale,
                                 Eigen::Index d_out, std::uint64_t seed);

  const std::string& domain() const noexcept { return domain_; }
  Eigen::Index d_in() const noexcept { return weight_.cols(); }
  Eigen::Index d_out() const noexcept { return weight_.rows(); }
  const Eigen::MatrixXd& weight() const noexcept { return weight_; }
  const Eigen::VectorXd& bias() const noexcept { return bias_; }
  const Eigen::VectorXd& input_mean() const noexcept { return input_mean_; }
  const Eigen::VectorXd& input_scale() const noexcept { return input_scale_; }

  /// Same input statistics, new affine parameters.
  DomainMapper with_parameters(Eigen::MatrixXd weight,
                               Eigen::VectorXd bias) const;

  /// Throws DimensionMismatch, InvalidArgument (non-finite input) and
  /// ZeroVector when the affine output vanishes.
  UnitVector forward(const Eigen::VectorXd& x) const;
  UnitVector forward(std::span<const double> x) const;

  /// Standardized inputs, one row per sample.
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& rows) const;

 private:
  std::string domain_;
  Eigen::MatrixXd weight_;
  Eigen::VectorXd bias_;
  Eigen::VectorXd input_mean_;
  Eigen::VectorXd input_scale_;
};

/// Per-component mean and standard deviation of the rows; components with
/// (near) zero spread get scale 1.
std::pair<Eigen::VectorXd, Eigen::VectorXd> fit_standardization(
    const Eigen::MatrixXd& rows);

/// Scaled-softmax posterior over the book's categories (book order) for an
/// already embedded sample.
Eigen::VectorXd posterior_from_embedding(const UnitVector& embedding,
                                         const PrototypeBook& book,
                                         double scale);

Eigen::VectorXd posterior(const DomainMapper& mapper, const Eigen::VectorXd& x,
                          const PrototypeBook& book, double scale);

/// Mean negative log-posterior of the true categories.
double batch_loss(const DomainMapper& mapper, const LabeledBatch& batch,
                  const PrototypeBook& book, double scale);

struct MapperGradient {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Exact gradient of batch_loss with respect to the weight and bias,
/// back-propagated through the softmax, the cosine distance and the output
/// normalization.
MapperGradient batch_gradient(const DomainMapper& mapper,
                              const LabeledBatch& batch,
                              const PrototypeBook& book, double scale);

struct TrainResult {
  DomainMapper mapper;
  double initial_loss = 0.0;
  // Full training-set loss after each epoch.
  std::vector<double> epoch_losses;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Trains a fresh mapper for one domain on `dataset`, whose categories must
/// all be in `book`. Input statistics come from `dataset` once, before the
/// first step. Mini-batches are drawn from a seeded shuffle each epoch; the
/// learning rate follows lr * (1 + cos(pi t / T)) / 2 over all T steps.
TrainResult train(const std::string& domain, const LabeledBatch& dataset,
                  const PrototypeBook& book, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// `OXDS-MAP 1 <domain> <D_in> <D_out>` text format, 17 significant digits.
void write_mapper(const DomainMapper& mapper, std::ostream& out);
void save_mapper(const DomainMapper& mapper, const std::filesystem::path& path);
DomainMapper read_mapper(std::istream& in, const std::string& source);
DomainMapper load_mapper(const std::filesystem::path& path);

}  // namespace oxds

#endif  // OXDS_MAPPER_HPP_

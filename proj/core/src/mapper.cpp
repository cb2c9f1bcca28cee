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

#include "oxds/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "oxds/error.hpp"
#include "text_util.hpp"

namespace oxds {

namespace {

constexpr double kMinInputScale = 1e-12;

// Label indices into the book, validating membership.
std::vector<Eigen::Index> label_indices(const LabeledBatch& batch,
                                        const PrototypeBook& book) {
  std::vector<Eigen::Index> out;
  out.reserve(batch.size());
  for (const auto& c : batch.categories) {
    const auto idx = book.index_of(c);
    if (!idx) {
      throw Error(ErrorKind::kUnknownCategory,
                  "training label '" + c + "' has no prototype");
    }
    out.push_back(static_cast<Eigen::Index>(*idx));
  }
  return out;
}

void check_book(const DomainMapper& mapper, const PrototypeBook& book) {
  if (book.dim() != mapper.d_out()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("mapper outputs {} dimensions, prototypes have {}",
                            mapper.d_out(), book.dim()));
  }
}

void check_scale(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorKind::kInvalidArgument,
                "softmax scale must be positive and finite");
  }
}

// Forward pass shared by loss and gradient.
struct BatchForward {
  Eigen::MatrixXd inputs;     // B x D_in, standardized
  Eigen::VectorXd norms;      // |h_n|
  Eigen::MatrixXd embedding;  // B x D_out, unit rows
  Eigen::MatrixXd probs;      // B x C
  Eigen::VectorXd log_norm;   // log-sum-exp per row
  Eigen::MatrixXd logits;     // B x C
};

BatchForward run_forward(const DomainMapper& mapper, const LabeledBatch& batch,
                         const PrototypeBook& book, double scale) {
  check_book(mapper, book);
  if (batch.features.cols() != mapper.d_in()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("batch has {} features, mapper expects {}",
                            batch.features.cols(), mapper.d_in()));
  }
  BatchForward fw;
  fw.inputs = mapper.standardize(batch.features);
  Eigen::MatrixXd h = fw.inputs * mapper.weight().transpose();
  h.rowwise() += mapper.bias().transpose();
  fw.norms = h.rowwise().norm();
  for (Eigen::Index n = 0; n < h.rows(); ++n) {
    if (!(fw.norms[n] > kNormEpsilon)) {
      throw Error(ErrorKind::kZeroVector,
                  "mapper output vanished for a training sample");
    }
  }
  fw.embedding = fw.norms.cwiseInverse().asDiagonal() * h;
  // -s * c(f, proto) = s * <f, proto> - s
  fw.logits = (scale * (fw.embedding * book.matrix().transpose())).array() -
              scale;
  const Eigen::VectorXd row_max = fw.logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = fw.logits.colwise() - row_max;
  Eigen::MatrixXd e = shifted.array().exp();
  const Eigen::VectorXd sums = e.rowwise().sum();
  fw.probs = sums.cwiseInverse().asDiagonal() * e;
  fw.log_norm = row_max.array() + sums.array().log();
  return fw;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(scale > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "scale must be positive");
  }
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "learning rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "momentum must lie in [0, 1)");
  }
  if (batch_size < 1) {
    throw Error(ErrorKind::kInvalidArgument, "batch size must be at least 1");
  }
}

void LabeledBatch::validate() const {
  if (categories.empty()) {
    throw Error(ErrorKind::kEmptyDataset, "batch has no samples");
  }
  if (static_cast<std::size_t>(features.rows()) != categories.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("{} feature rows for {} labels", features.rows(),
                            categories.size()));
  }
  if (!features.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "batch has non-finite features");
  }
}

DomainMapper::DomainMapper(std::string domain, Eigen::MatrixXd weight,
                           Eigen::VectorXd bias, Eigen::VectorXd input_mean,
                           Eigen::VectorXd input_scale)
    : domain_(std::move(domain)),
      weight_(std::move(weight)),
      bias_(std::move(bias)),
      input_mean_(std::move(input_mean)),
      input_scale_(std::move(input_scale)) {
  if (domain_.empty() ||
      domain_.find_first_of(" \t\r\n") != std::string::npos) {
    throw Error(ErrorKind::kInvalidArgument,
                "domain names must be nonempty and free of whitespace");
  }
  if (bias_.size() != weight_.rows() || input_mean_.size() != weight_.cols() ||
      input_scale_.size() != weight_.cols()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "mapper parameter shapes do not agree");
  }
  if (weight_.rows() < 2) {
    throw Error(ErrorKind::kInvalidArgument,
                "mapper output dimension must be at least 2");
  }
  if (!(input_scale_.array() > 0.0).all()) {
    throw Error(ErrorKind::kInvalidArgument,
                "input scale must be strictly positive");
  }
}

DomainMapper DomainMapper::initialize(std::string domain,
                                      Eigen::VectorXd input_mean,
                                      Eigen::VectorXd input_scale,
                                      Eigen::Index d_out, std::uint64_t seed) {
  const Eigen::Index d_in = input_mean.size();
  const double a = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-a, a);
  Eigen::MatrixXd w(d_out, d_in);
  // Row-major fill order keeps the draw sequence independent of storage.
  for (Eigen::Index i = 0; i < d_out; ++i) {
    for (Eigen::Index j = 0; j < d_in; ++j) w(i, j) = dist(rng);
  }
  return DomainMapper(std::move(domain), std::move(w),
                      Eigen::VectorXd::Zero(d_out), std::move(input_mean),
                      std::move(input_scale));
}

DomainMapper DomainMapper::with_parameters(Eigen::MatrixXd weight,
                                           Eigen::VectorXd bias) const {
  return DomainMapper(domain_, std::move(weight), std::move(bias), input_mean_,
                      input_scale_);
}

UnitVector DomainMapper::forward(const Eigen::VectorXd& x) const {
  if (x.size() != d_in()) {
    throw Error(ErrorKind::kDimensionMismatch,
                fmt::format("feature has {} components, mapper for '{}' "
                            "expects {}",
                            x.size(), domain_, d_in()));
  }
  if (!x.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "non-finite feature");
  }
  const Eigen::VectorXd z =
      (x - input_mean_).cwiseQuotient(input_scale_);
  return normalize((weight_ * z + bias_).eval());
}

UnitVector DomainMapper::forward(std::span<const double> x) const {
  return forward(Eigen::Map<const Eigen::VectorXd>(
                     x.data(), static_cast<Eigen::Index>(x.size()))
                     .eval());
}

Eigen::MatrixXd DomainMapper::standardize(const Eigen::MatrixXd& rows) const {
  Eigen::MatrixXd z = rows.rowwise() - input_mean_.transpose();
  return z * input_scale_.cwiseInverse().asDiagonal();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> fit_standardization(
    const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) {
    throw Error(ErrorKind::kEmptyDataset, "no rows to standardize");
  }
  const Eigen::VectorXd mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  Eigen::VectorXd scale =
      (centered.colwise().squaredNorm() / static_cast<double>(rows.rows()))
          .cwiseSqrt()
          .transpose();
  for (Eigen::Index k = 0; k < scale.size(); ++k) {
    if (!(scale[k] > kMinInputScale)) scale[k] = 1.0;
  }
  return {mean, scale};
}

Eigen::VectorXd posterior_from_embedding(const UnitVector& embedding,
                                         const PrototypeBook& book,
                                         double scale) {
  check_scale(scale);
  if (embedding.dim() != book.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "embedding and prototypes differ in dimension");
  }
  Eigen::VectorXd logits(static_cast<Eigen::Index>(book.size()));
  for (std::size_t c = 0; c < book.size(); ++c) {
    logits[static_cast<Eigen::Index>(c)] =
        -scale * cosine_distance(embedding, book.prototype(c));
  }
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

Eigen::VectorXd posterior(const DomainMapper& mapper, const Eigen::VectorXd& x,
                          const PrototypeBook& book, double scale) {
  check_book(mapper, book);
  return posterior_from_embedding(mapper.forward(x), book, scale);
}

double batch_loss(const DomainMapper& mapper, const LabeledBatch& batch,
                  const PrototypeBook& book, double scale) {
  check_scale(scale);
  batch.validate();
  const auto labels = label_indices(batch, book);
  const BatchForward fw = run_forward(mapper, batch, book, scale);
  double total = 0.0;
  for (Eigen::Index n = 0; n < fw.logits.rows(); ++n) {
    total += fw.log_norm[n] - fw.logits(n, labels[static_cast<std::size_t>(n)]);
  }
  return total / static_cast<double>(batch.size());
}

MapperGradient batch_gradient(const DomainMapper& mapper,
                              const LabeledBatch& batch,
                              const PrototypeBook& book, double scale) {
  check_scale(scale);
  batch.validate();
  const auto labels = label_indices(batch, book);
  const BatchForward fw = run_forward(mapper, batch, book, scale);
  const auto count = static_cast<double>(batch.size());

  // dL/dlogits = (p - onehot) / B
  Eigen::MatrixXd d_logits = fw.probs;
  for (Eigen::Index n = 0; n < d_logits.rows(); ++n) {
    d_logits(n, labels[static_cast<std::size_t>(n)]) -= 1.0;
  }
  d_logits /= count;

  // logits = s <f, proto> - s  =>  dL/df = s * d_logits * P
  const Eigen::MatrixXd d_embed = scale * (d_logits * book.matrix());
  // f = h / |h|  =>  dL/dh = (I - f f^T) dL/df / |h|
  const Eigen::VectorXd radial =
      (d_embed.array() * fw.embedding.array()).rowwise().sum();
  Eigen::MatrixXd d_pre = d_embed - radial.asDiagonal() * fw.embedding;
  d_pre = fw.norms.cwiseInverse().asDiagonal() * d_pre;

  MapperGradient grad;
  grad.weight = d_pre.transpose() * fw.inputs;
  grad.bias = d_pre.colwise().sum().transpose();
  return grad;
}

TrainResult train(const std::string& domain, const LabeledBatch& dataset,
                  const PrototypeBook& book, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.size() == 0) {
    throw Error(ErrorKind::kEmptyDataset,
                "no training samples for domain '" + domain + "'");
  }
  dataset.validate();
  label_indices(dataset, book);

  auto [mean, input_scale] = fit_standardization(dataset.features);
  std::mt19937_64 rng(config.seed);
  DomainMapper mapper = DomainMapper::initialize(
      domain, std::move(mean), std::move(input_scale), book.dim(), rng());

  TrainResult result{mapper, batch_loss(mapper, dataset, book, config.scale),
                     {}};
  const std::size_t n = dataset.size();
  const std::size_t batches_per_epoch =
      (n + config.batch_size - 1) / config.batch_size;
  const double total_steps =
      static_cast<double>(batches_per_epoch * config.epochs);

  Eigen::MatrixXd weight = mapper.weight();
  Eigen::VectorXd bias = mapper.bias();
  Eigen::MatrixXd weight_velocity = Eigen::MatrixXd::Zero(weight.rows(),
                                                          weight.cols());
  Eigen::VectorXd bias_velocity = Eigen::VectorXd::Zero(bias.size());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  LabeledBatch mini;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      mini.features.resize(static_cast<Eigen::Index>(stop - start),
                           dataset.features.cols());
      mini.categories.clear();
      for (std::size_t i = start; i < stop; ++i) {
        mini.features.row(static_cast<Eigen::Index>(i - start)) =
            dataset.features.row(static_cast<Eigen::Index>(order[i]));
        mini.categories.push_back(dataset.categories[order[i]]);
      }
      const auto grad = batch_gradient(mapper, mini, book, config.scale);
      const double lr =
          config.learning_rate * 0.5 *
          (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                          total_steps));
      // Nesterov: v <- mu v + g;  theta <- theta - lr (g + mu v)
      weight_velocity = config.momentum * weight_velocity + grad.weight;
      bias_velocity = config.momentum * bias_velocity + grad.bias;
      weight -= lr * (grad.weight + config.momentum * weight_velocity);
      bias -= lr * (grad.bias + config.momentum * bias_velocity);
      mapper = mapper.with_parameters(weight, bias);
      ++step;
    }
    const double loss = batch_loss(mapper, dataset, book, config.scale);
    result.epoch_losses.push_back(loss);
    if (on_epoch) on_epoch(epoch + 1, loss);
  }
  result.mapper = std::move(mapper);
  return result;
}

void write_mapper(const DomainMapper& mapper, std::ostream& out) {
  fmt::print(out, "OXDS-MAP 1 {} {} {}\n", mapper.domain(), mapper.d_in(),
             mapper.d_out());
  auto write_row = [&out](const auto& row) {
    for (Eigen::Index k = 0; k < row.size(); ++k) {
      fmt::print(out, k == 0 ? "{:.17g}" : " {:.17g}", row[k]);
    }
    out << '\n';
  };
  for (Eigen::Index i = 0; i < mapper.d_out(); ++i) {
    write_row(Eigen::VectorXd(mapper.weight().row(i).transpose()));
  }
  write_row(mapper.bias());
  write_row(mapper.input_mean());
  write_row(mapper.input_scale());
}

void save_mapper(const DomainMapper& mapper,
                 const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_mapper(mapper, out);
  if (!out.flush()) {
    throw Error(ErrorKind::kIoError, "failed writing " + path.string());
  }
}

DomainMapper read_mapper(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto next_tokens = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      auto tokens = detail::split_ws(line);
      if (!tokens.empty()) return tokens;
    }
    throw Error(ErrorKind::kParseError, source + ": unexpected end of file");
  };

  const auto header = next_tokens();
  if (header.size() != 5 || header[0] != "OXDS-MAP" || header[1] != "1") {
    throw Error(ErrorKind::kParseError,
                source +
                    ": expected header 'OXDS-MAP 1 <domain> <D_in> <D_out>'");
  }
  const std::string domain(header[2]);
  const auto d_in = static_cast<Eigen::Index>(
      detail::parse_uint(header[3], detail::where(source, line_no)));
  const auto d_out = static_cast<Eigen::Index>(
      detail::parse_uint(header[4], detail::where(source, line_no)));

  auto read_row = [&](Eigen::Index width) {
    const auto tokens = next_tokens();
    const auto ctx = detail::where(source, line_no);
    if (static_cast<Eigen::Index>(tokens.size()) != width) {
      throw Error(ErrorKind::kParseError,
                  fmt::format("{}: expected {} values, found {}", ctx, width,
                              tokens.size()));
    }
    Eigen::VectorXd row(width);
    for (Eigen::Index k = 0; k < width; ++k) {
      row[k] = detail::parse_double(tokens[static_cast<std::size_t>(k)], ctx);
    }
    return row;
  };

  Eigen::MatrixXd weight(d_out, d_in);
  for (Eigen::Index i = 0; i < d_out; ++i) {
    weight.row(i) = read_row(d_in).transpose();
  }
  Eigen::VectorXd bias = read_row(d_out);
  Eigen::VectorXd mean = read_row(d_in);
  Eigen::VectorXd scale = read_row(d_in);
  return DomainMapper(domain, std::move(weight), std::move(bias),
                      std::move(mean), std::move(scale));
}

DomainMapper load_mapper(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_mapper(in, path.string());
}

}  // namespace oxds

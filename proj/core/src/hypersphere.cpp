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

#include "oxds/hypersphere.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "oxds/error.hpp"

namespace oxds {
namespace {

void check_same_dim(const UnitVector& u, const UnitVector& v) {
  if (u.dim() != v.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "unit vectors of dimension " + std::to_string(u.dim()) +
                    " and " + std::to_string(v.dim()));
  }
}

}  // namespace

UnitVector normalize(const Eigen::VectorXd& v, double eps) {
  if (v.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument,
                "hypersphere vectors need at least 2 components");
  }
  if (!v.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "non-finite vector component");
  }
  const double norm = v.norm();
  if (!(norm > eps)) {
    throw Error(ErrorKind::kZeroVector, "cannot normalize vector of norm " +
                                            std::to_string(norm));
  }
  // Already unit to within rounding: keep the bits so save/load and repeated
  // normalization are exact fixed points.
  if (std::abs(norm - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) {
    return UnitVector(v);
  }
  return UnitVector(v / norm);
}

UnitVector normalize(std::span<const double> v, double eps) {
  return normalize(Eigen::Map<const Eigen::VectorXd>(
                       v.data(), static_cast<Eigen::Index>(v.size())),
                   eps);
}

double dot(const UnitVector& u, const UnitVector& v) {
  check_same_dim(u, v);
  return dot(u.values(), v.values());
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double cosine_distance(const UnitVector& u, const UnitVector& v) {
  return std::clamp(1.0 - dot(u, v), 0.0, 2.0);
}

double angle(const UnitVector& u, const UnitVector& v) {
  check_same_dim(u, v);
  return 2.0 * std::atan2((u.vec() - v.vec()).norm(),
                          (u.vec() + v.vec()).norm());
}

UnitVector slerp(const UnitVector& p0, const UnitVector& p1, double lambda) {
  check_same_dim(p0, p1);
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "slerp mixture must lie in [0, 1], got " +
                    std::to_string(lambda));
  }
  if (lambda == 0.0) return p0;
  if (lambda == 1.0) return p1;

  const double omega = angle(p0, p1);
  if (omega > std::numbers::pi - kAngleEpsilon) {
    throw Error(ErrorKind::kAntipodalInputs,
                "slerp endpoints are antipodal; the geodesic is undefined");
  }
  if (omega < kAngleEpsilon) {
    return normalize(((1.0 - lambda) * p0.vec() + lambda * p1.vec()).eval());
  }
  const double sin_omega = std::sin(omega);
  const double w0 = std::sin((1.0 - lambda) * omega) / sin_omega;
  const double w1 = std::sin(lambda * omega) / sin_omega;
  Eigen::VectorXd out = w0 * p0.vec() + w1 * p1.vec();
  // The analytic result is unit norm; strip the last few ulps of drift.
  out /= out.norm();
  return UnitVector(std::move(out));
}

UnitVector spherical_average(std::span<const UnitVector> vs) {
  if (vs.empty()) {
    throw Error(ErrorKind::kEmptyInput, "spherical_average of no vectors");
  }
  std::vector<const UnitVector*> order;
  order.reserve(vs.size());
  for (const auto& v : vs) {
    check_same_dim(vs.front(), v);
    order.push_back(&v);
  }
  std::sort(order.begin(), order.end(),
            [](const UnitVector* a, const UnitVector* b) {
              const auto x = a->values();
              const auto y = b->values();
              return std::lexicographical_compare(x.begin(), x.end(),
                                                  y.begin(), y.end());
            });
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(vs.front().dim());
  for (const auto* v : order) sum += v->vec();
  sum /= static_cast<double>(vs.size());
  return normalize(sum);
}

}  // namespace oxds

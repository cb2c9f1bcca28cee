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

// Geometry of the unit hypersphere S^{D-1}: normalization, cosine distance,
// spherical linear interpolation and spherical averaging. Everything here is
// a pure function over doubles.

#ifndef OXDS_HYPERSPHERE_HPP_
#define OXDS_HYPERSPHERE_HPP_

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace oxds {

/// Norms at or below this are treated as zero.
inline constexpr double kNormEpsilon = 1e-12;
/// Angular tolerance for the near-parallel / antipodal slerp cases.
inline constexpr double kAngleEpsilon = 1e-6;

/// A D-dimensional vector of unit Euclidean norm, D >= 2.
///
/// The only ways to obtain one are normalize() and the geometry functions
/// below, so the unit-norm invariant holds for every live instance.
class UnitVector {
 public:
  const Eigen::VectorXd& vec() const noexcept { return v_; }
  Eigen::Index dim() const noexcept { return v_.size(); }
  double operator[](Eigen::Index i) const { return v_[i]; }

  std::span<const double> values() const noexcept {
    return {v_.data(), static_cast<std::size_t>(v_.size())};
  }

  // Negation keeps the norm, so it is safe to expose.
  UnitVector operator-() const { return UnitVector(-v_); }

  friend bool operator==(const UnitVector& a, const UnitVector& b) {
    return a.v_.size() == b.v_.size() && a.v_ == b.v_;
  }

 private:
  explicit UnitVector(Eigen::VectorXd v) : v_(std::move(v)) {}

  friend UnitVector normalize(const Eigen::VectorXd& v, double eps);
  friend UnitVector slerp(const UnitVector&, const UnitVector&, double);

  Eigen::VectorXd v_;
};

/// Returns v / ||v||. Throws ZeroVector if ||v|| <= eps and InvalidArgument
/// when v has fewer than two components or non-finite entries.
UnitVector normalize(const Eigen::VectorXd& v, double eps = kNormEpsilon);
UnitVector normalize(std::span<const double> v, double eps = kNormEpsilon);

/// <u, v>; throws DimensionMismatch.
double dot(const UnitVector& u, const UnitVector& v);

/// Plain left-to-right dot product. Every similarity in the library goes
/// through this so that scores, ties and rankings are reproducible by any
/// straightforward re-implementation. Sizes must already agree.
double dot(std::span<const double> a, std::span<const double> b);

/// 1 - <u, v>, clamped to [0, 2].
double cosine_distance(const UnitVector& u, const UnitVector& v);

/// Geodesic angle in [0, pi], computed as 2 atan2(|u - v|, |u + v|) which
/// stays accurate for nearly parallel and nearly antipodal pairs.
double angle(const UnitVector& u, const UnitVector& v);

/// Spherical linear interpolation from p0 (lambda = 0) to p1 (lambda = 1).
///
/// Pairs closer than kAngleEpsilon fall back to normalized linear
/// interpolation. Pairs within kAngleEpsilon of antipodal have no unique
/// geodesic and throw AntipodalInputs.
UnitVector slerp(const UnitVector& p0, const UnitVector& p1, double lambda);

/// Mean of the inputs projected back onto the sphere.
///
/// Inputs are accumulated in a canonical (lexicographic) order so the result
/// is bit-for-bit independent of the order they are passed in.
UnitVector spherical_average(std::span<const UnitVector> vs);

}  // namespace oxds

#endif  // OXDS_HYPERSPHERE_HPP_

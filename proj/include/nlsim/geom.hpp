// Copyright 2026 The nlsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NLSIM_GEOM_HPP
#define NLSIM_GEOM_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "nlsim/rng.hpp"

namespace nlsim::geom {

inline constexpr double kUnitNormTol = 1e-12;

/// Sign with the convention sgn(0) = +1. Rejects non-finite input.
inline int sgn(double x) {
  if (!std::isfinite(x)) throw std::domain_error("sgn: non-finite input");
  return x >= 0.0 ? +1 : -1;
}

/// Unit vector in R^3; a measurement direction.
struct Direction {
  double x, y, z;

  Direction(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {
    const double sumsq = x * x + y * y + z * z;
    if (!std::isfinite(sumsq) || std::abs(sumsq - 1.0) > kUnitNormTol)
      throw std::invalid_argument("Direction: components must form a unit vector");
  }

  Direction negated() const { return Direction(-x, -y, -z); }
};

inline double dot(const Direction& a, const Direction& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

/// Normalizes (x, y, z) into a Direction; rejects near-zero vectors.
inline Direction normalized_direction(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (!std::isfinite(n) || n < 1e-12)
    throw std::invalid_argument("normalized_direction: vector too small to normalize");
  return Direction(x / n, y / n, z / n);
}

/// Real 4-vector with a cached Euclidean norm. All inner products in this
/// library are plain Euclidean; any sign structure a carrier needs is baked
/// into its components when it is built.
struct Carrier4 {
  double v1, v2, v3, v0;
  double euclidean_norm;

  Carrier4(double a, double b, double c, double d)
      : v1(a), v2(b), v3(c), v0(d),
        euclidean_norm(std::sqrt(a * a + b * b + c * c + d * d)) {
    if (!std::isfinite(euclidean_norm))
      throw std::invalid_argument("Carrier4: non-finite components");
  }
};

inline double inner(const Carrier4& u, const Carrier4& v) {
  return u.v1 * v.v1 + u.v2 * v.v2 + u.v3 * v.v3 + u.v0 * v.v0;
}

/// Uniform point on the unit sphere in R^3 (normalized independent normals,
/// exactly rotation invariant).
inline Direction sample_uniform_direction(RngStream& rng) {
  for (;;) {
    const double x = rng.normal();
    const double y = rng.normal();
    const double z = rng.normal();
    const double n = std::sqrt(x * x + y * y + z * z);
    if (n > 1e-12) return Direction(x / n, y / n, z / n);
  }
}

/// Uniform point on the unit sphere in R^4.
inline Carrier4 sample_uniform_carrier(RngStream& rng) {
  for (;;) {
    const double a = rng.normal();
    const double b = rng.normal();
    const double c = rng.normal();
    const double d = rng.normal();
    const double n = std::sqrt(a * a + b * b + c * c + d * d);
    if (n > 1e-12) return Carrier4(a / n, b / n, c / n, d / n);
  }
}

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultRejectionCap = 1'000'000;

/// Unit 4-vector with density proportional to |w_hat . lambda| on the
/// sphere, by rejection: draw lambda uniformly and a threshold t in [0, 1),
/// keep lambda when t < |w_hat . lambda|. Only the direction of w matters.
/// Mean acceptance rate per attempt is 4/(3*pi).
inline Carrier4 rejection_sample_biased(const Carrier4& w, RngStream& rng,
                                        std::uint64_t max_iters = kDefaultRejectionCap,
                                        std::uint64_t* attempts = nullptr) {
  if (!(w.euclidean_norm > 0.0))
    throw std::invalid_argument("rejection_sample_biased: zero biasing vector");
  const double inv_norm = 1.0 / w.euclidean_norm;
  for (std::uint64_t it = 1; it <= max_iters; ++it) {
    const Carrier4 lambda = sample_uniform_carrier(rng);
    const double t = rng.uniform01();
    if (t < std::abs(inner(w, lambda)) * inv_norm) {
      if (attempts != nullptr) *attempts = it;
      return lambda;
    }
  }
  throw SamplingError("rejection_sample_biased: iteration cap exceeded");
}

}  // namespace nlsim::geom

#endif  // NLSIM_GEOM_HPP

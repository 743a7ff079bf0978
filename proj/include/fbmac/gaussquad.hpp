// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Gaussian tail and quantile functions, and the trivariate lower-orthant
// probability Pr[N(0, Sigma) <= z] that defines the set Q^{-1}(eps; Sigma).

#include "fbmac/core.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fbmac {

struct ProbEstimate {
  double value = 0.0;
  double std_err = 0.0;
  long long samples = 0;
};

/// Entries of z may be +inf (unconstrained) or -inf (empty orthant).
struct OrthantQuery {
  Matrix3d sigma;
  Vector3d z;
};

struct bracket_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultOrthantSamples = std::size_t{1} << 20;
inline constexpr int kOrthantReplicates = 8;

/// Q(x) = Pr[N(0,1) > x].
double q_scalar(double x);

/// Standard normal CDF.
inline double phi_cdf(double x) { return q_scalar(-x); }

/// Functional inverse of q_scalar on (0, 1).
double q_inv_scalar(double eps);

/// Inverse of the standard normal CDF on (0, 1), without argument checks.
double phi_inv(double p);

/// Pr[N(0, sigma) <= z] for a fixed covariance, evaluated for many z with
/// one point set. The point set is a Fibonacci lattice in the two free
/// coordinates of the conditional (Cholesky) representation, randomized by
/// kOrthantReplicates independent shifts and a tent transform; the
/// remaining coordinate is integrated in closed form. Every evaluation
/// reuses the same shifts, so the estimate is a smooth deterministic
/// function of z.
class OrthantIntegrator {
 public:
  OrthantIntegrator(const Matrix3d& sigma, std::size_t samples, std::uint64_t seed);

  ProbEstimate operator()(const Vector3d& z) const;

  /// Covariance after eigenvalue flooring.
  const Matrix3d& sigma() const { return sigma_; }
  long long samples() const { return static_cast<long long>(points_per_replicate_) * kOrthantReplicates; }

 private:
  Matrix3d sigma_;
  std::size_t points_per_replicate_;
  std::vector<double> w1_;  // replicate-major, points_per_replicate_ each
  std::vector<double> w2_;
};

ProbEstimate lower_orthant_prob(const OrthantQuery& q, std::size_t samples, std::uint64_t seed);

/// True iff the estimated lower-orthant probability is at least 1 - eps.
bool quantile_set_member(double eps, const Matrix3d& sigma, const Vector3d& z,
                         std::size_t samples, std::uint64_t seed);

/// Smallest t >= 0 such that t*d lies in Q^{-1}(eps; sigma). Coordinates
/// where d is zero are left unconstrained.
double boundary_scale(double eps, const Matrix3d& sigma, const Vector3d& d,
                      std::size_t samples, std::uint64_t seed);

/// Largest t >= 0 such that anchor - t*d lies in Q^{-1}(eps; sigma), using
/// the given integrator. Returns a negative value when the anchor itself is
/// outside the set. Tolerance is on t. An optional starting bracket
/// [lo, hi] is expanded as needed; by default it is
/// [0, 20 sqrt(max diag sigma) / max d].
double boundary_backoff(double eps, const OrthantIntegrator& integ, const Vector3d& anchor,
                        const Vector3d& d, double tol = 1e-6, double lo = 0.0, double hi = 0.0);

}  // namespace fbmac

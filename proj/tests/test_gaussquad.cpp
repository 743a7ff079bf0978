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

#include <gtest/gtest.h>

#include "fbmac/gaussquad.hpp"
#include "fbmac/parallel.hpp"
#include "fbmac/random.hpp"
#include "oracles.hpp"

#include <cmath>
#include <limits>

using namespace fbmac;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kSamples = std::size_t{1} << 16;
}  // namespace

TEST(QScalar, KnownValues) {
  EXPECT_EQ(q_scalar(0.0), 0.5);
  EXPECT_LT(q_scalar(40.0), 1e-300);
  // 3.0902 is Q^{-1}(1e-3) rounded to 5 digits, so agreement with 1e-3 is
  // only to 4 significant figures; against the oracle it is much tighter.
  EXPECT_NEAR(q_scalar(3.0902) / 1e-3, 1.0, 5e-4);
  EXPECT_NEAR(q_scalar(3.0902) / oracle::q(3.0902), 1.0, 1e-6);
}

TEST(QScalar, MatchesOracle) {
  for (double x = -8.0; x <= 30.0; x += 0.37) {
    const double ref = oracle::q(x);
    EXPECT_NEAR(q_scalar(x), ref, 1e-12 * ref) << x;
  }
}

TEST(QInvScalar, KnownValues) {
  EXPECT_EQ(q_inv_scalar(0.5), 0.0);
  // Frozen from the bisection oracle.
  EXPECT_NEAR(q_inv_scalar(1e-3), 3.090232306167813, 1e-12);
  EXPECT_NEAR(oracle::q_inv(1e-3), 3.090232306167813, 1e-12);
  for (double e : {1e-7, 1e-3, 0.02, 0.3}) EXPECT_NEAR(q_inv_scalar(e), -q_inv_scalar(1 - e), 1e-9);
  EXPECT_THROW(q_inv_scalar(0.0), std::domain_error);
  EXPECT_THROW(q_inv_scalar(1.0), std::domain_error);
}

TEST(QInvScalar, ExactInverse) {
  for (double le = -9.0; le < -0.31; le += 0.05) {
    const double e = std::pow(10.0, le);
    EXPECT_NEAR(q_scalar(q_inv_scalar(e)), e, 1e-12 * e) << e;
    const double f = 1.0 - e;
    EXPECT_NEAR(q_scalar(q_inv_scalar(f)), f, 1e-12 * f) << f;
  }
}

TEST(Orthant, IdentityAtOrigin) {
  const auto r = lower_orthant_prob({Matrix3d::Identity(), Vector3d::Zero()}, kSamples, 1);
  EXPECT_NEAR(r.value, 0.125, 1e-12);
}

TEST(Orthant, InfiniteCoordinates) {
  const Matrix3d s = Matrix3d::Identity();
  EXPECT_EQ(lower_orthant_prob({s, Vector3d(kInf, kInf, kInf)}, kSamples, 1).value, 1.0);
  EXPECT_EQ(lower_orthant_prob({s, Vector3d(1.0, -kInf, kInf)}, kSamples, 1).value, 0.0);
  EXPECT_NEAR(lower_orthant_prob({s, Vector3d(1.0, kInf, kInf)}, kSamples, 1).value,
              oracle::q(-1.0), 1e-15);
}

TEST(Orthant, DiagonalFactorizes) {
  RandomStream rng(42);
  for (int i = 0; i < 100; ++i) {
    const Vector3d sd(0.2 + 2 * rng.uniform(), 0.2 + 2 * rng.uniform(), 0.2 + 2 * rng.uniform());
    const Vector3d z(3 * rng.normal(), 3 * rng.normal(), 3 * rng.normal());
    Matrix3d s = sd.cwiseAbs2().asDiagonal();
    const auto r = lower_orthant_prob({s, z}, kSamples, i);
    double ref = 1.0;
    for (int k = 0; k < 3; ++k) ref *= 1.0 - oracle::q(z(k) / sd(k));
    EXPECT_LE(std::abs(r.value - ref), std::max(3.0 * r.std_err, 1e-12)) << i;
  }
}

TEST(Orthant, CorrelatedMarginalMatchesTrapezoid) {
  Matrix3d s;
  s << 1, 0.5, 0.2, 0.5, 1, 0.3, 0.2, 0.3, 1;
  for (auto [z1, z2] : {std::pair{0.0, 0.0}, std::pair{1.0, -0.5}, std::pair{2.5, 1.5}}) {
    const auto r = lower_orthant_prob({s, Vector3d(z1, z2, kInf)}, kSamples, 3);
    EXPECT_NEAR(r.value, oracle::bivariate_cdf_trapezoid(z1, z2, 0.5), 1e-3);
  }
}

TEST(Orthant, MonotoneChains) {
  Matrix3d s;
  s << 1, 0.6, 0.8, 0.6, 1, 0.7, 0.8, 0.7, 1.5;
  const OrthantIntegrator integ(s, kSamples, 9);
  RandomStream rng(7);
  for (int c = 0; c < 20; ++c) {
    Vector3d z(rng.normal(), rng.normal(), rng.normal());
    double prev = integ(z).value;
    for (int k = 0; k < 10; ++k) {
      z(static_cast<int>(rng() % 3)) += 0.3 * rng.uniform();
      const double v = integ(z).value;
      EXPECT_GE(v, prev - 1e-6);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
  }
}

TEST(Orthant, RankDeficientIsIntegrable) {
  // Third coordinate is (2/3)(x1 + x2) with Var x1 = Var x2 = 3/8, Cov 1/8.
  Matrix3d s;
  s << 0.375, 0.125, 1.0 / 3.0, 0.125, 0.375, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 4.0 / 9.0;
  const auto r = lower_orthant_prob({s, Vector3d(kInf, kInf, 0.0)}, kSamples, 1);
  EXPECT_NEAR(r.value, 0.5, 1e-12);
  const auto both = lower_orthant_prob({s, Vector3d(0.5, 0.5, 0.2)}, kSamples, 1);
  EXPECT_GT(both.value, 0.0);
  EXPECT_LT(both.value, 1.0);
}

TEST(Orthant, RejectsIndefinite) {
  Matrix3d s;
  s << 1, 2, 0, 2, 1, 0, 0, 0, 1;
  EXPECT_THROW(lower_orthant_prob({s, Vector3d::Zero()}, kSamples, 1), std::domain_error);
}

TEST(Orthant, DeterministicAcrossThreads) {
  Matrix3d s;
  s << 1, 0.6, 0.8, 0.6, 1, 0.7, 0.8, 0.7, 1.5;
  const Vector3d z(0.3, -0.2, 1.1);
  set_worker_count(1);
  const auto a = lower_orthant_prob({s, z}, kSamples, 5);
  set_worker_count(8);
  const auto b = lower_orthant_prob({s, z}, kSamples, 5);
  set_worker_count(0);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_err, b.std_err);
  EXPECT_EQ(a.samples, b.samples);
}

TEST(QuantileSet, Membership) {
  const Matrix3d s = Matrix3d::Identity();
  EXPECT_TRUE(quantile_set_member(0.9, s, Vector3d::Zero(), kSamples, 1));
  EXPECT_FALSE(quantile_set_member(0.5, s, Vector3d::Zero(), kSamples, 1));
  EXPECT_TRUE(quantile_set_member(0.5, s, Vector3d(5, 5, 5), kSamples, 1));
  EXPECT_TRUE(quantile_set_member(0.5, s, Vector3d(6, 5, 7), kSamples, 1));
}

TEST(BoundaryScale, ScalarReductions) {
  const Matrix3d s = Matrix3d::Identity();
  EXPECT_EQ(boundary_scale(0.5, s, Vector3d(1, 0, 0), kSamples, 1), 0.0);
  EXPECT_NEAR(boundary_scale(1e-3, s, Vector3d(1, 0, 0), kSamples, 1), 3.090232306167813, 1e-6);
}

TEST(BoundaryScale, SmallerEpsLargerScale) {
  Matrix3d s;
  s << 1, 0.3, 0.5, 0.3, 1, 0.5, 0.5, 0.5, 1.2;
  const Vector3d d = Vector3d(1, 1, 2).normalized();
  double prev = 0.0;
  for (double e : {0.3, 0.1, 1e-2, 1e-3}) {
    const double t = boundary_scale(e, s, d, kSamples, 1);
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST(BoundaryBackoff, MatchesScalarWhenOthersUnconstrained) {
  const OrthantIntegrator integ(Matrix3d::Identity(), kSamples, 1);
  const double t = boundary_backoff(1e-3, integ, Vector3d(10.0, kInf, kInf), Vector3d(1, 0, 0));
  EXPECT_NEAR(t, 10.0 - 3.090232306167813, 1e-6);
  const double neg = boundary_backoff(1e-3, integ, Vector3d(1.0, kInf, kInf), Vector3d(1, 0, 0));
  EXPECT_NEAR(neg, 1.0 - 3.090232306167813, 1e-6);
}

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

#include "fbmac/parallel.hpp"
#include "fbmac/random.hpp"
#include "fbmac/shellmc.hpp"
#include "fbmac/simlink.hpp"

#include <cmath>
#include <limits>
#include <numbers>

using namespace fbmac;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_gauss(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, double s2) {
  const double n = static_cast<double>(y.size());
  return -0.5 * n * std::log(2 * std::numbers::pi * s2) - (y - mean).squaredNorm() / (2 * s2);
}

Eigen::VectorXd gaussian(long long n, double s2, RandomStream& rng) {
  Eigen::VectorXd v(n);
  for (auto& e : v) e = std::sqrt(s2) * rng.normal();
  return v;
}

// Pr[i_k > lg] with Y drawn from the reference law Q^(k) itself:
// k = 0: Y ~ N(x2, (1+P1) I), k = 1: Y ~ N(x1, (1+P2) I), k = 2: Y ~ N(0, (1+P1+P2) I).
double naive_reference_confusion(int k, long long n, const PowerPair& pp, double lg, int draws,
                                 std::uint64_t seed) {
  RandomStream rng(seed);
  long long hits = 0;
  for (int d = 0; d < draws; ++d) {
    const Eigen::VectorXd x1 = sample_shell(n, pp.p1, rng).x;
    const Eigen::VectorXd x2 = sample_shell(n, pp.p2, rng).x;
    Eigen::VectorXd y, ref_mean;
    double ref_var;
    if (k == 0) {
      ref_mean = x2;
      ref_var = 1 + pp.p1;
    } else if (k == 1) {
      ref_mean = x1;
      ref_var = 1 + pp.p2;
    } else {
      ref_mean = Eigen::VectorXd::Zero(n);
      ref_var = 1 + pp.sum();
    }
    y = ref_mean + gaussian(n, ref_var, rng);
    const double i = log_gauss(y, x1 + x2, 1.0) - log_gauss(y, ref_mean, ref_var);
    if (i > lg) ++hits;
  }
  return static_cast<double>(hits) / draws;
}

void expect_binomial_near(const SimResult& r, double p, double sigmas = 4.0) {
  EXPECT_NEAR(r.eps_hat, p, sigmas * std::sqrt(p * (1 - p) / r.trials) + 1e-12);
}

}  // namespace

TEST(Thresholds, SingleCodewordsGiveMinusInfinity) {
  const auto th = default_thresholds(CodebookSpec(100, 1, 1, {1, 1}), 1, 1, 1);
  EXPECT_EQ(th.lg1, -kInf);
  EXPECT_EQ(th.lg2, -kInf);
  EXPECT_EQ(th.lg3, -kInf);
}

TEST(Thresholds, ThreeCodewordsUnitConstant) {
  const auto th = default_thresholds(CodebookSpec(100, 3, 1, {1, 1}), 1, 1, 1);
  EXPECT_DOUBLE_EQ(th.lg1, 0.0);
  EXPECT_EQ(th.lg3, -kInf);
}

TEST(Thresholds, ConstantScalesAdditively) {
  const CodebookSpec spec(100, 7, 5, {1, 2});
  const auto a = default_thresholds(spec, 1.3, 0.7, 2.0);
  const auto b = default_thresholds(spec, 2.6, 0.7, 2.0);
  EXPECT_NEAR(b.lg1 - a.lg1, std::log(2.0), 1e-15);
  EXPECT_EQ(b.lg2, a.lg2);
  EXPECT_NEAR(a.lg3, std::log(2.0 * 6 * 4 / 2), 1e-15);
}

TEST(Thresholds, RejectsNonPositiveConstants) {
  const CodebookSpec spec(100, 7, 5, {1, 2});
  EXPECT_THROW(default_thresholds(spec, 0.0, 1, 1), std::domain_error);
  EXPECT_THROW(default_thresholds(spec, 1, -1, 1), std::domain_error);
  EXPECT_THROW(CodebookSpec(100, 0, 1, {1, 1}), std::domain_error);
}

TEST(Thresholds, DefaultConstantsFollowClosedForm) {
  const PowerPair pp(1.0, 3.0);
  const auto k = default_rn_constants(pp);
  EXPECT_EQ(k.k1, 1.0);
  EXPECT_EQ(k.k2, 1.0);
  EXPECT_NEAR(k.k3, std::exp(2.0) * 3 / std::sqrt(2 * std::numbers::pi), 1e-13);
}

TEST(SimulateP2P, InfiniteThresholdAlwaysFails) {
  const auto r = simulate_p2p(CodebookSpec::p2p(50, 4, 1.0), {kInf, kInf, kInf}, 500, 1);
  EXPECT_EQ(r.errors, 500);
  EXPECT_EQ(r.eps_hat, 1.0);
}

TEST(SimulateP2P, AcceptAllPicksFirstCodeword) {
  const auto r = simulate_p2p(CodebookSpec::p2p(50, 4, 1.0), {-kInf, -kInf, -kInf}, 40000, 2);
  expect_binomial_near(r, 0.75);
  EXPECT_LE(r.ci95_low, r.eps_hat);
  EXPECT_GE(r.ci95_high, r.eps_hat);
}

TEST(SimulateP2P, SingleCodewordErrorIsOutage) {
  // With one codeword the decoder errs exactly when the information density
  // is at or below the threshold.
  const long long n = 60;
  const double p = 0.4, lg = n * capacity(p) - 3.0;
  const auto sim = simulate_p2p(CodebookSpec::p2p(n, 1, p), {lg, -kInf, -kInf}, 100000, 3);
  const auto out = empirical_outage_p2p(n, p, lg, 400000, 4, SamplingMode::Direct);
  EXPECT_NEAR(sim.eps_hat, out.value, 4 * std::hypot(sim.std_err(), out.std_err()));
}

TEST(SimulateP2P, ThresholdTowardOptimumDoesNotIncreaseError) {
  const auto spec = CodebookSpec::p2p(100, 8, 0.2);
  const double opt = default_thresholds(spec, 1, 1, 1).lg1;
  double previous = 1.0;
  for (double shift : {12.0, 8.0, 4.0, 0.0}) {
    const auto r = simulate_p2p(spec, {opt + shift, -kInf, -kInf}, 20000, 5);
    EXPECT_LE(r.eps_hat, previous + 2 * r.std_err()) << shift;
    previous = r.eps_hat;
  }
}

TEST(SimulateP2P, DeterministicAcrossWorkerCounts) {
  const auto spec = CodebookSpec::p2p(80, 6, 0.3);
  const auto th = default_thresholds(spec, 1, 1, 1);
  set_worker_count(1);
  const auto a = simulate_p2p(spec, th, 3000, 9);
  set_worker_count(4);
  const auto b = simulate_p2p(spec, th, 3000, 9);
  set_worker_count(0);
  EXPECT_EQ(a.errors, b.errors);
  EXPECT_EQ(simulate_p2p(spec, th, 3000, 10).trials, 3000);
}

TEST(SimulateMac, AcceptAllPicksFirstPair) {
  const auto r = simulate_mac(CodebookSpec(40, 2, 2, {1, 1}), {-kInf, -kInf, -kInf}, 40000, 11);
  expect_binomial_near(r, 0.75);
}

TEST(SimulateMac, AnyInfiniteThresholdAlwaysFails) {
  const CodebookSpec spec(40, 2, 3, {1, 1});
  for (int k = 0; k < 3; ++k) {
    Thresholds th{-kInf, -kInf, -kInf};
    (k == 0 ? th.lg1 : k == 1 ? th.lg2 : th.lg3) = kInf;
    EXPECT_EQ(simulate_mac(spec, th, 300, 12).eps_hat, 1.0) << k;
  }
}

TEST(SimulateMac, SingleCodewordsErrIffJointOutage) {
  const long long n = 60;
  const PowerPair pp(0.3, 0.6);
  const Thresholds th{n * capacity(pp.p1) - 2.0, n * capacity(pp.p2) - 3.0,
                      n * capacity(pp.sum()) - 3.5};
  const auto sim = simulate_mac(CodebookSpec(n, 1, 1, pp), th, 100000, 13);
  // Joint outage from the three densities of directly built vectors.
  RandomStream rng(14);
  const int draws = 200000;
  long long hits = 0;
  for (int d = 0; d < draws; ++d) {
    const auto x1 = sample_shell(n, pp.p1, rng);
    const auto x2 = sample_shell(n, pp.p2, rng);
    const auto i = info_density_vector_mac(x1, x2, sample_noise(n, rng));
    if (!(i.i1 > th.lg1 && i.i2 > th.lg2 && i.i3 > th.lg3)) ++hits;
  }
  const double p = static_cast<double>(hits) / draws;
  EXPECT_NEAR(sim.eps_hat, p, 4 * std::hypot(sim.std_err(), std::sqrt(p * (1 - p) / draws)));
}

TEST(SimulateMac, DeterministicAcrossWorkerCounts) {
  const CodebookSpec spec(60, 4, 3, {0.5, 0.5});
  const auto th = default_thresholds(spec, default_rn_constants(spec.pp));
  set_worker_count(1);
  const auto a = simulate_mac(spec, th, 2000, 15);
  set_worker_count(3);
  const auto b = simulate_mac(spec, th, 2000, 15);
  set_worker_count(0);
  EXPECT_EQ(a.errors, b.errors);
}

TEST(Theorem1, SingleCodewordBoundIsZero) {
  const auto spec = CodebookSpec::p2p(100, 1, 1.0);
  const auto b = theorem1_rhs(spec, default_thresholds(spec, 1, 1, 1), 2000, 1);
  EXPECT_EQ(b.value, 0.0);
  EXPECT_EQ(b.std_err, 0.0);
}

TEST(Theorem1, RequiresEnoughTrials) {
  const auto spec = CodebookSpec::p2p(100, 4, 1.0);
  EXPECT_THROW(theorem1_rhs(spec, {0, 0, 0}, 999, 1), std::domain_error);
}

TEST(Theorem1, MonotoneInCodebookSize) {
  double previous = 0.0;
  for (long long m : {1, 2, 4, 16, 64}) {
    const auto b = theorem1_rhs(CodebookSpec::p2p(80, m, 0.3), {5.0, 0, 0}, 4000, 2);
    EXPECT_GE(b.value, previous) << m;
    previous = b.value;
  }
}

TEST(Theorem1, TermsMatchIndependentEstimators) {
  const long long n = 40, m = 9;
  const double p = 0.5, lg = 2.0;
  const auto b = theorem1_rhs(CodebookSpec::p2p(n, m, p), {lg, 0, 0}, 400000, 3, 1.0);
  const auto out = empirical_outage_p2p(n, p, lg, 400000, 4, SamplingMode::Direct);
  EXPECT_NEAR(b.outage, out.value, 4 * out.std_err() * std::sqrt(2.0));
  const auto conf = confusion_probability_direct(n, p, lg, 1000000, 5);
  const double coef = (m - 1) / 2.0;
  EXPECT_NEAR(b.confusion(0), coef * conf.value, 4 * coef * conf.std_err * std::sqrt(2.0));
  EXPECT_NEAR(b.value, b.outage + b.confusion(0), 1e-12);
}

TEST(Theorem1, BoundsSimulatedError) {
  for (const auto& [n, m, p] : {std::tuple{60LL, 4LL, 0.1}, {120LL, 16LL, 0.15}, {200LL, 2LL, 0.05}}) {
    const auto spec = CodebookSpec::p2p(n, m, p);
    const auto th = default_thresholds(spec, 1, 1, 1);
    const auto sim = simulate_p2p(spec, th, 20000, 6);
    const auto b = theorem1_rhs(spec, th, 20000, 7, exact_rn_constants(n, {p, p}).k1);
    EXPECT_LE(sim.eps_hat, b.value + 2 * std::hypot(sim.std_err(), b.std_err)) << n << " " << m;
  }
}

TEST(Theorem4, SingleCodewordsBoundIsZero) {
  const CodebookSpec spec(100, 1, 1, {1, 1});
  const auto th = default_thresholds(spec, default_rn_constants(spec.pp));
  for (auto mode : {OutageMode::Joint, OutageMode::Splitting})
    EXPECT_EQ(theorem4_rhs(spec, th, 2000, 1, mode).value, 0.0);
}

TEST(Theorem4, SplittingDominatesJoint) {
  for (const auto& pp : {PowerPair{0.2, 0.2}, PowerPair{0.1, 0.6}, PowerPair{1, 1}}) {
    const CodebookSpec spec(80, 6, 9, pp);
    const auto th = default_thresholds(spec, default_rn_constants(pp));
    const auto j = theorem4_rhs(spec, th, 5000, 2, OutageMode::Joint);
    const auto s = theorem4_rhs(spec, th, 5000, 2, OutageMode::Splitting);
    EXPECT_GE(s.value, j.value);
    EXPECT_GE(s.outage, j.outage);
    EXPECT_LE(j.outage, s.split_outage.sum());
    EXPECT_GE(j.outage, s.split_outage.maxCoeff());
    EXPECT_EQ(j.confusion, s.confusion);
  }
}

TEST(Theorem4, ConfusionTermsMatchReferenceSampling) {
  const long long n = 30;
  const PowerPair pp(0.5, 0.8);
  const CodebookSpec spec(n, 3, 3, pp);
  const Thresholds th{0.0, 0.5, 1.5};
  const RnConstants k{1.0, 1.0, 1.0};
  const auto b = theorem4_rhs(spec, th, 400000, 3, OutageMode::Joint, k);
  const double coef[3] = {1.0, 1.0, 2.0};
  const double lg[3] = {th.lg1, th.lg2, th.lg3};
  const int draws = 200000;
  for (int c = 0; c < 3; ++c) {
    const double q = naive_reference_confusion(c, n, pp, lg[c], draws, 20 + c);
    const double se = std::sqrt(q * (1 - q) / draws);
    EXPECT_NEAR(b.confusion(c) / coef[c], q, 5 * se) << c;
  }
}

TEST(Theorem4, BoundsSimulatedError) {
  for (const auto& [n, m1, m2, pp] :
       {std::tuple{60LL, 4LL, 4LL, PowerPair{0.1, 0.1}}, {150LL, 8LL, 3LL, PowerPair{0.2, 0.05}}}) {
    const CodebookSpec spec(n, m1, m2, pp);
    const auto th = default_thresholds(spec, default_rn_constants(pp));
    const auto k = exact_rn_constants(n, pp);
    const auto sim = simulate_mac(spec, th, 10000, 8);
    for (auto mode : {OutageMode::Joint, OutageMode::Splitting}) {
      const auto b = theorem4_rhs(spec, th, 20000, 9, mode, k);
      EXPECT_LE(sim.eps_hat, b.value + 2 * std::hypot(sim.std_err(), b.std_err)) << n << " " << to_string(mode);
    }
  }
}

TEST(Theorem4, DeterministicAcrossWorkerCounts) {
  const CodebookSpec spec(60, 4, 3, {0.5, 0.5});
  const auto th = default_thresholds(spec, default_rn_constants(spec.pp));
  set_worker_count(1);
  const auto a = theorem4_rhs(spec, th, 9000, 4, OutageMode::Joint);
  set_worker_count(4);
  const auto b = theorem4_rhs(spec, th, 9000, 4, OutageMode::Joint);
  set_worker_count(0);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_err, b.std_err);
}

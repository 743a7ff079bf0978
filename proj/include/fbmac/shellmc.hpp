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

// Power-shell inputs and the modified information densities they induce,
// plus numeric checks of the Gaussian approximation, the Radon-Nikodym
// bounds and the induced input/output densities.
//
// Information densities depend on the input and the noise only through
// inner products, so every sampler first draws the Gram matrix of the
// underlying Gaussian vectors (W1, [W2,] Z). SamplingMode::Direct builds the
// vectors; SamplingMode::Gram draws the Gram matrix from its Wishart law via
// the Bartlett decomposition, which has the same distribution at O(1) cost.

#include "fbmac/core.hpp"
#include "fbmac/gaussquad.hpp"
#include "fbmac/random.hpp"
#include "fbmac/stats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace fbmac {

enum class SamplingMode { Direct, Gram };

const char* to_string(SamplingMode m);

struct ShellSample {
  long long n;
  double p;
  Eigen::VectorXd x;  // ||x||^2 = n p
};

/// sqrt(n p) w / ||w|| with w standard normal.
ShellSample sample_shell(long long n, double p, RandomStream& rng);

/// n i.i.d. standard normals.
Eigen::VectorXd sample_noise(long long n, RandomStream& rng);

/// Gram matrix of k independent standard normal n-vectors (k = 2 or 3,
/// n >= k).
Eigen::MatrixXd gaussian_gram(long long n, int k, SamplingMode mode, RandomStream& rng);

/// nC(p) + [p(n - ||z||^2) + 2<x,z>] / (2(1+p)).
double info_density_p2p(const ShellSample& x, const Eigen::VectorXd& z);

/// The same density from its sufficient statistics <x,z> and ||z||^2.
double info_density_p2p(long long n, double p, double xz, double zz);

struct InfoDensityVector {
  double i1;  // user 1 given user 2
  double i2;  // user 2 given user 1
  double i3;  // both users

  Vector3d vector() const { return {i1, i2, i3}; }
};

InfoDensityVector info_density_vector_mac(const ShellSample& x1, const ShellSample& x2,
                                          const Eigen::VectorXd& z);

struct MacStatistics {
  double x1x2;
  double x1z;
  double x2z;
  double zz;
};

InfoDensityVector info_density_vector_mac(long long n, const PowerPair& pp, const MacStatistics& s);

/// One draw of the MAC statistics with shell inputs and unit noise.
MacStatistics draw_mac_statistics(long long n, const PowerPair& pp, SamplingMode mode,
                                  RandomStream& rng);

/// Sample mean and covariance of the information density vector divided by
/// sqrt(n).
struct InfoDensityMoments {
  long long n = 0;
  long long trials = 0;
  Vector3d mean = Vector3d::Zero();
  Matrix3d cov = Matrix3d::Zero();
};

InfoDensityMoments info_density_moments(long long n, const PowerPair& pp, long long trials,
                                        std::uint64_t seed, SamplingMode mode = SamplingMode::Gram);

/// Pr[i(X;Y) <= log_threshold] for a shell input, with a Wilson interval.
BinomialEstimate empirical_outage_p2p(long long n, double p, double log_threshold, long long trials,
                                      std::uint64_t seed, SamplingMode mode = SamplingMode::Gram);

/// Var<X1,X2> / (n p1 p2) for independent shell inputs, from direct draws.
struct InnerProductReport {
  long long n = 0;
  long long pairs = 0;
  double mean = 0.0;            // of <X1,X2> / (n sqrt(p1 p2))
  double variance_ratio = 0.0;  // Var<X1,X2> / (n p1 p2)
};

InnerProductReport inner_product_check(long long n, const PowerPair& pp, long long pairs,
                                       std::uint64_t seed);

// Gaussian approximation of a function of a sample mean. The P2P case uses
// U = (1 - Z^2, sqrt(P) W Z, W^2 - 1) and f(u) = P u1 + 2 u2 / sqrt(1 + u3);
// the MAC case the six-component U and three-component f built the same
// way. sqrt(n) f(mean U) is compared with N(0, J Cov(U) J^T).

enum class CltCase { P2P, MacJoint };

const char* to_string(CltCase c);

double clt_f_p2p(const Eigen::Vector3d& u, double p);
Eigen::Vector3d clt_f_mac(const Eigen::Matrix<double, 6, 1>& u, const PowerPair& pp);
Eigen::Matrix<double, 1, 3> clt_jacobian_p2p(double p);
Eigen::Matrix<double, 3, 6> clt_jacobian_mac(const PowerPair& pp);
Eigen::Matrix3d clt_u_covariance_p2p(double p);
Eigen::Matrix<double, 6, 6> clt_u_covariance_mac(const PowerPair& pp);

struct KsReport {
  long long n = 0;
  long long trials = 0;
  double ks_distance = 0.0;      // max over the margins
  std::vector<double> margin_ks;
  Eigen::VectorXd target_mean;
  Eigen::MatrixXd target_cov;
  Eigen::MatrixXd empirical_cov;
  double cov_rel_error = 0.0;    // Frobenius, relative to target_cov
};

/// P2P uses pp.p1.
KsReport clt_function_check(CltCase c, long long n, long long trials, std::uint64_t seed,
                            const PowerPair& pp = {1.0, 1.0}, SamplingMode mode = SamplingMode::Gram);

// Radon-Nikodym bounds.

/// Bound on ln Gamma(n/2) used for finite n, and its large-n limit ln sqrt(2 pi).
inline constexpr double kGammaConstantFinite = 2.0;
double gamma_constant_asymptotic();

/// Large-n exponent whose non-positivity bounds dP_Y/dQ_Y.
double rn_exponent_p2p(double t, double p);

/// Large-n exponent bounding dP_U/dQ_U; -inf outside the open hollow-sphere range.
double rn_exponent_mac(double t, const PowerPair& pp);

struct RnBoundReport {
  double max_value = 0.0;
  double argmax = 0.0;
  double expected_argmax = 0.0;  // 1 + P or P1 + P2
  double k_finite = 0.0;         // bound constant with c_Gamma = 2
  double k_asymptotic = 0.0;     // with c_Gamma = ln sqrt(2 pi)
};

/// Maximizes rn_exponent_p2p on (0, 20(1+p)] by a grid and golden-section search.
RnBoundReport rn_bound_p2p_check(double p, int t_grid_resolution = 4000);

/// Maximizes rn_exponent_mac on the open hollow-sphere range.
RnBoundReport rn_bound_mac_check(const PowerPair& pp, int t_grid_resolution = 4000);

/// e^{c_Gamma} P2 / sqrt(2 pi P1).
double k3_constant(const PowerPair& pp, double c_gamma = kGammaConstantFinite);

// Modified Bessel functions in the log domain.

/// ln I_nu(x) for nu >= 0, x >= 0.
double log_bessel_i(double nu, double x);

struct BesselBoundCheck {
  double log_lhs;  // ln(z^-k I_k(z))
  double log_rhs;
  bool holds;
};

BesselBoundCheck bessel_ratio_bound_check(int k, double z);

// Induced densities.

/// ln P_Y(y) at ||y|| = r for a shell input of power p and unit noise.
double log_shell_output_density(double r, long long n, double p);

/// ln dP_Y/dQ_Y at ||y|| = r, Q_Y = N(0, (1+p) I).
double log_rn_derivative_p2p(double r, long long n, double p);

/// ln P_U(u) at ||u||^2 = n t for U = X1 + X2 with independent shell inputs;
/// -inf outside the open hollow sphere. Requires n >= 4.
double sum_density(double t, long long n, const PowerPair& pp);

/// ln of the density of ||U||^2 / n at t.
double sum_radial_log_density(double t, long long n, const PowerPair& pp);

/// ln P_Y(y) at ||y|| = r for Y = X1 + X2 + Z with independent shell inputs.
double log_sum_output_density(double r, long long n, const PowerPair& pp);

/// ln sup_y dP_Y/dQ_Y for a shell input of power p, Q_Y = N(0, (1+p) I).
/// Tends to ln((1+p) / sqrt(1+2p)) as n grows.
double log_rn_sup_p2p(long long n, double p);

/// ln sup_y dP_Y/dQ_Y for the sum of two shell inputs plus noise,
/// Q_Y = N(0, (1+P1+P2) I).
double log_rn_sup_mac(long long n, const PowerPair& pp);

// Confusion probabilities under the reference output law.

/// Q_Y[i(x;Y) > log_gamma] by weighting channel draws with e^{-i}.
ProbEstimate confusion_probability_is(long long n, double p, double log_gamma, long long trials,
                                      std::uint64_t seed);

/// The same probability by sampling Y from Q_Y directly.
ProbEstimate confusion_probability_direct(long long n, double p, double log_gamma,
                                          long long trials, std::uint64_t seed);

struct ConfusionPoint {
  long long n;
  double log_gamma;  // nC - sqrt(nV)
  double product;    // gamma Q_Y[i > log gamma]
  double std_err;
};

/// gamma_n Q_Y[i > ln gamma_n] with ln gamma_n = nC - sqrt(nV), which decays
/// like n^{-1/2}.
std::vector<ConfusionPoint> confusion_scaling_check(const std::vector<long long>& n_list, double p,
                                                    long long trials, std::uint64_t seed);

}  // namespace fbmac

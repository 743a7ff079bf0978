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

// Second-order rate regions of the two-user Gaussian MAC, sampled along
// rays from the origin. Rates are in nats per channel use unless a
// boundary has been converted with to_units.

#include "fbmac/core.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fbmac {

enum class RegionKind {
  Joint,
  Splitting,
  IidGaussian,
  Gallager,
  Tdma,
  SuOuter,
  SumShellHypothetical,
  ConjecturedSumOuter,
  Pentagon,
};

enum class Units { Nats, Bits };

enum class DeltaRule { Zero, QuarterPower, Fixed };

const char* to_string(RegionKind k);
const char* to_string(Units u);
const char* to_string(DeltaRule r);
std::optional<RegionKind> parse_region_kind(const std::string& s);

/// True for curves that are conjectures rather than proven bounds.
bool is_conjectural(RegionKind k);

struct SplitWeights {
  double l1, l2, l3;

  SplitWeights(double a, double b, double c);
};

struct GallagerParams {
  double a;
  long long n;
  double eps;

  GallagerParams(double a_, long long n_, double eps_);
};

/// Every knob of every region kind; each kind reads only what it needs.
struct RegionSpec {
  SecondOrderParams so{500, 1e-3};
  PowerPair pp{1.0, 1.0};
  std::size_t num_points = 256;
  std::size_t samples = std::size_t{1} << 14;
  std::uint64_t seed = 0;
  int lambda_resolution = 64;
  double gallager_a = 1.0;
  DeltaRule delta_rule = DeltaRule::Zero;
  double delta = 0.0;  // used by DeltaRule::Fixed
  int alpha_grid = 200;
  int beta_grid = 200;
};

struct RegionBoundary {
  RegionKind kind;
  RegionSpec params;
  std::vector<RatePoint> points;  // r1 ascending, r2 non-increasing
  Units units = Units::Nats;
  bool empty = false;
  bool conjectural = false;
};

RegionBoundary to_units(const RegionBoundary& rb, Units units);

/// Ray angles (i + 1/2)/N * pi/2, i = 0..N-1.
std::vector<double> ray_angles(std::size_t num_points);

/// C(p) - sqrt(V(p)/n) Q^{-1}(eps), clamped at 0.
double p2p_second_order_rate(long long n, double eps, double p);

/// P(1 - delta) with delta chosen by the rule.
double iid_backoff_delta(DeltaRule rule, long long n, double fixed_delta);

/// Caps (R1, R2, R1+R2) of the outage-splitting region for one weight
/// choice. Penalties are clamped at 0 and caps at 0; a zero weight gives a
/// zero cap.
Vector3d splitting_caps(const SecondOrderParams& so, const PowerPair& pp, const SplitWeights& w);

/// TDMA rate pair for time share alpha and error split beta.
RatePoint tdma_rates(const SecondOrderParams& so, const PowerPair& pp, double alpha, double beta);

// Gallager truncated-Gaussian exponents, in nats.

struct ExponentValue {
  double value;
  bool above_capacity;
};

double gallager_individual_critical_rate(double p);
double gallager_individual_high_branch(double r, double p);
double gallager_individual_low_branch(double r, double p);
ExponentValue gallager_individual_exponent(double r, double p);

double gallager_sum_critical_rate(double ps);
double gallager_sum_rho(double rs, double ps);
double gallager_sum_high_branch(double rs, double ps);
double gallager_sum_low_branch(double rs, double ps);
ExponentValue gallager_sum_exponent(double rs, double ps);

/// Natural log of a n e^{-n E1(r1)} + a n e^{-n E2(r2)} + a n^2 e^{-n E3(r1+r2)}.
double gallager_log_error_bound(const GallagerParams& gp, const PowerPair& pp, double r1, double r2);

/// Boundary point of the given region kind on the ray at angle theta.
/// Gallager rays with an empty region return (0, 0).
RatePoint region_ray(const RegionSpec& spec, RegionKind kind, double theta);

RegionBoundary region_boundary(const RegionSpec& spec, RegionKind kind);

RegionBoundary joint_outage_boundary(long long n, double eps, const PowerPair& pp,
                                     std::size_t num_points, std::size_t samples, std::uint64_t seed);
RegionBoundary outage_splitting_boundary(long long n, double eps, const PowerPair& pp,
                                         int lambda_resolution, std::size_t num_points);
RegionBoundary iid_gaussian_boundary(long long n, double eps, const PowerPair& pp, DeltaRule rule,
                                     double fixed_delta, std::size_t num_points,
                                     std::size_t samples, std::uint64_t seed);
RegionBoundary gallager_boundary(const GallagerParams& gp, const PowerPair& pp,
                                 std::size_t num_points);
RegionBoundary tdma_boundary(long long n, double eps, const PowerPair& pp, int alpha_grid,
                             int beta_grid, std::size_t num_points);
RegionBoundary su_outer_box(long long n, double eps, const PowerPair& pp, std::size_t num_points);
RegionBoundary sumshell_hypothetical_boundary(long long n, double eps, const PowerPair& pp,
                                              std::size_t num_points, std::size_t samples,
                                              std::uint64_t seed);
RegionBoundary conjectured_sum_outer_boundary(long long n, double eps, const PowerPair& pp,
                                              std::size_t num_points);
RegionBoundary pentagon_boundary(const PowerPair& pp, std::size_t num_points);

/// Radial distance of the boundary along the ray at angle theta, by linear
/// interpolation in angle between the sampled points.
double boundary_radius(const RegionBoundary& rb, double theta);

}  // namespace fbmac

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

#include "fbmac/regions.hpp"

#include "fbmac/gaussquad.hpp"
#include "fbmac/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace fbmac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_q_inv(double eps) {
  if (eps <= 0.0) return kInf;
  if (eps >= 1.0) return -kInf;
  return q_inv_scalar(eps);
}

// Cap with penalty clamped at zero; infinite penalty gives a zero cap.
double clamped_cap(double c, double v, long long n, double eps) {
  const double q = safe_q_inv(eps);
  if (q == kInf) return 0.0;
  const double penalty = std::sqrt(v / static_cast<double>(n)) * std::max(0.0, q);
  return std::max(0.0, c - penalty);
}

// Largest t with t*(c, s) inside the polytope {R1 <= a1, R2 <= a2, R1+R2 <= a3}.
double polytope_ray(const Vector3d& caps, double c, double s) {
  double t = kInf;
  if (c > 0) t = std::min(t, caps(0) / c);
  if (s > 0) t = std::min(t, caps(1) / s);
  t = std::min(t, caps(2) / (c + s));
  return std::max(0.0, t);
}

Vector3d pentagon_caps(const PowerPair& pp) { return capacity_vector(pp).vector(); }

Vector3d su_box_caps(const SecondOrderParams& so, const PowerPair& pp) {
  const double q = q_inv_scalar(so.eps);
  const double rn = std::sqrt(static_cast<double>(so.n));
  return {std::max(0.0, capacity(pp.p1) - std::sqrt(dispersion(pp.p1)) / rn * q),
          std::max(0.0, capacity(pp.p2) - std::sqrt(dispersion(pp.p2)) / rn * q), kInf};
}

Vector3d conjectured_caps(const SecondOrderParams& so, const PowerPair& pp) {
  Vector3d caps = su_box_caps(so, pp);
  const double ps = pp.sum();
  caps(2) = std::max(0.0, capacity(ps) - std::sqrt(dispersion(ps) / static_cast<double>(so.n)) *
                                             q_inv_scalar(so.eps));
  return caps;
}

std::vector<Vector3d> splitting_grid(const SecondOrderParams& so, const PowerPair& pp, int res) {
  if (res < 4) throw std::domain_error("splitting: lambda resolution must be >= 4");
  std::vector<Vector3d> out;
  for (int i = 1; i < res; ++i)
    for (int j = 1; i + j < res; ++j) {
      const int k = res - i - j;
      out.push_back(splitting_caps(
          so, pp, SplitWeights(double(i) / res, double(j) / res, double(k) / res)));
    }
  return out;
}

std::vector<RatePoint> tdma_grid(const SecondOrderParams& so, const PowerPair& pp, int na, int nb) {
  if (na < 1 || nb < 1) throw std::domain_error("tdma: grids must be non-empty");
  std::vector<RatePoint> out;
  out.reserve(static_cast<std::size_t>(na) * nb);
  for (int i = 1; i <= na; ++i)
    for (int j = 1; j <= nb; ++j)
      out.push_back(tdma_rates(so, pp, double(i) / (na + 1), double(j) / (nb + 1)));
  return out;
}

struct QuantileSetup {
  Vector3d c;
  Matrix3d v;
};

QuantileSetup quantile_setup(const RegionSpec& spec, RegionKind kind) {
  switch (kind) {
    case RegionKind::Joint:
      return {pentagon_caps(spec.pp), dispersion_matrix_shell(spec.pp).entries};
    case RegionKind::SumShellHypothetical:
      return {pentagon_caps(spec.pp), dispersion_matrix_sumshell(spec.pp).entries};
    case RegionKind::IidGaussian: {
      const double d = iid_backoff_delta(spec.delta_rule, spec.so.n, spec.delta);
      const PowerPair bar{spec.pp.p1 * (1.0 - d), spec.pp.p2 * (1.0 - d)};
      return {pentagon_caps(bar), dispersion_matrix_iid(bar).entries};
    }
    default:
      throw std::logic_error("quantile_setup: not a quantile-set region");
  }
}

bool is_quantile_kind(RegionKind k) {
  return k == RegionKind::Joint || k == RegionKind::SumShellHypothetical ||
         k == RegionKind::IidGaussian;
}

double quantile_ray(const QuantileSetup& qs, const OrthantIntegrator& integ, long long n,
                    double eps, double c, double s) {
  const double rn = std::sqrt(static_cast<double>(n));
  const Vector3d anchor = rn * qs.c;
  const Vector3d dir = rn * Vector3d(c, s, c + s);
  // Union bound and marginal necessity bracket the crossing: meeting each
  // marginal at eps/3 is sufficient, meeting each at eps is necessary.
  auto caps_at = [&](double e) {
    const double q = q_inv_scalar(e) / rn;
    return Vector3d(qs.c(0) - std::sqrt(qs.v(0, 0)) * q, qs.c(1) - std::sqrt(qs.v(1, 1)) * q,
                    qs.c(2) - std::sqrt(qs.v(2, 2)) * q);
  };
  auto ray = [&](const Vector3d& caps) {
    double t = caps(2) / (c + s);
    if (c > 0) t = std::min(t, caps(0) / c);
    if (s > 0) t = std::min(t, caps(1) / s);
    return t;
  };
  const double lo = ray(caps_at(eps / 3.0));
  const double hi = ray(caps_at(eps));
  return std::max(0.0, boundary_backoff(eps, integ, anchor, dir, 1e-6, lo, hi + 1e-9));
}

double gallager_ray(const RegionSpec& spec, double c, double s) {
  const GallagerParams gp(spec.gallager_a, spec.so.n, spec.so.eps);
  const double log_eps = std::log(gp.eps);
  auto ok = [&](double t) { return gallager_log_error_bound(gp, spec.pp, t * c, t * s) <= log_eps; };
  const double tmax = polytope_ray(pentagon_caps(spec.pp), c, s);
  if (!ok(0.0)) return -1.0;
  if (ok(tmax)) return tmax;
  double lo = 0.0, hi = tmax;
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

// Per-boundary precomputation shared by all rays.
struct RayContext {
  RegionSpec spec;
  RegionKind kind;
  std::optional<QuantileSetup> qs;
  std::unique_ptr<OrthantIntegrator> integ;
  std::vector<Vector3d> polytopes;
  std::vector<RatePoint> rectangles;

  RayContext(const RegionSpec& s, RegionKind k) : spec(s), kind(k) {
    if (spec.num_points < 1) throw std::domain_error("region: need at least one ray");
    if (is_quantile_kind(kind)) {
      qs = quantile_setup(spec, kind);
      integ = std::make_unique<OrthantIntegrator>(qs->v, spec.samples, spec.seed);
    } else if (kind == RegionKind::Splitting) {
      polytopes = splitting_grid(spec.so, spec.pp, spec.lambda_resolution);
    } else if (kind == RegionKind::Tdma) {
      rectangles = tdma_grid(spec.so, spec.pp, spec.alpha_grid, spec.beta_grid);
    } else if (kind == RegionKind::SuOuter) {
      polytopes = {su_box_caps(spec.so, spec.pp)};
    } else if (kind == RegionKind::ConjecturedSumOuter) {
      polytopes = {conjectured_caps(spec.so, spec.pp)};
    } else if (kind == RegionKind::Pentagon) {
      polytopes = {pentagon_caps(spec.pp)};
    }
  }

  // Radius along the ray; negative means the region is empty.
  double radius(double theta) const {
    const double c = std::cos(theta), s = std::sin(theta);
    if (qs) return quantile_ray(*qs, *integ, spec.so.n, spec.so.eps, c, s);
    if (kind == RegionKind::Gallager) return gallager_ray(spec, c, s);
    if (kind == RegionKind::Tdma) {
      double best = 0.0;
      for (const auto& r : rectangles) {
        double t = kInf;
        if (c > 0) t = std::min(t, r.r1 / c);
        if (s > 0) t = std::min(t, r.r2 / s);
        best = std::max(best, t);
      }
      return best;
    }
    double best = 0.0;
    for (const auto& caps : polytopes) best = std::max(best, polytope_ray(caps, c, s));
    return best;
  }
};

}  // namespace

const char* to_string(RegionKind k) {
  switch (k) {
    case RegionKind::Joint: return "joint";
    case RegionKind::Splitting: return "splitting";
    case RegionKind::IidGaussian: return "iid";
    case RegionKind::Gallager: return "gallager";
    case RegionKind::Tdma: return "tdma";
    case RegionKind::SuOuter: return "su-outer";
    case RegionKind::SumShellHypothetical: return "sumshell";
    case RegionKind::ConjecturedSumOuter: return "conjectured-sum-outer";
    case RegionKind::Pentagon: return "pentagon";
  }
  return "?";
}

const char* to_string(Units u) { return u == Units::Nats ? "nats" : "bits"; }

const char* to_string(DeltaRule r) {
  switch (r) {
    case DeltaRule::Zero: return "zero";
    case DeltaRule::QuarterPower: return "quarter-power";
    case DeltaRule::Fixed: return "fixed";
  }
  return "?";
}

std::optional<RegionKind> parse_region_kind(const std::string& s) {
  for (auto k : {RegionKind::Joint, RegionKind::Splitting, RegionKind::IidGaussian,
                 RegionKind::Gallager, RegionKind::Tdma, RegionKind::SuOuter,
                 RegionKind::SumShellHypothetical, RegionKind::ConjecturedSumOuter,
                 RegionKind::Pentagon})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

bool is_conjectural(RegionKind k) {
  return k == RegionKind::SumShellHypothetical || k == RegionKind::ConjecturedSumOuter;
}

SplitWeights::SplitWeights(double a, double b, double c) : l1(a), l2(b), l3(c) {
  if (!(a >= 0 && b >= 0 && c >= 0)) throw std::domain_error("SplitWeights: weights must be >= 0");
  if (std::abs(a + b + c - 1.0) > 1e-12) throw std::domain_error("SplitWeights: weights must sum to 1");
}

GallagerParams::GallagerParams(double a_, long long n_, double eps_) : a(a_), n(n_), eps(eps_) {
  if (!(a > 0) || !std::isfinite(a)) throw std::domain_error("GallagerParams: a must be > 0");
  SecondOrderParams(n, eps);
}

RegionBoundary to_units(const RegionBoundary& rb, Units units) {
  RegionBoundary out = rb;
  if (rb.units == units) return out;
  for (auto& p : out.points) {
    if (units == Units::Bits) {
      p.r1 = nats_to_bits(p.r1);
      p.r2 = nats_to_bits(p.r2);
    } else {
      p.r1 = bits_to_nats(p.r1);
      p.r2 = bits_to_nats(p.r2);
    }
  }
  out.units = units;
  return out;
}

std::vector<double> ray_angles(std::size_t num_points) {
  std::vector<double> out(num_points);
  for (std::size_t i = 0; i < num_points; ++i)
    out[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(num_points) * std::numbers::pi / 2;
  return out;
}

double p2p_second_order_rate(long long n, double eps, double p) {
  const SecondOrderParams so(n, eps);
  if (!(p > 0)) throw std::domain_error("p2p_second_order_rate: p must be > 0");
  return std::max(0.0, capacity(p) - std::sqrt(dispersion(p) / static_cast<double>(so.n)) *
                                         q_inv_scalar(so.eps));
}

double iid_backoff_delta(DeltaRule rule, long long n, double fixed_delta) {
  double d = 0.0;
  switch (rule) {
    case DeltaRule::Zero: d = 0.0; break;
    case DeltaRule::QuarterPower: d = std::pow(static_cast<double>(n), -0.25); break;
    case DeltaRule::Fixed: d = fixed_delta; break;
  }
  if (!(d >= 0.0) || d >= 1.0) throw std::domain_error("iid region: delta must lie in [0, 1)");
  return d;
}

Vector3d splitting_caps(const SecondOrderParams& so, const PowerPair& pp, const SplitWeights& w) {
  const double ps = pp.sum();
  return {clamped_cap(capacity(pp.p1), dispersion(pp.p1), so.n, w.l1 * so.eps),
          clamped_cap(capacity(pp.p2), dispersion(pp.p2), so.n, w.l2 * so.eps),
          clamped_cap(capacity(ps), dispersion(ps) + inner_product_dispersion(pp), so.n,
                      w.l3 * so.eps)};
}

RatePoint tdma_rates(const SecondOrderParams& so, const PowerPair& pp, double alpha, double beta) {
  if (!(alpha >= 0 && alpha <= 1 && beta >= 0 && beta <= 1))
    throw std::domain_error("tdma_rates: alpha and beta must lie in [0, 1]");
  const double n = static_cast<double>(so.n);
  auto slot = [&](double share, double p, double err) {
    if (share <= 0.0) return 0.0;
    const double q = safe_q_inv(err);
    if (q == kInf) return 0.0;
    const double ps = p / share;
    return std::max(0.0, share * capacity(ps) - std::sqrt(share * dispersion(ps) / n) * q);
  };
  const double e1 = beta * so.eps;
  const double e2 = (1.0 - beta) * so.eps / (1.0 - beta * so.eps);
  return {slot(alpha, pp.p1, e1), slot(1.0 - alpha, pp.p2, e2)};
}

double gallager_individual_critical_rate(double p) {
  return 0.5 * std::log((2.0 + p + std::sqrt(4.0 + p * p)) / 4.0);
}

double gallager_individual_high_branch(double r, double p) {
  const double xm1 = std::expm1(2.0 * r);
  const double x = xm1 + 1.0;
  double alpha;
  if (xm1 <= 0.0) {
    alpha = 0.0;
  } else {
    alpha = p * xm1 / 2.0 * (std::sqrt(1.0 + 4.0 * x / (p * xm1)) - 1.0);
  }
  return (p - alpha) / (2.0 * x) + 0.5 * std::log(x - alpha);
}

double gallager_individual_low_branch(double r, double p) {
  const double beta = 0.5 * (1.0 + p / 2.0 + std::sqrt(1.0 + p * p / 4.0));
  return (1.0 - beta + p / 2.0) + 0.5 * std::log(beta * (beta - p / 2.0)) - r;
}

ExponentValue gallager_individual_exponent(double r, double p) {
  if (!(r >= 0)) throw std::domain_error("gallager_individual_exponent: rate must be >= 0");
  if (!(p > 0)) throw std::domain_error("gallager_individual_exponent: p must be > 0");
  if (r > capacity(p)) return {0.0, true};
  const double e = r >= gallager_individual_critical_rate(p) ? gallager_individual_high_branch(r, p)
                                                             : gallager_individual_low_branch(r, p);
  return {std::max(0.0, e), false};
}

double gallager_sum_critical_rate(double ps) {
  return 0.5 * std::log(0.5 * (1.0 + ps / 4.0 + std::sqrt(1.0 + ps / 2.0 + ps * ps / 4.0)));
}

double gallager_sum_rho(double rs, double ps) {
  const double x = std::exp(2.0 * rs);
  const double inner =
      0.5 + 2.0 * x / ps - 0.5 * std::sqrt(1.0 + 8.0 * x / ps + 16.0 * x / (ps * ps));
  return 1.0 / std::sqrt(inner) - 1.0;
}

double gallager_sum_high_branch(double rs, double ps) {
  const double rho = gallager_sum_rho(rs, ps);
  const double a = 1.0 + rho;
  const double theta1 = (a - ps) / 2.0 + 0.5 * std::sqrt(ps * ps + 2.0 * ps + a * a);
  return (a - theta1) + std::log(theta1 / a);
}

double gallager_sum_low_branch(double rs, double ps) {
  const double theta2 = 1.0 - ps / 2.0 + 0.5 * std::sqrt(ps * ps + 2.0 * ps + 4.0);
  return (2.0 - theta2) + std::log(theta2 / 2.0) + gallager_sum_critical_rate(ps) - rs;
}

ExponentValue gallager_sum_exponent(double rs, double ps) {
  if (!(rs >= 0)) throw std::domain_error("gallager_sum_exponent: rate must be >= 0");
  if (!(ps > 0)) throw std::domain_error("gallager_sum_exponent: ps must be > 0");
  if (rs > capacity(ps)) return {0.0, true};
  const double e = rs >= gallager_sum_critical_rate(ps) ? gallager_sum_high_branch(rs, ps)
                                                        : gallager_sum_low_branch(rs, ps);
  return {std::max(0.0, e), false};
}

double gallager_log_error_bound(const GallagerParams& gp, const PowerPair& pp, double r1, double r2) {
  const double n = static_cast<double>(gp.n);
  const double la = std::log(gp.a), ln = std::log(n);
  const double t1 = la + ln - n * gallager_individual_exponent(r1, pp.p1).value;
  const double t2 = la + ln - n * gallager_individual_exponent(r2, pp.p2).value;
  const double t3 = la + 2.0 * ln - n * gallager_sum_exponent(r1 + r2, pp.sum()).value;
  const double m = std::max({t1, t2, t3});
  return m + std::log(std::exp(t1 - m) + std::exp(t2 - m) + std::exp(t3 - m));
}

RatePoint region_ray(const RegionSpec& spec, RegionKind kind, double theta) {
  const RayContext ctx(spec, kind);
  const double t = std::max(0.0, ctx.radius(theta));
  return {t * std::cos(theta), t * std::sin(theta)};
}

RegionBoundary region_boundary(const RegionSpec& spec, RegionKind kind) {
  const RayContext ctx(spec, kind);
  const auto theta = ray_angles(spec.num_points);
  std::vector<double> radius(theta.size());
  parallel_for(theta.size(), [&](std::size_t i) { radius[i] = ctx.radius(theta[i]); });

  RegionBoundary rb{kind, spec, {}, Units::Nats, false, is_conjectural(kind)};
  if (kind == RegionKind::Gallager &&
      std::all_of(radius.begin(), radius.end(), [](double r) { return r < 0; })) {
    rb.empty = true;
    return rb;
  }
  // Largest angle first so that r1 ascends.
  rb.points.reserve(theta.size());
  for (std::size_t k = theta.size(); k-- > 0;) {
    const double t = std::max(0.0, radius[k]);
    rb.points.push_back({t * std::cos(theta[k]), t * std::sin(theta[k])});
  }
  // Every region is downward closed, so its boundary is a monotone staircase.
  // Root-finder tolerance can break ties at the last few ulps along flat
  // edges; take the monotone envelope.
  for (std::size_t k = 1; k < rb.points.size(); ++k) {
    rb.points[k].r1 = std::max(rb.points[k].r1, rb.points[k - 1].r1);
  }
  for (std::size_t k = rb.points.size(); k-- > 1;) {
    rb.points[k - 1].r2 = std::max(rb.points[k - 1].r2, rb.points[k].r2);
  }
  return rb;
}

namespace {

RegionSpec make_spec(long long n, double eps, const PowerPair& pp, std::size_t num_points) {
  RegionSpec s;
  s.so = SecondOrderParams(n, eps);
  s.pp = pp;
  s.num_points = num_points;
  return s;
}

}  // namespace

RegionBoundary joint_outage_boundary(long long n, double eps, const PowerPair& pp,
                                     std::size_t num_points, std::size_t samples, std::uint64_t seed) {
  if (num_points < 8) throw std::domain_error("joint_outage_boundary: need at least 8 rays");
  RegionSpec s = make_spec(n, eps, pp, num_points);
  s.samples = samples;
  s.seed = seed;
  return region_boundary(s, RegionKind::Joint);
}

RegionBoundary outage_splitting_boundary(long long n, double eps, const PowerPair& pp,
                                         int lambda_resolution, std::size_t num_points) {
  RegionSpec s = make_spec(n, eps, pp, num_points);
  s.lambda_resolution = lambda_resolution;
  return region_boundary(s, RegionKind::Splitting);
}

RegionBoundary iid_gaussian_boundary(long long n, double eps, const PowerPair& pp, DeltaRule rule,
                                     double fixed_delta, std::size_t num_points,
                                     std::size_t samples, std::uint64_t seed) {
  RegionSpec s = make_spec(n, eps, pp, num_points);
  s.delta_rule = rule;
  s.delta = fixed_delta;
  s.samples = samples;
  s.seed = seed;
  return region_boundary(s, RegionKind::IidGaussian);
}

RegionBoundary gallager_boundary(const GallagerParams& gp, const PowerPair& pp,
                                 std::size_t num_points) {
  RegionSpec s = make_spec(gp.n, gp.eps, pp, num_points);
  s.gallager_a = gp.a;
  return region_boundary(s, RegionKind::Gallager);
}

RegionBoundary tdma_boundary(long long n, double eps, const PowerPair& pp, int alpha_grid,
                             int beta_grid, std::size_t num_points) {
  RegionSpec s = make_spec(n, eps, pp, num_points);
  s.alpha_grid = alpha_grid;
  s.beta_grid = beta_grid;
  return region_boundary(s, RegionKind::Tdma);
}

RegionBoundary su_outer_box(long long n, double eps, const PowerPair& pp, std::size_t num_points) {
  return region_boundary(make_spec(n, eps, pp, num_points), RegionKind::SuOuter);
}

RegionBoundary sumshell_hypothetical_boundary(long long n, double eps, const PowerPair& pp,
                                              std::size_t num_points, std::size_t samples,
                                              std::uint64_t seed) {
  RegionSpec s = make_spec(n, eps, pp, num_points);
  s.samples = samples;
  s.seed = seed;
  return region_boundary(s, RegionKind::SumShellHypothetical);
}

RegionBoundary conjectured_sum_outer_boundary(long long n, double eps, const PowerPair& pp,
                                              std::size_t num_points) {
  return region_boundary(make_spec(n, eps, pp, num_points), RegionKind::ConjecturedSumOuter);
}

RegionBoundary pentagon_boundary(const PowerPair& pp, std::size_t num_points) {
  RegionSpec s;
  s.pp = pp;
  s.num_points = num_points;
  return region_boundary(s, RegionKind::Pentagon);
}

double boundary_radius(const RegionBoundary& rb, double theta) {
  if (rb.points.empty()) return 0.0;
  std::vector<std::pair<double, double>> polar;
  polar.reserve(rb.points.size());
  for (const auto& p : rb.points) polar.emplace_back(std::atan2(p.r2, p.r1), std::hypot(p.r1, p.r2));
  std::sort(polar.begin(), polar.end());
  if (theta <= polar.front().first) return polar.front().second;
  if (theta >= polar.back().first) return polar.back().second;
  const auto it = std::lower_bound(polar.begin(), polar.end(), std::pair{theta, -kInf});
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (theta - lo.first) / (hi.first - lo.first);
  return lo.second + w * (hi.second - lo.second);
}

}  // namespace fbmac

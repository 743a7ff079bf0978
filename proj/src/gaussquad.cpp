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

#include "fbmac/gaussquad.hpp"

#include "fbmac/parallel.hpp"
#include "fbmac/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

namespace fbmac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <std::size_t N>
double horner(const std::array<double, N>& c, double x) {
  double acc = c[N - 1];
  for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + c[i];
  return acc;
}

// Wichura, AS 241 (PPND16).
constexpr std::array<double, 8> kA = {
    3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
    1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
    3.3430575583588128105e+4, 2.5090809287301226727e+3};
constexpr std::array<double, 8> kB = {
    1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2, 5.3941960214247511077e+3,
    2.1213794301586595867e+4, 3.9307895800092710610e+4, 2.8729085735721942674e+4,
    5.2264952788528545610e+3};
constexpr std::array<double, 8> kC = {
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4};
constexpr std::array<double, 8> kD = {
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9};
constexpr std::array<double, 8> kE = {
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr std::array<double, 8> kF = {
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15};

Matrix3d floor_covariance(const Matrix3d& sigma) {
  if (!sigma.allFinite()) throw std::domain_error("orthant: covariance is not finite");
  const double scale = 1.0 + sigma.cwiseAbs().maxCoeff();
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::domain_error("orthant: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix3d> es(sigma);
  const double trace = sigma.trace();
  if (!(trace > 0)) throw std::domain_error("orthant: covariance has zero trace");
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, trace))
    throw std::domain_error("orthant: covariance is not positive semidefinite");
  const Vector3d lam = es.eigenvalues().cwiseMax(1e-12 * trace);
  Matrix3d out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

std::size_t fibonacci_at_most(std::size_t n, std::size_t* previous) {
  std::size_t a = 1, b = 2;
  while (a + b <= n) {
    const std::size_t c = a + b;
    a = b;
    b = c;
  }
  *previous = a;
  return b;
}

double clamp_open(double p) {
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

}  // namespace

double q_scalar(double x) {
  if (std::isnan(x)) throw std::domain_error("q_scalar: NaN argument");
  return 0.5 * std::erfc(x * std::numbers::sqrt2 * 0.5);
}

double phi_inv(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * horner(kA, r) / horner(kB, r);
  }
  double r = std::sqrt(-std::log(q < 0 ? p : 1.0 - p));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = horner(kC, r) / horner(kD, r);
  } else {
    r -= 5.0;
    x = horner(kE, r) / horner(kF, r);
  }
  return q < 0 ? -x : x;
}

double q_inv_scalar(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("q_inv_scalar: eps must lie in (0, 1)");
  double x = -phi_inv(eps);
  // One Halley step on Q(x) = eps.
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  const double e = (q_scalar(x) - eps) / pdf;
  x += e / (1.0 - 0.5 * x * e);
  return x;
}

OrthantIntegrator::OrthantIntegrator(const Matrix3d& sigma, std::size_t samples,
                                     std::uint64_t seed)
    : sigma_(floor_covariance(sigma)) {
  if (samples < 1000) throw std::domain_error("orthant: need at least 1000 samples");
  std::size_t gen = 0;
  points_per_replicate_ = fibonacci_at_most(samples / kOrthantReplicates, &gen);
  const std::size_t n = points_per_replicate_;
  w1_.resize(n * kOrthantReplicates);
  w2_.resize(n * kOrthantReplicates);
  const auto tent = [](double u) { return 1.0 - std::abs(2.0 * u - 1.0); };
  for (int r = 0; r < kOrthantReplicates; ++r) {
    RandomStream rng(seed, 0x6f7274686e74ULL, static_cast<std::uint64_t>(r));
    const double s1 = rng.uniform();
    const double s2 = rng.uniform();
    for (std::size_t k = 0; k < n; ++k) {
      const double u1 = static_cast<double>(k) / static_cast<double>(n) + s1;
      const double u2 = static_cast<double>((k * gen) % n) / static_cast<double>(n) + s2;
      w1_[r * n + k] = tent(u1 - std::floor(u1));
      w2_[r * n + k] = tent(u2 - std::floor(u2));
    }
  }
}

namespace {

// One linear constraint coef * u_k <= offset - sum_{l<k} row[l] * y_l on
// the k-th standardized variable.
struct Constraint {
  std::array<double, 3> row{};
  double z = 0.0;
};

struct VariableBounds {
  std::array<Constraint, 3> cons{};
  int count = 0;
};

// Feasible interval of u_k given the earlier draws.
inline void bounds_for(const VariableBounds& vb, int k, const double* y, double* lb, double* ub) {
  double lo = -kInf, hi = kInf;
  for (int c = 0; c < vb.count; ++c) {
    const Constraint& con = vb.cons[c];
    double off = con.z;
    for (int l = 0; l < k; ++l) off -= con.row[l] * y[l];
    const double a = con.row[k];
    if (a > 0)
      hi = std::min(hi, off / a);
    else
      lo = std::max(lo, off / a);
  }
  *lb = lo;
  *ub = hi;
}

// Pr[lb < N(0,1) < ub], accurate in both tails.
inline double interval_mass(double lb, double ub) {
  if (!(ub > lb)) return 0.0;
  if (lb > 0) return q_scalar(lb) - q_scalar(ub);
  return phi_cdf(ub) - phi_cdf(lb);
}

// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

// Draw from N(0,1) truncated to (lb, ub) by inversion at level w.
inline double truncated_draw(double lb, double ub, double w) {
  if (lb > 0) {
    const double ql = q_scalar(lb), qu = q_scalar(ub);
    return -phi_inv(clamp_open(ql - w * (ql - qu)));
  }
  const double pl = phi_cdf(lb), pu = phi_cdf(ub);
  return phi_inv(clamp_open(pl + w * (pu - pl)));
}

}  // namespace

ProbEstimate OrthantIntegrator::operator()(const Vector3d& z) const {
  ProbEstimate out;
  out.samples = samples();
  if (z.array().isNaN().any()) throw std::domain_error("orthant: NaN threshold");
  if ((z.array() == -kInf).any()) return out;

  std::array<int, 3> idx{};
  int m = 0;
  for (int i = 0; i < 3; ++i)
    if (std::isfinite(z(i))) idx[m++] = i;
  if (m == 0) {
    out.value = 1.0;
    return out;
  }

  // Pivoted Cholesky on the active block. Each pivot is the remaining
  // coordinate with the smallest conditional truncation probability, with
  // earlier variables replaced by their truncated means. Directions whose
  // conditional variance is below the flooring scale are treated as exactly
  // degenerate.
  const double trace = sigma_.trace();
  const double rank_tol = 1e-9 * trace;
  std::array<std::array<double, 3>, 3> l{};
  std::array<double, 3> cond{};
  std::array<double, 3> mean_y{};
  for (int i = 0; i < m; ++i) cond[i] = sigma_(idx[i], idx[i]);
  int rank = 0;
  for (int k = 0; k < m; ++k) {
    int best = -1;
    double best_score = kInf;
    for (int j = k; j < m; ++j) {
      if (cond[j] <= rank_tol) continue;
      double shift = 0.0;
      for (int c = 0; c < k; ++c) shift += l[j][c] * mean_y[c];
      const double score = (z(idx[j]) - shift) / std::sqrt(cond[j]);
      if (best < 0 || score < best_score) {
        best = j;
        best_score = score;
      }
    }
    if (best < 0) break;
    std::swap(idx[k], idx[best]);
    std::swap(cond[k], cond[best]);
    std::swap(l[k], l[best]);
    l[k][k] = std::sqrt(cond[k]);
    for (int i = k + 1; i < m; ++i) {
      double v = sigma_(idx[i], idx[k]);
      for (int c = 0; c < k; ++c) v -= l[i][c] * l[k][c];
      l[i][k] = v / l[k][k];
      cond[i] -= l[i][k] * l[i][k];
    }
    // Mean of a standard normal truncated to (-inf, b].
    const double b = best_score;
    const double mass = phi_cdf(b);
    mean_y[k] = mass > 1e-300 ? -std::exp(-0.5 * b * b) / std::sqrt(2.0 * std::numbers::pi) / mass : b;
    ++rank;
  }

  // Attach each row to the last standardized variable it depends on.
  std::array<VariableBounds, 3> vars{};
  for (int i = 0; i < m; ++i) {
    const double scale = std::sqrt(sigma_(idx[i], idx[i]));
    int last = -1;
    for (int c = 0; c < rank; ++c)
      if (std::abs(l[i][c]) > 1e-12 * scale) last = c;
    if (last < 0) {
      if (z(idx[i]) < 0) return out;
      continue;
    }
    Constraint con;
    for (int c = 0; c < rank; ++c) con.row[c] = c <= last ? l[i][c] : 0.0;
    con.z = z(idx[i]);
    auto& vb = vars[last];
    vb.cons[vb.count++] = con;
  }

  double y[3] = {0, 0, 0};
  double lb, ub;
  bounds_for(vars[0], 0, y, &lb, &ub);
  const double e1 = interval_mass(lb, ub);
  if (rank == 1 || e1 == 0.0) {
    out.value = e1;
    return out;
  }
  const double lb1 = lb, ub1 = ub;

  const std::size_t n = points_per_replicate_;
  std::array<double, kOrthantReplicates> means{};
  parallel_for(kOrthantReplicates, [&](std::size_t r) {
    const double* w1 = w1_.data() + r * n;
    const double* w2 = w2_.data() + r * n;
    CompensatedSum acc;
    double yy[3] = {0, 0, 0};
    double lo, hi;
    for (std::size_t k = 0; k < n; ++k) {
      yy[0] = truncated_draw(lb1, ub1, w1[k]);
      bounds_for(vars[1], 1, yy, &lo, &hi);
      const double e2 = interval_mass(lo, hi);
      if (rank == 2 || e2 == 0.0) {
        acc.add(e2);
        continue;
      }
      yy[1] = truncated_draw(lo, hi, w2[k]);
      bounds_for(vars[2], 2, yy, &lo, &hi);
      acc.add(e2 * interval_mass(lo, hi));
    }
    means[r] = e1 * acc.value() / static_cast<double>(n);
  });

  double mean = 0.0;
  for (double v : means) mean += v;
  mean /= kOrthantReplicates;
  double ss = 0.0;
  for (double v : means) ss += (v - mean) * (v - mean);
  out.value = std::clamp(mean, 0.0, 1.0);
  out.std_err = std::sqrt(ss / (kOrthantReplicates - 1) / kOrthantReplicates);
  return out;
}

ProbEstimate lower_orthant_prob(const OrthantQuery& q, std::size_t samples, std::uint64_t seed) {
  return OrthantIntegrator(q.sigma, samples, seed)(q.z);
}

bool quantile_set_member(double eps, const Matrix3d& sigma, const Vector3d& z,
                         std::size_t samples, std::uint64_t seed) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("quantile_set_member: eps out of (0, 1)");
  return lower_orthant_prob({sigma, z}, samples, seed).value >= 1.0 - eps;
}

namespace {

// Root of a monotone function g on the real line, starting from the
// bracket [0, width] and expanding outward. Illinois-modified regula falsi
// with a bisection step whenever the bracket fails to halve.
double monotone_root(const std::function<double(double)>& g, double a, double b, double tol) {
  double fa = g(a), fb = g(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  const bool increasing = fb > fa;
  for (int k = 0; (fa > 0) == (fb > 0); ++k) {
    if (k == 60) throw bracket_error("boundary search: no sign change in bracket");
    // Move the endpoint on the side where the root must lie.
    const bool root_right = (fb < 0) == increasing;
    const double w = b - a;
    if (root_right) {
      a = b;
      fa = fb;
      b = a + 2.0 * w;
      fb = g(b);
    } else {
      b = a;
      fb = fa;
      a = b - 2.0 * w;
      fa = g(a);
    }
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
  }
  int side = 0;
  double last_width = b - a;
  int slow = 0;
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    double c;
    if (slow >= 2) {
      c = 0.5 * (a + b);
      slow = 0;
    } else {
      c = (a * fb - b * fa) / (fb - fa);
      if (!(c > a && c < b)) c = 0.5 * (a + b);
    }
    const double fc = g(c);
    if (fc == 0.0) return c;
    if ((fc > 0) == (fa > 0)) {
      a = c;
      fa = fc;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = c;
      fb = fc;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
    const double width_now = b - a;
    slow = width_now > 0.5 * last_width ? slow + 1 : 0;
    last_width = width_now;
  }
  return 0.5 * (a + b);
}

}  // namespace

namespace {

// Root in t of Pr[N <= anchor - t*dir] = 1 - eps; coordinates with a zero
// direction entry stay at the anchor.
double crossing(double eps, const OrthantIntegrator& integ, const Vector3d& anchor,
                const Vector3d& dir, double tol, double lo = 0.0, double hi = kNaN) {
  const double target = 1.0 - eps;
  auto g = [&](double t) {
    Vector3d z;
    for (int i = 0; i < 3; ++i) z(i) = dir(i) == 0.0 ? anchor(i) : anchor(i) - t * dir(i);
    return integ(z).value - target;
  };
  if (std::isnan(hi)) {
    lo = 0.0;
    hi = 20.0 * std::sqrt(integ.sigma().diagonal().maxCoeff()) / dir.cwiseAbs().maxCoeff();
  }
  return monotone_root(g, lo, hi, tol);
}

void check_direction(const Vector3d& d, const char* what) {
  if (!d.allFinite() || (d.array() < 0).any() || !(d.maxCoeff() > 0))
    throw std::domain_error(std::string(what) + ": direction must be nonnegative and nonzero");
}

}  // namespace

double boundary_backoff(double eps, const OrthantIntegrator& integ, const Vector3d& anchor,
                        const Vector3d& d, double tol, double lo, double hi) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("boundary_backoff: eps out of (0, 1)");
  check_direction(d, "boundary_backoff");
  if (!(hi > lo)) {
    lo = 0.0;
    hi = kNaN;
  }
  return crossing(eps, integ, anchor, d, tol, lo, hi);
}

double boundary_scale(double eps, const Matrix3d& sigma, const Vector3d& d, std::size_t samples,
                      std::uint64_t seed) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("boundary_scale: eps out of (0, 1)");
  check_direction(d, "boundary_scale");
  const OrthantIntegrator integ(sigma, samples, seed);
  Vector3d anchor;
  for (int i = 0; i < 3; ++i) anchor(i) = d(i) == 0.0 ? kInf : 0.0;
  if (integ(anchor).value >= 1.0 - eps) return 0.0;
  // anchor - t*(-d) = t*d.
  return std::max(0.0, crossing(eps, integ, anchor, -d, 1e-6));
}

}  // namespace fbmac

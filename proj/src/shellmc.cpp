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


#include "fbmac/shellmc.hpp"

#include "fbmac/parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fbmac {

namespace {

using detail::require_snr;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;
constexpr std::size_t kTrialBlock = 4096;

// Stream ids; every trial t of an estimator uses RandomStream(seed, id, t).
constexpr std::uint64_t kStreamMoments = 0x6d6f6d;
constexpr std::uint64_t kStreamOutage = 0x6f7574;
constexpr std::uint64_t kStreamInner = 0x696e6e;
constexpr std::uint64_t kStreamClt = 0x636c74;
constexpr std::uint64_t kStreamConfusionIs = 0x636973;
constexpr std::uint64_t kStreamConfusionQ = 0x637171;

void require_trials(long long trials, long long min, const char* what) {
  if (trials < min)
    throw std::domain_error(std::string(what) + ": need at least " + std::to_string(min) + " trials");
}

void require_n(long long n, long long min, const char* what) {
  if (n < min) throw std::domain_error(std::string(what) + ": need n >= " + std::to_string(min));
}

template <typename Acc, typename Fn>
Acc reduce_trials(long long trials, Fn&& fn) {
  return reduce_blocks<Acc>(static_cast<std::size_t>(trials), kTrialBlock,
                            [&](Acc& acc, std::size_t t) { fn(acc, static_cast<long long>(t)); });
}

struct Counter {
  long long hits = 0;
  void merge(const Counter& o) { hits += o.hits; }
};

using MeanAcc = RunningMean;

struct VectorMeanAcc {
  long long count = 0;
  Vector3d mean = Vector3d::Zero();
  Matrix3d m2 = Matrix3d::Zero();

  void add(const Vector3d& v) {
    ++count;
    const Vector3d d = v - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (v - mean).transpose();
  }
  void merge(const VectorMeanAcc& o) {
    if (o.count == 0) return;
    const long long total = count + o.count;
    const Vector3d d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / static_cast<double>(total);
    m2 += o.m2 + d * d.transpose() * (static_cast<double>(count) * static_cast<double>(o.count) /
                                      static_cast<double>(total));
    count = total;
  }
};

struct P2PStatistics {
  double xz;
  double zz;
};

P2PStatistics p2p_statistics(long long n, double p, const Eigen::MatrixXd& g) {
  return {std::sqrt(static_cast<double>(n) * p) * g(0, 1) / std::sqrt(g(0, 0)), g(1, 1)};
}

}  // namespace

const char* to_string(SamplingMode m) {
  switch (m) {
    case SamplingMode::Direct: return "direct";
    case SamplingMode::Gram: return "gram";
  }
  return "?";
}

const char* to_string(CltCase c) {
  switch (c) {
    case CltCase::P2P: return "p2p";
    case CltCase::MacJoint: return "mac-joint";
  }
  return "?";
}

ShellSample sample_shell(long long n, double p, RandomStream& rng) {
  require_n(n, 1, "sample_shell");
  require_snr(p, "sample_shell");
  Eigen::VectorXd w(n);
  double norm = 0.0;
  do {
    for (long long t = 0; t < n; ++t) w(t) = rng.normal();
    norm = w.norm();
  } while (!(norm >= 1e-300));
  return {n, p, std::sqrt(static_cast<double>(n) * p) / norm * w};
}

Eigen::VectorXd sample_noise(long long n, RandomStream& rng) {
  require_n(n, 1, "sample_noise");
  Eigen::VectorXd z(n);
  for (long long t = 0; t < n; ++t) z(t) = rng.normal();
  return z;
}

Eigen::MatrixXd gaussian_gram(long long n, int k, SamplingMode mode, RandomStream& rng) {
  if (k < 1 || k > 3) throw std::domain_error("gaussian_gram: k must be 1, 2 or 3");
  require_n(n, k, "gaussian_gram");
  if (mode == SamplingMode::Direct) {
    Eigen::MatrixXd v(n, k);
    for (int j = 0; j < k; ++j)
      for (long long t = 0; t < n; ++t) v(t, j) = rng.normal();
    return v.transpose() * v;
  }
  // Bartlett: G = L L^T with L lower triangular, L_ii^2 ~ chi^2_{n-i} and
  // standard normal entries below the diagonal.
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    l(i, i) = std::sqrt(rng.chi_squared(static_cast<double>(n - i)));
    for (int j = 0; j < i; ++j) l(i, j) = rng.normal();
  }
  return l * l.transpose();
}

double info_density_p2p(long long n, double p, double xz, double zz) {
  const double nd = static_cast<double>(n);
  return nd * capacity(p) + (p * (nd - zz) + 2.0 * xz) / (2.0 * (1.0 + p));
}

double info_density_p2p(const ShellSample& x, const Eigen::VectorXd& z) {
  if (z.size() != x.x.size() || x.x.size() != x.n)
    throw std::domain_error("info_density_p2p: dimension mismatch");
  return info_density_p2p(x.n, x.p, x.x.dot(z), z.squaredNorm());
}

InfoDensityVector info_density_vector_mac(long long n, const PowerPair& pp, const MacStatistics& s) {
  const double nd = static_cast<double>(n);
  const double ps = pp.sum();
  return {nd * capacity(pp.p1) + (pp.p1 * (nd - s.zz) + 2.0 * s.x1z) / (2.0 * (1.0 + pp.p1)),
          nd * capacity(pp.p2) + (pp.p2 * (nd - s.zz) + 2.0 * s.x2z) / (2.0 * (1.0 + pp.p2)),
          nd * capacity(ps) +
              (ps * (nd - s.zz) + 2.0 * s.x1x2 + 2.0 * s.x1z + 2.0 * s.x2z) / (2.0 * (1.0 + ps))};
}

InfoDensityVector info_density_vector_mac(const ShellSample& x1, const ShellSample& x2,
                                          const Eigen::VectorXd& z) {
  if (x1.n != x2.n || x1.x.size() != x1.n || x2.x.size() != x2.n || z.size() != x1.n)
    throw std::domain_error("info_density_vector_mac: dimension mismatch");
  const MacStatistics s{x1.x.dot(x2.x), x1.x.dot(z), x2.x.dot(z), z.squaredNorm()};
  return info_density_vector_mac(x1.n, PowerPair(x1.p, x2.p), s);
}

MacStatistics draw_mac_statistics(long long n, const PowerPair& pp, SamplingMode mode,
                                  RandomStream& rng) {
  const Eigen::MatrixXd g = gaussian_gram(n, 3, mode, rng);
  const double nd = static_cast<double>(n);
  const double a1 = std::sqrt(nd * pp.p1 / g(0, 0));
  const double a2 = std::sqrt(nd * pp.p2 / g(1, 1));
  return {a1 * a2 * g(0, 1), a1 * g(0, 2), a2 * g(1, 2), g(2, 2)};
}

InfoDensityMoments info_density_moments(long long n, const PowerPair& pp, long long trials,
                                        std::uint64_t seed, SamplingMode mode) {
  require_n(n, 3, "info_density_moments");
  require_trials(trials, 2, "info_density_moments");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const auto acc = reduce_trials<VectorMeanAcc>(trials, [&](VectorMeanAcc& a, long long t) {
    RandomStream rng(seed, kStreamMoments, static_cast<std::uint64_t>(t));
    a.add(info_density_vector_mac(n, pp, draw_mac_statistics(n, pp, mode, rng)).vector() * scale);
  });
  InfoDensityMoments m;
  m.n = n;
  m.trials = trials;
  m.mean = acc.mean;
  m.cov = acc.m2 / static_cast<double>(trials - 1);
  return m;
}

BinomialEstimate empirical_outage_p2p(long long n, double p, double log_threshold, long long trials,
                                      std::uint64_t seed, SamplingMode mode) {
  require_n(n, 2, "empirical_outage_p2p");
  require_snr(p, "empirical_outage_p2p");
  require_trials(trials, 1000, "empirical_outage_p2p");
  if (std::isnan(log_threshold)) throw std::domain_error("empirical_outage_p2p: NaN threshold");
  if (log_threshold == -kInf) return binomial_estimate(0, trials);
  if (log_threshold == kInf) return binomial_estimate(trials, trials);
  const auto acc = reduce_trials<Counter>(trials, [&](Counter& c, long long t) {
    RandomStream rng(seed, kStreamOutage, static_cast<std::uint64_t>(t));
    const auto s = p2p_statistics(n, p, gaussian_gram(n, 2, mode, rng));
    if (info_density_p2p(n, p, s.xz, s.zz) <= log_threshold) ++c.hits;
  });
  return binomial_estimate(acc.hits, trials);
}

InnerProductReport inner_product_check(long long n, const PowerPair& pp, long long pairs,
                                       std::uint64_t seed) {
  require_n(n, 1, "inner_product_check");
  require_trials(pairs, 2, "inner_product_check");
  const double nd = static_cast<double>(n);
  const auto acc = reduce_trials<MeanAcc>(pairs, [&](MeanAcc& a, long long t) {
    RandomStream rng(seed, kStreamInner, static_cast<std::uint64_t>(t));
    const auto x1 = sample_shell(n, pp.p1, rng);
    const auto x2 = sample_shell(n, pp.p2, rng);
    a.add(x1.x.dot(x2.x));
  });
  InnerProductReport r;
  r.n = n;
  r.pairs = pairs;
  r.mean = acc.mean / (nd * std::sqrt(pp.p1 * pp.p2));
  r.variance_ratio = acc.variance() / (nd * pp.p1 * pp.p2);
  return r;
}

double clt_f_p2p(const Eigen::Vector3d& u, double p) {
  return p * u(0) + 2.0 * u(1) / std::sqrt(1.0 + u(2));
}

Eigen::Vector3d clt_f_mac(const Eigen::Matrix<double, 6, 1>& u, const PowerPair& pp) {
  const double s5 = std::sqrt(1.0 + u(4));
  const double s6 = std::sqrt(1.0 + u(5));
  return {pp.p1 * u(0) + 2.0 * u(1) / s5, pp.p2 * u(0) + 2.0 * u(2) / s6,
          pp.sum() * u(0) + 2.0 * u(1) / s5 + 2.0 * u(2) / s6 + 2.0 * u(3) / (s5 * s6)};
}

Eigen::Matrix<double, 1, 3> clt_jacobian_p2p(double p) { return {p, 2.0, 0.0}; }

Eigen::Matrix<double, 3, 6> clt_jacobian_mac(const PowerPair& pp) {
  Eigen::Matrix<double, 3, 6> j;
  j << pp.p1, 2, 0, 0, 0, 0,
       pp.p2, 0, 2, 0, 0, 0,
       pp.sum(), 2, 2, 2, 0, 0;
  return j;
}

Eigen::Matrix3d clt_u_covariance_p2p(double p) { return Eigen::Vector3d(2.0, p, 2.0).asDiagonal(); }

Eigen::Matrix<double, 6, 6> clt_u_covariance_mac(const PowerPair& pp) {
  Eigen::Matrix<double, 6, 1> d;
  d << 2.0, pp.p1, pp.p2, pp.p1 * pp.p2, 2.0, 2.0;
  return d.asDiagonal();
}

KsReport clt_function_check(CltCase c, long long n, long long trials, std::uint64_t seed,
                            const PowerPair& pp, SamplingMode mode) {
  require_n(n, 16, "clt_function_check");
  require_trials(trials, 2, "clt_function_check");
  const double nd = static_cast<double>(n);
  const double rn = std::sqrt(nd);
  const int dim = c == CltCase::P2P ? 1 : 3;
  Eigen::MatrixXd target;
  if (c == CltCase::P2P) {
    const auto j = clt_jacobian_p2p(pp.p1);
    target = j * clt_u_covariance_p2p(pp.p1) * j.transpose();
  } else {
    const auto j = clt_jacobian_mac(pp);
    target = j * clt_u_covariance_mac(pp) * j.transpose();
  }

  // samples(d, t) = sqrt(n) f_d(mean of U over the block of n).
  Eigen::MatrixXd samples(dim, trials);
  parallel_for(static_cast<std::size_t>((trials + kTrialBlock - 1) / kTrialBlock), [&](std::size_t b) {
    const long long end = std::min<long long>(trials, static_cast<long long>((b + 1) * kTrialBlock));
    for (long long t = static_cast<long long>(b * kTrialBlock); t < end; ++t) {
      RandomStream rng(seed, kStreamClt, static_cast<std::uint64_t>(t));
      if (c == CltCase::P2P) {
        const Eigen::MatrixXd g = gaussian_gram(n, 2, mode, rng);  // (W, Z)
        const Eigen::Vector3d u(1.0 - g(1, 1) / nd, std::sqrt(pp.p1) * g(0, 1) / nd, g(0, 0) / nd - 1.0);
        samples(0, t) = rn * clt_f_p2p(u, pp.p1);
      } else {
        const Eigen::MatrixXd g = gaussian_gram(n, 3, mode, rng);  // (W1, W2, Z)
        Eigen::Matrix<double, 6, 1> u;
        u << 1.0 - g(2, 2) / nd, std::sqrt(pp.p1) * g(0, 2) / nd, std::sqrt(pp.p2) * g(1, 2) / nd,
            std::sqrt(pp.p1 * pp.p2) * g(0, 1) / nd, g(0, 0) / nd - 1.0, g(1, 1) / nd - 1.0;
        samples.col(t) = rn * clt_f_mac(u, pp);
      }
    }
  });

  KsReport r;
  r.n = n;
  r.trials = trials;
  r.target_mean = Eigen::VectorXd::Zero(dim);
  r.target_cov = target;
  const Eigen::VectorXd mean = samples.rowwise().mean();
  const Eigen::MatrixXd centred = samples.colwise() - mean;
  r.empirical_cov = centred * centred.transpose() / static_cast<double>(trials - 1);
  r.cov_rel_error = (r.empirical_cov - target).norm() / target.norm();
  for (int d = 0; d < dim; ++d) {
    std::vector<double> margin(static_cast<std::size_t>(trials));
    for (long long t = 0; t < trials; ++t) margin[t] = samples(d, t);
    r.margin_ks.push_back(ks_distance_normal(margin, 0.0, std::sqrt(target(d, d))));
  }
  r.ks_distance = *std::max_element(r.margin_ks.begin(), r.margin_ks.end());
  return r;
}

double gamma_constant_asymptotic() { return 0.5 * std::log(2.0 * kPi); }

double rn_exponent_p2p(double t, double p) {
  require_snr(p, "rn_exponent_p2p");
  if (!(t >= 0)) throw std::domain_error("rn_exponent_p2p: t must be >= 0");
  const double s = std::sqrt(1.0 + 4.0 * p * t);
  return std::log(2.0 * (1.0 + p)) - (1.0 + p) - p * t / (1.0 + p) + s - std::log1p(s);
}

double rn_exponent_mac(double t, const PowerPair& pp) {
  const double lo = std::pow(std::sqrt(pp.p1) - std::sqrt(pp.p2), 2);
  const double hi = std::pow(std::sqrt(pp.p1) + std::sqrt(pp.p2), 2);
  if (!(t > lo && t < hi) || !(t > 0)) return -kInf;
  const double ps = pp.sum();
  const double g = std::pow(t + pp.p1 - pp.p2, 2) / (4.0 * pp.p1 * t);
  if (!(g < 1.0)) return -kInf;
  return std::log(ps / pp.p2) - 1.0 + t / ps + std::log1p(-g);
}

namespace {

// Maximizes f on a grid, then polishes the stationary point with a bracketed
// root of the derivative.
template <typename F, typename D>
std::pair<double, double> grid_then_polish(F f, D df, double lo, double hi, int res) {
  if (res < 3) throw std::domain_error("rn bound check: grid resolution must be >= 3");
  std::vector<double> t(res);
  int best = 0;
  double best_f = -kInf;
  for (int i = 0; i < res; ++i) {
    t[i] = lo + (hi - lo) * (i + 0.5) / res;
    const double v = f(t[i]);
    if (v > best_f) {
      best_f = v;
      best = i;
    }
  }
  const double a = t[std::max(0, best - 1)];
  const double b = t[std::min(res - 1, best + 1)];
  if (!(df(a) > 0 && df(b) < 0)) return {best_f, t[best]};
  std::uintmax_t iters = 200;
  const auto [x0, x1] = boost::math::tools::toms748_solve(
      df, a, b, boost::math::tools::eps_tolerance<double>(52), iters);
  const double x = 0.5 * (x0 + x1);
  return {f(x), x};
}

}  // namespace

RnBoundReport rn_bound_p2p_check(double p, int t_grid_resolution) {
  require_snr(p, "rn_bound_p2p_check");
  const auto f = [p](double t) { return rn_exponent_p2p(t, p); };
  const auto df = [p](double t) {
    const double s = std::sqrt(1.0 + 4.0 * p * t);
    return -p / (1.0 + p) + 2.0 * p / (1.0 + s);
  };
  const auto [v, x] = grid_then_polish(f, df, 0.0, 20.0 * (1.0 + p), t_grid_resolution);
  RnBoundReport r;
  r.max_value = v;
  r.argmax = x;
  r.expected_argmax = 1.0 + p;
  const double base = std::log(0.5) + 0.5 * std::log(kPi / 8.0);
  r.k_finite = std::exp(base + kGammaConstantFinite);
  r.k_asymptotic = std::exp(base + gamma_constant_asymptotic());
  return r;
}

double k3_constant(const PowerPair& pp, double c_gamma) {
  return std::exp(c_gamma) * pp.p2 / std::sqrt(2.0 * kPi * pp.p1);
}

RnBoundReport rn_bound_mac_check(const PowerPair& pp, int t_grid_resolution) {
  const double lo = std::pow(std::sqrt(pp.p1) - std::sqrt(pp.p2), 2);
  const double hi = std::pow(std::sqrt(pp.p1) + std::sqrt(pp.p2), 2);
  const double ps = pp.sum();
  const auto f = [&](double t) { return rn_exponent_mac(t, pp); };
  const auto df = [&](double t) {
    const double d = pp.p1 - pp.p2;
    const double g = (t + d) * (t + d) / (4.0 * pp.p1 * t);
    const double dg = (t * t - d * d) / (4.0 * pp.p1 * t * t);
    return 1.0 / ps - dg / (1.0 - g);
  };
  const auto [v, x] = grid_then_polish(f, df, lo, hi, t_grid_resolution);
  RnBoundReport r;
  r.max_value = v;
  r.argmax = x;
  r.expected_argmax = ps;
  r.k_finite = k3_constant(pp, kGammaConstantFinite);
  r.k_asymptotic = k3_constant(pp, gamma_constant_asymptotic());
  return r;
}

namespace {

// ln sum_m (x/2)^{2m+nu} / (m! Gamma(m+nu+1)), summed outward from the
// largest term.
double log_bessel_i_series(double nu, double x) {
  const double lq = 2.0 * std::log(0.5 * x);
  const auto log_term = [&](double m) {
    return m * lq - std::lgamma(m + 1.0) - std::lgamma(m + nu + 1.0);
  };
  const double m_star = std::floor(0.5 * (std::sqrt(nu * nu + x * x) - nu));
  const double q = 0.25 * x * x;
  double sum = 1.0;
  double term = 1.0;
  for (double m = m_star + 1.0;; m += 1.0) {
    term *= q / (m * (m + nu));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  term = 1.0;
  for (double m = m_star; m >= 1.0; m -= 1.0) {
    term *= m * (m + nu) / q;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return nu * std::log(0.5 * x) + log_term(m_star) + std::log(sum);
}

// Uniform asymptotic expansion in the order, four correction terms.
double log_bessel_i_debye(double nu, double x) {
  const double z = x / nu;
  const double root = std::sqrt(1.0 + z * z);
  const double t = 1.0 / root;
  const double t2 = t * t;
  const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
  const double u2 = t2 * (81.0 + t2 * (-462.0 + t2 * 385.0)) / 1152.0;
  const double u3 = t * t2 * (30375.0 + t2 * (-369603.0 + t2 * (765765.0 - t2 * 425425.0))) / 414720.0;
  const double u4 =
      t2 * t2 *
      (4465125.0 + t2 * (-94121676.0 + t2 * (349922430.0 + t2 * (-446185740.0 + t2 * 185910725.0)))) /
      39813120.0;
  const double inv = 1.0 / nu;
  const double corr = 1.0 + inv * (u1 + inv * (u2 + inv * (u3 + inv * u4)));
  const double eta = std::sqrt(nu * nu + x * x) + nu * std::log(x / (nu + std::sqrt(nu * nu + x * x)));
  return eta - 0.5 * std::log(2.0 * kPi * nu) - 0.5 * std::log(root) + std::log(corr);
}

// Large-argument expansion e^x / sqrt(2 pi x) sum_k (-1)^k a_k(nu) / x^k,
// truncated at its smallest term.
double log_bessel_i_hankel(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (8.0 * k * x);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return x - 0.5 * std::log(2.0 * kPi * x) + std::log(sum);
}

}  // namespace

double log_bessel_i(double nu, double x) {
  if (!(nu >= 0) || !(x >= 0) || std::isinf(nu))
    throw std::domain_error("log_bessel_i: need nu >= 0 and x >= 0");
  if (std::isinf(x)) return kInf;
  if (x == 0.0) return nu == 0.0 ? 0.0 : -kInf;
  if (x < 0.5 * nu) return log_bessel_i_series(nu, x);
  if (nu >= 50.0) return log_bessel_i_debye(nu, x);
  if (x > 40.0 + nu * nu) return log_bessel_i_hankel(nu, x);
  return log_bessel_i_series(nu, x);
}

BesselBoundCheck bessel_ratio_bound_check(int k, double z) {
  if (k < 0 || !(z > 0) || std::isinf(z))
    throw std::domain_error("bessel_ratio_bound_check: need k >= 0 and finite z > 0");
  const double kd = k;
  const double r = std::hypot(kd, z);
  BesselBoundCheck c;
  c.log_lhs = log_bessel_i(kd, z) - kd * std::log(z);
  c.log_rhs = 0.5 * std::log(kPi / 8.0) - 0.5 * std::log(r) - kd * std::log(kd + r) + r;
  c.holds = c.log_lhs <= c.log_rhs;
  return c;
}

double log_shell_output_density(double r, long long n, double p) {
  require_n(n, 2, "log_shell_output_density");
  require_snr(p, "log_shell_output_density");
  if (!(r >= 0)) throw std::domain_error("log_shell_output_density: r must be >= 0");
  const double nd = static_cast<double>(n);
  const double nu = 0.5 * nd - 1.0;
  const double x = r * std::sqrt(nd * p);
  // ln(I_nu(x) / x^nu), with its limit at x = 0.
  const double ratio = x == 0.0 ? -nu * std::numbers::ln2 - std::lgamma(nu + 1.0)
                                : log_bessel_i(nu, x) - nu * std::log(x);
  return -std::numbers::ln2 - 0.5 * nd * std::log(kPi) + std::lgamma(0.5 * nd) - 0.5 * nd * p -
         0.5 * r * r + ratio;
}

double log_rn_derivative_p2p(double r, long long n, double p) {
  const double nd = static_cast<double>(n);
  const double log_q = -0.5 * nd * std::log(2.0 * kPi * (1.0 + p)) - 0.5 * r * r / (1.0 + p);
  return log_shell_output_density(r, n, p) - log_q;
}

double sum_density(double t, long long n, const PowerPair& pp) {
  require_n(n, 4, "sum_density");
  const double lo = std::pow(std::sqrt(pp.p1) - std::sqrt(pp.p2), 2);
  const double hi = std::pow(std::sqrt(pp.p1) + std::sqrt(pp.p2), 2);
  if (!(t > lo && t < hi) || !(t > 0)) return -kInf;
  const double c = (t + pp.p1 - pp.p2) / (2.0 * std::sqrt(pp.p1 * t));
  const double s2 = 1.0 - c * c;
  if (!(s2 > 0)) return -kInf;
  const double nd = static_cast<double>(n);
  return 0.5 * std::log(pp.p2 / (kPi * pp.p1)) + 2.0 * std::lgamma(0.5 * nd) -
         std::lgamma(0.5 * (nd - 1.0)) - std::numbers::ln2 - 0.5 * nd * std::log(kPi) -
         0.5 * (nd - 1.0) * std::log(nd * pp.p2) - 0.5 * std::log(nd * t) +
         0.5 * (nd - 3.0) * std::log(s2);
}

double sum_radial_log_density(double t, long long n, const PowerPair& pp) {
  const double d = sum_density(t, n, pp);
  if (d == -kInf) return d;
  const double nd = static_cast<double>(n);
  const double r = std::sqrt(nd * t);
  const double log_area = std::numbers::ln2 + 0.5 * nd * std::log(kPi) - std::lgamma(0.5 * nd) +
                          (nd - 1.0) * std::log(r);
  return d + log_area + std::log(nd / (2.0 * r));
}

double log_sum_output_density(double r, long long n, const PowerPair& pp) {
  require_n(n, 4, "log_sum_output_density");
  if (!(r >= 0)) throw std::domain_error("log_sum_output_density: r must be >= 0");
  const double lo = std::pow(std::sqrt(pp.p1) - std::sqrt(pp.p2), 2);
  const double hi = std::pow(std::sqrt(pp.p1) + std::sqrt(pp.p2), 2);
  const auto g = [&](double t) {
    const double d = sum_radial_log_density(t, n, pp);
    return d == -kInf ? -kInf : d + log_shell_output_density(r, n, t);
  };
  // Locate the peak of the mixing integrand, then integrate e^{g - peak}
  // on both sides of it.
  constexpr int kGrid = 512;
  double t_peak = 0.5 * (lo + hi), g_peak = -kInf;
  for (int k = 1; k < kGrid; ++k) {
    const double t = lo + (hi - lo) * k / kGrid;
    const double v = g(t);
    if (v > g_peak) {
      g_peak = v;
      t_peak = t;
    }
  }
  if (g_peak == -kInf) return -kInf;
  const auto h = [&](double t) {
    const double v = g(t);
    return v == -kInf ? 0.0 : std::exp(v - g_peak);
  };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double area = Quad::integrate(h, lo, t_peak, 12, 1e-9) + Quad::integrate(h, t_peak, hi, 12, 1e-9);
  return g_peak + std::log(area);
}

namespace {

// Maximizes f(r) over r = sqrt(n s) with s within 12 standard deviations
// of the mean of ||Y||^2 / n under the induced law.
template <typename F>
double maximize_radial(long long n, double mean, double var, F&& f) {
  const double nd = static_cast<double>(n);
  const double sd = std::sqrt(var / nd);
  const double s_lo = std::max(mean - 12.0 * sd, 1e-3 * mean), s_hi = mean + 12.0 * sd;
  constexpr int kGrid = 240;
  const auto at = [&](double s) { return f(std::sqrt(nd * s)); };
  int best = 0;
  double best_v = -kInf;
  for (int k = 0; k <= kGrid; ++k) {
    const double v = at(s_lo + (s_hi - s_lo) * k / kGrid);
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  const double a = s_lo + (s_hi - s_lo) * std::max(0, best - 1) / kGrid;
  const double b = s_lo + (s_hi - s_lo) * std::min(kGrid, best + 1) / kGrid;
  const auto m = boost::math::tools::brent_find_minima([&](double s) { return -at(s); }, a, b, 40);
  return std::max(best_v, -m.second);
}

}  // namespace

double log_rn_sup_p2p(long long n, double p) {
  require_n(n, 2, "log_rn_sup_p2p");
  require_snr(p, "log_rn_sup_p2p");
  return maximize_radial(n, 1.0 + p, 2.0 + 4.0 * p,
                         [&](double r) { return log_rn_derivative_p2p(r, n, p); });
}

double log_rn_sup_mac(long long n, const PowerPair& pp) {
  require_n(n, 4, "log_rn_sup_mac");
  const double nd = static_cast<double>(n);
  const double ps = pp.sum();
  return maximize_radial(n, 1.0 + ps, 2.0 + 4.0 * ps + 4.0 * pp.p1 * pp.p2, [&](double r) {
    const double log_q = -0.5 * nd * std::log(2.0 * kPi * (1.0 + ps)) - 0.5 * r * r / (1.0 + ps);
    return log_sum_output_density(r, n, pp) - log_q;
  });
}

namespace {

// Mean and standard error of e^{log_gamma - i} 1{i > log_gamma} under the
// channel law, i.e. gamma Q_Y[i > log_gamma].
MeanAcc scaled_confusion(long long n, double p, double log_gamma, long long trials,
                         std::uint64_t seed, std::uint64_t stream) {
  return reduce_trials<MeanAcc>(trials, [&](MeanAcc& a, long long t) {
    RandomStream rng(seed, stream, static_cast<std::uint64_t>(t));
    const auto s = p2p_statistics(n, p, gaussian_gram(n, 2, SamplingMode::Gram, rng));
    const double i = info_density_p2p(n, p, s.xz, s.zz);
    a.add(i > log_gamma ? std::exp(log_gamma - i) : 0.0);
  });
}

}  // namespace

ProbEstimate confusion_probability_is(long long n, double p, double log_gamma, long long trials,
                                      std::uint64_t seed) {
  require_n(n, 2, "confusion_probability_is");
  require_snr(p, "confusion_probability_is");
  require_trials(trials, 2, "confusion_probability_is");
  if (log_gamma == kInf) return {0.0, 0.0, trials};
  if (log_gamma == -kInf) return {1.0, 0.0, trials};
  const auto a = scaled_confusion(n, p, log_gamma, trials, seed, kStreamConfusionIs);
  const double scale = std::exp(-log_gamma);
  return {a.mean * scale, a.std_err() * scale, trials};
}

ProbEstimate confusion_probability_direct(long long n, double p, double log_gamma,
                                          long long trials, std::uint64_t seed) {
  require_n(n, 2, "confusion_probability_direct");
  require_snr(p, "confusion_probability_direct");
  require_trials(trials, 2, "confusion_probability_direct");
  const double nd = static_cast<double>(n);
  const auto acc = reduce_trials<Counter>(trials, [&](Counter& c, long long t) {
    RandomStream rng(seed, kStreamConfusionQ, static_cast<std::uint64_t>(t));
    // Y = sqrt(1+p) V with V standard normal; (W, V) Gram gives <x,V>.
    const Eigen::MatrixXd g = gaussian_gram(n, 2, SamplingMode::Gram, rng);
    const double xy = std::sqrt(nd * p * (1.0 + p)) * g(0, 1) / std::sqrt(g(0, 0));
    const double yy = (1.0 + p) * g(1, 1);
    const double i = nd * capacity(p) + 0.5 * yy / (1.0 + p) - 0.5 * (yy - 2.0 * xy + nd * p);
    if (i > log_gamma) ++c.hits;
  });
  const auto b = binomial_estimate(acc.hits, trials);
  return {b.value, b.std_err(), trials};
}

std::vector<ConfusionPoint> confusion_scaling_check(const std::vector<long long>& n_list, double p,
                                                    long long trials, std::uint64_t seed) {
  require_snr(p, "confusion_scaling_check");
  require_trials(trials, 2, "confusion_scaling_check");
  if (!std::is_sorted(n_list.begin(), n_list.end()))
    throw std::domain_error("confusion_scaling_check: n_list must be ascending");
  std::vector<ConfusionPoint> out;
  for (const long long n : n_list) {
    require_n(n, 2, "confusion_scaling_check");
    const double nd = static_cast<double>(n);
    const double lg = nd * capacity(p) - std::sqrt(nd * dispersion(p));
    const auto a = scaled_confusion(n, p, lg, trials, seed, derive_key(kStreamConfusionIs, static_cast<std::uint64_t>(n)));
    out.push_back({n, lg, a.mean, a.std_err()});
  }
  return out;
}

}  // namespace fbmac

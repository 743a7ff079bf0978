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


#include "fbmac/simlink.hpp"

#include "fbmac/parallel.hpp"
#include "fbmac/random.hpp"
#include "fbmac/shellmc.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fbmac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kSimBlock = 256;
constexpr std::size_t kBoundBlock = 4096;

constexpr std::uint64_t kStreamSimP2P = 0x733270;
constexpr std::uint64_t kStreamSimMac = 0x736d61;
constexpr std::uint64_t kStreamBoundP2P = 0x623170;
constexpr std::uint64_t kStreamBoundMac = 0x62346d;

void require_trials(long long trials, long long min, const char* what) {
  if (trials < min)
    throw std::domain_error(std::string(what) + ": need at least " + std::to_string(min) + " trials");
}

void require_thresholds(const Thresholds& th, const char* what) {
  if (std::isnan(th.lg1) || std::isnan(th.lg2) || std::isnan(th.lg3))
    throw std::domain_error(std::string(what) + ": NaN threshold");
}

double log_half_product(double k, double count) {
  if (!(k > 0.0) || !std::isfinite(k)) throw std::domain_error("default_thresholds: constants must be finite and > 0");
  return count == 0.0 ? -kInf : std::log(k * count / 2.0);
}

// Columns are independent codewords uniform on the sphere of radius sqrt(n p).
Eigen::MatrixXd shell_codebook(long long n, long long m, double p, RandomStream& rng) {
  Eigen::MatrixXd c(n, m);
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    for (Eigen::Index t = 0; t < c.rows(); ++t) c(t, j) = rng.normal();
    c.col(j) *= std::sqrt(static_cast<double>(n) * p) / c.col(j).norm();
  }
  return c;
}

struct ErrorCount {
  long long errors = 0;
  void merge(const ErrorCount& o) { errors += o.errors; }
};

SimResult to_sim_result(long long errors, long long trials) {
  const auto b = binomial_estimate(errors, trials);
  return {trials, errors, b.value, b.ci_low, b.ci_high};
}

struct BoundAcc {
  RunningMean total;
  long long joint = 0;
  long long split[3] = {0, 0, 0};
  RunningMean conf[3];

  void merge(const BoundAcc& o) {
    total.merge(o.total);
    joint += o.joint;
    for (int k = 0; k < 3; ++k) {
      split[k] += o.split[k];
      conf[k].merge(o.conf[k]);
    }
  }
};

// e^{-i} 1{i > lg}, the per-draw weight that turns a channel draw into a
// reference-law confusion estimate.
double confusion_weight(double i, double lg) { return i > lg ? std::exp(-i) : 0.0; }

}  // namespace

CodebookSpec::CodebookSpec(long long n_, long long m1_, long long m2_, const PowerPair& pp_)
    : n(n_), m1(m1_), m2(m2_), pp(pp_) {
  if (n < 2) throw std::domain_error("CodebookSpec: n must be >= 2");
  if (m1 < 1 || m2 < 1) throw std::domain_error("CodebookSpec: codebook sizes must be >= 1");
}

RnConstants default_rn_constants(const PowerPair& pp) { return {1.0, 1.0, k3_constant(pp)}; }

RnConstants exact_rn_constants(long long n, const PowerPair& pp) {
  return {std::exp(log_rn_sup_p2p(n, pp.p1)), std::exp(log_rn_sup_p2p(n, pp.p2)),
          std::exp(log_rn_sup_mac(n, pp))};
}

Thresholds default_thresholds(const CodebookSpec& spec, double k1, double k2, double k3) {
  const double a = static_cast<double>(spec.m1 - 1);
  const double b = static_cast<double>(spec.m2 - 1);
  return {log_half_product(k1, a), log_half_product(k2, b), log_half_product(k3, a * b)};
}

Thresholds default_thresholds(const CodebookSpec& spec, const RnConstants& k) {
  return default_thresholds(spec, k.k1, k.k2, k.k3);
}

double SimResult::std_err() const {
  return trials > 0 ? std::sqrt(eps_hat * (1.0 - eps_hat) / static_cast<double>(trials)) : 0.0;
}

SimResult simulate_p2p(const CodebookSpec& spec, const Thresholds& th, long long trials,
                       std::uint64_t seed) {
  require_trials(trials, 1, "simulate_p2p");
  require_thresholds(th, "simulate_p2p");
  const long long n = spec.n, m = spec.m1;
  const double p = spec.pp.p1;
  const double nd = static_cast<double>(n);
  const double base = nd * capacity(p);
  const auto acc = reduce_blocks<ErrorCount>(
      static_cast<std::size_t>(trials), kSimBlock, [&](ErrorCount& e, std::size_t t) {
        RandomStream rng(seed, kStreamSimP2P, t);
        const Eigen::MatrixXd cb = shell_codebook(n, m, p, rng);
        const long long msg = static_cast<long long>(rng.uniform() * static_cast<double>(m));
        Eigen::VectorXd y = cb.col(msg);
        for (Eigen::Index s = 0; s < y.size(); ++s) y(s) += rng.normal();
        const double yy = y.squaredNorm();
        long long decoded = -1;
        for (long long j = 0; j < m && decoded < 0; ++j) {
          const double d = (y - cb.col(j)).squaredNorm();
          const double i = base - 0.5 * d + 0.5 * yy / (1.0 + p);
          if (i > th.lg1) decoded = j;
        }
        if (decoded != msg) ++e.errors;
      });
  return to_sim_result(acc.errors, trials);
}

SimResult simulate_mac(const CodebookSpec& spec, const Thresholds& th, long long trials,
                       std::uint64_t seed) {
  require_trials(trials, 1, "simulate_mac");
  require_thresholds(th, "simulate_mac");
  const long long n = spec.n, m1 = spec.m1, m2 = spec.m2;
  const double p1 = spec.pp.p1, p2 = spec.pp.p2, ps = spec.pp.sum();
  const double nd = static_cast<double>(n);
  const double c1 = nd * capacity(p1), c2 = nd * capacity(p2), c3 = nd * capacity(ps);
  const auto acc = reduce_blocks<ErrorCount>(
      static_cast<std::size_t>(trials), kSimBlock, [&](ErrorCount& e, std::size_t t) {
        RandomStream rng(seed, kStreamSimMac, t);
        const Eigen::MatrixXd a = shell_codebook(n, m1, p1, rng);
        const Eigen::MatrixXd b = shell_codebook(n, m2, p2, rng);
        const long long w1 = static_cast<long long>(rng.uniform() * static_cast<double>(m1));
        const long long w2 = static_cast<long long>(rng.uniform() * static_cast<double>(m2));
        Eigen::VectorXd y = a.col(w1) + b.col(w2);
        for (Eigen::Index s = 0; s < y.size(); ++s) y(s) += rng.normal();
        const double yy = y.squaredNorm();
        const Eigen::VectorXd ya = a.transpose() * y;
        const Eigen::VectorXd yb = b.transpose() * y;
        const Eigen::MatrixXd ab = a.transpose() * b;
        bool found = false, correct = false;
        for (long long j = 0; j < m1 && !found; ++j) {
          for (long long k = 0; k < m2 && !found; ++k) {
            // Squared distances from y to x1+x2, x2 and x1.
            const double d12 = yy - 2.0 * (ya(j) + yb(k)) + nd * ps + 2.0 * ab(j, k);
            const double d2 = yy - 2.0 * yb(k) + nd * p2;
            const double d1 = yy - 2.0 * ya(j) + nd * p1;
            const double i1 = c1 - 0.5 * d12 + 0.5 * d2 / (1.0 + p1);
            const double i2 = c2 - 0.5 * d12 + 0.5 * d1 / (1.0 + p2);
            const double i3 = c3 - 0.5 * d12 + 0.5 * yy / (1.0 + ps);
            if (i1 > th.lg1 && i2 > th.lg2 && i3 > th.lg3) {
              found = true;
              correct = j == w1 && k == w2;
            }
          }
        }
        if (!correct) ++e.errors;
      });
  return to_sim_result(acc.errors, trials);
}

const char* to_string(OutageMode m) {
  switch (m) {
    case OutageMode::Joint: return "joint";
    case OutageMode::Splitting: return "splitting";
  }
  return "?";
}

BoundEstimate theorem1_rhs(const CodebookSpec& spec, const Thresholds& th, long long trials,
                           std::uint64_t seed, double k) {
  require_trials(trials, 1000, "theorem1_rhs");
  require_thresholds(th, "theorem1_rhs");
  if (!(k > 0.0) || !std::isfinite(k)) throw std::domain_error("theorem1_rhs: k must be finite and > 0");
  const long long n = spec.n;
  const double p = spec.pp.p1;
  const double nd = static_cast<double>(n);
  const double coef = k * static_cast<double>(spec.m1 - 1) / 2.0;
  const auto acc = reduce_blocks<BoundAcc>(
      static_cast<std::size_t>(trials), kBoundBlock, [&](BoundAcc& a, std::size_t t) {
        RandomStream rng(seed, kStreamBoundP2P, t);
        const Eigen::MatrixXd g = gaussian_gram(n, 2, SamplingMode::Gram, rng);
        const double xz = std::sqrt(nd * p) * g(0, 1) / std::sqrt(g(0, 0));
        const double i = info_density_p2p(n, p, xz, g(1, 1));
        const bool out = !(i > th.lg1);
        const double conf = coef > 0.0 ? coef * confusion_weight(i, th.lg1) : 0.0;
        if (out) {
          ++a.joint;
          ++a.split[0];
        }
        a.conf[0].add(conf);
        a.total.add((out ? 1.0 : 0.0) + conf);
      });
  BoundEstimate r;
  r.trials = trials;
  r.value = acc.total.mean;
  r.std_err = acc.total.std_err();
  r.outage = static_cast<double>(acc.joint) / static_cast<double>(trials);
  r.split_outage(0) = r.outage;
  r.confusion(0) = acc.conf[0].mean;
  return r;
}

BoundEstimate theorem4_rhs(const CodebookSpec& spec, const Thresholds& th, long long trials,
                           std::uint64_t seed, OutageMode mode, const RnConstants& k) {
  require_trials(trials, 1000, "theorem4_rhs");
  require_thresholds(th, "theorem4_rhs");
  for (const double v : {k.k1, k.k2, k.k3})
    if (!(v > 0.0) || !std::isfinite(v)) throw std::domain_error("theorem4_rhs: constants must be finite and > 0");
  const double a = static_cast<double>(spec.m1 - 1);
  const double b = static_cast<double>(spec.m2 - 1);
  const Vector3d coef(k.k1 * a / 2.0, k.k2 * b / 2.0, k.k3 * a * b / 2.0);
  const Vector3d lg(th.lg1, th.lg2, th.lg3);
  const auto acc = reduce_blocks<BoundAcc>(
      static_cast<std::size_t>(trials), kBoundBlock, [&](BoundAcc& s, std::size_t t) {
        RandomStream rng(seed, kStreamBoundMac, t);
        const auto stats = draw_mac_statistics(spec.n, spec.pp, SamplingMode::Gram, rng);
        const Vector3d i = info_density_vector_mac(spec.n, spec.pp, stats).vector();
        int outages = 0;
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
          const bool out = !(i(c) > lg(c));
          outages += out ? 1 : 0;
          s.split[c] += out ? 1 : 0;
          const double conf = coef(c) > 0.0 ? coef(c) * confusion_weight(i(c), lg(c)) : 0.0;
          s.conf[c].add(conf);
          sum += conf;
        }
        if (outages > 0) ++s.joint;
        sum += mode == OutageMode::Joint ? (outages > 0 ? 1.0 : 0.0) : static_cast<double>(outages);
        s.total.add(sum);
      });
  BoundEstimate r;
  r.trials = trials;
  r.value = acc.total.mean;
  r.std_err = acc.total.std_err();
  for (int c = 0; c < 3; ++c) {
    r.split_outage(c) = static_cast<double>(acc.split[c]) / static_cast<double>(trials);
    r.confusion(c) = acc.conf[c].mean;
  }
  r.outage = mode == OutageMode::Joint ? static_cast<double>(acc.joint) / static_cast<double>(trials)
                                       : r.split_outage.sum();
  return r;
}

BoundEstimate theorem4_rhs(const CodebookSpec& spec, const Thresholds& th, long long trials,
                           std::uint64_t seed, OutageMode mode) {
  return theorem4_rhs(spec, th, trials, seed, mode, default_rn_constants(spec.pp));
}

}  // namespace fbmac

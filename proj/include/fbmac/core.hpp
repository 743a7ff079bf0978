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

// Capacities and dispersions of the point-to-point Gaussian channel and the
// two-user Gaussian MAC. Everything here is in nats (log e = 1); conversion
// to bits happens only at I/O boundaries.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fbmac {

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Matrix3d = Matrix3<double>;
using Vector3d = Vector3<double>;

/// Linear SNRs of the two users. Both must be finite and strictly positive.
template <typename Scalar>
struct BasicPowerPair {
  Scalar p1;
  Scalar p2;

  BasicPowerPair(Scalar p1_, Scalar p2_) : p1(p1_), p2(p2_) {
    using std::isfinite;
    if (!(p1 > 0) || !(p2 > 0) || !isfinite(p1) || !isfinite(p2))
      throw std::domain_error("PowerPair: powers must be finite and > 0");
  }

  Scalar sum() const { return p1 + p2; }
  BasicPowerPair swapped() const { return {p2, p1}; }
};

using PowerPair = BasicPowerPair<double>;

/// Blocklength and target average error probability.
struct SecondOrderParams {
  long long n;
  double eps;

  SecondOrderParams(long long n_, double eps_) : n(n_), eps(eps_) {
    if (n < 1) throw std::domain_error("SecondOrderParams: n must be >= 1");
    if (!(eps > 0.0 && eps < 1.0))
      throw std::domain_error("SecondOrderParams: eps must lie in (0, 1)");
  }
};

template <typename Scalar>
struct BasicCapacityVector {
  Scalar c1;
  Scalar c2;
  Scalar c3;

  Vector3<Scalar> vector() const { return {c1, c2, c3}; }
};

using CapacityVector = BasicCapacityVector<double>;

enum class DispersionKind { Shell, IidGaussian, SumShell };

inline const char* to_string(DispersionKind k) {
  switch (k) {
    case DispersionKind::Shell: return "shell";
    case DispersionKind::IidGaussian: return "iid-gaussian";
    case DispersionKind::SumShell: return "sum-shell";
  }
  return "?";
}

template <typename Scalar>
struct BasicDispersionMatrix {
  Matrix3<Scalar> entries;
  DispersionKind kind;
};

using DispersionMatrix = BasicDispersionMatrix<double>;

struct RatePoint {
  double r1;
  double r2;
};

namespace detail {

template <typename Scalar>
void require_snr(Scalar p, const char* what) {
  using std::isfinite;
  if (!(p >= 0) || !isfinite(p))
    throw std::domain_error(std::string(what) + ": SNR must be finite and >= 0");
}

}  // namespace detail

/// C(P) = 1/2 ln(1 + P).
template <typename Scalar>
Scalar capacity(Scalar p) {
  using std::log1p;
  detail::require_snr(p, "capacity");
  return Scalar(0.5) * log1p(p);
}

/// V(P) = P(P+2) / (2(1+P)^2), in nats^2.
template <typename Scalar>
Scalar dispersion(Scalar p) {
  detail::require_snr(p, "dispersion");
  const Scalar q = Scalar(1) + p;
  return p * (p + Scalar(2)) / (Scalar(2) * q * q);
}

template <typename Scalar>
BasicCapacityVector<Scalar> capacity_vector(const BasicPowerPair<Scalar>& pp) {
  return {capacity(pp.p1), capacity(pp.p2), capacity(pp.sum())};
}

/// Cross dispersion V_{1,2} between the two conditional densities.
template <typename Scalar>
Scalar cross_dispersion_12(const BasicPowerPair<Scalar>& pp) {
  return pp.p1 * pp.p2 / (Scalar(2) * (Scalar(1) + pp.p1) * (Scalar(1) + pp.p2));
}

/// Cross dispersion V_{u,3} between user u's conditional density and the
/// sum density; u is 1 or 2.
template <typename Scalar>
Scalar cross_dispersion_u3(const BasicPowerPair<Scalar>& pp, int user) {
  const Scalar pu = user == 1 ? pp.p1 : pp.p2;
  const Scalar ps = pp.sum();
  return pu * (Scalar(2) + ps) / (Scalar(2) * (Scalar(1) + pu) * (Scalar(1) + ps));
}

/// Variance contribution of the codeword inner product <X1, X2>.
template <typename Scalar>
Scalar inner_product_dispersion(const BasicPowerPair<Scalar>& pp) {
  const Scalar q = Scalar(1) + pp.sum();
  return pp.p1 * pp.p2 / (q * q);
}

template <typename Scalar>
BasicDispersionMatrix<Scalar> dispersion_matrix_sumshell(const BasicPowerPair<Scalar>& pp) {
  const Scalar v12 = cross_dispersion_12(pp);
  const Scalar v13 = cross_dispersion_u3(pp, 1);
  const Scalar v23 = cross_dispersion_u3(pp, 2);
  Matrix3<Scalar> m;
  m << dispersion(pp.p1), v12, v13,
       v12, dispersion(pp.p2), v23,
       v13, v23, dispersion(pp.sum());
  return {m, DispersionKind::SumShell};
}

/// Dispersion matrix of independent power-shell codebooks.
template <typename Scalar>
BasicDispersionMatrix<Scalar> dispersion_matrix_shell(const BasicPowerPair<Scalar>& pp) {
  auto d = dispersion_matrix_sumshell(pp);
  d.entries(2, 2) += inner_product_dispersion(pp);
  d.kind = DispersionKind::Shell;
  return d;
}

/// Dispersion matrix of independent i.i.d. Gaussian codebooks.
template <typename Scalar>
BasicDispersionMatrix<Scalar> dispersion_matrix_iid(const BasicPowerPair<Scalar>& pp) {
  const Scalar one(1), two(2);
  const Scalar p1 = pp.p1, p2 = pp.p2, ps = pp.sum();
  const Scalar v12 = p1 * p2 / (two * (one + p1) * (one + p2));
  const Scalar v13 = p1 * (two + two * p1 + p2) / (two * (one + p1) * (one + ps));
  const Scalar v23 = p2 * (two + p1 + two * p2) / (two * (one + p2) * (one + ps));
  Matrix3<Scalar> m;
  m << p1 / (one + p1), v12, v13,
       v12, p2 / (one + p2), v23,
       v13, v23, ps / (one + ps);
  return {m, DispersionKind::IidGaussian};
}

template <typename Scalar>
BasicDispersionMatrix<Scalar> dispersion_matrix(const BasicPowerPair<Scalar>& pp,
                                                DispersionKind kind) {
  switch (kind) {
    case DispersionKind::Shell: return dispersion_matrix_shell(pp);
    case DispersionKind::IidGaussian: return dispersion_matrix_iid(pp);
    case DispersionKind::SumShell: return dispersion_matrix_sumshell(pp);
  }
  throw std::invalid_argument("dispersion_matrix: unknown kind");
}

/// Symmetric with every eigenvalue >= -tol.
template <typename Derived>
bool is_symmetric_psd(const Eigen::MatrixBase<Derived>& m, double tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) return false;
  const Scalar scale = Scalar(1) + m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-14) * scale) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> es(m);
  return es.eigenvalues().minCoeff() >= Scalar(-tol);
}

inline constexpr double kLn2 = std::numbers::ln2;

template <typename Scalar>
constexpr Scalar nats_to_bits(Scalar x) {
  return x / Scalar(std::numbers::ln2_v<long double>);
}

template <typename Scalar>
constexpr Scalar bits_to_nats(Scalar x) {
  return x * Scalar(std::numbers::ln2_v<long double>);
}

/// Linear SNR from decibels; used only at the CLI boundary.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace fbmac

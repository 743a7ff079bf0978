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

// Independent reference implementations used only by the tests. None of
// these call into the library.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

/// erfc by the Maclaurin series of erf (|x| < 2.5) or Lentz's continued
/// fraction (x >= 2.5), in long double.
inline long double erfc(long double x) {
  if (x < 0) return 2.0L - erfc(-x);
  if (x < 2.5L) {
    long double term = x, sum = x;
    for (int k = 1; k < 200; ++k) {
      term *= -x * x / k;
      const long double add = term / (2 * k + 1);
      sum += add;
      if (std::fabs(add) < 1e-22L * std::fabs(sum)) break;
    }
    return 1.0L - 2.0L / std::sqrt(std::numbers::pi_v<long double>) * sum;
  }
  // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
  const long double tiny = 1e-300L;
  long double f = x, c = x, d = 0.0L;
  for (int k = 1; k < 500; ++k) {
    const long double a = k * 0.5L;
    d = x + a * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0L / d;
    const long double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0L) < 1e-20L) break;
  }
  return std::exp(-x * x) / std::sqrt(std::numbers::pi_v<long double>) / f;
}

inline double q(double x) {
  return static_cast<double>(0.5L * erfc(static_cast<long double>(x) / std::sqrt(2.0L)));
}

/// Q^{-1} by bisection on the oracle Q.
inline double q_inv(double eps) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (q(mid) > eps)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Pr[X1 <= z1, X2 <= z2] for a standard bivariate normal with correlation
/// rho, by the 2-D trapezoid rule on [-8, z1] x [-8, z2] with res^2 nodes.
inline double bivariate_cdf_trapezoid(double z1, double z2, double rho, int res = 2000) {
  const double lo = -8.0;
  const double h1 = (z1 - lo) / res, h2 = (z2 - lo) / res;
  const double det = 1.0 - rho * rho;
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
  double acc = 0.0;
  for (int i = 0; i <= res; ++i) {
    const double x = lo + i * h1;
    const double wi = (i == 0 || i == res) ? 0.5 : 1.0;
    double row = 0.0;
    for (int j = 0; j <= res; ++j) {
      const double y = lo + j * h2;
      const double wj = (j == 0 || j == res) ? 0.5 : 1.0;
      row += wj * std::exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * det));
    }
    acc += wi * row;
  }
  return acc * h1 * h2 * norm;
}

/// Golden-section maximization of a unimodal function on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b,
                         int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  for (int i = 0; i < iters; ++i) {
    if (f(c) > f(d))
      b = d;
    else
      a = c;
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace oracle

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


#include "fbmac/stats.hpp"

#include "fbmac/gaussquad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fbmac {

double BinomialEstimate::std_err() const {
  if (trials <= 0) return 0.0;
  return std::sqrt(value * (1.0 - value) / static_cast<double>(trials));
}

BinomialEstimate binomial_estimate(long long hits, long long trials, double z) {
  if (trials < 0 || hits < 0 || hits > trials)
    throw std::domain_error("binomial_estimate: need 0 <= hits <= trials");
  BinomialEstimate e;
  e.trials = trials;
  e.hits = hits;
  if (trials == 0) return e;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  e.value = p;
  e.ci_low = hits == 0 ? 0.0 : std::max(0.0, centre - half);
  e.ci_high = hits == trials ? 1.0 : std::min(1.0, centre + half);
  return e;
}

double ks_distance_normal(std::vector<double>& samples, double mean, double sd) {
  if (samples.empty()) throw std::domain_error("ks_distance_normal: no samples");
  if (!(sd > 0)) throw std::domain_error("ks_distance_normal: sd must be > 0");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = phi_cdf((samples[i] - mean) / sd);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace fbmac

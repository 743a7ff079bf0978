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

// Small estimators shared by the Monte Carlo modules.

#include <cmath>
#include <vector>

namespace fbmac {

/// Two-sided 97.5% standard normal quantile.
inline constexpr double kZ95 = 1.959963984540054;

/// Binomial proportion with a Wilson score interval.
struct BinomialEstimate {
  long long trials = 0;
  long long hits = 0;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;

  /// sqrt(p(1-p)/trials) at the point estimate.
  double std_err() const;
};

BinomialEstimate binomial_estimate(long long hits, long long trials, double z = kZ95);

/// Streaming mean and variance (Welford), mergeable with Chan's update.
struct RunningMean {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++count;
    const double d = v - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (v - mean);
  }
  void merge(const RunningMean& o) {
    if (o.count == 0) return;
    const long long total = count + o.count;
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / static_cast<double>(total);
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) /
                     static_cast<double>(total);
    count = total;
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_err() const { return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

/// Kolmogorov-Smirnov distance between the empirical law of the samples and
/// N(mean, sd^2). The samples are sorted in place.
double ks_distance_normal(std::vector<double>& samples, double mean, double sd);

}  // namespace fbmac

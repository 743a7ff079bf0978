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

// Random-coding link simulation with one-sided threshold decoding, and
// Monte Carlo evaluation of the matching dependence-testing bounds. Every
// trial draws fresh shell codebooks, so the simulated quantity is the
// ensemble-average error probability that the bounds control.

#include "fbmac/core.hpp"
#include "fbmac/stats.hpp"

#include <cstdint>

namespace fbmac {

/// Blocklength, codebook sizes and powers. P2P runs use m2 = 1 and pp.p1.
struct CodebookSpec {
  long long n;
  long long m1;
  long long m2;
  PowerPair pp;

  CodebookSpec(long long n_, long long m1_, long long m2_, const PowerPair& pp_);

  static CodebookSpec p2p(long long n, long long m, double p) { return {n, m, 1, {p, p}}; }
};

/// Log decoding thresholds in nats; -inf accepts everything, +inf nothing.
struct Thresholds {
  double lg1;
  double lg2;
  double lg3;
};

/// Bounds on the Radon-Nikodym derivatives of the induced output laws with
/// respect to the reference laws.
struct RnConstants {
  double k1;
  double k2;
  double k3;
};

/// K1 = K2 = 1 and K3 = k3_constant(pp).
RnConstants default_rn_constants(const PowerPair& pp);

/// The suprema themselves at blocklength n, computed numerically. K1 and K2
/// are the point-to-point suprema at P1 and P2, since given the other
/// user's codeword the output is a shifted single-user output.
RnConstants exact_rn_constants(long long n, const PowerPair& pp);

/// ln(k1 (M1-1)/2), ln(k2 (M2-1)/2), ln(k3 (M1-1)(M2-1)/2); a zero
/// argument gives -inf.
Thresholds default_thresholds(const CodebookSpec& spec, double k1, double k2, double k3);
Thresholds default_thresholds(const CodebookSpec& spec, const RnConstants& k);

struct SimResult {
  long long trials = 0;
  long long errors = 0;
  double eps_hat = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 1.0;

  double std_err() const;
};

/// Point-to-point link with M = spec.m1 codewords of power spec.pp.p1. The
/// decoder returns the first index whose information density exceeds lg1.
SimResult simulate_p2p(const CodebookSpec& spec, const Thresholds& th, long long trials,
                       std::uint64_t seed);

/// Two-user MAC. The decoder scans pairs (j, k) in lexicographic order and
/// returns the first one passing all three threshold tests.
SimResult simulate_mac(const CodebookSpec& spec, const Thresholds& th, long long trials,
                       std::uint64_t seed);

enum class OutageMode { Joint, Splitting };

const char* to_string(OutageMode m);

/// Monte Carlo estimate of an error bound. Outage and weighted confusion
/// terms are evaluated on the same channel draws; value is their sum and
/// std_err is the standard error of the per-trial sum.
struct BoundEstimate {
  long long trials = 0;
  double value = 0.0;
  double std_err = 0.0;
  double outage = 0.0;                          // joint, or the sum of the split terms
  Vector3d split_outage = Vector3d::Zero();     // Pr[i_k <= lg_k]
  Vector3d confusion = Vector3d::Zero();        // K_k coef_k Q^(k)[i_k > lg_k]
};

/// Outage plus k (M-1)/2 Q_Y[i > lg1]. The confusion probability is
/// estimated from channel draws with weight e^{-i}.
BoundEstimate theorem1_rhs(const CodebookSpec& spec, const Thresholds& th, long long trials,
                           std::uint64_t seed, double k = 1.0);

/// Joint or split outage plus the three weighted confusion terms, with
/// coefficients (M1-1)/2, (M2-1)/2 and (M1-1)(M2-1)/2.
BoundEstimate theorem4_rhs(const CodebookSpec& spec, const Thresholds& th, long long trials,
                           std::uint64_t seed, OutageMode mode, const RnConstants& k);
BoundEstimate theorem4_rhs(const CodebookSpec& spec, const Thresholds& th, long long trials,
                           std::uint64_t seed, OutageMode mode);

}  // namespace fbmac

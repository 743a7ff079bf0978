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

// Command-line front end. run() is the whole program; main() only forwards
// to it, so tests can drive the CLI in-process.

#include "fbmac/regions.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fbmac::cli {

inline constexpr const char* kToolName = "fbmac";
inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kNumericFailure = 1, kUsageError = 2 };

/// Every knob of every subcommand. Output location and worker count are
/// deliberately absent: they do not affect the payload.
struct RunConfig {
  std::string command;  // "region", "verify rn-p2p", ...
  long long n = 500;
  double eps = 1e-3;
  double p1 = 1.0;  // linear SNRs; the dB fields are derived for display
  double p2 = 1.0;
  std::string kind = "joint";
  long long points = 256;
  long long samples = 1LL << 14;
  long long trials = 100000;
  std::uint64_t seed = 0;
  std::string units = "bits";
  std::string format = "csv";
  double gallager_a = 1.0;
  std::string delta_rule = "zero";
  double delta = 0.0;
  int lambda_resolution = 64;
  int alpha_grid = 200;
  int beta_grid = 200;
  std::string link = "p2p";
  long long m1 = 4;
  long long m2 = 4;
  std::string k_rule = "exact";
  std::string clt_case = "p2p";
  long long n_small = 64;
  long long n_large = 1024;
  int seeds = 10;
  std::vector<long long> n_list{400, 1600};
  std::vector<int> bessel_k;
  std::vector<double> bessel_z;
  long long pairs = 100000;
};

/// The keys relevant to cfg.command, with resolved values.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Overwrites the fields present in j.
void apply_config_json(const nlohmann::json& j, RunConfig& cfg);

RegionSpec region_spec_from(const RunConfig& cfg);

/// CSV: a "# " line holding the embedded config, the header
/// r1_<units>,r2_<units>, then one row per point with 6 decimals.
std::string emit_region_csv(const RegionBoundary& rb, const nlohmann::json& config);

nlohmann::json emit_region_json(const RegionBoundary& rb, const nlohmann::json& config);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fbmac::cli

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


#include "cli.hpp"

#include "fbmac/core.hpp"
#include "fbmac/parallel.hpp"
#include "fbmac/shellmc.hpp"
#include "fbmac/simlink.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace fbmac::cli {

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double p) { return 10.0 * std::log10(p); }

// JSON has no infinities; they are written as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Units parse_units(const std::string& s) {
  if (s == "bits") return Units::Bits;
  if (s == "nats") return Units::Nats;
  throw UsageError("unknown units '" + s + "' (expected bits or nats)");
}

DeltaRule parse_delta_rule(const std::string& s) {
  for (auto r : {DeltaRule::Zero, DeltaRule::QuarterPower, DeltaRule::Fixed})
    if (s == to_string(r)) return r;
  throw UsageError("unknown delta rule '" + s + "'");
}

RegionKind parse_kind(const std::string& s) {
  const auto k = parse_region_kind(s);
  if (!k) throw UsageError("unknown region kind '" + s + "'");
  return *k;
}

std::uint64_t env_seed() {
  const char* s = std::getenv("FBMAC_SEED");
  if (!s || !*s) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw UsageError(std::string("FBMAC_SEED is not an unsigned integer: ") + s);
  return v;
}

json region_keys(const RunConfig& c) {
  return {{"n", c.n},
          {"eps", c.eps},
          {"p1", c.p1},
          {"p2", c.p2},
          {"p1_db", linear_to_db(c.p1)},
          {"p2_db", linear_to_db(c.p2)},
          {"points", c.points},
          {"samples", c.samples},
          {"seed", c.seed},
          {"units", c.units},
          {"gallager_a", c.gallager_a},
          {"delta_rule", c.delta_rule},
          {"delta", c.delta},
          {"lambda_resolution", c.lambda_resolution},
          {"alpha_grid", c.alpha_grid},
          {"beta_grid", c.beta_grid}};
}

void write_payload(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  f.close();
  if (!f) throw IoError("write to '" + path + "' failed");
}

std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json document(const RunConfig& cfg) {
  return {{"tool", kToolName}, {"version", kToolVersion}, {"config", config_to_json(cfg)}};
}

// Reads the config embedded in a payload file (JSON document, CSV comment
// line or bare config object).
json load_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  if (text.rfind("# ", 0) == 0) text = text.substr(2, text.find('\n') - 2);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (j.contains("config")) j = j["config"];
  if (!j.is_object()) throw UsageError("config file '" + path + "' holds no config object");
  return j;
}

std::optional<std::string> find_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config") {
      if (i + 1 >= argc) throw UsageError("--config needs a path");
      return std::string(argv[i + 1]);
    }
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- commands

int cmd_region(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const auto kind = parse_kind(cfg.kind);
  const auto units = parse_units(cfg.units);
  if (cfg.format != "csv" && cfg.format != "json") throw UsageError("unknown format '" + cfg.format + "'");
  const auto rb = to_units(region_boundary(region_spec_from(cfg), kind), units);
  const json conf = config_to_json(cfg);
  write_payload(out_path, cfg.format == "csv" ? emit_region_csv(rb, conf) : emit_region_json(rb, conf).dump(2) + "\n", out);
  return kOk;
}

int cmd_p2p(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const auto units = parse_units(cfg.units);
  double r = p2p_second_order_rate(cfg.n, cfg.eps, cfg.p1);
  if (units == Units::Bits) r /= std::numbers::ln2;
  if (cfg.format == "json") {
    json d = document(cfg);
    d["units"] = cfg.units;
    d["rate"] = r;
    write_payload(out_path, d.dump(2) + "\n", out);
  } else {
    write_payload(out_path, format_fixed6(r) + "\n", out);
  }
  return kOk;
}

RnConstants constants_for(const RunConfig& cfg, const PowerPair& pp) {
  if (cfg.k_rule == "paper") return default_rn_constants(pp);
  if (cfg.k_rule == "exact") return exact_rn_constants(cfg.n, pp);
  throw UsageError("unknown k rule '" + cfg.k_rule + "' (expected paper or exact)");
}

json sim_json(const SimResult& r) {
  return {{"trials", r.trials}, {"errors", r.errors}, {"eps_hat", r.eps_hat},
          {"ci95_low", r.ci95_low}, {"ci95_high", r.ci95_high}, {"std_err", r.std_err()}};
}

json bound_json(const BoundEstimate& b) {
  return {{"value", b.value},
          {"std_err", b.std_err},
          {"outage", b.outage},
          {"split_outage", {b.split_outage(0), b.split_outage(1), b.split_outage(2)}},
          {"confusion", {b.confusion(0), b.confusion(1), b.confusion(2)}}};
}

// Simulation plus the matching bound(s). Returns the document and whether
// every bound covers the simulated error within two combined standard errors.
std::pair<json, bool> simulate_with_bounds(const RunConfig& cfg) {
  if (cfg.trials < 1000) throw UsageError("--trials must be at least 1000");
  json d = document(cfg);
  bool pass = true;
  const auto covers = [](const SimResult& s, const BoundEstimate& b) {
    return s.eps_hat <= b.value + 2.0 * std::hypot(s.std_err(), b.std_err);
  };
  if (cfg.link == "p2p") {
    const auto spec = CodebookSpec::p2p(cfg.n, cfg.m1, cfg.p1);
    const auto th = default_thresholds(spec, 1.0, 1.0, 1.0);
    const double k = constants_for(cfg, {cfg.p1, cfg.p1}).k1;
    const auto sim = simulate_p2p(spec, th, cfg.trials, cfg.seed);
    const auto b = theorem1_rhs(spec, th, cfg.trials, cfg.seed, k);
    d["thresholds"] = {number(th.lg1)};
    d["constants"] = {k};
    d["simulation"] = sim_json(sim);
    d["bounds"] = {{"theorem1", bound_json(b)}};
    pass = covers(sim, b);
  } else if (cfg.link == "mac") {
    const CodebookSpec spec(cfg.n, cfg.m1, cfg.m2, {cfg.p1, cfg.p2});
    const auto th = default_thresholds(spec, default_rn_constants(spec.pp));
    const auto k = constants_for(cfg, spec.pp);
    const auto sim = simulate_mac(spec, th, cfg.trials, cfg.seed);
    d["thresholds"] = {number(th.lg1), number(th.lg2), number(th.lg3)};
    d["constants"] = {k.k1, k.k2, k.k3};
    d["simulation"] = sim_json(sim);
    d["bounds"] = json::object();
    for (auto mode : {OutageMode::Joint, OutageMode::Splitting}) {
      const auto b = theorem4_rhs(spec, th, cfg.trials, cfg.seed, mode, k);
      d["bounds"][to_string(mode)] = bound_json(b);
      pass = pass && covers(sim, b);
    }
  } else {
    throw UsageError("unknown link '" + cfg.link + "' (expected p2p or mac)");
  }
  return {d, pass};
}

int cmd_simulate(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  auto [d, pass] = simulate_with_bounds(cfg);
  d["bound_covers_simulation"] = pass;
  write_payload(out_path, d.dump(2) + "\n", out);
  return kOk;
}

int emit_verdict(json d, bool pass, const std::string& out_path, std::ostream& out) {
  d["pass"] = pass;
  write_payload(out_path, d.dump(2) + "\n", out);
  return pass ? kOk : kNumericFailure;
}

int cmd_verify_rn_p2p(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const auto r = rn_bound_p2p_check(cfg.p1);
  json d = document(cfg);
  d["max"] = r.max_value;
  d["argmax"] = r.argmax;
  d["expected_argmax"] = r.expected_argmax;
  d["k_finite"] = r.k_finite;
  d["k_asymptotic"] = r.k_asymptotic;
  const bool pass = r.max_value <= 1e-9 && std::abs(r.argmax - r.expected_argmax) <= 1e-6 * r.expected_argmax;
  return emit_verdict(d, pass, out_path, out);
}

int cmd_verify_rn_mac(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const auto r = rn_bound_mac_check({cfg.p1, cfg.p2});
  json d = document(cfg);
  d["max"] = r.max_value;
  d["argmax"] = r.argmax;
  d["expected_argmax"] = r.expected_argmax;
  d["k3_finite"] = r.k_finite;
  d["k3_asymptotic"] = r.k_asymptotic;
  const bool pass = r.max_value <= 1e-9 && std::abs(r.argmax - r.expected_argmax) <= 1e-6 * r.expected_argmax;
  return emit_verdict(d, pass, out_path, out);
}

int cmd_verify_clt(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  CltCase c;
  if (cfg.clt_case == "p2p")
    c = CltCase::P2P;
  else if (cfg.clt_case == "mac")
    c = CltCase::MacJoint;
  else
    throw UsageError("unknown clt case '" + cfg.clt_case + "' (expected p2p or mac)");
  if (cfg.seeds < 1) throw UsageError("--seeds must be >= 1");
  std::vector<double> ratios;
  json runs = json::array();
  for (int s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t seed = derive_key(cfg.seed, static_cast<std::uint64_t>(s));
    const auto small = clt_function_check(c, cfg.n_small, cfg.trials, seed, {cfg.p1, cfg.p2});
    const auto large = clt_function_check(c, cfg.n_large, cfg.trials, seed, {cfg.p1, cfg.p2});
    ratios.push_back(small.ks_distance / large.ks_distance);
    runs.push_back({{"ks_small", small.ks_distance}, {"ks_large", large.ks_distance}, {"ratio", ratios.back()}});
  }
  std::vector<double> sorted = ratios;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  json d = document(cfg);
  d["runs"] = runs;
  d["median_ratio"] = median;
  d["expected_ratio"] = std::sqrt(static_cast<double>(cfg.n_large) / static_cast<double>(cfg.n_small));
  return emit_verdict(d, median >= 2.6 && median <= 6.5, out_path, out);
}

int cmd_verify_bessel(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  std::vector<int> ks = cfg.bessel_k;
  std::vector<double> zs = cfg.bessel_z;
  if (ks.empty()) ks = {0, 1, 2, 5, 20, 100};
  if (zs.empty()) zs = {0.01, 0.5, 1, 10, 100, 1000};
  json checks = json::array();
  bool pass = true;
  for (int k : ks) {
    for (double z : zs) {
      const auto b = bessel_ratio_bound_check(k, z);
      checks.push_back({{"k", k}, {"z", z}, {"log_lhs", b.log_lhs}, {"log_rhs", b.log_rhs}, {"holds", b.holds}});
      pass = pass && b.holds;
    }
  }
  json d = document(cfg);
  d["checks"] = checks;
  return emit_verdict(d, pass, out_path, out);
}

int cmd_verify_inner_product(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const auto r = inner_product_check(cfg.n, {cfg.p1, cfg.p2}, cfg.pairs, cfg.seed);
  const double tol = 4.0 * std::sqrt(2.0 / static_cast<double>(cfg.pairs));
  json d = document(cfg);
  d["mean"] = r.mean;
  d["variance_ratio"] = r.variance_ratio;
  d["tolerance"] = tol;
  return emit_verdict(d, std::abs(r.variance_ratio - 1.0) <= tol, out_path, out);
}

int cmd_verify_confusion(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  if (cfg.n_list.size() < 2) throw UsageError("--n-list needs at least two blocklengths");
  const auto pts = confusion_scaling_check(cfg.n_list, cfg.p1, cfg.trials, cfg.seed);
  json rows = json::array();
  for (const auto& p : pts)
    rows.push_back({{"n", p.n}, {"log_gamma", p.log_gamma}, {"product", p.product}, {"std_err", p.std_err}});
  const double ratio = pts.front().product / pts.back().product;
  const double expected = std::sqrt(static_cast<double>(pts.back().n) / static_cast<double>(pts.front().n));
  json d = document(cfg);
  d["points"] = rows;
  d["ratio"] = ratio;
  d["expected_ratio"] = expected;
  return emit_verdict(d, ratio >= 0.7 * expected && ratio <= 1.45 * expected, out_path, out);
}

int cmd_verify_bounds(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  auto [d, pass] = simulate_with_bounds(cfg);
  return emit_verdict(d, pass, out_path, out);
}

const std::vector<RegionKind>& figure1_kinds() {
  static const std::vector<RegionKind> kinds{
      RegionKind::Joint, RegionKind::Splitting, RegionKind::IidGaussian,
      RegionKind::Gallager, RegionKind::Tdma, RegionKind::SuOuter,
      RegionKind::SumShellHypothetical, RegionKind::ConjecturedSumOuter, RegionKind::Pentagon};
  return kinds;
}

// Containment of region boundaries at 8 rays, in nats.
json figure1_verification(const RegionSpec& spec, bool& pass) {
  struct Pair {
    RegionKind inner, outer;
    double tol;
  };
  const std::vector<Pair> pairs{
      {RegionKind::Splitting, RegionKind::Joint, 2e-3},
      {RegionKind::Joint, RegionKind::SumShellHypothetical, 1e-6},
      {RegionKind::SumShellHypothetical, RegionKind::ConjecturedSumOuter, 1e-6},
      {RegionKind::Joint, RegionKind::SuOuter, 1e-9},
      {RegionKind::Splitting, RegionKind::SuOuter, 1e-9},
      {RegionKind::IidGaussian, RegionKind::SuOuter, 1e-9},
      {RegionKind::Tdma, RegionKind::SuOuter, 1e-9},
      {RegionKind::Gallager, RegionKind::SuOuter, 1e-9},
      {RegionKind::SuOuter, RegionKind::Pentagon, 1e-9},
      {RegionKind::ConjecturedSumOuter, RegionKind::Pentagon, 1e-9},
  };
  json checks = json::array();
  pass = true;
  for (double theta : ray_angles(8)) {
    std::vector<double> radius(figure1_kinds().size());
    for (std::size_t i = 0; i < figure1_kinds().size(); ++i) {
      const auto p = region_ray(spec, figure1_kinds()[i], theta);
      radius[i] = std::hypot(p.r1, p.r2);
    }
    const auto r_of = [&](RegionKind k) {
      return radius[std::find(figure1_kinds().begin(), figure1_kinds().end(), k) - figure1_kinds().begin()];
    };
    for (const auto& pr : pairs) {
      const double a = r_of(pr.inner), b = r_of(pr.outer);
      const bool ok = a <= b + pr.tol;
      pass = pass && ok;
      checks.push_back({{"theta", theta}, {"inner", to_string(pr.inner)}, {"outer", to_string(pr.outer)},
                        {"inner_radius", a}, {"outer_radius", b}, {"pass", ok}});
    }
  }
  return {{"rays", 8}, {"units", "nats"}, {"checks", checks}, {"pass", pass}};
}

int cmd_figure1(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
  const auto units = parse_units(cfg.units);
  if (out_dir.empty()) throw UsageError("figure1 needs --out-dir");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const RegionSpec spec = region_spec_from(cfg);
  const json conf = config_to_json(cfg);
  json files = json::array();
  for (const auto kind : figure1_kinds()) {
    const auto rb = to_units(region_boundary(spec, kind), units);
    const std::string name = std::string(to_string(kind)) + ".csv";
    write_payload((std::filesystem::path(out_dir) / name).string(), emit_region_csv(rb, conf), out);
    files.push_back({{"kind", to_string(kind)},
                     {"file", name},
                     {"rows", rb.points.size()},
                     {"units", to_string(rb.units)},
                     {"conjectural", rb.conjectural},
                     {"empty", rb.empty}});
  }
  bool pass = true;
  json manifest = document(cfg);
  manifest["files"] = files;
  manifest["verification"] = figure1_verification(spec, pass);
  write_payload((std::filesystem::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n", out);
  return pass ? kOk : kNumericFailure;
}

}  // namespace

// ------------------------------------------------------------- public API

json config_to_json(const RunConfig& c) {
  json j;
  const std::string& cmd = c.command;
  if (cmd == "region") {
    j = region_keys(c);
    j["kind"] = c.kind;
    j["format"] = c.format;
  } else if (cmd == "figure1") {
    j = region_keys(c);
  } else if (cmd == "p2p") {
    j = {{"n", c.n}, {"eps", c.eps}, {"p1", c.p1}, {"p1_db", linear_to_db(c.p1)}, {"units", c.units}, {"format", c.format}};
  } else if (cmd == "simulate" || cmd == "verify bounds") {
    j = {{"link", c.link}, {"n", c.n}, {"m1", c.m1}, {"m2", c.m2}, {"p1", c.p1}, {"p2", c.p2},
         {"trials", c.trials}, {"seed", c.seed}, {"k_rule", c.k_rule}};
  } else if (cmd == "verify rn-p2p") {
    j = {{"p1", c.p1}};
  } else if (cmd == "verify rn-mac") {
    j = {{"p1", c.p1}, {"p2", c.p2}};
  } else if (cmd == "verify clt") {
    j = {{"clt_case", c.clt_case}, {"n_small", c.n_small}, {"n_large", c.n_large}, {"trials", c.trials},
         {"seeds", c.seeds}, {"seed", c.seed}, {"p1", c.p1}, {"p2", c.p2}};
  } else if (cmd == "verify bessel") {
    j = {{"bessel_k", c.bessel_k}, {"bessel_z", c.bessel_z}};
  } else if (cmd == "verify inner-product") {
    j = {{"n", c.n}, {"p1", c.p1}, {"p2", c.p2}, {"pairs", c.pairs}, {"seed", c.seed}};
  } else if (cmd == "verify confusion-scaling") {
    j = {{"p1", c.p1}, {"n_list", c.n_list}, {"trials", c.trials}, {"seed", c.seed}};
  }
  j["command"] = cmd;
  return j;
}

void apply_config_json(const json& j, RunConfig& c) {
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("command", c.command);
    get("n", c.n);
    get("eps", c.eps);
    get("p1", c.p1);
    get("p2", c.p2);
    get("kind", c.kind);
    get("points", c.points);
    get("samples", c.samples);
    get("trials", c.trials);
    get("seed", c.seed);
    get("units", c.units);
    get("format", c.format);
    get("gallager_a", c.gallager_a);
    get("delta_rule", c.delta_rule);
    get("delta", c.delta);
    get("lambda_resolution", c.lambda_resolution);
    get("alpha_grid", c.alpha_grid);
    get("beta_grid", c.beta_grid);
    get("link", c.link);
    get("m1", c.m1);
    get("m2", c.m2);
    get("k_rule", c.k_rule);
    get("clt_case", c.clt_case);
    get("n_small", c.n_small);
    get("n_large", c.n_large);
    get("seeds", c.seeds);
    get("n_list", c.n_list);
    get("bessel_k", c.bessel_k);
    get("bessel_z", c.bessel_z);
    get("pairs", c.pairs);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
}

RegionSpec region_spec_from(const RunConfig& c) {
  if (c.points < 2) throw UsageError("--points must be >= 2");
  if (c.samples < 1) throw UsageError("--samples must be >= 1");
  RegionSpec s;
  s.so = SecondOrderParams(c.n, c.eps);
  s.pp = PowerPair(c.p1, c.p2);
  s.num_points = static_cast<std::size_t>(c.points);
  s.samples = static_cast<std::size_t>(c.samples);
  s.seed = c.seed;
  s.lambda_resolution = c.lambda_resolution;
  s.gallager_a = c.gallager_a;
  s.delta_rule = parse_delta_rule(c.delta_rule);
  s.delta = c.delta;
  s.alpha_grid = c.alpha_grid;
  s.beta_grid = c.beta_grid;
  return s;
}

std::string emit_region_csv(const RegionBoundary& rb, const json& config) {
  const std::string u = to_string(rb.units);
  std::string s = "# " + json{{"tool", kToolName}, {"version", kToolVersion}, {"kind", to_string(rb.kind)},
                              {"config", config}}.dump() + "\n";
  s += "r1_" + u + ",r2_" + u + "\n";
  for (const auto& p : rb.points) s += format_fixed6(p.r1) + "," + format_fixed6(p.r2) + "\n";
  return s;
}

json emit_region_json(const RegionBoundary& rb, const json& config) {
  const RegionSpec& p = rb.params;
  json pts = json::array();
  for (const auto& q : rb.points) pts.push_back({q.r1, q.r2});
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"config", config},
          {"kind", to_string(rb.kind)},
          {"params",
           {{"n", p.so.n}, {"eps", p.so.eps}, {"p1", p.pp.p1}, {"p2", p.pp.p2},
            {"num_points", p.num_points}, {"samples", p.samples}, {"seed", p.seed},
            {"lambda_resolution", p.lambda_resolution}, {"gallager_a", p.gallager_a},
            {"delta_rule", to_string(p.delta_rule)}, {"delta", p.delta},
            {"alpha_grid", p.alpha_grid}, {"beta_grid", p.beta_grid}}},
          {"units", to_string(rb.units)},
          {"conjectural", rb.conjectural},
          {"empty", rb.empty},
          {"points", pts}};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string out_path, out_dir = "figure1";
  int threads = -1;
  std::optional<double> p1_db, p2_db, p_db;
  std::string config_path;

  CLI::App app{"Finite-blocklength rate regions and link simulation for the Gaussian MAC", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--out", out_path, "Output file (default: standard output)");
    sub->add_option("--threads", threads, "Worker threads (default: FBMAC_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--config", config_path, "Reload the config embedded in a previous output file");
  };
  const auto seed_opt = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "Random seed (default: FBMAC_SEED or 0)");
  };
  const auto power_opts = [&](CLI::App* sub) {
    auto* a = sub->add_option("--p1-db", p1_db, "User 1 SNR in dB");
    auto* b = sub->add_option("--p1", cfg.p1, "User 1 SNR, linear");
    a->excludes(b);
    auto* c = sub->add_option("--p2-db", p2_db, "User 2 SNR in dB");
    auto* d = sub->add_option("--p2", cfg.p2, "User 2 SNR, linear");
    c->excludes(d);
  };
  const auto region_opts = [&](CLI::App* sub) {
    sub->add_option("--n", cfg.n, "Blocklength")->check(CLI::PositiveNumber);
    sub->add_option("--eps", cfg.eps, "Target average error probability");
    power_opts(sub);
    sub->add_option("--points", cfg.points, "Rays per boundary");
    sub->add_option("--samples", cfg.samples, "Orthant integrator points");
    sub->add_option("--units", cfg.units, "bits or nats");
    sub->add_option("--gallager-a", cfg.gallager_a, "Gallager prefactor");
    sub->add_option("--delta-rule", cfg.delta_rule, "iid back-off rule: zero, quarter-power or fixed");
    sub->add_option("--delta", cfg.delta, "Back-off for the fixed rule");
    sub->add_option("--lambda-resolution", cfg.lambda_resolution, "Splitting weight grid");
    sub->add_option("--alpha-grid", cfg.alpha_grid, "TDMA time-share grid");
    sub->add_option("--beta-grid", cfg.beta_grid, "TDMA error-split grid");
    seed_opt(sub);
    common(sub);
  };

  auto* region = app.add_subcommand("region", "Sample one rate-region boundary");
  region_opts(region);
  region->add_option("--kind", cfg.kind,
                     "joint, splitting, iid, gallager, tdma, su-outer, sumshell, conjectured-sum-outer, pentagon");
  region->add_option("--format", cfg.format, "csv or json");

  auto* p2p = app.add_subcommand("p2p", "Point-to-point second-order rate");
  p2p->add_option("--n", cfg.n, "Blocklength")->check(CLI::PositiveNumber);
  p2p->add_option("--eps", cfg.eps, "Target error probability");
  {
    auto* a = p2p->add_option("--p-db", p_db, "SNR in dB");
    auto* b = p2p->add_option("--p", cfg.p1, "SNR, linear");
    a->excludes(b);
  }
  p2p->add_option("--units", cfg.units, "bits or nats");
  p2p->add_option("--format", cfg.format, "csv (bare number) or json");
  common(p2p);

  auto* simulate = app.add_subcommand("simulate", "Random-coding simulation with the matching bounds");
  const auto sim_opts = [&](CLI::App* sub) {
    sub->add_option("--link", cfg.link, "p2p or mac");
    sub->add_option("--n", cfg.n, "Blocklength")->check(CLI::PositiveNumber);
    sub->add_option("--m1", cfg.m1, "Codebook size of user 1 (or the P2P codebook)");
    sub->add_option("--m2", cfg.m2, "Codebook size of user 2");
    power_opts(sub);
    sub->add_option("--trials", cfg.trials, "Monte Carlo trials");
    sub->add_option("--k-rule", cfg.k_rule, "Radon-Nikodym constants in the bound: exact or paper");
    seed_opt(sub);
    common(sub);
  };
  sim_opts(simulate);

  auto* verify = app.add_subcommand("verify", "Numerical checks");
  verify->require_subcommand(1);
  auto* v_clt = verify->add_subcommand("clt", "KS distance ratio of the Gaussian approximation");
  v_clt->add_option("--case", cfg.clt_case, "p2p or mac");
  v_clt->add_option("--n-small", cfg.n_small, "Smaller blocklength");
  v_clt->add_option("--n-large", cfg.n_large, "Larger blocklength");
  v_clt->add_option("--trials", cfg.trials, "Trials per run");
  v_clt->add_option("--seeds", cfg.seeds, "Independent runs");
  power_opts(v_clt);
  seed_opt(v_clt);
  common(v_clt);
  auto* v_rn_p2p = verify->add_subcommand("rn-p2p", "Radon-Nikodym exponent, point to point");
  {
    auto* a = v_rn_p2p->add_option("--p-db", p_db, "SNR in dB");
    auto* b = v_rn_p2p->add_option("--p", cfg.p1, "SNR, linear");
    a->excludes(b);
  }
  common(v_rn_p2p);
  auto* v_rn_mac = verify->add_subcommand("rn-mac", "Radon-Nikodym exponent, sum of two shells");
  power_opts(v_rn_mac);
  common(v_rn_mac);
  auto* v_bessel = verify->add_subcommand("bessel", "Bessel ratio bound");
  v_bessel->add_option("--k", cfg.bessel_k, "Orders")->delimiter(',');
  v_bessel->add_option("--z", cfg.bessel_z, "Arguments")->delimiter(',');
  common(v_bessel);
  auto* v_inner = verify->add_subcommand("inner-product", "Variance of the codeword inner product");
  v_inner->add_option("--n", cfg.n, "Blocklength")->check(CLI::PositiveNumber);
  v_inner->add_option("--pairs", cfg.pairs, "Codeword pairs");
  power_opts(v_inner);
  seed_opt(v_inner);
  common(v_inner);
  auto* v_conf = verify->add_subcommand("confusion-scaling", "n^{-1/2} decay of the scaled confusion term");
  {
    auto* a = v_conf->add_option("--p-db", p_db, "SNR in dB");
    auto* b = v_conf->add_option("--p", cfg.p1, "SNR, linear");
    a->excludes(b);
  }
  v_conf->add_option("--n-list", cfg.n_list, "Ascending blocklengths")->delimiter(',');
  v_conf->add_option("--trials", cfg.trials, "Trials per blocklength");
  seed_opt(v_conf);
  common(v_conf);
  auto* v_bounds = verify->add_subcommand("bounds", "Simulated error against the theorem bound");
  sim_opts(v_bounds);

  auto* figure1 = app.add_subcommand("figure1", "All Figure 1 curves plus a manifest");
  region_opts(figure1);
  figure1->add_option("--out-dir", out_dir, "Output directory");

  const auto t0 = std::chrono::steady_clock::now();
  try {
    cfg.seed = env_seed();
    if (const auto path = find_config_path(argc, argv)) apply_config_json(load_config_file(*path), cfg);
    const std::string loaded_command = cfg.command;
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForVersion&) {
      out << kToolVersion << "\n";
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << kToolName << ": " << e.what() << "\n";
      return kUsageError;
    }

    std::string command;
    for (auto* sub : app.get_subcommands()) {
      command = sub->get_name();
      for (auto* s2 : sub->get_subcommands()) command += " " + s2->get_name();
    }
    if (!loaded_command.empty() && loaded_command != command)
      throw UsageError("config was written by '" + loaded_command + "', not '" + command + "'");
    cfg.command = command;
    if (p1_db) cfg.p1 = db_to_linear(*p1_db);
    if (p2_db) cfg.p2 = db_to_linear(*p2_db);
    if (p_db) cfg.p1 = db_to_linear(*p_db);
    if (command == "p2p" || command == "verify rn-p2p" || command == "verify confusion-scaling") cfg.p2 = cfg.p1;
    if (threads >= 0) set_worker_count(threads);

    int code = kOk;
    if (command == "region") code = cmd_region(cfg, out_path, out);
    else if (command == "p2p") code = cmd_p2p(cfg, out_path, out);
    else if (command == "simulate") code = cmd_simulate(cfg, out_path, out);
    else if (command == "figure1") code = cmd_figure1(cfg, out_dir, out);
    else if (command == "verify clt") code = cmd_verify_clt(cfg, out_path, out);
    else if (command == "verify rn-p2p") code = cmd_verify_rn_p2p(cfg, out_path, out);
    else if (command == "verify rn-mac") code = cmd_verify_rn_mac(cfg, out_path, out);
    else if (command == "verify bessel") code = cmd_verify_bessel(cfg, out_path, out);
    else if (command == "verify inner-product") code = cmd_verify_inner_product(cfg, out_path, out);
    else if (command == "verify confusion-scaling") code = cmd_verify_confusion(cfg, out_path, out);
    else if (command == "verify bounds") code = cmd_verify_bounds(cfg, out_path, out);
    else throw UsageError("unknown command '" + command + "'");

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    err << kToolName << ": " << command << " finished in " << secs << " s\n";
    if (threads >= 0) set_worker_count(0);
    return code;
  } catch (const UsageError& e) {
    err << kToolName << ": " << e.what() << "\n";
    return kUsageError;
  } catch (const std::logic_error& e) {
    err << kToolName << ": invalid argument: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << kToolName << ": " << e.what() << "\n";
    return kNumericFailure;
  }
}

}  // namespace fbmac::cli

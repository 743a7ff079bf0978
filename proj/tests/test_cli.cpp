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


#include <gtest/gtest.h>

#include "cli.hpp"
#include "fbmac/regions.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

using namespace fbmac;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::initializer_list<std::string> args) {
  std::vector<std::string> v{"fbmac"};
  v.insert(v.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : v) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fbmac_cli_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(CliP2P, FigureOneRateInBits) {
  const auto r = run_cli({"p2p", "--n", "500", "--eps", "1e-3", "--p-db", "0", "--units", "bits"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0.377905\n");
}

TEST(CliRegion, JointCsvHasHeaderAndRows) {
  const auto dir = scratch_dir("joint");
  const auto path = (dir / "joint.csv").string();
  const auto r = run_cli({"region", "--kind", "joint", "--n", "500", "--eps", "1e-3", "--p1-db", "0",
                          "--p2-db", "0", "--points", "256", "--units", "bits", "--format", "csv",
                          "--out", path});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(slurp(path));
  ASSERT_EQ(ls.size(), 258u);
  EXPECT_EQ(ls[0].rfind("# {", 0), 0u);
  EXPECT_EQ(ls[1], "r1_bits,r2_bits");
  const std::regex row(R"(^\d+\.\d{6},\d+\.\d{6}$)");
  for (std::size_t i = 2; i < ls.size(); ++i) EXPECT_TRUE(std::regex_match(ls[i], row)) << ls[i];
}

TEST(CliRegion, JsonRoundTripIsBitwise) {
  const auto r = run_cli({"region", "--kind", "tdma", "--points", "40", "--units", "nats", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto d = json::parse(r.out);
  RegionSpec s;
  s.num_points = 40;
  const auto rb = region_boundary(s, RegionKind::Tdma);
  ASSERT_EQ(d["points"].size(), rb.points.size());
  for (std::size_t i = 0; i < rb.points.size(); ++i) {
    EXPECT_EQ(d["points"][i][0].get<double>(), rb.points[i].r1);
    EXPECT_EQ(d["points"][i][1].get<double>(), rb.points[i].r2);
  }
  EXPECT_EQ(d["kind"], "tdma");
  EXPECT_EQ(d["units"], "nats");
  EXPECT_EQ(d["params"]["n"], 500);
}

TEST(CliRegion, BitsAreNatsOverLn2) {
  const auto a = json::parse(run_cli({"region", "--kind", "pentagon", "--points", "16", "--units", "nats", "--format", "json"}).out);
  const auto b = json::parse(run_cli({"region", "--kind", "pentagon", "--points", "16", "--units", "bits", "--format", "json"}).out);
  for (std::size_t i = 0; i < 16; ++i)
    for (int c = 0; c < 2; ++c)
      EXPECT_NEAR(b["points"][i][c].get<double>() * std::numbers::ln2, a["points"][i][c].get<double>(), 1e-15);
}

TEST(CliRegion, EmptyGallagerRegion) {
  const auto r = run_cli({"region", "--kind", "gallager", "--n", "10", "--eps", "1e-6", "--points", "8", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto d = json::parse(r.out);
  EXPECT_TRUE(d["points"].is_array());
  EXPECT_TRUE(d["points"].empty());
  EXPECT_EQ(d["empty"], true);
}

TEST(CliRegion, ConfigReloadReproducesPayload) {
  const auto dir = scratch_dir("reload");
  const auto first = (dir / "a.json").string(), second = (dir / "b.json").string();
  ASSERT_EQ(run_cli({"region", "--kind", "splitting", "--points", "24", "--p2-db", "3", "--format", "json", "--out", first}).code, 0);
  ASSERT_EQ(run_cli({"region", "--config", first, "--out", second}).code, 0);
  EXPECT_EQ(slurp(first), slurp(second));

  const auto csv1 = (dir / "a.csv").string(), csv2 = (dir / "b.csv").string();
  ASSERT_EQ(run_cli({"region", "--kind", "iid", "--points", "12", "--samples", "2048", "--seed", "7", "--out", csv1}).code, 0);
  ASSERT_EQ(run_cli({"region", "--config", csv1, "--out", csv2}).code, 0);
  EXPECT_EQ(slurp(csv1), slurp(csv2));
}

TEST(CliRegion, ConfigFromAnotherCommandIsRejected) {
  const auto dir = scratch_dir("wrongcmd");
  const auto path = (dir / "p.json").string();
  ASSERT_EQ(run_cli({"p2p", "--format", "json", "--out", path}).code, 0);
  EXPECT_EQ(run_cli({"region", "--config", path}).code, 2);
}

TEST(CliRegion, SeedFromEnvironment) {
  ::setenv("FBMAC_SEED", "42", 1);
  const auto r = run_cli({"region", "--kind", "pentagon", "--points", "4", "--format", "json"});
  ::unsetenv("FBMAC_SEED");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["config"]["seed"], 42);
  const auto explicit_seed = run_cli({"region", "--kind", "pentagon", "--points", "4", "--format", "json", "--seed", "3"});
  EXPECT_EQ(json::parse(explicit_seed.out)["config"]["seed"], 3);
}

TEST(CliErrors, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"region", "--kind", "bogus"}).code, 2);
  EXPECT_EQ(run_cli({"region", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run_cli({"region", "--p1", "1", "--p1-db", "0"}).code, 2);
  EXPECT_EQ(run_cli({"region", "--eps", "2", "--kind", "pentagon"}).code, 2);
  EXPECT_EQ(run_cli({"region", "--units", "furlongs", "--kind", "pentagon"}).code, 2);
  EXPECT_EQ(run_cli({"verify"}).code, 2);
  const auto r = run_cli({"region", "--kind", "bogus"});
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
}

TEST(CliErrors, UnwritablePathExitsOne) {
  EXPECT_EQ(run_cli({"p2p", "--out", "/nonexistent-dir/x/y.txt"}).code, 1);
}

TEST(CliErrors, HelpExitsZero) {
  const auto r = run_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("region"), std::string::npos);
}

TEST(CliVerify, RnP2PVerdict) {
  const auto r = run_cli({"verify", "rn-p2p", "--p", "1"});
  ASSERT_EQ(r.code, 0);
  const auto d = json::parse(r.out);
  EXPECT_LE(d["max"].get<double>(), 1e-9);
  EXPECT_NEAR(d["argmax"].get<double>(), 2.0, 2e-6);
  EXPECT_EQ(d["pass"], true);
}

TEST(CliVerify, RnMacVerdict) {
  const auto d = json::parse(run_cli({"verify", "rn-mac", "--p1", "0.5", "--p2", "2"}).out);
  EXPECT_NEAR(d["argmax"].get<double>(), 2.5, 2.5e-6);
  EXPECT_EQ(d["pass"], true);
}

TEST(CliVerify, SmallChecksPass) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"verify", "bessel"},
           {"verify", "inner-product", "--n", "50", "--pairs", "50000"},
           {"verify", "confusion-scaling", "--p", "1", "--trials", "100000"},
           {"verify", "bounds", "--link", "p2p", "--n", "80", "--m1", "4", "--p1-db", "-8", "--trials", "20000"},
           {"verify", "bounds", "--link", "mac", "--n", "80", "--m1", "3", "--m2", "4", "--p1-db", "-8",
            "--p2-db", "-6", "--trials", "20000"}}) {
    std::vector<const char*> argv{"fbmac"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    EXPECT_EQ(cli::run(static_cast<int>(argv.size()), argv.data(), out, err), 0) << args[1] << " " << err.str();
    EXPECT_EQ(json::parse(out.str())["pass"], true) << args[1];
  }
}

TEST(CliSimulate, ReportsSimulationAndBounds) {
  const auto r = run_cli({"simulate", "--link", "mac", "--n", "60", "--m1", "4", "--m2", "2",
                          "--p1-db", "-6", "--p2-db", "-6", "--trials", "5000", "--k-rule", "paper"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto d = json::parse(r.out);
  EXPECT_EQ(d["simulation"]["trials"], 5000);
  EXPECT_GE(d["bounds"]["splitting"]["value"].get<double>(), d["bounds"]["joint"]["value"].get<double>());
  EXPECT_EQ(d["constants"][0], 1.0);
  EXPECT_EQ(d["config"]["k_rule"], "paper");
  EXPECT_EQ(run_cli({"simulate", "--link", "bus"}).code, 2);
}

TEST(CliFigure1, BundleManifestAndDeterminism) {
  const auto a = scratch_dir("fig_a"), b = scratch_dir("fig_b");
  ASSERT_EQ(run_cli({"figure1", "--out-dir", a.string(), "--points", "32", "--threads", "1"}).code, 0);
  ASSERT_EQ(run_cli({"figure1", "--out-dir", b.string(), "--points", "32", "--threads", "4"}).code, 0);
  const auto manifest = json::parse(slurp(a / "manifest.json"));
  ASSERT_EQ(manifest["files"].size(), 9u);
  for (const auto& f : manifest["files"]) {
    const auto ls = lines(slurp(a / f["file"].get<std::string>()));
    EXPECT_EQ(ls.size() - 2, f["rows"].get<std::size_t>()) << f["file"];
    EXPECT_EQ(slurp(a / f["file"].get<std::string>()), slurp(b / f["file"].get<std::string>())) << f["file"];
  }
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_EQ(manifest["verification"]["pass"], true);
  EXPECT_EQ(manifest["config"]["n"], 500);
  EXPECT_EQ(manifest["config"]["eps"], 1e-3);
  EXPECT_EQ(manifest["config"]["p1_db"], 0.0);
}

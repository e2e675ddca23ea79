#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "support.hpp"

using namespace baker;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(const std::string& sub, std::vector<std::string> overrides, const std::string& out_dir,
               const std::string& config = "") {
  CliRequest req;
  req.subcommand = sub;
  req.overrides = std::move(overrides);
  req.out_dir = out_dir;
  req.config_path = config;
  std::ostringstream out, err;
  const int code = run(req, out, err);
  return {code, out.str(), err.str()};
}

int argv_main(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("derive") {
    const std::string dir = testing::temp_dir("cli_derive");
    const Result r = run_cli("derive", {"rho=0.99", "margin=0"}, dir);
    CHECK(r.code == kExitPass);
    CHECK(r.out.find("\np = 24\n") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/config.txt"));
    CHECK(std::filesystem::exists(dir + "/derive.txt"));
    const Result d = run_cli("derive", {}, dir);
    CHECK(d.out.find("\np = 32\n") != std::string::npos);
  }

  TEST_CASE("usage and config errors exit with 2") {
    const std::string dir = testing::temp_dir("cli_usage");
    CHECK(run_cli("derive", {"bogus=1"}, dir).code == kExitUsage);
    CHECK(run_cli("derive", {"rho=2"}, dir).code == kExitUsage);
    CHECK(run_cli("nonsense", {}, dir).code == kExitUsage);
    {
      std::ofstream f(dir + "/bad.cfg");
      f << "# comment\nrho = 0.95\nwhat = 3\n";
    }
    const Result r = run_cli("derive", {}, dir, dir + "/bad.cfg");
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("bad.cfg:3:") != std::string::npos);
    CHECK(argv_main({"baker"}) == kExitUsage);
    CHECK(argv_main({"baker", "frobnicate"}) == kExitUsage);
    CHECK(argv_main({"baker", "derive", "--threads", "-3"}) == kExitUsage);
    CHECK(argv_main({"baker", "derive", "--out", dir, "--set", "margin=0"}) == kExitPass);
  }

  TEST_CASE("a failing check exits with 1") {
    // NoAdmissibleP surfaces as a failed run, not a usage error
    const std::string dir = testing::temp_dir("cli_fail");
    const Result r = run_cli("derive", {"rho=0.51", "margin=0.1", "p_max=1000"}, dir);
    CHECK(r.code == kExitFail);
    CHECK(r.out.find("FAIL") != std::string::npos);
  }

  TEST_CASE("calibrate, reuse the chain file, render twice") {
    const std::string dir = testing::temp_dir("cli_pipeline");
    const Result cal = run_cli("calibrate", {}, dir);
    REQUIRE(cal.code == kExitPass);
    for (const char* f : {"chain.txt", "calibration.csv", "calibrate.txt"}) CHECK(std::filesystem::exists(dir + "/" + f));
    const std::string chain = "chain_file=" + dir + "/chain.txt";
    const Result orb = run_cli("orbit", {chain, "orbit_steps=10"}, dir);
    CHECK(orb.code == kExitPass);
    CHECK(std::filesystem::exists(dir + "/orbit.csv"));
    const Result inv = run_cli("invariance", {chain, "invariance_samples=300", "orbit_count=5"}, dir);
    CHECK(inv.code == kExitPass);
    CHECK(std::filesystem::exists(dir + "/invariance_failures.csv"));
    // a changed chain key invalidates the file
    CHECK(run_cli("orbit", {chain, "quad_nodes=20"}, dir).code == kExitUsage);
    // a changed non-chain key does not
    const std::vector<std::string> small{chain, "nx=16", "ny=16", "tiles=5"};
    REQUIRE(run_cli("render", small, dir).code == kExitPass);
    const std::string first = testing::slurp(dir + "/render.ppm");
    REQUIRE(run_cli("render", small, dir).code == kExitPass);
    CHECK(testing::slurp(dir + "/render.ppm") == first);
    CHECK(first.rfind("P6\n16 16\n255\n", 0) == 0);
    CHECK(first.size() == 13 + 16 * 16 * 3);
  }
}

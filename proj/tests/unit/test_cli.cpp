#include "dcue/dataset.hpp"
#include "dcue/pipeline.hpp"
#include "dcue/simulate.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace dcue;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args) {
  static int counter = 0;
  const auto base = testutil::temp_path("cli_" + std::to_string(counter++));
  const std::string cmd =
      std::string(DCUE_CLI_PATH) + " " + args + " > '" + base + ".out' 2> '" + base + ".err'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(base + ".out");
  r.err = slurp(base + ".err");
  return r;
}

std::string write_dataset(const std::string& name, int m, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.n = 600;
  cfg.m = m;
  const auto sim = generate_s1(cfg, seed);
  const auto path = testutil::temp_path(name);
  write_csv(path, sim.data, default_schema(m, 3));
  return path;
}

std::string instrument_list(int m) {
  std::string s;
  for (int j = 1; j <= m; ++j) s += (j > 1 ? "," : "") + std::string("z") + std::to_string(j);
  return s;
}

}  // namespace

TEST_CASE("CUE intervals cover the true coefficient on synthetic data") {
  ScenarioConfig cfg;
  cfg.m = 5;
  cfg.cp = 60;
  cfg.beta0 = 1.0;
  int covered = 0, total = 0;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    const auto sim = generate_s1(cfg, s);
    EstimateOptions opts;
    opts.methods = {Method::cue};
    opts.seed = s;
    const auto run = run_estimate(sim.data, opts);
    const auto& r = run.methods[0];
    if (!std::isfinite(r.se)) continue;
    ++total;
    covered += std::abs(r.estimate.beta_hat - cfg.beta0) <= 1.96 * r.se ? 1 : 0;
  }
  MESSAGE("covered " << covered << " of " << total);
  CHECK(total >= 45);
  CHECK(covered >= 0.9 * total);
}

TEST_CASE("estimate writes a JSON report and a summary") {
  const auto data = write_dataset("cli_m5.csv", 5, 7);
  const auto out = testutil::temp_path("cli_est_out");
  fs::remove_all(out);
  const auto r = cli("estimate --data " + data + " --outcome y --treatment d --instruments " + instrument_list(5) +
                     " --covariates x1,x2,x3 --method cue,tsls,gmm --folds 4 --seed 3 --out " + out);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("debiased-CUE") != std::string::npos);
  const json report = json::parse(slurp(fs::path(out) / "report.json"));
  CHECK(report.at("result").at("methods").size() == 3);
  CHECK(report.at("config").at("seed") == 3);
  CHECK(slurp(fs::path(out) / "summary.txt").rfind("# dcue ", 0) == 0);

  const auto j = cli("estimate --data " + data + " --outcome y --treatment d --instruments " + instrument_list(5) +
                     " --covariates x1,x2,x3 --format json --seed 3");
  REQUIRE(j.code == 0);
  CHECK(json::parse(j.out) == report);
}

TEST_CASE("just-identified estimate reports no J") {
  const auto data = write_dataset("cli_m1.csv", 1, 8);
  const auto r = cli("estimate --data " + data +
                     " --outcome y --treatment d --instruments z1 --covariates x1,x2,x3 --method cue --format json");
  REQUIRE(r.code == 0);
  const json inf = json::parse(r.out).at("result").at("methods")[0].at("inference");
  CHECK(inf.at("just_identified") == true);
  CHECK_FALSE(inf.contains("j_stat"));
}

TEST_CASE("error exit codes are distinct and structured") {
  const auto data = write_dataset("cli_err.csv", 3, 9);
  const auto missing = cli("estimate --data " + data + " --outcome y --treatment d --instruments z9");
  CHECK(missing.code == 3);
  const json e = json::parse(missing.err);
  CHECK(e.at("error").at("kind") == "data");
  CHECK(e.at("error").at("exit_code") == 3);
  CHECK(e.at("error").at("message").get<std::string>().find("z9") != std::string::npos);

  const auto bad_flag = cli("estimate --data " + data + " --outcome y --treatment d --instruments z1 --folds 1");
  CHECK(bad_flag.code == 2);
  CHECK(cli("simulate --scenario s9").code == 2);
  CHECK(cli("simulate --bogus").code == 2);

  const auto cfg = testutil::temp_path("bad_cfg.json");
  testutil::write_text(cfg, "{\"simulate\": {\"replications\": 3}}");
  CHECK(cli("simulate --config " + cfg).code == 2);

  // a treatment column identical to an instrument's negation: zero first stage after partialling
  const auto deg = testutil::temp_path("degenerate.csv");
  testutil::write_text(deg, "y,d,z1\n1,1,0\n2,1,0\n3,1,0\n4,1,0\n5,1,0\n6,1,0\n7,1,0\n8,1,0\n");
  const auto num = cli("estimate --data " + deg + " --outcome y --treatment d --instruments z1 --method tsls");
  CHECK(num.code == 4);
  CHECK(json::parse(num.err).at("error").at("kind") == "numerical");
}

TEST_CASE("simulate output is one row per estimator and reproducible") {
  const auto a = testutil::temp_path("cli_sim_a");
  const auto b = testutil::temp_path("cli_sim_b");
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string args = "simulate --scenario s1 --n 200 --m 4 --cp 30 --reps 1 --method cue --seed 5 --out ";
  const auto ra = cli(args + a);
  REQUIRE(ra.code == 0);
  const auto rb = cli(args + b + " --workers 2");
  REQUIRE(rb.code == 0);
  const std::string table = slurp(fs::path(a) / "table.md");
  int rows = 0;
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) rows += line.rfind("| debiased-CUE", 0) == 0 ? 1 : 0;
  CHECK(rows == 1);
  CHECK(table == slurp(fs::path(b) / "table.md"));
  CHECK(slurp(fs::path(a) / "replications.csv") == slurp(fs::path(b) / "replications.csv"));

  const auto c = testutil::temp_path("cli_sim_c");
  fs::remove_all(c);
  REQUIRE(cli("simulate --scenario s1 --n 200 --m 4,6 --cp 30 --reps 2 --method cue,tsls --format json --out " + c)
              .code == 0);
  const json j = json::parse(slurp(fs::path(c) / "table.json"));
  CHECK(j.at("cells").size() == 2);
}

TEST_CASE("worker count from the environment") {
  const auto a = testutil::temp_path("cli_env_a");
  fs::remove_all(a);
  const auto r = cli("simulate --scenario s1 --n 200 --m 3 --reps 2 --method tsls --format csv --out " + a);
  REQUIRE(r.code == 0);
  const auto env = std::string("DCUE_WORKERS=3 ");
  const auto base = testutil::temp_path("cli_env_b");
  fs::remove_all(base);
  const int status = std::system((env + DCUE_CLI_PATH + " simulate --scenario s1 --n 200 --m 3 --reps 2 --method tsls "
                                         "--format csv --out " + base + " > /dev/null").c_str());
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(slurp(fs::path(a) / "table.csv") == slurp(fs::path(base) / "table.csv"));
  const int bad = std::system((std::string("DCUE_WORKERS=zero ") + DCUE_CLI_PATH +
                               " simulate --n 200 --reps 1 > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(bad) == 2);
}

TEST_CASE("selftest") {
  const auto ok = cli("selftest");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("all properties passed") != std::string::npos);

  const auto corrupt = cli("selftest --corrupt-gradient");
  CHECK(corrupt.code == 5);
  CHECK(corrupt.out.find("FAIL") != std::string::npos);

  const auto other = cli("selftest --seed 77");
  CHECK(other.code == 0);
  CHECK(other.out.find("(seed 77)") != std::string::npos);
  CHECK(other.out != ok.out);
}

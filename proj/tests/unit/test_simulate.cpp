#include "dcue/cross_fit.hpp"
#include "dcue/error.hpp"
#include "dcue/folds.hpp"
#include "dcue/inference.hpp"
#include "dcue/simulate.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace dcue;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double corr(const VectorXd& a, const VectorXd& b) {
  const VectorXd ac = a.array() - a.mean();
  const VectorXd bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

ReplicationRecord rec(int rep, double beta, double se) {
  ReplicationRecord r;
  r.rep = rep;
  r.ok = true;
  r.beta_hat = beta;
  r.se = se;
  return r;
}

bool same_metrics(const EstimatorMetrics& a, const EstimatorMetrics& b) {
  return a.method == b.method && a.abs_mean_bias == b.abs_mean_bias && a.abs_median_bias == b.abs_median_bias &&
         a.sd == b.sd && a.root_mean_evar == b.root_mean_evar && a.cov95 == b.cov95 && a.successes == b.successes &&
         a.failure_count == b.failure_count;
}

}  // namespace

TEST_CASE("instrument loading of the low-dimensional design") {
  ScenarioConfig cfg;
  CHECK(std::sqrt(cfg.cp / (cfg.n * cfg.m)) == doctest::Approx(0.044721).epsilon(1e-5));

  cfg.n = 100000;
  cfg.m = 3;
  const auto sim = generate_s1(cfg, 11);
  const double pij = std::sqrt(cfg.cp / (static_cast<double>(cfg.n) * cfg.m));
  const MatrixXd alpha = sim.truth->alpha(sim.data.x);
  // D - Z'pi - f = nu, with f = r - alpha'pi
  const VectorXd nu = sim.data.d - sim.truth->r(sim.data.x) - (sim.data.z - alpha) * VectorXd::Constant(3, pij);
  CHECK(std::abs(nu.mean()) < 3.0 / std::sqrt(1e5));
  CHECK(std::abs(nu.squaredNorm() / cfg.n - 1.0) < 0.02);
  // instrument noise is independent across instruments
  const MatrixXd eps = sim.data.z - alpha;
  CHECK(std::abs(corr(eps.col(0), eps.col(1))) < 0.02);
}

TEST_CASE("structural correlation rho") {
  for (double rho : {0.0, 0.3}) {
    ScenarioConfig cfg;
    cfg.n = 50000;
    cfg.m = 2;
    cfg.rho = rho;
    cfg.beta0 = 1.5;
    const auto sim = generate_s1(cfg, 4);
    const double pij = std::sqrt(cfg.cp / (static_cast<double>(cfg.n) * cfg.m));
    const VectorXd d_res = sim.data.d - sim.truth->r(sim.data.x);
    const VectorXd nu = d_res - (sim.data.z - sim.truth->alpha(sim.data.x)) * VectorXd::Constant(2, pij);
    const VectorXd u = sim.data.y - sim.truth->ell(sim.data.x) - cfg.beta0 * d_res;
    CHECK(std::abs(corr(nu, u) - rho) < 4.0 / std::sqrt(cfg.n));
  }
}

TEST_CASE("high-dimensional design") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::s2_highdim;
  cfg.n = 300;
  cfg.m = 4;
  const auto sim = generate(cfg, 3);
  REQUIRE(sim.data.p() == 100);
  const MatrixXd alpha = sim.truth->alpha(sim.data.x);
  const VectorXd first_five = sim.data.x.leftCols(5).rowwise().sum();
  for (Index j = 0; j < cfg.m; ++j) CHECK((alpha.col(j) - first_five).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero gamma leaves instruments that are pure noise") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::s2_highdim;
  cfg.gamma_scale = 0.0;
  cfg.cp = 1e-3;
  double sum = 0.0;
  const int seeds = 200;
  for (int s = 1; s <= seeds; ++s) {
    const auto sim = generate(cfg, static_cast<std::uint64_t>(s));
    CHECK(sim.truth->alpha(sim.data.x).cwiseAbs().maxCoeff() == 0.0);
    sum += first_stage_f(residualize_oracle(sim.data, *sim.truth)).value;
  }
  MESSAGE("mean oracle F with zero gamma: " << sum / seeds);
  CHECK(std::abs(sum / seeds - 1.0) < 0.1);
}

TEST_CASE("lasso reaches near-oracle residuals on the high-dimensional design") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::s2_highdim;
  const auto sim = generate(cfg, 5);
  const auto oracle = residualize_oracle(sim.data, *sim.truth);
  const auto folds = make_folds(cfg.n, cfg.folds, 5);
  auto gap = [&](LearnerKind kind) {
    const auto rd = residualize(sim.data, cross_fit(sim.data, folds, LearnerSpec::of(kind), 5), folds);
    double g = (rd.y_bar.squaredNorm() - oracle.y_bar.squaredNorm()) + (rd.d_bar.squaredNorm() - oracle.d_bar.squaredNorm());
    g += rd.z_bar.squaredNorm() - oracle.z_bar.squaredNorm();
    return g / (cfg.n * (2.0 + cfg.m));
  };
  const double lasso = gap(LearnerKind::lasso);
  const double linear = gap(LearnerKind::linear);
  MESSAGE("mean squared residual gap: lasso " << lasso << ", least squares " << linear);
  CHECK(lasso < 0.05);
  // unpenalized least squares pays roughly p / (n' - p) for 100 covariates
  CHECK(linear < 0.25);
}

TEST_CASE("aggregate example") {
  const std::vector<ReplicationRecord> records{rec(1, 1.0, 0.5), rec(2, 2.0, 0.5), rec(3, 3.0, 0.5)};
  const auto m = aggregate(Method::cue, records, 2.0);
  CHECK(m.abs_mean_bias == doctest::Approx(0.0));
  CHECK(m.abs_median_bias == doctest::Approx(0.0));
  CHECK(m.sd == doctest::Approx(1.0));
  CHECK(m.root_mean_evar == doctest::Approx(0.5));
  CHECK(m.cov95 == doctest::Approx(1.0 / 3.0));
  CHECK(m.successes == 3);

  std::vector<ReplicationRecord> with_fail = records;
  with_fail.push_back(rec(4, 100.0, 1.0));
  with_fail.back().ok = false;
  const auto f = aggregate(Method::cue, with_fail, 2.0);
  CHECK(f.failure_count == 1);
  CHECK(f.successes == 3);
  CHECK(f.sd == doctest::Approx(1.0));

  std::vector<ReplicationRecord> all_fail{rec(1, 0.0, 1.0)};
  all_fail[0].ok = false;
  CHECK_THROWS_AS(aggregate(Method::cue, all_fail, 0.0), NumericalError);
}

TEST_CASE("aggregates do not depend on replication order") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<ReplicationRecord> records;
  for (int r = 1; r <= 101; ++r) records.push_back(rec(r, nd(rng), 0.3 + 0.01 * (r % 7)));
  const auto base = aggregate(Method::cue, records, 0.1);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(records.begin(), records.end(), rng);
    const auto perm = aggregate(Method::cue, records, 0.1);
    CHECK(perm.abs_median_bias == base.abs_median_bias);
    CHECK(perm.cov95 == base.cov95);
    CHECK(perm.abs_mean_bias == doctest::Approx(base.abs_mean_bias).epsilon(1e-12));
    CHECK(perm.sd == doctest::Approx(base.sd).epsilon(1e-12));
  }
}

TEST_CASE("render_table") {
  CellMetrics cell;
  cell.n = 1000;
  cell.m = 15;
  cell.cp = 30;
  cell.reps = 3;
  EstimatorMetrics row;
  row.abs_mean_bias = 0.0123456789;
  row.abs_median_bias = 0.5;
  row.sd = 1.0 / 3.0;
  row.root_mean_evar = 0.25;
  row.cov95 = 0.95;
  row.successes = 3;
  row.mean_runtime = 0.0125;
  cell.rows.push_back(row);
  row.method = Method::tsls;
  row.failure_count = 1;
  row.successes = 2;
  cell.rows.push_back(row);

  const auto md = render_table({cell}, TableFormat::markdown);
  std::istringstream lines(md);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "| Method | CP | m | \\|mean bias\\| | \\|median bias\\| | √Var | √EVar | Cov95 |");
  CHECK(md.find("| debiased-CUE | 30 | 15 | 0.012 | 0.500 | 0.333 | 0.250 | 0.950 |") != std::string::npos);
  CHECK(md.find("TSLS") != std::string::npos);

  RenderOptions opts;
  opts.include_runtime = true;
  const auto back = cells_from_json(render_table({cell, cell}, TableFormat::json, opts));
  REQUIRE(back.size() == 2);
  CHECK(back[0].n == 1000);
  CHECK(back[0].cp == 30);
  REQUIRE(back[0].rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(same_metrics(back[0].rows[i], cell.rows[i]));
    CHECK(back[0].rows[i].mean_runtime == cell.rows[i].mean_runtime);
  }

  const auto csv = render_table({cell}, TableFormat::csv);
  CHECK(csv.rfind("method,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  CHECK_THROWS_AS(render_table({}, TableFormat::markdown), ConfigError);
  CellMetrics empty = cell;
  empty.rows.clear();
  CHECK_THROWS_AS(render_table({empty}, TableFormat::json), ConfigError);
  CHECK_THROWS_AS(table_format_from_string("xlsx"), ConfigError);
}

TEST_CASE("run_cell is deterministic and independent of the worker count") {
  ScenarioConfig cfg;
  cfg.n = 300;
  cfg.m = 5;
  cfg.reps = 6;
  cfg.base_seed = 42;
  cfg.estimators = {Method::cue, Method::tsls, Method::gmm_identity, Method::oracle_cue};
  const auto a = run_cell(cfg);
  const auto b = run_cell(cfg);
  cfg.workers = 3;
  const auto c = run_cell(cfg);
  REQUIRE(a.records.size() == 24);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].beta_hat == b.records[i].beta_hat);
    CHECK(a.records[i].beta_hat == c.records[i].beta_hat);
    CHECK(a.records[i].se == c.records[i].se);
    CHECK(a.records[i].seed == 42 + static_cast<std::uint64_t>(a.records[i].rep));
  }
  for (std::size_t k = 0; k < a.metrics.rows.size(); ++k) {
    CHECK(same_metrics(a.metrics.rows[k], c.metrics.rows[k]));
  }
  CHECK(render_table({a.metrics}, TableFormat::csv) == render_table({c.metrics}, TableFormat::csv));
}

TEST_CASE("local-to-zero concentration grows linearly in m") {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::local_to_zero;
  cfg.cp = 2.0;
  for (int m : {1, 5, 10, 40}) {
    cfg.m = m;
    CHECK(local_to_zero_concentration(cfg) == doctest::Approx(2.0 * m).epsilon(1e-12));
  }
  // population analog: large-sample moments of the oracle residuals
  cfg.m = 4;
  cfg.n = 200000;
  const auto sim = generate(cfg, 2);
  const auto rd = residualize_oracle(sim.data, *sim.truth);
  const VectorXd g = rd.z_bar.transpose() * rd.d_bar / static_cast<double>(cfg.n);
  CHECK((g.array() - std::sqrt(cfg.cp / cfg.n)).abs().maxCoeff() < 5.0 / std::sqrt(cfg.n));
}

TEST_CASE("ScenarioConfig validation") {
  ScenarioConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.n = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.cp = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.estimators.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.instrument_noise_corr = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(scenario_from_string("s2") == Scenario::s2_highdim);
  CHECK_THROWS_AS(scenario_from_string("s3"), ConfigError);
  CHECK(default_learner(Scenario::s2_highdim).kind == LearnerKind::lasso);
}

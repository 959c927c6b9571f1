#include "dcue/cross_fit.hpp"
#include "dcue/error.hpp"
#include "dcue/estimators.hpp"
#include "dcue/folds.hpp"
#include "dcue/selftest.hpp"
#include "dcue/simulate.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace dcue;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ResidualData toy() {
  ResidualData rd;
  rd.y_bar = (VectorXd(2) << 2, 0).finished();
  rd.d_bar = (VectorXd(2) << 1, 1).finished();
  rd.z_bar = (MatrixXd(2, 1) << 1, 1).finished();
  rd.fold_of = {0, 0};
  return rd;
}

SearchInterval wide() {
  SearchInterval b;
  b.lo = -10;
  b.hi = 10;
  return b;
}

}  // namespace

TEST_CASE("method names round trip") {
  for (auto m : {Method::cue, Method::tsls, Method::gmm_identity, Method::gmm_two_step, Method::oracle_cue,
                 Method::oracle_gmm}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK(methods_from_string("cue,tsls,cue") == std::vector<Method>{Method::cue, Method::tsls});
  CHECK_THROWS_AS(methods_from_string(""), ConfigError);
  CHECK_THROWS_AS(method_from_string("liml"), ConfigError);
}

TEST_CASE("toy CUE and TSLS estimates") {
  const auto rd = toy();
  const MomentSystem ms(rd);
  const auto cue = estimate_cue(ms, wide());
  CHECK(cue.beta_hat == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(cue.objective_at_min < 1e-12);
  CHECK(estimate_tsls(rd).beta_hat == doctest::Approx(1.0));
  CHECK(estimate_gmm_identity(ms).beta_hat == doctest::Approx(1.0));
}

TEST_CASE("TSLS with a zero first stage raises") {
  ResidualData rd;
  rd.y_bar = (VectorXd(4) << 1, 2, 3, 4).finished();
  rd.d_bar = (VectorXd(4) << 1, -1, 1, -1).finished();
  rd.z_bar = (MatrixXd(4, 1) << 1, 1, 1, 1).finished();
  rd.fold_of.assign(4, 0);
  CHECK_THROWS_AS(estimate_tsls(rd), NumericalError);
  CHECK_THROWS_AS(estimate_gmm_identity(MomentSystem(rd)), NumericalError);
}

TEST_CASE("just-identified CUE solves the sample moment exactly") {
  std::mt19937_64 rng(17);
  for (int s = 0; s < 100; ++s) {
    const auto rd = random_just_identified(rng, 80 + s);
    const MomentSystem ms(rd);
    const double ratio = ms.szy()(0) / ms.szd()(0);
    const auto cue = estimate_cue(ms, default_search_interval(rd));
    if (cue.boundary_flag) continue;
    CHECK(std::abs(cue.beta_hat - ratio) < 1e-8 * std::max(1.0, std::abs(ratio)));
    CHECK(cue.objective_at_min < 1e-12);
    CHECK(std::abs(estimate_tsls(rd).beta_hat - ratio) < 1e-10 * std::max(1.0, std::abs(ratio)));
  }
}

TEST_CASE("identity GMM returns c when Szy = c Szd") {
  std::mt19937_64 rng(3);
  ResidualData rd;
  rd.z_bar = testutil::normal_matrix(rng, 50, 3);
  rd.d_bar = testutil::normal_matrix(rng, 50, 1).col(0) + rd.z_bar.rowwise().sum();
  rd.y_bar = -2.5 * rd.d_bar;
  rd.fold_of.assign(50, 0);
  const MomentSystem ms(rd);
  CHECK(estimate_gmm_identity(ms).beta_hat == doctest::Approx(-2.5).epsilon(1e-12));
  // zero noise: every consistent estimator is exact
  CHECK(estimate_tsls(rd).beta_hat == doctest::Approx(-2.5).epsilon(1e-12));
  rd.y_bar += 1e-3 * testutil::normal_matrix(rng, 50, 1).col(0);
  const MomentSystem ms2(rd);
  CHECK(std::isfinite(estimate_gmm_identity(ms2, true).beta_hat));
}

TEST_CASE("two-step GMM and CUE nearly coincide under homoscedastic strong instruments") {
  std::mt19937_64 rng(31);
  const Index n = 20000, m = 3;
  ResidualData rd;
  rd.z_bar = testutil::normal_matrix(rng, n, m);
  const VectorXd v = testutil::normal_matrix(rng, n, 1).col(0);
  const VectorXd e = testutil::normal_matrix(rng, n, 1).col(0);
  rd.d_bar = rd.z_bar * VectorXd::Constant(m, 0.5) + v;
  rd.y_bar = 1.0 * rd.d_bar + 0.5 * v + e;
  rd.fold_of.assign(static_cast<std::size_t>(n), 0);
  const MomentSystem ms(rd);
  const double two = estimate_gmm_identity(ms, true).beta_hat;
  const double cue = estimate_cue(ms, default_search_interval(rd)).beta_hat;
  CHECK(std::abs(two - cue) < 2e-3);
  CHECK(std::abs(cue - 1.0) < 0.05);
}

TEST_CASE("oracle estimators equal cross_fit with the oracle learner") {
  ScenarioConfig cfg;
  cfg.n = 400;
  cfg.m = 6;
  const auto sim = generate_s1(cfg, 21);
  const auto folds = make_folds(cfg.n, 4, 21);
  const auto rd = residualize(sim.data, cross_fit(sim.data, folds, LearnerSpec::oracle(sim.truth)), folds);
  const MomentSystem ms(rd);
  CHECK(estimate_oracle(sim.data, *sim.truth, OracleMethod::cue).beta_hat ==
        estimate_cue(ms, default_search_interval(rd)).beta_hat);
  CHECK(estimate_oracle(sim.data, *sim.truth, OracleMethod::gmm).beta_hat == estimate_gmm_identity(ms).beta_hat);
  CHECK(estimate_oracle(sim.data, *sim.truth, OracleMethod::cue).method == Method::oracle_cue);
}

TEST_CASE("CUE finds the global minimum of a dense grid") {
  for (int s = 0; s < 50; ++s) {
    std::mt19937_64 rng(500 + s);
    const auto rd = random_instance(rng, 150, 2 + s % 10);
    const MomentSystem ms(rd);
    const auto interval = default_search_interval(rd);
    const auto cue = estimate_cue(ms, interval);
    const int points = 100000;
    double best = std::numeric_limits<double>::infinity();
    double arg = 0.0;
    for (int i = 0; i < points; ++i) {
      const double b = interval.lo + (interval.hi - interval.lo) * i / (points - 1);
      const double q = ms.q_hat(b);
      if (q < best) {
        best = q;
        arg = b;
      }
    }
    CHECK(cue.objective_at_min <= best + 1e-12);
    CHECK(cue.objective_at_min >= best - 1e-6);
    if (!cue.multi_min_flag) CHECK(std::abs(cue.beta_hat - arg) <= 2.0 * (interval.hi - interval.lo) / (points - 1));
  }
}

TEST_CASE("boundary flag when the minimizer lies outside the interval") {
  std::mt19937_64 rng(8);
  const auto rd = random_instance(rng, 500, 4, 0.5);
  const MomentSystem ms(rd);
  SearchInterval b;
  b.lo = 3.0;
  b.hi = 5.0;
  const auto cue = estimate_cue(ms, b);
  CHECK(cue.boundary_flag);
  CHECK(cue.beta_hat == doctest::Approx(3.0).epsilon(1e-6));
  CHECK_FALSE(estimate_cue(ms, default_search_interval(rd)).boundary_flag);
  b.hi = 3.0;
  CHECK_THROWS_AS(estimate_cue(ms, b), ConfigError);
}

TEST_CASE("CUE is invariant to rotating the instruments") {
  for (int s = 0; s < 20; ++s) {
    std::mt19937_64 rng(700 + s);
    const auto rd = random_instance(rng, 200, 5);
    const auto rot = rotate_instruments(rd, rng);
    const auto interval = default_search_interval(rd);
    const double a = estimate_cue(MomentSystem(rd), interval).beta_hat;
    const double b = estimate_cue(MomentSystem(rot), interval).beta_hat;
    CHECK(std::abs(a - b) < 1e-7 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("oracle CUE is nearly unbiased without endogeneity") {
  ScenarioConfig cfg;
  cfg.n = 5000;
  cfg.m = 15;
  cfg.rho = 0.0;
  const int seeds = 200;
  std::vector<double> b;
  for (int s = 1; s <= seeds; ++s) {
    const auto sim = generate_s1(cfg, static_cast<std::uint64_t>(s));
    b.push_back(estimate_oracle(sim.data, *sim.truth, OracleMethod::cue).beta_hat - cfg.beta0);
  }
  double mean = 0.0;
  for (double v : b) mean += v / seeds;
  double ss = 0.0;
  for (double v : b) ss += (v - mean) * (v - mean);
  const double mcse = std::sqrt(ss / (seeds - 1) / seeds);
  std::sort(b.begin(), b.end());
  const double median = 0.5 * (b[seeds / 2 - 1] + b[seeds / 2]);
  MESSAGE("oracle CUE at rho = 0: mean bias " << mean << " (Monte Carlo se " << mcse << "), median bias " << median);
  // CP is held fixed, so the sd stays near 0.3 and the Monte Carlo se of the mean is about 0.02
  CHECK(std::abs(median) < 0.02);
  CHECK(std::abs(mean) < 3.0 * mcse);
}

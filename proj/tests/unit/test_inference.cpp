#include "dcue/chisq.hpp"
#include "dcue/cross_fit.hpp"
#include "dcue/error.hpp"
#include "dcue/estimators.hpp"
#include "dcue/folds.hpp"
#include "dcue/inference.hpp"
#include "dcue/selftest.hpp"
#include "dcue/simulate.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

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

ResidualData homoscedastic(std::mt19937_64& rng, Index n, Index m, double pi, double beta) {
  ResidualData rd;
  rd.z_bar = testutil::normal_matrix(rng, n, m);
  const VectorXd v = testutil::normal_matrix(rng, n, 1).col(0);
  const VectorXd e = testutil::normal_matrix(rng, n, 1).col(0);
  rd.d_bar = rd.z_bar * VectorXd::Constant(m, pi) + v;
  rd.y_bar = beta * rd.d_bar + 0.5 * v + e;
  rd.fold_of.assign(static_cast<std::size_t>(n), 0);
  return rd;
}

double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace

TEST_CASE("D-hat examples") {
  const MomentSystem ms(toy());
  CHECK(d_hat(ms, 0.0)(0) == doctest::Approx(-0.5));
  // at the just-identified solution g = 0, so D = G
  CHECK(d_hat(ms, 1.0)(0) == doctest::Approx(-1.0));
}

TEST_CASE("D-hat against an explicit-inverse formula") {
  for (int s = 0; s < 10; ++s) {
    std::mt19937_64 rng(40 + s);
    const auto rd = random_instance(rng, 100, 4);
    const MomentSystem ms(rd);
    const double b = 0.3;
    const double n = static_cast<double>(rd.n());
    VectorXd g = VectorXd::Zero(4), G = VectorXd::Zero(4);
    MatrixXd cross = MatrixXd::Zero(4, 4), omega = MatrixXd::Zero(4, 4);
    for (Index i = 0; i < rd.n(); ++i) {
      const VectorXd zi = rd.z_bar.row(i).transpose();
      const VectorXd gi = zi * (rd.y_bar(i) - rd.d_bar(i) * b);
      const VectorXd Gi = -zi * rd.d_bar(i);
      g += gi / n;
      G += Gi / n;
      cross += Gi * gi.transpose() / n;
      omega += gi * gi.transpose() / n;
    }
    const VectorXd expected = G - cross * omega.inverse() * g;
    CHECK((d_hat(ms, b) - expected).norm() < 1e-9 * std::max(1.0, expected.norm()));
  }
}

TEST_CASE("CUE standard error matches the textbook IV standard error under homoscedasticity") {
  std::mt19937_64 rng(77);
  const auto rd = homoscedastic(rng, 10000, 3, 0.3, 1.0);
  const MomentSystem ms(rd);
  const double beta = estimate_cue(ms, default_search_interval(rd)).beta_hat;
  const auto v = variance_hat(ms, beta);
  const double textbook = tsls_naive_se(rd, estimate_tsls(rd).beta_hat);
  CHECK(std::abs(v.se / textbook - 1.0) < 0.1);
  CHECK(v.curvature > 0);
  CHECK(v.se == doctest::Approx(std::sqrt(v.v_hat / 10000.0)));
}

TEST_CASE("variance scales with the outcome and ignores the instrument scale") {
  std::mt19937_64 rng(78);
  const auto rd = random_instance(rng, 500, 4);
  const MomentSystem ms(rd);
  const double beta = estimate_cue(ms, default_search_interval(rd)).beta_hat;
  const double se = variance_hat(ms, beta).se;
  ResidualData z = rd;
  z.z_bar *= 250.0;
  CHECK(variance_hat(MomentSystem(z), beta).se == doctest::Approx(se).epsilon(1e-6));
  ResidualData y = rd;
  y.y_bar *= 4.0;
  CHECK(variance_hat(MomentSystem(y), 4.0 * beta).se == doctest::Approx(4.0 * se).epsilon(1e-6));
}

TEST_CASE("Wald test examples") {
  CHECK(wald_test(0.7, 2.0, 100, 0.7).stat == 0.0);
  CHECK(wald_test(0.7, 2.0, 100, 0.7).p_value == doctest::Approx(1.0));
  const auto t = wald_test(std::sqrt(3.8415), 1.0, 1, 0.0);
  CHECK(std::abs(t.p_value - 0.05) < 1e-4);
  CHECK(wald_test(1.0, 2.0, 50, 0.0).stat == doctest::Approx(0.5 * wald_test(1.0, 1.0, 50, 0.0).stat));
}

TEST_CASE("K statistic vanishes at the CUE minimizer and is rotation invariant") {
  for (int s = 0; s < 10; ++s) {
    std::mt19937_64 rng(90 + s);
    const auto rd = random_instance(rng, 300, 5);
    const MomentSystem ms(rd);
    const auto cue = estimate_cue(ms, default_search_interval(rd));
    if (cue.boundary_flag) continue;
    CHECK(k_statistic(ms, cue.beta_hat).stat < 1e-8);
    const MomentSystem rot(rotate_instruments(rd, rng));
    for (double b : {-0.5, 0.0, 1.2}) {
      const double k = k_statistic(ms, b).stat;
      CHECK(std::abs(k_statistic(rot, b).stat - k) < 1e-7 * std::max(1.0, k));
    }
  }
}

TEST_CASE("K test has close to nominal size under the null") {
  ScenarioConfig cfg;
  cfg.n = 1000;
  cfg.m = 15;
  int rejections = 0;
  const int seeds = 1000;
  for (int s = 1; s <= seeds; ++s) {
    const auto sim = generate_s1(cfg, static_cast<std::uint64_t>(s));
    const MomentSystem ms(residualize_oracle(sim.data, *sim.truth));
    rejections += k_statistic(ms, cfg.beta0).p_value < 0.05 ? 1 : 0;
  }
  const double rate = static_cast<double>(rejections) / seeds;
  MESSAGE("K null rejection rate: " << rate);
  CHECK(rate >= 0.02);
  CHECK(rate <= 0.08);
}

TEST_CASE("Wald and K agree under strong identification") {
  ScenarioConfig cfg;
  cfg.n = 10000;
  cfg.m = 5;
  cfg.cp = 200;
  std::vector<double> gaps;
  for (int s = 1; s <= 200; ++s) {
    const auto sim = generate_s1(cfg, static_cast<std::uint64_t>(s));
    const auto rd = residualize_oracle(sim.data, *sim.truth);
    const MomentSystem ms(rd);
    const double b = estimate_cue(ms, default_search_interval(rd)).beta_hat;
    const auto v = variance_hat(ms, b);
    gaps.push_back(std::abs(wald_test(b, v.v_hat, rd.n(), cfg.beta0).stat - k_statistic(ms, cfg.beta0).stat));
  }
  MESSAGE("median |Wald - K|: " << median(gaps));
  CHECK(median(gaps) < 0.1);
}

TEST_CASE("J statistic") {
  std::mt19937_64 rng(5);
  const auto ji = random_just_identified(rng, 100);
  const MomentSystem ms1(ji);
  const auto j1 = j_statistic(ms1, 0.4);
  CHECK(j1.just_identified);
  CHECK(j1.stat == 0.0);
  CHECK(j1.p_value == 1.0);

  const auto rd = random_instance(rng, 400, 6);
  const MomentSystem ms(rd);
  const double b = estimate_cue(ms, default_search_interval(rd)).beta_hat;
  const auto j = j_statistic(ms, b);
  CHECK(j.df == 5);
  CHECK(j.stat == doctest::Approx(2.0 * 400 * ms.q_hat(b)));
  CHECK(j.p_value == doctest::Approx(chisq_sf(j.stat, 5)));

  // 30 instruments, J = 20.886: well inside the acceptance region.
  CHECK(chisq_quantile(0.95, 29) == doctest::Approx(42.557).epsilon(1e-4));
  CHECK(chisq_sf(20.886, 29) > 0.05);
}

TEST_CASE("first-stage F") {
  ResidualData orth;
  orth.z_bar = (MatrixXd(4, 1) << 1, 1, 1, 1).finished();
  orth.d_bar = (VectorXd(4) << 1, -1, 1, -1).finished();
  orth.y_bar = VectorXd::Ones(4);
  orth.fold_of.assign(4, 0);
  CHECK(first_stage_f(orth).value < 1e-20);

  std::mt19937_64 rng(7);
  ResidualData strong;
  strong.z_bar = testutil::normal_matrix(rng, 200, 3);
  strong.d_bar = strong.z_bar.rowwise().sum() + 1e-4 * testutil::normal_matrix(rng, 200, 1).col(0);
  strong.y_bar = strong.d_bar;
  strong.fold_of.assign(200, 0);
  CHECK(first_stage_f(strong).value > 1e3);

  ResidualData exact = strong;
  exact.d_bar = exact.z_bar.rowwise().sum();
  CHECK(first_stage_f(exact).infinite);
}

TEST_CASE("first-stage F on the low-dimensional design is weak") {
  ScenarioConfig cfg;
  double sum = 0.0;
  const int seeds = 200;
  for (int s = 1; s <= seeds; ++s) {
    const auto sim = generate_s1(cfg, static_cast<std::uint64_t>(s));
    const auto folds = make_folds(cfg.n, cfg.folds, static_cast<std::uint64_t>(s));
    const auto rd = residualize(sim.data, cross_fit(sim.data, folds, cfg.learner, static_cast<std::uint64_t>(s)), folds);
    sum += first_stage_f(rd).value;
  }
  MESSAGE("mean first-stage F: " << sum / seeds);
  CHECK(sum / seeds >= 1.5);
  CHECK(sum / seeds <= 3.5);
}

TEST_CASE("chi-square quantile against numerical integration of the density") {
  const double q = chisq_quantile(0.95, 1);
  CHECK(q == doctest::Approx(3.841458820694124).epsilon(1e-9));
  // x = t^2 removes the singularity of the df = 1 density at zero.
  const double mass = simpson([](double t) { return 2.0 * std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); }, 0.0,
                              std::sqrt(q), 2000);
  CHECK(mass == doctest::Approx(0.95).epsilon(1e-9));
}

TEST_CASE("chi-square identities") {
  for (double df : {1.0, 2.0, 5.0, 14.0, 29.0, 100.0}) {
    for (double p : {0.001, 0.05, 0.5, 0.95, 0.999}) {
      const double x = chisq_quantile(p, df);
      CHECK(chisq_cdf(x, df) == doctest::Approx(p).epsilon(1e-9));
      CHECK(chisq_sf(x, df) == doctest::Approx(1.0 - p).epsilon(1e-9));
    }
    CHECK(chisq_cdf(0.0, df) == 0.0);
  }
  CHECK(chisq_sf(2.0, 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  for (double df = 1; df < 60; df += 1) CHECK(chisq_quantile(0.95, df + 1) > chisq_quantile(0.95, df));
  CHECK_THROWS_AS(chisq_quantile(1.5, 3), ConfigError);
  CHECK_THROWS_AS(chisq_cdf(1.0, 0.0), ConfigError);
}

TEST_CASE("infer bundles the tests") {
  std::mt19937_64 rng(12);
  const auto rd = random_instance(rng, 400, 5);
  const MomentSystem ms(rd);
  const double b = estimate_cue(ms, default_search_interval(rd)).beta_hat;
  const auto rep = infer(ms, rd, b, 0.25);
  CHECK(rep.beta_star == 0.25);
  CHECK(rep.wald == doctest::Approx(wald_test(b, rep.v_hat, 400, 0.25).stat));
  CHECK(rep.k_stat == doctest::Approx(k_statistic(ms, 0.25).stat));
  CHECK(rep.j.df == 4);
  CHECK(rep.f.value == doctest::Approx(first_stage_f(rd).value));
}

TEST_CASE("other standard errors") {
  std::mt19937_64 rng(13);
  const auto rd = homoscedastic(rng, 5000, 4, 0.4, 0.0);
  const MomentSystem ms(rd);
  const double b1 = estimate_gmm_identity(ms).beta_hat;
  const double b2 = estimate_gmm_identity(ms, true).beta_hat;
  const double naive = tsls_naive_se(rd, estimate_tsls(rd).beta_hat);
  // equal loadings and homoscedastic errors: all three agree to first order
  CHECK(std::abs(gmm_se(ms, b1, false) / naive - 1.0) < 0.1);
  CHECK(std::abs(gmm_se(ms, b2, true) / naive - 1.0) < 0.1);
}

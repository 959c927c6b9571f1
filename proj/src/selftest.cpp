#include "dcue/selftest.hpp"

#include "dcue/chisq.hpp"
#include "dcue/error.hpp"
#include "dcue/estimators.hpp"
#include "dcue/inference.hpp"
#include "dcue/moments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcue {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ResidualData random_instance(std::mt19937_64& rng, Index n, Index m, double beta) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.3, 1.0);
  ResidualData rd;
  rd.z_bar.resize(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) rd.z_bar(i, j) = normal(rng);
  }
  VectorXd pi(m);
  for (Index j = 0; j < m; ++j) pi(j) = unif(rng);
  rd.d_bar.resize(n);
  rd.y_bar.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double v = normal(rng);
    const double scale = 0.5 + std::abs(rd.z_bar(i, 0));
    const double u = scale * (0.5 * v + normal(rng));
    rd.d_bar(i) = rd.z_bar.row(i).dot(pi) + v;
    rd.y_bar(i) = rd.d_bar(i) * beta + u;
  }
  rd.fold_of.assign(static_cast<std::size_t>(n), 0);
  return rd;
}

ResidualData rotate_instruments(const ResidualData& rd, std::mt19937_64& rng) {
  const Index m = rd.m();
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd a(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) a(i, j) = normal(rng);
  }
  // Keep the condition number modest so the comparison tests invariance, not rounding.
  a += 3.0 * std::sqrt(static_cast<double>(m)) * MatrixXd::Identity(m, m);
  ResidualData out = rd;
  out.z_bar = rd.z_bar * a.transpose();
  return out;
}

namespace {

double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

PropertyResult check_gradient(const SelftestOptions& opts) {
  PropertyResult res{"gradient fidelity (dQ/dbeta, dOmega/dbeta vs central differences)", true, ""};
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<int> n_dist(50, 500);
  std::uniform_int_distribution<int> m_dist(2, 10);
  std::uniform_real_distribution<double> b_dist(-2.0, 3.0);
  double worst_q = 0.0;
  double worst_o = 0.0;
  for (int k = 0; k < opts.instances; ++k) {
    const ResidualData rd = random_instance(rng, n_dist(rng), m_dist(rng));
    const MomentSystem ms(rd);
    const double beta = b_dist(rng);
    const double h = 1e-6 * std::max(1.0, std::abs(beta));
    double analytic = ms.dq_dbeta(beta);
    if (opts.corrupt_gradient) analytic *= 1.0 + 1e-3;
    const double fd = (ms.q_hat(beta + h) - ms.q_hat(beta - h)) / (2 * h);
    worst_q = std::max(worst_q, rel_err(analytic, fd));

    const MatrixXd d_an = ms.d_omega_dbeta(beta);
    const MatrixXd d_fd = (ms.omega_matrix(beta + h) - ms.omega_matrix(beta - h)) / (2 * h);
    worst_o = std::max(worst_o, (d_an - d_fd).norm() / std::max(d_an.norm(), 1e-12));
  }
  res.passed = worst_q < 1e-6 && worst_o < 1e-6;
  res.detail = "max relative error dQ " + fmt(worst_q) + ", dOmega " + fmt(worst_o) + " over " +
               std::to_string(opts.instances) + " instances (limit 1e-6)";
  return res;
}

PropertyResult check_rotation_invariance(const SelftestOptions& opts) {
  PropertyResult res{"invariance under instrument transformations", true, ""};
  std::mt19937_64 rng(opts.seed + 1);
  std::uniform_int_distribution<int> m_dist(2, 10);
  double worst = 0.0;
  const int count = std::max(1, opts.instances / 5);
  for (int k = 0; k < count; ++k) {
    const ResidualData rd = random_instance(rng, 400, m_dist(rng));
    const ResidualData rot = rotate_instruments(rd, rng);
    const MomentSystem a(rd);
    const MomentSystem b(rot);
    const double probe = 0.1 * k;
    worst = std::max(worst, rel_err(a.q_hat(probe), b.q_hat(probe)));
    SearchInterval box;
    box.lo = -5;
    box.hi = 5;
    const double ba = estimate_cue(a, box).beta_hat;
    const double bb = estimate_cue(b, box).beta_hat;
    worst = std::max(worst, rel_err(ba, bb, 1.0));
    const InferenceReport ia = infer(a, rd, ba, 0.0);
    const InferenceReport ib = infer(b, rot, bb, 0.0);
    worst = std::max(worst, rel_err(ia.wald, ib.wald, 1e-6));
    worst = std::max(worst, rel_err(ia.k_stat, ib.k_stat, 1e-6));
    worst = std::max(worst, rel_err(ia.j.stat, ib.j.stat, 1e-6));
  }
  res.passed = worst < 1e-7;
  res.detail = "max relative change of Q, beta_hat, Wald, K, J " + fmt(worst) + " over " + std::to_string(count) +
               " transformations (limit 1e-7)";
  return res;
}

PropertyResult check_just_identified(const SelftestOptions& opts) {
  PropertyResult res{"just-identified equivalence (CUE = TSLS = GMM = IV ratio)", true, ""};
  std::mt19937_64 rng(opts.seed + 2);
  std::uniform_int_distribution<int> n_dist(50, 500);
  double worst = 0.0;
  double worst_q = 0.0;
  for (int k = 0; k < opts.instances; ++k) {
    const ResidualData rd = random_just_identified(rng, n_dist(rng));
    const MomentSystem ms(rd);
    const double ratio = rd.z_bar.col(0).dot(rd.y_bar) / rd.z_bar.col(0).dot(rd.d_bar);
    const EstimateReport cue = estimate_cue(ms, default_search_interval(rd));
    const double tsls = estimate_tsls(rd).beta_hat;
    const double gmm = estimate_gmm_identity(ms).beta_hat;
    worst = std::max({worst, std::abs(cue.beta_hat - ratio), std::abs(tsls - ratio), std::abs(gmm - ratio)});
    worst_q = std::max(worst_q, cue.objective_at_min);
  }
  res.passed = worst < 1e-8 && worst_q < 1e-12;
  res.detail = "max |difference| " + fmt(worst) + ", max Q(beta_hat) " + fmt(worst_q) + " over " +
               std::to_string(opts.instances) + " instances";
  return res;
}

PropertyResult check_chisq(const SelftestOptions&) {
  PropertyResult res{"chi-square identities", true, ""};
  double worst = 0.0;
  for (double p : {0.01, 0.5, 0.95, 0.999}) {
    for (double df : {1.0, 14.0, 29.0, 179.0}) worst = std::max(worst, std::abs(chisq_cdf(chisq_quantile(p, df), df) - p));
  }
  const double q = chisq_quantile(0.95, 1.0);
  res.passed = worst < 1e-9 && std::abs(q - 3.84146) < 1e-4 && chisq_cdf(0.0, 3.0) == 0.0;
  res.detail = "max |cdf(quantile(p)) - p| " + fmt(worst) + ", quantile(0.95, 1) = " + std::to_string(q);
  return res;
}

std::vector<PropertyResult> run_selftest(const SelftestOptions& opts) {
  std::vector<PropertyResult> out;
  auto guarded = [&](PropertyResult (*fn)(const SelftestOptions&), const char* name) {
    try {
      out.push_back(fn(opts));
    } catch (const Error& e) {
      out.push_back({name, false, std::string("raised: ") + e.what()});
    }
  };
  guarded(check_gradient, "gradient fidelity");
  guarded(check_rotation_invariance, "invariance under instrument transformations");
  guarded(check_just_identified, "just-identified equivalence");
  guarded(check_chisq, "chi-square identities");
  return out;
}

}  // namespace dcue

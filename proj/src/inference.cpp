#include "dcue/inference.hpp"

#include "dcue/chisq.hpp"
#include "dcue/error.hpp"

#include <cmath>
#include <limits>

namespace dcue {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct ZQr {
  Eigen::ColPivHouseholderQR<MatrixXd> qr;
  explicit ZQr(const MatrixXd& z) : qr(z) {
    qr.setThreshold(1e-10);
    if (qr.rank() < z.cols()) {
      throw NumericalError("instrument residuals are rank deficient (rank " + std::to_string(qr.rank()) + " < m = " +
                           std::to_string(z.cols()) + ")");
    }
  }
  // Coordinates of P v in the orthonormal basis of col(Z).
  VectorXd project(const VectorXd& v) const {
    const VectorXd qv = qr.householderQ().adjoint() * v;
    return qv.head(qr.rank());
  }
};

}  // namespace

TslsProjection tsls_projection(const ResidualData& rd) {
  if (rd.n() <= rd.m()) throw NumericalError("TSLS needs n > m");
  const ZQr zq(rd.z_bar);
  const VectorXd pd = zq.project(rd.d_bar);
  const VectorXd py = zq.project(rd.y_bar);
  TslsProjection out;
  out.dpd = pd.squaredNorm();
  out.dpy = pd.dot(py);
  if (!(out.dpd > 1e-14 * rd.d_bar.squaredNorm())) {
    throw NumericalError("TSLS: first stage is zero (treatment orthogonal to the instruments)");
  }
  return out;
}

double tsls_naive_se(const ResidualData& rd, double beta) {
  const auto fit = tsls_projection(rd);
  const double sigma2 = (rd.y_bar - beta * rd.d_bar).squaredNorm() / static_cast<double>(rd.n());
  return std::sqrt(sigma2 / fit.dpd);
}

double gmm_se(const MomentSystem& ms, double beta, bool two_step) {
  const VectorXd g = ms.g_jacobian();
  const double n = static_cast<double>(ms.n());
  const WeightingState w = ms.omega_hat(beta);
  if (two_step) {
    const double info = g.dot(w.solve(g));
    if (!(info > 0)) throw InferenceUnavailableError("two-step GMM: G'Omega^-1 G is not positive");
    return std::sqrt(1.0 / (info * n));
  }
  const double gg = g.squaredNorm();
  if (!(gg > 0)) throw InferenceUnavailableError("identity GMM: G'G is zero");
  const double meat = g.dot(w.omega() * g);
  return std::sqrt(meat / (gg * gg) / n);
}

VectorXd d_hat(const MomentSystem& ms, double beta) {
  const WeightingState w = ms.omega_hat(beta);
  const VectorXd v = w.solve(ms.g_bar(beta));
  return ms.g_jacobian() - ms.jacobian_moment_cross(beta) * v;
}

VarianceEstimate variance_hat(const MomentSystem& ms, double beta_hat) {
  VarianceEstimate out;
  const WeightingState w = ms.omega_hat(beta_hat);
  const VectorXd v = w.solve(ms.g_bar(beta_hat));
  out.d_hat = ms.g_jacobian() - ms.jacobian_moment_cross(beta_hat) * v;
  const double meat = out.d_hat.dot(w.solve(out.d_hat));
  out.curvature = ms.d2q_dbeta2(beta_hat);
  if (!(out.curvature > 0) || !std::isfinite(out.curvature)) {
    throw InferenceUnavailableError("variance unavailable: curvature of Q at beta_hat is not positive (" +
                                    std::to_string(out.curvature) + ")");
  }
  out.v_hat = meat / (out.curvature * out.curvature);
  out.se = std::sqrt(out.v_hat / static_cast<double>(ms.n()));
  return out;
}

TestResult wald_test(double beta_hat, double v_hat, Index n, double beta_star) {
  if (!(v_hat > 0)) throw InferenceUnavailableError("Wald test needs a positive variance");
  TestResult out;
  const double diff = beta_hat - beta_star;
  out.stat = static_cast<double>(n) * diff * diff / v_hat;
  out.p_value = chisq_sf(out.stat, 1.0);
  return out;
}

TestResult k_statistic(const MomentSystem& ms, double beta_star) {
  const WeightingState w = ms.omega_hat(beta_star);
  const VectorXd v = w.solve(ms.g_bar(beta_star));
  const VectorXd dh = ms.g_jacobian() - ms.jacobian_moment_cross(beta_star) * v;
  const double info = dh.dot(w.solve(dh));
  if (!(info > 0)) throw InferenceUnavailableError("K statistic: D'Omega^-1 D is not positive");
  const double score = ms.dq_dbeta(beta_star, w);
  TestResult out;
  out.stat = static_cast<double>(ms.n()) * score * score / info;
  out.p_value = chisq_sf(out.stat, 1.0);
  return out;
}

JTest j_statistic(const MomentSystem& ms, double beta_hat) {
  JTest out;
  out.df = static_cast<int>(ms.m()) - 1;
  if (out.df == 0) {
    out.just_identified = true;
    out.stat = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.stat = 2.0 * static_cast<double>(ms.n()) * ms.q_hat(beta_hat);
  out.p_value = chisq_sf(std::max(0.0, out.stat), out.df);
  return out;
}

FirstStageF first_stage_f(const ResidualData& rd) {
  const Index n = rd.n();
  const Index m = rd.m();
  if (n <= m) throw NumericalError("first-stage F needs n > m");
  const ZQr zq(rd.z_bar);
  const double ess = zq.project(rd.d_bar).squaredNorm();
  const double rss = std::max(0.0, rd.d_bar.squaredNorm() - ess);
  FirstStageF out;
  if (rss <= 1e-14 * rd.d_bar.squaredNorm()) {
    out.infinite = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = (ess / static_cast<double>(m)) / (rss / static_cast<double>(n - m));
  return out;
}

InferenceReport infer(const MomentSystem& ms, const ResidualData& rd, double beta_hat, double beta_star) {
  InferenceReport out;
  const VarianceEstimate ve = variance_hat(ms, beta_hat);
  out.se = ve.se;
  out.v_hat = ve.v_hat;
  out.d_hat = ve.d_hat;
  out.curvature = ve.curvature;
  out.beta_star = beta_star;
  const TestResult wt = wald_test(beta_hat, ve.v_hat, ms.n(), beta_star);
  out.wald = wt.stat;
  out.wald_p = wt.p_value;
  const TestResult kt = k_statistic(ms, beta_star);
  out.k_stat = kt.stat;
  out.k_p = kt.p_value;
  out.j = j_statistic(ms, beta_hat);
  out.f = first_stage_f(rd);
  return out;
}

}  // namespace dcue

#pragma once

#include "dcue/cross_fit.hpp"
#include "dcue/moments.hpp"

#include <Eigen/Dense>

namespace dcue {

/// Pieces of the projection of Dbar and Ybar onto the column space of Zbar.
struct TslsProjection {
  double dpd = 0.0;  // Dbar' P Dbar
  double dpy = 0.0;  // Dbar' P Ybar
};

/// Throws NumericalError for a rank-deficient Zbar or a zero first stage.
TslsProjection tsls_projection(const ResidualData& rd);

/// Homoscedastic TSLS standard error sqrt(sigma^2 / Dbar'PDbar), sigma^2 = mean residual^2.
double tsls_naive_se(const ResidualData& rd, double beta);

/// Standard error of identity-weighted GMM (sandwich (G'G)^-1 G'Omega G (G'G)^-1 / n),
/// or of the efficient two-step estimator ((G'Omega^-1 G)^-1 / n).
double gmm_se(const MomentSystem& ms, double beta, bool two_step);

/// D(beta) = G - [(1/n) sum G_i g_i'] Omega^-1 g_bar.
Eigen::VectorXd d_hat(const MomentSystem& ms, double beta);

struct VarianceEstimate {
  double v_hat = 0.0;      // asymptotic variance; Var(beta_hat) ~ v_hat / n
  double se = 0.0;         // sqrt(v_hat / n)
  double curvature = 0.0;  // d^2 Q / d beta^2 at beta_hat
  Eigen::VectorXd d_hat;
};

/// Sandwich form H^-1 (D'Omega^-1 D) H^-1 with H the curvature of Q.
/// Throws InferenceUnavailableError when H <= 0.
VarianceEstimate variance_hat(const MomentSystem& ms, double beta_hat);

struct TestResult {
  double stat = 0.0;
  double p_value = 1.0;
};

/// n (beta_hat - beta_star)^2 / v_hat against chi^2(1).
TestResult wald_test(double beta_hat, double v_hat, Eigen::Index n, double beta_star);

/// Score statistic n (dQ/dbeta)^2 / (D'Omega^-1 D) at beta_star, against chi^2(1).
TestResult k_statistic(const MomentSystem& ms, double beta_star);

struct JTest {
  double stat = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool just_identified = false;
};

/// 2 n Q(beta_hat) against chi^2(m - 1); J = 0, p = 1 when m = 1.
JTest j_statistic(const MomentSystem& ms, double beta_hat);

struct FirstStageF {
  double value = 0.0;
  bool infinite = false;
};

/// Classical F of the no-intercept regression of Dbar on Zbar.
FirstStageF first_stage_f(const ResidualData& rd);

struct InferenceReport {
  double se = 0.0;
  double v_hat = 0.0;
  Eigen::VectorXd d_hat;
  double curvature = 0.0;
  double beta_star = 0.0;
  double wald = 0.0;
  double wald_p = 1.0;
  double k_stat = 0.0;
  double k_p = 1.0;
  JTest j;
  FirstStageF f;
};

/// Variance, Wald and K tests of H0: beta = beta_star, J test and first-stage F.
InferenceReport infer(const MomentSystem& ms, const ResidualData& rd, double beta_hat, double beta_star = 0.0);

}  // namespace dcue

#pragma once

#include "dcue/cross_fit.hpp"

#include <Eigen/Dense>

namespace dcue {

/// Factored weighting matrix Omega(beta).
class WeightingState {
 public:
  /// Cholesky-factors `omega`. On failure retries once with a ridge of
  /// 1e-10 * mean(diag); throws SingularWeightingError if that fails too.
  WeightingState(Eigen::MatrixXd omega, double beta);

  const Eigen::MatrixXd& omega() const { return omega_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }

  double min_factor_diag() const { return min_diag_; }
  double max_factor_diag() const { return max_diag_; }
  bool jittered() const { return jittered_; }

 private:
  Eigen::MatrixXd omega_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double min_diag_ = 0.0;
  double max_diag_ = 0.0;
  bool jittered_ = false;
};

/// Cross-fitted moment system for g_i(beta) = Zbar_i (Ybar_i - Dbar_i beta).
///
/// Everything is linear or quadratic in beta, so the constructor caches
///   Szy = (1/n) sum Zbar Ybar,  Szd = (1/n) sum Zbar Dbar,
///   Oyy = (1/n) sum Zbar Zbar' Ybar^2, Oyd = ... Ybar Dbar, Odd = ... Dbar^2,
/// and Omega(beta) = Oyy - 2 beta Oyd + beta^2 Odd.
class MomentSystem {
 public:
  explicit MomentSystem(const ResidualData& rd);

  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return szy_.size(); }

  const Eigen::VectorXd& szy() const { return szy_; }
  const Eigen::VectorXd& szd() const { return szd_; }

  /// g_bar(beta) = Szy - beta Szd.
  Eigen::VectorXd g_bar(double beta) const { return szy_ - beta * szd_; }

  /// d g_bar / d beta = -Szd, constant in beta.
  Eigen::VectorXd g_jacobian() const { return -szd_; }

  Eigen::MatrixXd omega_matrix(double beta) const;
  WeightingState omega_hat(double beta) const { return WeightingState(omega_matrix(beta), beta); }

  /// d Omega / d beta = -(2/n) sum Zbar Zbar' (Ybar - Dbar beta) Dbar.
  Eigen::MatrixXd d_omega_dbeta(double beta) const { return 2.0 * (beta * odd_ - oyd_); }

  /// (1/n) sum G_i g_i(beta)' with G_i = -Zbar_i Dbar_i.
  Eigen::MatrixXd jacobian_moment_cross(double beta) const { return beta * odd_ - oyd_; }

  /// Q(beta) = g' Omega^-1 g / 2.
  double q_hat(double beta) const;
  double q_hat(double beta, const WeightingState& w) const;

  /// dQ/dbeta = g' Omega^-1 G + (1/2) g' A g, A = -Omega^-1 (dOmega/dbeta) Omega^-1.
  double dq_dbeta(double beta) const;
  double dq_dbeta(double beta, const WeightingState& w) const;

  /// Central difference of dq_dbeta, step 1e-5 * max(1, |beta|) unless given.
  double d2q_dbeta2(double beta, double step = 0.0) const;

 private:
  Eigen::Index n_ = 0;
  Eigen::VectorXd szy_;
  Eigen::VectorXd szd_;
  Eigen::MatrixXd oyy_;
  Eigen::MatrixXd oyd_;
  Eigen::MatrixXd odd_;
};

}  // namespace dcue

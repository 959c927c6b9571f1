#include "dcue/moments.hpp"

#include "dcue/error.hpp"

#include <cmath>
#include <sstream>

namespace dcue {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kMinDiagRatio = 1e-7;  // condition number of Omega up to ~1e14

bool factor_ok(const Eigen::LLT<MatrixXd>& llt, double& min_diag, double& max_diag) {
  if (llt.info() != Eigen::Success) return false;
  const VectorXd diag = llt.matrixLLT().diagonal();
  min_diag = diag.minCoeff();
  max_diag = diag.maxCoeff();
  return std::isfinite(min_diag) && max_diag > 0 && min_diag > kMinDiagRatio * max_diag;
}

}  // namespace

WeightingState::WeightingState(MatrixXd omega, double beta) : omega_(std::move(omega)) {
  if (!omega_.allFinite()) {
    throw SingularWeightingError("weighting matrix has non-finite entries at beta=" + std::to_string(beta), beta, 0, 0);
  }
  llt_.compute(omega_);
  if (factor_ok(llt_, min_diag_, max_diag_)) return;

  const double jitter = 1e-10 * omega_.diagonal().mean();
  if (jitter > 0) {
    MatrixXd adjusted = omega_;
    adjusted.diagonal().array() += jitter;
    llt_.compute(adjusted);
    if (factor_ok(llt_, min_diag_, max_diag_)) {
      jittered_ = true;
      return;
    }
  }
  std::ostringstream msg;
  msg << "singular weighting matrix at beta=" << beta << " (factor diagonal min " << min_diag_ << ", max "
      << max_diag_ << ")";
  throw SingularWeightingError(msg.str(), beta, min_diag_, max_diag_);
}

MomentSystem::MomentSystem(const ResidualData& rd) : n_(rd.n()) {
  const Index m = rd.m();
  if (n_ < 1 || rd.d_bar.size() != n_ || rd.z_bar.rows() != n_ || m < 1) {
    throw DataError("moment system: residual data has inconsistent dimensions");
  }
  const double inv_n = 1.0 / static_cast<double>(n_);
  szy_ = rd.z_bar.transpose() * rd.y_bar * inv_n;
  szd_ = rd.z_bar.transpose() * rd.d_bar * inv_n;

  // Weighted Gram matrices via row scaling: Z' diag(w) Z.
  auto weighted_gram = [&](const VectorXd& w) {
    const MatrixXd scaled = rd.z_bar.array().colwise() * w.array();
    MatrixXd out = scaled.transpose() * rd.z_bar;
    return MatrixXd(0.5 * inv_n * (out + out.transpose()));
  };
  oyy_ = weighted_gram(rd.y_bar.array().square().matrix());
  oyd_ = weighted_gram((rd.y_bar.array() * rd.d_bar.array()).matrix());
  odd_ = weighted_gram(rd.d_bar.array().square().matrix());
}

MatrixXd MomentSystem::omega_matrix(double beta) const { return oyy_ - 2.0 * beta * oyd_ + beta * beta * odd_; }

double MomentSystem::q_hat(double beta) const { return q_hat(beta, omega_hat(beta)); }

double MomentSystem::q_hat(double beta, const WeightingState& w) const {
  const VectorXd g = g_bar(beta);
  return 0.5 * g.dot(w.solve(g));
}

double MomentSystem::dq_dbeta(double beta) const { return dq_dbeta(beta, omega_hat(beta)); }

double MomentSystem::dq_dbeta(double beta, const WeightingState& w) const {
  const VectorXd g = g_bar(beta);
  const VectorXd v = w.solve(g);  // Omega^-1 g
  // g' A g = -v' (dOmega) v
  return v.dot(g_jacobian()) - 0.5 * v.dot(d_omega_dbeta(beta) * v);
}

double MomentSystem::d2q_dbeta2(double beta, double step) const {
  const double h = step > 0 ? step : 1e-5 * std::max(1.0, std::abs(beta));
  return (dq_dbeta(beta + h) - dq_dbeta(beta - h)) / (2.0 * h);
}

}  // namespace dcue

#pragma once

#include "dcue/dataset.hpp"
#include "dcue/folds.hpp"
#include "dcue/learners.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace dcue {

struct FittedModelInfo {
  int fold = 0;
  std::string target;  // "ell", "r", "alpha1".."alpham"
  ModelSummary summary;
};

/// Out-of-fold predictions of the outcome regression, treatment regression
/// and the m instrument propensity scores.
struct NuisanceFit {
  Eigen::VectorXd ell_hat;
  Eigen::VectorXd r_hat;
  Eigen::MatrixXd alpha_hat;
  std::vector<FittedModelInfo> models;  // K * (2 + m) entries, empty for the oracle

  void validate(Eigen::Index n, Eigen::Index m) const;
};

/// Residualized outcome, treatment and instruments.
struct ResidualData {
  Eigen::VectorXd y_bar;
  Eigen::VectorXd d_bar;
  Eigen::MatrixXd z_bar;
  std::vector<int> fold_of;  // all zero when no cross-fitting was involved

  Eigen::Index n() const { return y_bar.size(); }
  Eigen::Index m() const { return z_bar.cols(); }
};

/// Trains the 2+m nuisance regressions on the complement of each fold and
/// predicts the held-out fold. The oracle spec evaluates the true functions.
/// Learner failures are rethrown with the fold and target named.
NuisanceFit cross_fit(const Dataset& ds, const FoldPartition& folds, const LearnerSpec& spec, std::uint64_t seed = 0);

/// y - ell_hat, d - r_hat, z - alpha_hat row by row.
ResidualData residualize(const Dataset& ds, const NuisanceFit& fits, const FoldPartition& folds);

/// Residualizes with the true nuisance functions on the full sample (no folds).
ResidualData residualize_oracle(const Dataset& ds, const TrueNuisance& truth);

/// Full-sample least-squares partialling of X (with intercept) out of Y, D and
/// Z; combined with estimate_tsls this is the conventional TSLS estimator with
/// covariates entered linearly.
ResidualData partial_out_linear(const Dataset& ds);

}  // namespace dcue

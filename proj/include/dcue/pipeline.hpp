#pragma once

#include "dcue/cross_fit.hpp"
#include "dcue/dataset.hpp"
#include "dcue/estimators.hpp"
#include "dcue/inference.hpp"
#include "dcue/learners.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dcue {

struct EstimateOptions {
  std::vector<Method> methods{Method::cue, Method::tsls, Method::gmm_identity};
  LearnerSpec learner = LearnerSpec::of(LearnerKind::spline_additive);
  int folds = 4;
  std::uint64_t seed = 1;
  std::optional<SearchInterval> interval;  // default_search_interval when empty
  double beta_star = 0.0;                  // null value for the Wald and K tests

  void validate() const;
};

/// Everything one method produced on one dataset.
struct MethodResult {
  EstimateReport estimate;
  double se = 0.0;  // NaN when unavailable
  std::optional<InferenceReport> inference;  // CUE only
  std::string inference_error;               // why inference is missing, if it is
};

struct EstimateRun {
  std::vector<MethodResult> methods;  // in request order
  FirstStageF first_stage;            // on the residuals used by the debiased methods
  std::vector<FittedModelInfo> models;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Eigen::Index p = 0;

  /// True if some method lacks a standard error.
  bool incomplete() const;
};

/// Cross-fits the nuisances once and runs every requested method on the
/// residuals. TSLS is the conventional estimator with X entered linearly over
/// the full sample. Oracle methods are rejected: a dataset carries no truth.
/// Estimation failures throw; unavailable inference is recorded per method.
EstimateRun run_estimate(const Dataset& ds, const EstimateOptions& opts);

}  // namespace dcue

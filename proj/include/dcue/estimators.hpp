#pragma once

#include "dcue/cross_fit.hpp"
#include "dcue/moments.hpp"

#include <string>
#include <vector>

namespace dcue {

enum class Method { cue, tsls, gmm_identity, gmm_two_step, oracle_cue, oracle_gmm };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

/// Comma-separated method names; duplicates are dropped, order kept.
std::vector<Method> methods_from_string(const std::string& list);

/// The compact parameter set searched by the CUE.
struct SearchInterval {
  double lo = -50.0;
  double hi = 50.0;
  int grid_points = 201;
  double refine_tol = 1e-9;

  void validate() const;
};

struct EstimateReport {
  double beta_hat = 0.0;
  Method method = Method::cue;
  double objective_at_min = 0.0;
  double stationarity = 0.0;  // |dQ/dbeta| at beta_hat; NaN when not applicable
  bool boundary_flag = false;
  bool multi_min_flag = false;
  int skipped_grid_points = 0;  // singular-weighting grid points
  SearchInterval interval;
};

/// Grid scan of Q over B, then Brent refinement of the best cell (polished
/// by a root of dQ/dbeta when the cell brackets a sign change).
EstimateReport estimate_cue(const MomentSystem& ms, const SearchInterval& interval);

/// Conventional two-stage least squares on residualized data,
/// beta = Dbar' P Ybar / Dbar' P Dbar with P the projection on Zbar.
EstimateReport estimate_tsls(const ResidualData& rd);

/// Identity-weighted GMM, closed form Szd'Szy / Szd'Szd. With `two_step` the
/// estimate is re-solved with weight Omega(beta_1)^-1.
EstimateReport estimate_gmm_identity(const MomentSystem& ms, bool two_step = false);

enum class OracleMethod { cue, gmm };

/// Residualizes with the true nuisance functions (no folds) and runs CUE or
/// identity GMM. The CUE search interval defaults to default_search_interval.
EstimateReport estimate_oracle(const Dataset& ds, const TrueNuisance& truth, OracleMethod method,
                               bool two_step = false);

/// TSLS +/- 10 naive standard errors, intersected with [-50, 50].
SearchInterval default_search_interval(const ResidualData& rd);

}  // namespace dcue

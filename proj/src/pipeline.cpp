#include "dcue/pipeline.hpp"

#include "dcue/error.hpp"
#include "dcue/folds.hpp"
#include "dcue/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcue {

void EstimateOptions::validate() const {
  if (methods.empty()) throw ConfigError("no methods requested");
  for (Method m : methods) {
    if (m == Method::oracle_cue || m == Method::oracle_gmm) {
      throw ConfigError("oracle methods need the true nuisance functions and are only available in simulate");
    }
  }
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (learner.kind == LearnerKind::oracle) throw ConfigError("the oracle learner is only available in simulate");
  learner.validate();
  if (interval) interval->validate();
}

bool EstimateRun::incomplete() const {
  return std::any_of(methods.begin(), methods.end(), [](const MethodResult& r) { return !std::isfinite(r.se); });
}

EstimateRun run_estimate(const Dataset& ds, const EstimateOptions& opts) {
  opts.validate();
  ds.validate();
  if (ds.n() < 2 * opts.folds) throw ConfigError("need at least 2 observations per fold");

  EstimateRun run;
  run.n = ds.n();
  run.m = ds.m();
  run.p = ds.p();

  const bool debiased = std::any_of(opts.methods.begin(), opts.methods.end(), [](Method m) { return m != Method::tsls; });
  std::optional<ResidualData> cross;
  if (debiased) {
    const FoldPartition folds = make_folds(ds.n(), opts.folds, opts.seed);
    NuisanceFit fit = cross_fit(ds, folds, opts.learner, opts.seed);
    cross = residualize(ds, fit, folds);
    run.models = std::move(fit.models);
  }
  std::optional<ResidualData> linear;
  auto linear_rd = [&]() -> const ResidualData& {
    if (!linear) linear = partial_out_linear(ds);
    return *linear;
  };
  run.first_stage = first_stage_f(cross ? *cross : linear_rd());

  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  for (Method method : opts.methods) {
    MethodResult res;
    if (method == Method::tsls) {
      const ResidualData& rd = linear_rd();
      res.estimate = estimate_tsls(rd);
      res.se = tsls_naive_se(rd, res.estimate.beta_hat);
    } else if (method == Method::cue) {
      const MomentSystem ms(*cross);
      res.estimate = estimate_cue(ms, opts.interval ? *opts.interval : default_search_interval(*cross));
      try {
        res.inference = infer(ms, *cross, res.estimate.beta_hat, opts.beta_star);
        res.se = res.inference->se;
      } catch (const NumericalError& e) {
        res.se = kNaN;
        res.inference_error = e.what();
      }
    } else {
      const bool two_step = method == Method::gmm_two_step;
      const MomentSystem ms(*cross);
      res.estimate = estimate_gmm_identity(ms, two_step);
      try {
        res.se = gmm_se(ms, res.estimate.beta_hat, two_step);
      } catch (const NumericalError& e) {
        res.se = kNaN;
        res.inference_error = e.what();
      }
    }
    run.methods.push_back(std::move(res));
  }
  return run;
}

}  // namespace dcue

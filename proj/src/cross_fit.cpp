#include "dcue/cross_fit.hpp"

#include "dcue/error.hpp"

#include <cmath>
#include <type_traits>

namespace dcue {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string target_name(Index c) {
  if (c == 0) return "ell";
  if (c == 1) return "r";
  return "alpha" + std::to_string(c - 1);
}

std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  // splitmix64 step keeps per-fold seeds well separated
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(fold + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename E>
[[noreturn]] void rethrow_tagged(const E& e, int fold, const std::string& target) {
  const std::string msg = "fold " + std::to_string(fold + 1) + ", target " + target + ": " + e.what();
  if constexpr (std::is_same_v<E, ConvergenceError>) {
    throw ConvergenceError(msg, e.lambda());
  } else {
    throw E(msg);
  }
}

// Identifies which target failed by refitting one column at a time.
[[noreturn]] void diagnose_failure(const LearnerSpec& spec, const MatrixXd& x, const MatrixXd& targets, int fold,
                                   std::uint64_t seed) {
  for (Index c = 0; c < targets.cols(); ++c) {
    try {
      fit_targets(spec, x, targets.col(c), seed);
    } catch (const ConvergenceError& e) {
      rethrow_tagged(e, fold, target_name(c));
    } catch (const NumericalError& e) {
      rethrow_tagged(e, fold, target_name(c));
    } catch (const DataError& e) {
      rethrow_tagged(e, fold, target_name(c));
    } catch (const ConfigError& e) {
      rethrow_tagged(e, fold, target_name(c));
    }
  }
  throw NumericalError("fold " + std::to_string(fold + 1) + ": learner failed");
}

}  // namespace

void NuisanceFit::validate(Index n, Index m) const {
  if (ell_hat.size() != n || r_hat.size() != n || alpha_hat.rows() != n) {
    throw DataError("nuisance predictions missing for some observations");
  }
  if (alpha_hat.cols() != m) throw DataError("instrument propensity predictions have the wrong column count");
  if (!ell_hat.allFinite() || !r_hat.allFinite() || !alpha_hat.allFinite()) {
    throw NumericalError("non-finite nuisance prediction");
  }
}

NuisanceFit cross_fit(const Dataset& ds, const FoldPartition& folds, const LearnerSpec& spec, std::uint64_t seed) {
  ds.validate();
  spec.validate();
  folds.validate(ds.n());
  const Index n = ds.n();
  const Index m = ds.m();

  NuisanceFit fit;
  if (spec.kind == LearnerKind::oracle) {
    fit.ell_hat = spec.truth->ell(ds.x);
    fit.r_hat = spec.truth->r(ds.x);
    fit.alpha_hat = spec.truth->alpha(ds.x);
    fit.validate(n, m);
    return fit;
  }

  fit.ell_hat.resize(n);
  fit.r_hat.resize(n);
  fit.alpha_hat.resize(n, m);
  MatrixXd all_targets(n, 2 + m);
  all_targets.col(0) = ds.y;
  all_targets.col(1) = ds.d;
  all_targets.rightCols(m) = ds.z;

  for (int k = 0; k < folds.k(); ++k) {
    const auto train = folds.complement(k);
    const auto& test = folds.folds[static_cast<std::size_t>(k)];
    const MatrixXd x_train = ds.x(train, Eigen::all);
    const MatrixXd t_train = all_targets(train, Eigen::all);
    const MatrixXd x_test = ds.x(test, Eigen::all);
    const auto s = fold_seed(seed, k);

    std::vector<PredictiveModel> models;
    try {
      models = fit_targets(spec, x_train, t_train, s);
    } catch (const Error&) {
      diagnose_failure(spec, x_train, t_train, k, s);
    }

    for (Index c = 0; c < 2 + m; ++c) {
      const VectorXd pred = models[static_cast<std::size_t>(c)].predict(x_test);
      for (std::size_t r = 0; r < test.size(); ++r) {
        const Index i = test[r];
        const double v = pred(static_cast<Index>(r));
        if (c == 0) {
          fit.ell_hat(i) = v;
        } else if (c == 1) {
          fit.r_hat(i) = v;
        } else {
          fit.alpha_hat(i, c - 2) = v;
        }
      }
      fit.models.push_back({k, target_name(c), models[static_cast<std::size_t>(c)].summary()});
    }
  }
  fit.validate(n, m);
  return fit;
}

ResidualData residualize(const Dataset& ds, const NuisanceFit& fits, const FoldPartition& folds) {
  fits.validate(ds.n(), ds.m());
  ResidualData rd;
  rd.y_bar = ds.y - fits.ell_hat;
  rd.d_bar = ds.d - fits.r_hat;
  rd.z_bar = ds.z - fits.alpha_hat;
  rd.fold_of = folds.k() > 0 ? folds.fold_of() : std::vector<int>(static_cast<std::size_t>(ds.n()), 0);
  return rd;
}

ResidualData residualize_oracle(const Dataset& ds, const TrueNuisance& truth) {
  ds.validate();
  NuisanceFit fit;
  fit.ell_hat = truth.ell(ds.x);
  fit.r_hat = truth.r(ds.x);
  fit.alpha_hat = truth.alpha(ds.x);
  fit.validate(ds.n(), ds.m());
  return residualize(ds, fit, FoldPartition{});
}

ResidualData partial_out_linear(const Dataset& ds) {
  ds.validate();
  const Index n = ds.n();
  const Index m = ds.m();
  MatrixXd targets(n, 2 + m);
  targets.col(0) = ds.y;
  targets.col(1) = ds.d;
  targets.rightCols(m) = ds.z;
  const auto models = fit_targets(LearnerSpec::of(LearnerKind::linear), ds.x, targets, 0);
  NuisanceFit fit;
  fit.ell_hat = models[0].predict(ds.x);
  fit.r_hat = models[1].predict(ds.x);
  fit.alpha_hat.resize(n, m);
  for (Index j = 0; j < m; ++j) fit.alpha_hat.col(j) = models[static_cast<std::size_t>(2 + j)].predict(ds.x);
  return residualize(ds, fit, FoldPartition{});
}

}  // namespace dcue

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dcue {

enum class LearnerKind { linear, ridge, lasso, spline_additive, oracle };

std::string to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& name);

/// True nuisance functions evaluated on a covariate matrix (one row per
/// observation). `alpha` returns an n x m matrix.
struct TrueNuisance {
  std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> ell;
  std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> r;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> alpha;
};

struct RidgeOptions {
  // Penalties are multiplied by the training size before use.
  std::vector<double> penalties;
};

struct LassoOptions {
  int cv_folds = 10;
  int n_lambda = 100;
  double lambda_min_ratio = 1e-4;
  int max_sweeps = 10000;
  double tolerance = 1e-7;
  std::optional<double> fixed_lambda;  // skips cross-validation when set
};

struct SplineOptions {
  int knots = 10;  // interior knots per covariate
  int n_grid = 30;
  double grid_lo = 1e-6;
  double grid_hi = 1e4;
};

struct LearnerSpec {
  LearnerKind kind = LearnerKind::spline_additive;
  RidgeOptions ridge;
  LassoOptions lasso;
  SplineOptions spline;
  std::shared_ptr<const TrueNuisance> truth;  // oracle only

  /// Throws ConfigError on empty grids, knots < 1, CV folds < 2, or an oracle without truth.
  void validate() const;

  static LearnerSpec of(LearnerKind kind);
  static LearnerSpec oracle(std::shared_ptr<const TrueNuisance> truth);
};

/// What a fitted model reports about itself for diagnostics output.
struct ModelSummary {
  std::string kind;
  double penalty = 0.0;  // selected lambda / smoothing multiplier / ridge penalty
  int basis_size = 0;    // number of coefficients excluding the intercept
  int nonzero = 0;       // lasso support size
  bool ridge_fallback = false;
  std::vector<std::string> warnings;
};

namespace detail {
struct ModelImpl {
  virtual ~ModelImpl() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
};
}  // namespace detail

/// A fitted regression function x -> E[t | x]. Cheap to copy.
class PredictiveModel {
 public:
  PredictiveModel(std::shared_ptr<const detail::ModelImpl> impl, ModelSummary summary, double intercept = 0.0,
                  Eigen::VectorXd coefficients = {})
      : impl_(std::move(impl)), summary_(std::move(summary)), intercept_(intercept), coef_(std::move(coefficients)) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const { return impl_->predict(x); }
  const ModelSummary& summary() const { return summary_; }

  /// Original-scale intercept and slopes for the linear family (linear,
  /// ridge, lasso). Empty coefficients for spline models.
  double intercept() const { return intercept_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }

 private:
  std::shared_ptr<const detail::ModelImpl> impl_;
  ModelSummary summary_;
  double intercept_;
  Eigen::VectorXd coef_;
};

/// Ordinary least squares with intercept. A rank-deficient design (or n' <= p+1)
/// switches to ridge with penalty 1e-8 * trace(Xc'Xc), flagged in the summary.
PredictiveModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& t);

/// Ridge on standardized columns, penalty chosen by GCV over `opts.penalties`.
PredictiveModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const RidgeOptions& opts = {});

/// L1-penalized least squares, (1/2n')||t - b0 - Xb||^2 + lambda ||b||_1 on
/// standardized columns, by cyclic coordinate descent. Lambda is picked by
/// V-fold cross-validation (minimum held-out squared error) unless fixed.
PredictiveModel fit_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const LassoOptions& opts = {},
                          std::uint64_t seed = 0);

/// Additive cubic B-spline model with a second-difference roughness penalty per
/// covariate and one GCV-selected smoothing multiplier.
PredictiveModel fit_spline_additive(const Eigen::MatrixXd& x, const Eigen::VectorXd& t,
                                    const SplineOptions& opts = {});

/// Fits every column of `targets` on the same design; shares factorizations
/// across targets. Not valid for the oracle kind.
std::vector<PredictiveModel> fit_targets(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                                         const Eigen::MatrixXd& targets, std::uint64_t seed);

/// Result of one lasso solve at a fixed lambda on a standardized problem.
struct LassoSolution {
  Eigen::VectorXd beta;  // standardized scale
  int sweeps = 0;
};

/// Coordinate descent on the standardized problem given the Gram matrix
/// G = Xs'Xs/n' and c = Xs'(t - mean t)/n'. Warm-started from `start`.
/// Throws ConvergenceError after opts.max_sweeps sweeps.
LassoSolution lasso_coordinate_descent(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double lambda,
                                       const Eigen::VectorXd& start, const LassoOptions& opts);

/// Cubic B-spline basis (and optional first derivative) at `x` for a full knot
/// vector with boundary multiplicity 4. Returns knots.size() - 4 values.
Eigen::VectorXd bspline_basis(const std::vector<double>& knots, double x, bool derivative = false);

}  // namespace dcue

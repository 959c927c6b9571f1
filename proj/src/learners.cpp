#include "dcue/learners.hpp"

#include "dcue/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace dcue {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::linear: return "linear";
    case LearnerKind::ridge: return "ridge";
    case LearnerKind::lasso: return "lasso";
    case LearnerKind::spline_additive: return "spline";
    case LearnerKind::oracle: return "oracle";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(const std::string& name) {
  if (name == "linear") return LearnerKind::linear;
  if (name == "ridge") return LearnerKind::ridge;
  if (name == "lasso") return LearnerKind::lasso;
  if (name == "spline" || name == "spline-additive" || name == "gam") return LearnerKind::spline_additive;
  if (name == "oracle") return LearnerKind::oracle;
  throw ConfigError("unknown learner '" + name + "' (expected linear|ridge|lasso|spline|oracle)");
}

namespace {

std::vector<double> geometric_grid(double hi, double lo, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = hi;
    return out;
  }
  const double step = std::log(lo / hi) / (count - 1);
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = hi * std::exp(step * i);
  return out;
}

RidgeOptions default_ridge() {
  RidgeOptions r;
  r.penalties = geometric_grid(1e4, 1e-4, 50);
  return r;
}

// ---------------------------------------------------------------------------
// Linear-family prediction and standardization

struct LinearImpl final : detail::ModelImpl {
  double b0 = 0.0;
  VectorXd b;
  VectorXd predict(const MatrixXd& x) const override {
    if (b.size() == 0) return VectorXd::Constant(x.rows(), b0);
    return (x * b).array() + b0;
  }
};

PredictiveModel make_linear_model(double b0, VectorXd b, ModelSummary s) {
  auto impl = std::make_shared<LinearImpl>();
  impl->b0 = b0;
  impl->b = b;
  return PredictiveModel(std::move(impl), std::move(s), b0, std::move(b));
}

PredictiveModel constant_model(double value, const std::string& kind, Index p) {
  ModelSummary s;
  s.kind = kind;
  return make_linear_model(value, VectorXd::Zero(p), s);
}

struct Standardizer {
  VectorXd mean;
  VectorXd scale;
  std::vector<Index> keep;  // non-constant columns

  static Standardizer fit(const MatrixXd& x) {
    Standardizer s;
    const Index n = x.rows();
    s.mean = x.colwise().mean().transpose();
    s.scale = VectorXd::Zero(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      const double ss = (x.col(j).array() - s.mean(j)).square().sum();
      const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      s.scale(j) = sd;
      if (sd > 1e-12 * (1.0 + std::abs(s.mean(j)))) s.keep.push_back(j);
    }
    return s;
  }

  MatrixXd apply(const MatrixXd& x) const {
    MatrixXd out(x.rows(), static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
      const Index j = keep[c];
      out.col(static_cast<Index>(c)) = (x.col(j).array() - mean(j)) / scale(j);
    }
    return out;
  }

  // Maps standardized-scale slopes back to original columns.
  void to_original(const VectorXd& bs, double center, Index p, double& b0, VectorXd& b) const {
    b = VectorXd::Zero(p);
    b0 = center;
    for (std::size_t c = 0; c < keep.size(); ++c) {
      const Index j = keep[c];
      b(j) = bs(static_cast<Index>(c)) / scale(j);
      b0 -= b(j) * mean(j);
    }
  }
};

// ---------------------------------------------------------------------------
// OLS with ridge fallback

std::vector<PredictiveModel> fit_linear_multi(const MatrixXd& x, const MatrixXd& targets) {
  const Index n = x.rows();
  const Index p = x.cols();
  std::vector<PredictiveModel> out;
  out.reserve(static_cast<std::size_t>(targets.cols()));
  if (p == 0) {
    for (Index c = 0; c < targets.cols(); ++c) out.push_back(constant_model(targets.col(c).mean(), "linear", 0));
    return out;
  }

  const VectorXd xmean = x.colwise().mean().transpose();
  const MatrixXd xc = x.rowwise() - xmean.transpose();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(xc);
  qr.setThreshold(1e-10);
  const bool fallback = qr.rank() < p || n <= p + 1;

  Eigen::LDLT<MatrixXd> ridge;
  double penalty = 0.0;
  if (fallback) {
    MatrixXd gram = xc.transpose() * xc;
    penalty = 1e-8 * std::max(gram.trace(), std::numeric_limits<double>::min());
    gram.diagonal().array() += penalty;
    ridge.compute(gram);
  }

  for (Index c = 0; c < targets.cols(); ++c) {
    const double tmean = targets.col(c).mean();
    const VectorXd tc = targets.col(c).array() - tmean;
    VectorXd b = fallback ? VectorXd(ridge.solve(xc.transpose() * tc)) : VectorXd(qr.solve(tc));
    if (!b.allFinite()) throw NumericalError("linear fit produced non-finite coefficients");
    ModelSummary s;
    s.kind = "linear";
    s.basis_size = static_cast<int>(p);
    s.ridge_fallback = fallback;
    s.penalty = penalty;
    if (fallback) s.warnings.push_back("rank-deficient design: ridge fallback engaged");
    const double b0 = tmean - xmean.dot(b);
    out.push_back(make_linear_model(b0, std::move(b), std::move(s)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ridge via SVD + GCV

std::vector<PredictiveModel> fit_ridge_multi(const MatrixXd& x, const MatrixXd& targets, const RidgeOptions& opts_in) {
  const RidgeOptions opts = opts_in.penalties.empty() ? default_ridge() : opts_in;
  const Index n = x.rows();
  const Index p = x.cols();
  std::vector<PredictiveModel> out;
  const Standardizer st = Standardizer::fit(x);
  if (st.keep.empty()) {
    for (Index c = 0; c < targets.cols(); ++c) out.push_back(constant_model(targets.col(c).mean(), "ridge", p));
    return out;
  }
  const MatrixXd xs = st.apply(x);
  Eigen::BDCSVD<MatrixXd> svd(xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd sv = svd.singularValues();
  const VectorXd s2 = sv.array().square();

  for (Index c = 0; c < targets.cols(); ++c) {
    const double tmean = targets.col(c).mean();
    const VectorXd tc = targets.col(c).array() - tmean;
    const VectorXd ut = svd.matrixU().transpose() * tc;
    const double resid_outside = tc.squaredNorm() - ut.squaredNorm();
    double best_gcv = std::numeric_limits<double>::infinity();
    double best_pen = opts.penalties.front() * static_cast<double>(n);
    for (double pen : opts.penalties) {
      const double lam = pen * static_cast<double>(n);
      const VectorXd shrink = (lam / (s2.array() + lam)).matrix();
      const double df = 1.0 + (s2.array() / (s2.array() + lam)).sum();
      const double rss = std::max(0.0, resid_outside) + (shrink.array() * ut.array()).square().sum();
      const double denom = static_cast<double>(n) - df;
      if (denom <= 0) continue;
      const double gcv = static_cast<double>(n) * rss / (denom * denom);
      if (gcv < best_gcv) {
        best_gcv = gcv;
        best_pen = lam;
      }
    }
    const VectorXd coef_s =
        svd.matrixV() * (sv.array() / (s2.array() + best_pen) * ut.array()).matrix();
    double b0 = 0;
    VectorXd b;
    st.to_original(coef_s, tmean, p, b0, b);
    ModelSummary s;
    s.kind = "ridge";
    s.penalty = best_pen / static_cast<double>(n);
    s.basis_size = static_cast<int>(st.keep.size());
    out.push_back(make_linear_model(b0, std::move(b), std::move(s)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lasso

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

struct LassoProblem {
  Standardizer st;
  MatrixXd xs;
  MatrixXd gram;

  explicit LassoProblem(const MatrixXd& x) : st(Standardizer::fit(x)), xs(st.apply(x)) {
    gram = xs.transpose() * xs / static_cast<double>(x.rows());
  }
};

// Runs the warm-started path; `visit(index, beta)` is called after each lambda.
template <typename Visit>
void lasso_path(const LassoProblem& prob, const VectorXd& xty, const std::vector<double>& lambdas, std::size_t last,
                const LassoOptions& opts, Visit&& visit) {
  VectorXd beta = VectorXd::Zero(prob.gram.rows());
  for (std::size_t l = 0; l <= last && l < lambdas.size(); ++l) {
    beta = lasso_coordinate_descent(prob.gram, xty, lambdas[l], beta, opts).beta;
    visit(l, beta);
  }
}

std::vector<PredictiveModel> fit_lasso_multi(const MatrixXd& x, const MatrixXd& targets, const LassoOptions& opts,
                                             std::uint64_t seed) {
  const Index n = x.rows();
  const Index p = x.cols();
  std::vector<PredictiveModel> out;
  const LassoProblem full(x);
  const Index q = full.xs.cols();
  if (q == 0) {
    for (Index c = 0; c < targets.cols(); ++c) out.push_back(constant_model(targets.col(c).mean(), "lasso", p));
    return out;
  }

  // Internal CV splits come from the training rows only and are shared by all targets.
  const bool use_cv = !opts.fixed_lambda.has_value();
  const int v_folds = static_cast<int>(std::min<Index>(opts.cv_folds, n));
  std::vector<int> cv_fold(static_cast<std::size_t>(n));
  std::vector<LassoProblem> cv_train;
  std::vector<MatrixXd> cv_test_xs;
  std::vector<std::vector<Index>> cv_train_idx(static_cast<std::size_t>(v_folds)), cv_test_idx(static_cast<std::size_t>(v_folds));
  if (use_cv) {
    if (v_folds < 2) throw ConfigError("lasso cross-validation needs at least 2 training rows");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t pos = 0; pos < perm.size(); ++pos) cv_fold[static_cast<std::size_t>(perm[pos])] = static_cast<int>(pos % static_cast<std::size_t>(v_folds));
    for (Index i = 0; i < n; ++i) {
      for (int v = 0; v < v_folds; ++v) {
        (cv_fold[static_cast<std::size_t>(i)] == v ? cv_test_idx : cv_train_idx)[static_cast<std::size_t>(v)].push_back(i);
      }
    }
    cv_train.reserve(static_cast<std::size_t>(v_folds));
    for (int v = 0; v < v_folds; ++v) {
      const auto& tr = cv_train_idx[static_cast<std::size_t>(v)];
      const auto& te = cv_test_idx[static_cast<std::size_t>(v)];
      cv_train.emplace_back(x(tr, Eigen::all));
      cv_test_xs.push_back(cv_train.back().st.apply(x(te, Eigen::all)));
    }
  }

  for (Index c = 0; c < targets.cols(); ++c) {
    const VectorXd t = targets.col(c);
    const double tmean = t.mean();
    const VectorXd xty = full.xs.transpose() * (t.array() - tmean).matrix() / static_cast<double>(n);
    const double lambda_max = xty.cwiseAbs().maxCoeff();

    ModelSummary s;
    s.kind = "lasso";
    s.basis_size = static_cast<int>(q);
    VectorXd beta_s = VectorXd::Zero(q);

    if (opts.fixed_lambda) {
      s.penalty = *opts.fixed_lambda;
      beta_s = lasso_coordinate_descent(full.gram, xty, s.penalty, beta_s, opts).beta;
    } else if (lambda_max <= 0.0) {
      s.penalty = 0.0;
    } else {
      const auto lambdas = geometric_grid(lambda_max, lambda_max * opts.lambda_min_ratio, opts.n_lambda);
      std::vector<double> cv_err(lambdas.size(), 0.0);
      for (int v = 0; v < v_folds; ++v) {
        const auto& prob = cv_train[static_cast<std::size_t>(v)];
        const auto& tr = cv_train_idx[static_cast<std::size_t>(v)];
        const auto& te = cv_test_idx[static_cast<std::size_t>(v)];
        const VectorXd ttr = t(tr);
        const double mtr = ttr.mean();
        const VectorXd xty_v = prob.xs.transpose() * (ttr.array() - mtr).matrix() / static_cast<double>(tr.size());
        const VectorXd tte = t(te);
        const MatrixXd& xte = cv_test_xs[static_cast<std::size_t>(v)];
        lasso_path(prob, xty_v, lambdas, lambdas.size() - 1, opts, [&](std::size_t l, const VectorXd& b) {
          cv_err[l] += ((xte * b).array() + mtr - tte.array()).square().sum();
        });
      }
      const auto best = static_cast<std::size_t>(std::min_element(cv_err.begin(), cv_err.end()) - cv_err.begin());
      s.penalty = lambdas[best];
      lasso_path(full, xty, lambdas, best, opts, [&](std::size_t l, const VectorXd& b) {
        if (l == best) beta_s = b;
      });
    }
    s.nonzero = static_cast<int>((beta_s.array() != 0.0).count());
    double b0 = 0;
    VectorXd b;
    full.st.to_original(beta_s, tmean, p, b0, b);
    out.push_back(make_linear_model(b0, std::move(b), std::move(s)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Additive penalized B-splines

constexpr int kDegree = 3;

struct SplineBlock {
  enum class Mode { dropped, linear, spline };
  Mode mode = Mode::dropped;
  Index column = 0;
  double center = 0.0;
  std::vector<double> knots;  // full vector, boundary multiplicity 4
  MatrixXd constraint;        // nb x (nb-1), null space of the column-mean vector

  Index width() const {
    switch (mode) {
      case Mode::dropped: return 0;
      case Mode::linear: return 1;
      case Mode::spline: return constraint.cols();
    }
    return 0;
  }

  MatrixXd raw_basis(const VectorXd& xcol) const {
    const Index nb = static_cast<Index>(knots.size()) - (kDegree + 1);
    MatrixXd b(xcol.size(), nb);
    const double lo = knots.front();
    const double hi = knots.back();
    for (Index i = 0; i < xcol.size(); ++i) {
      const double v = xcol(i);
      if (v < lo) {
        b.row(i) = (bspline_basis(knots, lo) + (v - lo) * bspline_basis(knots, lo, true)).transpose();
      } else if (v > hi) {
        b.row(i) = (bspline_basis(knots, hi) + (v - hi) * bspline_basis(knots, hi, true)).transpose();
      } else {
        b.row(i) = bspline_basis(knots, v).transpose();
      }
    }
    return b;
  }

  MatrixXd design(const MatrixXd& x) const {
    switch (mode) {
      case Mode::dropped: return MatrixXd(x.rows(), 0);
      case Mode::linear: return (x.col(column).array() - center).matrix();
      case Mode::spline: return raw_basis(x.col(column)) * constraint;
    }
    return {};
  }
};

struct SplineImpl final : detail::ModelImpl {
  std::vector<SplineBlock> blocks;
  double intercept = 0.0;
  VectorXd coef;  // stacked block coefficients

  VectorXd predict(const MatrixXd& x) const override {
    VectorXd out = VectorXd::Constant(x.rows(), intercept);
    Index off = 0;
    for (const auto& blk : blocks) {
      const Index w = blk.width();
      if (w == 0) continue;
      out += blk.design(x) * coef.segment(off, w);
      off += w;
    }
    return out;
  }
};

// Householder reflection H with H a = -sign(a0)||a|| e1; columns 2..k of H span a's orthogonal complement.
MatrixXd orthogonal_complement(const VectorXd& a) {
  const Index k = a.size();
  VectorXd v = a;
  const double norm = a.norm();
  v(0) += (a(0) >= 0 ? norm : -norm);
  const double vv = v.squaredNorm();
  MatrixXd h = MatrixXd::Identity(k, k);
  if (vv > 0) h -= 2.0 * v * v.transpose() / vv;
  return h.rightCols(k - 1);
}

// Second divided differences of coefficients with respect to Greville abscissae;
// the null space is exactly the affine functions of x.
MatrixXd roughness_penalty(const std::vector<double>& knots) {
  const Index nb = static_cast<Index>(knots.size()) - (kDegree + 1);
  std::vector<double> grev(static_cast<std::size_t>(nb));
  for (Index j = 0; j < nb; ++j) {
    const auto u = static_cast<std::size_t>(j);
    grev[u] = (knots[u + 1] + knots[u + 2] + knots[u + 3]) / 3.0;
  }
  MatrixXd d = MatrixXd::Zero(std::max<Index>(nb - 2, 0), nb);
  for (Index j = 0; j + 2 < nb; ++j) {
    const auto u = static_cast<std::size_t>(j);
    const double h0 = grev[u + 1] - grev[u];
    const double h1 = grev[u + 2] - grev[u + 1];
    const double span = grev[u + 2] - grev[u];
    d(j, j) = 2.0 / (h0 * span);
    d(j, j + 1) = -2.0 / span * (1.0 / h0 + 1.0 / h1);
    d(j, j + 2) = 2.0 / (h1 * span);
  }
  return d.transpose() * d;
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

SplineBlock make_block(const MatrixXd& x, Index col, int knots_requested, std::vector<std::string>& warnings) {
  SplineBlock blk;
  blk.column = col;
  std::vector<double> v(x.col(col).data(), x.col(col).data() + x.rows());
  std::sort(v.begin(), v.end());
  const auto distinct = static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
  std::vector<double> sorted(x.col(col).data(), x.col(col).data() + x.rows());
  std::sort(sorted.begin(), sorted.end());

  if (distinct < 2) {
    blk.mode = SplineBlock::Mode::dropped;
    return blk;
  }
  if (distinct < 4) {
    blk.mode = SplineBlock::Mode::linear;
    blk.center = x.col(col).mean();
    warnings.push_back("covariate " + std::to_string(col + 1) + " has " + std::to_string(distinct) +
                       " distinct values: entered linearly");
    return blk;
  }
  int knots = knots_requested;
  if (distinct < knots) {
    knots = distinct - 1;
    warnings.push_back("covariate " + std::to_string(col + 1) + ": knot count reduced to " + std::to_string(knots));
  }
  const double lo = sorted.front();
  const double hi = sorted.back();
  std::vector<double> interior;
  for (int j = 1; j <= knots; ++j) {
    const double q = quantile_sorted(sorted, static_cast<double>(j) / (knots + 1));
    if (q > lo && q < hi && (interior.empty() || q > interior.back())) interior.push_back(q);
  }
  blk.knots.assign(kDegree + 1, lo);
  blk.knots.insert(blk.knots.end(), interior.begin(), interior.end());
  blk.knots.insert(blk.knots.end(), kDegree + 1, hi);
  blk.mode = SplineBlock::Mode::spline;

  const MatrixXd raw = blk.raw_basis(x.col(col));
  blk.constraint = orthogonal_complement(raw.colwise().mean().transpose());
  return blk;
}

std::vector<PredictiveModel> fit_spline_multi(const MatrixXd& x, const MatrixXd& targets, const SplineOptions& opts) {
  const Index n = x.rows();
  std::vector<PredictiveModel> out;
  std::vector<std::string> warnings;

  auto impl_base = std::make_shared<SplineImpl>();
  std::vector<MatrixXd> designs;
  std::vector<MatrixXd> penalties;
  Index k = 1;  // intercept
  for (Index j = 0; j < x.cols(); ++j) {
    SplineBlock blk = make_block(x, j, opts.knots, warnings);
    if (blk.mode == SplineBlock::Mode::dropped) continue;
    MatrixXd des = blk.design(x);
    MatrixXd pen = MatrixXd::Zero(des.cols(), des.cols());
    if (blk.mode == SplineBlock::Mode::spline) {
      pen = blk.constraint.transpose() * roughness_penalty(blk.knots) * blk.constraint;
      const double tr_pen = pen.trace();
      if (tr_pen > 0) pen *= des.squaredNorm() / tr_pen;
    }
    k += des.cols();
    designs.push_back(std::move(des));
    penalties.push_back(std::move(pen));
    impl_base->blocks.push_back(std::move(blk));
  }

  if (k == 1) {
    for (Index c = 0; c < targets.cols(); ++c) {
      auto impl = std::make_shared<SplineImpl>();
      impl->intercept = targets.col(c).mean();
      ModelSummary s;
      s.kind = "spline";
      s.warnings = warnings;
      out.emplace_back(impl, s);
    }
    return out;
  }

  MatrixXd b(n, k);
  MatrixXd s = MatrixXd::Zero(k, k);
  b.col(0).setOnes();
  Index off = 1;
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const Index w = designs[i].cols();
    b.middleCols(off, w) = designs[i];
    s.block(off, off, w, w) = penalties[i];
    off += w;
  }

  MatrixXd a = b.transpose() * b;
  Eigen::LLT<MatrixXd> llt(a);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const VectorXd diag = MatrixXd(llt.matrixL()).diagonal();
    ok = diag.minCoeff() > 1e-7 * diag.maxCoeff();
  }
  if (!ok) {
    MatrixXd aj = a;
    aj.diagonal().array() += 1e-9 * a.trace() / static_cast<double>(k);
    llt.compute(aj);
    if (llt.info() != Eigen::Success) throw NumericalError("spline design is singular; GCV grid degenerate");
    warnings.push_back("near-singular spline design: jitter added");
  }
  const auto lower = llt.matrixL();
  MatrixXd ls = lower.solve(s);                            // L^-1 S
  MatrixXd m = lower.solve(MatrixXd(ls.transpose()));      // L^-1 S L^-T
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  const VectorXd lam_eig = eig.eigenvalues().cwiseMax(0.0);
  const MatrixXd& u = eig.eigenvectors();
  const MatrixXd la = lower.solve(a);
  const MatrixXd w_mat = u.transpose() * lower.solve(MatrixXd(la.transpose())) * u;
  const VectorXd w_diag = w_mat.diagonal();
  const MatrixXd proj = u.transpose() * lower.solve(b.transpose());  // U' L^-1 B'

  const auto grid = geometric_grid(opts.grid_hi, opts.grid_lo, opts.n_grid);
  for (Index c = 0; c < targets.cols(); ++c) {
    const VectorXd t = targets.col(c);
    const VectorXd w = proj * t;
    const double tt = t.squaredNorm();
    double best_gcv = std::numeric_limits<double>::infinity();
    double best_lam = std::numeric_limits<double>::quiet_NaN();
    for (double lam : grid) {
      const VectorXd dvec = (1.0 / (1.0 + lam * lam_eig.array())).matrix();
      const VectorXd v = dvec.cwiseProduct(w);
      const double trace_h = w_diag.dot(dvec);
      const double rss = std::max(0.0, tt - 2.0 * v.dot(w) + v.dot(w_mat * v));
      const double denom = static_cast<double>(n) - trace_h;
      if (!(denom > 0)) continue;
      const double gcv = static_cast<double>(n) * rss / (denom * denom);
      if (gcv < best_gcv) {
        best_gcv = gcv;
        best_lam = lam;
      }
    }
    if (std::isnan(best_lam)) throw NumericalError("spline GCV grid degenerate: no admissible smoothing value");
    const VectorXd dvec = (1.0 / (1.0 + best_lam * lam_eig.array())).matrix();
    const VectorXd coef = lower.transpose().solve(u * dvec.cwiseProduct(w));
    if (!coef.allFinite()) throw NumericalError("spline fit produced non-finite coefficients");

    auto impl = std::make_shared<SplineImpl>();
    impl->blocks = impl_base->blocks;
    impl->intercept = coef(0);
    impl->coef = coef.tail(k - 1);
    ModelSummary sm;
    sm.kind = "spline";
    sm.penalty = best_lam;
    sm.basis_size = static_cast<int>(k - 1);
    sm.warnings = warnings;
    out.emplace_back(std::move(impl), std::move(sm));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void LearnerSpec::validate() const {
  switch (kind) {
    case LearnerKind::linear: break;
    case LearnerKind::ridge:
      if (ridge.penalties.empty()) throw ConfigError("ridge: penalty grid must be non-empty");
      for (double p : ridge.penalties) {
        if (!(p >= 0)) throw ConfigError("ridge penalties must be non-negative");
      }
      break;
    case LearnerKind::lasso:
      if (lasso.cv_folds < 2) throw ConfigError("lasso: CV folds must be >= 2");
      if (lasso.n_lambda < 1) throw ConfigError("lasso: lambda grid must be non-empty");
      if (!(lasso.lambda_min_ratio > 0 && lasso.lambda_min_ratio < 1)) throw ConfigError("lasso: lambda_min_ratio in (0,1)");
      if (lasso.max_sweeps < 1 || !(lasso.tolerance > 0)) throw ConfigError("lasso: invalid convergence settings");
      if (lasso.fixed_lambda && !(*lasso.fixed_lambda >= 0)) throw ConfigError("lasso: fixed lambda must be >= 0");
      break;
    case LearnerKind::spline_additive:
      if (spline.knots < 1) throw ConfigError("spline: knots must be >= 1");
      if (spline.n_grid < 1) throw ConfigError("spline: smoothing grid must be non-empty");
      if (!(spline.grid_lo > 0 && spline.grid_hi >= spline.grid_lo)) throw ConfigError("spline: invalid grid bounds");
      break;
    case LearnerKind::oracle:
      if (!truth || !truth->ell || !truth->r || !truth->alpha) throw ConfigError("oracle learner requires true nuisance functions");
      break;
  }
}

LearnerSpec LearnerSpec::of(LearnerKind kind) {
  LearnerSpec s;
  s.kind = kind;
  if (kind == LearnerKind::ridge) s.ridge = default_ridge();
  return s;
}

LearnerSpec LearnerSpec::oracle(std::shared_ptr<const TrueNuisance> truth) {
  LearnerSpec s;
  s.kind = LearnerKind::oracle;
  s.truth = std::move(truth);
  return s;
}

LassoSolution lasso_coordinate_descent(const MatrixXd& gram, const VectorXd& xty, double lambda, const VectorXd& start,
                                       const LassoOptions& opts) {
  const Index q = gram.rows();
  LassoSolution sol;
  sol.beta = start.size() == q ? start : VectorXd::Zero(q);
  VectorXd grad = xty - gram * sol.beta;  // X_j'(residual)/n
  std::vector<Index> active;
  active.reserve(static_cast<std::size_t>(q));

  auto update = [&](Index j) {
    const double old = sol.beta(j);
    const double gjj = gram(j, j);
    const double next = soft_threshold(grad(j) + gjj * old, lambda) / gjj;
    if (next == old) return 0.0;
    const double delta = next - old;
    grad.noalias() -= gram.col(j) * delta;
    sol.beta(j) = next;
    return std::abs(delta);
  };

  while (true) {
    double change = 0.0;
    for (Index j = 0; j < q; ++j) change = std::max(change, update(j));
    if (++sol.sweeps > opts.max_sweeps) break;
    if (change < opts.tolerance) return sol;

    active.clear();
    for (Index j = 0; j < q; ++j) {
      if (sol.beta(j) != 0.0) active.push_back(j);
    }
    while (true) {
      double inner = 0.0;
      for (Index j : active) inner = std::max(inner, update(j));
      if (++sol.sweeps > opts.max_sweeps) break;
      if (inner < opts.tolerance) break;
    }
    if (sol.sweeps > opts.max_sweeps) break;
  }
  throw ConvergenceError("lasso coordinate descent did not converge in " + std::to_string(opts.max_sweeps) +
                             " sweeps at lambda=" + std::to_string(lambda),
                         lambda);
}

Eigen::VectorXd bspline_basis(const std::vector<double>& knots, double x, bool derivative) {
  const int nk = static_cast<int>(knots.size());
  const int nb = nk - (kDegree + 1);
  VectorXd out = VectorXd::Zero(nb);
  if (nb <= 0) return out;

  // Locate span: knots[span] <= x < knots[span+1], clamped to the last non-empty span.
  int span = kDegree;
  const double hi = knots[static_cast<std::size_t>(nb)];
  if (x >= hi) {
    span = nb - 1;
  } else {
    span = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin()) - 1;
    span = std::clamp(span, kDegree, nb - 1);
  }

  // Triangular Cox-de Boor table, values of degree-d basis at this span.
  auto basis_at = [&](int degree) {
    std::vector<double> n_vals(static_cast<std::size_t>(degree + 1), 0.0);
    std::vector<double> left(static_cast<std::size_t>(degree + 1)), right(static_cast<std::size_t>(degree + 1));
    n_vals[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[static_cast<std::size_t>(j)] = x - knots[static_cast<std::size_t>(span + 1 - j)];
      right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(span + j)] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
        const double temp = denom != 0.0 ? n_vals[static_cast<std::size_t>(r)] / denom : 0.0;
        n_vals[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
        saved = left[static_cast<std::size_t>(j - r)] * temp;
      }
      n_vals[static_cast<std::size_t>(j)] = saved;
    }
    return n_vals;  // N_{span-degree .. span}
  };

  if (!derivative) {
    const auto vals = basis_at(kDegree);
    for (int r = 0; r <= kDegree; ++r) out(span - kDegree + r) = vals[static_cast<std::size_t>(r)];
    return out;
  }

  // d/dx N_{i,3} = 3 [N_{i,2}/(t_{i+3}-t_i) - N_{i+1,2}/(t_{i+4}-t_{i+1})]
  const auto lower = basis_at(kDegree - 1);  // N_{span-2 .. span}, degree 2
  auto n2 = [&](int i) {
    const int r = i - (span - (kDegree - 1));
    return (r >= 0 && r < kDegree) ? lower[static_cast<std::size_t>(r)] : 0.0;
  };
  for (int i = span - kDegree; i <= span; ++i) {
    const double d0 = knots[static_cast<std::size_t>(i + kDegree)] - knots[static_cast<std::size_t>(i)];
    const double d1 = knots[static_cast<std::size_t>(i + kDegree + 1)] - knots[static_cast<std::size_t>(i + 1)];
    double val = 0.0;
    if (d0 > 0) val += n2(i) / d0;
    if (d1 > 0) val -= n2(i + 1) / d1;
    out(i) = kDegree * val;
  }
  return out;
}

PredictiveModel fit_linear(const MatrixXd& x, const VectorXd& t) { return fit_linear_multi(x, t).front(); }

PredictiveModel fit_ridge(const MatrixXd& x, const VectorXd& t, const RidgeOptions& opts) {
  return fit_ridge_multi(x, t, opts).front();
}

PredictiveModel fit_lasso(const MatrixXd& x, const VectorXd& t, const LassoOptions& opts, std::uint64_t seed) {
  if (x.cols() < 1) throw ConfigError("fit_lasso needs at least one covariate");
  return fit_lasso_multi(x, t, opts, seed).front();
}

PredictiveModel fit_spline_additive(const MatrixXd& x, const VectorXd& t, const SplineOptions& opts) {
  if (x.cols() < 1) throw ConfigError("fit_spline_additive needs at least one covariate");
  return fit_spline_multi(x, t, opts).front();
}

std::vector<PredictiveModel> fit_targets(const LearnerSpec& spec, const MatrixXd& x, const MatrixXd& targets,
                                         std::uint64_t seed) {
  spec.validate();
  if (x.rows() != targets.rows()) throw ConfigError("fit_targets: design and targets disagree on rows");
  if (x.rows() < 2) throw DataError("fit_targets: need at least 2 training rows");
  switch (spec.kind) {
    case LearnerKind::linear: return fit_linear_multi(x, targets);
    case LearnerKind::ridge: return fit_ridge_multi(x, targets, spec.ridge);
    case LearnerKind::lasso: return fit_lasso_multi(x, targets, spec.lasso, seed);
    case LearnerKind::spline_additive: {
      if (x.cols() == 0) return fit_linear_multi(x, targets);
      auto models = fit_spline_multi(x, targets, spec.spline);
      return models;
    }
    case LearnerKind::oracle: throw ConfigError("oracle learner has no trainable models");
  }
  throw ConfigError("unhandled learner kind");
}

}  // namespace dcue

#include "dcue/estimators.hpp"

#include "dcue/error.hpp"
#include "dcue/inference.hpp"
#include "dcue/scalar_min.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcue {

using Eigen::Index;
using Eigen::VectorXd;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMultiMinGap = 1e-3;
}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::cue: return "cue";
    case Method::tsls: return "tsls";
    case Method::gmm_identity: return "gmm";
    case Method::gmm_two_step: return "gmm2";
    case Method::oracle_cue: return "oracle_cue";
    case Method::oracle_gmm: return "oracle_gmm";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "cue") return Method::cue;
  if (name == "tsls") return Method::tsls;
  if (name == "gmm" || name == "gmm_identity") return Method::gmm_identity;
  if (name == "gmm2" || name == "gmm_two_step") return Method::gmm_two_step;
  if (name == "oracle_cue") return Method::oracle_cue;
  if (name == "oracle_gmm") return Method::oracle_gmm;
  throw ConfigError("unknown method '" + name + "' (expected cue|tsls|gmm|gmm2|oracle_cue|oracle_gmm)");
}

std::vector<Method> methods_from_string(const std::string& list) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    std::string name = list.substr(start, comma - start);
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    if (!name.empty()) {
      const Method m = method_from_string(name);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty method list");
  return out;
}

void SearchInterval::validate() const {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("search interval needs finite lo < hi");
  if (grid_points < 3) throw ConfigError("search interval needs at least 3 grid points");
  if (!(refine_tol > 0)) throw ConfigError("search interval refine_tol must be positive");
}

EstimateReport estimate_cue(const MomentSystem& ms, const SearchInterval& interval) {
  interval.validate();
  const int count = interval.grid_points;
  const double width = interval.hi - interval.lo;

  auto objective = [&](double b) {
    try {
      return ms.q_hat(b);
    } catch (const SingularWeightingError&) {
      return kInf;
    }
  };
  auto gradient = [&](double b) {
    try {
      return ms.dq_dbeta(b);
    } catch (const SingularWeightingError&) {
      return kNaN;
    }
  };

  EstimateReport rep;
  rep.method = Method::cue;
  rep.interval = interval;

  std::vector<double> grid(static_cast<std::size_t>(count));
  std::vector<double> values(static_cast<std::size_t>(count), kInf);
  for (int i = 0; i < count; ++i) {
    const double b = (i == count - 1) ? interval.hi : interval.lo + width * i / (count - 1);
    grid[static_cast<std::size_t>(i)] = b;
    values[static_cast<std::size_t>(i)] = objective(b);
    if (!std::isfinite(values[static_cast<std::size_t>(i)])) ++rep.skipped_grid_points;
  }
  if (rep.skipped_grid_points == count) throw NumericalError("CUE: weighting matrix singular at every grid point");

  const auto best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  const double a = grid[static_cast<std::size_t>(std::max(best - 1, 0))];
  const double b = grid[static_cast<std::size_t>(std::min(best + 1, count - 1))];

  double beta = grid[static_cast<std::size_t>(best)];
  double fbeta = values[static_cast<std::size_t>(best)];
  const ScalarMinimum refined = brent_minimize(objective, a, b, interval.refine_tol);
  if (refined.fx <= fbeta) {
    beta = refined.x;
    fbeta = refined.fx;
  }

  // Polish with the stationarity condition when the cell brackets a sign change.
  const double ga = gradient(a);
  const double gb = gradient(b);
  if (std::isfinite(ga) && std::isfinite(gb) && ga < 0 && gb > 0) {
    const double root = brent_root(gradient, a, b, 1e-14);
    const double froot = objective(root);
    if (froot <= fbeta + 1e-15 * std::max(1.0, std::abs(fbeta))) {
      beta = root;
      fbeta = froot;
    }
  }
  if (!std::isfinite(fbeta)) throw NumericalError("CUE: no finite minimum found");

  rep.beta_hat = beta;
  rep.objective_at_min = fbeta;
  rep.stationarity = std::abs(gradient(beta));
  const double edge = 10.0 * interval.refine_tol;
  rep.boundary_flag = std::abs(beta - interval.lo) <= edge || std::abs(beta - interval.hi) <= edge;

  // Competing grid-local minima.
  for (int i = 0; i < count; ++i) {
    const double v = values[static_cast<std::size_t>(i)];
    if (!std::isfinite(v) || v > fbeta + kMultiMinGap) continue;
    const bool left_ok = i == 0 || !(values[static_cast<std::size_t>(i - 1)] < v);
    const bool right_ok = i == count - 1 || !(values[static_cast<std::size_t>(i + 1)] < v);
    if (!left_ok || !right_ok) continue;
    // a local minimum whose basin is not the refined one
    if (std::abs(grid[static_cast<std::size_t>(i)] - beta) > std::max(10.0 * interval.refine_tol, 1.5 * width / (count - 1))) {
      rep.multi_min_flag = true;
      break;
    }
  }
  return rep;
}

EstimateReport estimate_tsls(const ResidualData& rd) {
  const auto fit = tsls_projection(rd);
  EstimateReport rep;
  rep.method = Method::tsls;
  rep.beta_hat = fit.dpy / fit.dpd;
  rep.objective_at_min = kNaN;
  rep.stationarity = kNaN;
  return rep;
}

EstimateReport estimate_gmm_identity(const MomentSystem& ms, bool two_step) {
  const VectorXd& szd = ms.szd();
  const VectorXd& szy = ms.szy();
  const double denom = szd.squaredNorm();
  if (!(denom > 0)) throw NumericalError("identity GMM: instruments orthogonal to the treatment (Szd = 0)");
  EstimateReport rep;
  rep.method = two_step ? Method::gmm_two_step : Method::gmm_identity;
  rep.beta_hat = szd.dot(szy) / denom;
  rep.stationarity = kNaN;
  if (two_step) {
    const WeightingState w = ms.omega_hat(rep.beta_hat);
    const VectorXd wd = w.solve(szd);
    const double d2 = wd.dot(szd);
    if (!(d2 > 0)) throw NumericalError("two-step GMM: degenerate weighted first stage");
    rep.beta_hat = wd.dot(szy) / d2;
    const VectorXd g = ms.g_bar(rep.beta_hat);
    rep.objective_at_min = 0.5 * g.dot(w.solve(g));
  } else {
    rep.objective_at_min = 0.5 * ms.g_bar(rep.beta_hat).squaredNorm();
  }
  return rep;
}

SearchInterval default_search_interval(const ResidualData& rd) {
  SearchInterval out;
  try {
    const auto fit = tsls_projection(rd);
    const double beta = fit.dpy / fit.dpd;
    const double se = tsls_naive_se(rd, beta);
    const double lo = std::max(-50.0, beta - 10.0 * se);
    const double hi = std::min(50.0, beta + 10.0 * se);
    if (std::isfinite(lo) && std::isfinite(hi) && lo < hi) {
      out.lo = lo;
      out.hi = hi;
    }
  } catch (const NumericalError&) {
    // keep the hard cap
  }
  return out;
}

EstimateReport estimate_oracle(const Dataset& ds, const TrueNuisance& truth, OracleMethod method, bool two_step) {
  const ResidualData rd = residualize_oracle(ds, truth);
  const MomentSystem ms(rd);
  if (method == OracleMethod::cue) {
    EstimateReport rep = estimate_cue(ms, default_search_interval(rd));
    rep.method = Method::oracle_cue;
    return rep;
  }
  EstimateReport rep = estimate_gmm_identity(ms, two_step);
  rep.method = Method::oracle_gmm;
  return rep;
}

}  // namespace dcue

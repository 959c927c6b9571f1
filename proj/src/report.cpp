#include "dcue/report.hpp"

#include "dcue/error.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace dcue {

using json = nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

}  // namespace

json to_json(const ModelSummary& s) {
  json j = {{"kind", s.kind}, {"penalty", num(s.penalty)}, {"basis_size", s.basis_size}};
  if (s.kind == "lasso") j["nonzero"] = s.nonzero;
  if (s.ridge_fallback) j["ridge_fallback"] = true;
  if (!s.warnings.empty()) j["warnings"] = s.warnings;
  return j;
}

json to_json(const FittedModelInfo& info) {
  json j = to_json(info.summary);
  j["fold"] = info.fold;
  j["target"] = info.target;
  return j;
}

json to_json(const SearchInterval& b) {
  return {{"lo", b.lo}, {"hi", b.hi}, {"grid_points", b.grid_points}, {"refine_tol", b.refine_tol}};
}

json to_json(const EstimateReport& r) {
  json j = {{"method", to_string(r.method)}, {"beta_hat", num(r.beta_hat)}, {"objective_at_min", num(r.objective_at_min)}};
  if (r.method == Method::cue || r.method == Method::oracle_cue) {
    j["stationarity"] = num(r.stationarity);
    j["boundary_flag"] = r.boundary_flag;
    j["multi_min_flag"] = r.multi_min_flag;
    j["skipped_grid_points"] = r.skipped_grid_points;
    j["interval"] = to_json(r.interval);
  }
  return j;
}

json to_json(const InferenceReport& r) {
  json j = {{"se", num(r.se)},
            {"v_hat", num(r.v_hat)},
            {"d_hat", std::vector<double>(r.d_hat.data(), r.d_hat.data() + r.d_hat.size())},
            {"curvature", num(r.curvature)},
            {"beta_star", r.beta_star},
            {"wald", num(r.wald)},
            {"wald_p", num(r.wald_p)},
            {"k_stat", num(r.k_stat)},
            {"k_p", num(r.k_p)},
            {"f_stat", num(r.f.value)},
            {"f_infinite", r.f.infinite}};
  if (r.j.just_identified) {
    j["just_identified"] = true;
  } else {
    j["j_stat"] = num(r.j.stat);
    j["j_df"] = r.j.df;
    j["j_p"] = num(r.j.p_value);
  }
  return j;
}

json to_json(const MethodResult& r) {
  json j = to_json(r.estimate);
  j["se"] = num(r.se);
  if (std::isfinite(r.se)) {
    j["ci95"] = {r.estimate.beta_hat - 1.96 * r.se, r.estimate.beta_hat + 1.96 * r.se};
  }
  if (r.inference) j["inference"] = to_json(*r.inference);
  if (!r.inference_error.empty()) j["inference_error"] = r.inference_error;
  return j;
}

json to_json(const EstimateRun& run) {
  json methods = json::array();
  for (const auto& r : run.methods) methods.push_back(to_json(r));
  json models = json::array();
  for (const auto& m : run.models) models.push_back(to_json(m));
  return {{"n", run.n},
          {"m", run.m},
          {"p", run.p},
          {"first_stage_f", num(run.first_stage.value)},
          {"first_stage_f_infinite", run.first_stage.infinite},
          {"methods", methods},
          {"nuisance_models", models}};
}

json to_json(const LearnerSpec& spec) {
  json j = {{"kind", to_string(spec.kind)}};
  switch (spec.kind) {
    case LearnerKind::ridge:
      if (!spec.ridge.penalties.empty()) j["penalties"] = spec.ridge.penalties;
      break;
    case LearnerKind::lasso:
      j["cv_folds"] = spec.lasso.cv_folds;
      j["n_lambda"] = spec.lasso.n_lambda;
      j["lambda_min_ratio"] = spec.lasso.lambda_min_ratio;
      j["max_sweeps"] = spec.lasso.max_sweeps;
      j["tolerance"] = spec.lasso.tolerance;
      if (spec.lasso.fixed_lambda) j["lambda"] = *spec.lasso.fixed_lambda;
      break;
    case LearnerKind::spline_additive:
      j["knots"] = spec.spline.knots;
      j["n_grid"] = spec.spline.n_grid;
      j["grid_lo"] = spec.spline.grid_lo;
      j["grid_hi"] = spec.spline.grid_hi;
      break;
    default: break;
  }
  return j;
}

json to_json(const ScenarioConfig& cfg) {
  std::string methods;
  for (Method m : cfg.estimators) methods += (methods.empty() ? "" : ",") + to_string(m);
  return {{"scenario", to_string(cfg.scenario)},
          {"n", cfg.n},
          {"m", cfg.m},
          {"cp", cfg.cp},
          {"rho", cfg.rho},
          {"beta0", cfg.beta0},
          {"folds", cfg.folds},
          {"reps", cfg.reps},
          {"seed", cfg.base_seed},
          {"methods", methods},
          {"learner", to_json(cfg.learner)},
          {"instrument_noise_corr", cfg.instrument_noise_corr},
          {"gamma_scale", cfg.gamma_scale}};
}

LearnerSpec learner_from_json(const json& j, LearnerSpec base) {
  const std::string where = "learner";
  if (j.is_string()) {
    const LearnerKind kind = learner_kind_from_string(j.get<std::string>());
    return kind == base.kind ? base : LearnerSpec::of(kind);
  }
  check_keys(j, {"kind", "penalties", "cv_folds", "n_lambda", "lambda_min_ratio", "max_sweeps", "tolerance", "lambda",
                 "knots", "n_grid", "grid_lo", "grid_hi"},
             where);
  LearnerSpec spec = base;
  if (j.contains("kind")) {
    const LearnerKind kind = learner_kind_from_string(get<std::string>(j, "kind", where));
    if (kind != base.kind) spec = LearnerSpec::of(kind);
  }
  if (j.contains("penalties")) spec.ridge.penalties = get<std::vector<double>>(j, "penalties", where);
  if (j.contains("cv_folds")) spec.lasso.cv_folds = get<int>(j, "cv_folds", where);
  if (j.contains("n_lambda")) spec.lasso.n_lambda = get<int>(j, "n_lambda", where);
  if (j.contains("lambda_min_ratio")) spec.lasso.lambda_min_ratio = get<double>(j, "lambda_min_ratio", where);
  if (j.contains("max_sweeps")) spec.lasso.max_sweeps = get<int>(j, "max_sweeps", where);
  if (j.contains("tolerance")) spec.lasso.tolerance = get<double>(j, "tolerance", where);
  if (j.contains("lambda")) spec.lasso.fixed_lambda = get<double>(j, "lambda", where);
  if (j.contains("knots")) spec.spline.knots = get<int>(j, "knots", where);
  if (j.contains("n_grid")) spec.spline.n_grid = get<int>(j, "n_grid", where);
  if (j.contains("grid_lo")) spec.spline.grid_lo = get<double>(j, "grid_lo", where);
  if (j.contains("grid_hi")) spec.spline.grid_hi = get<double>(j, "grid_hi", where);
  spec.validate();
  return spec;
}

ScenarioConfig scenario_from_json(const json& j, ScenarioConfig base) {
  const std::string where = "simulate";
  check_keys(j, {"scenario", "n", "m", "cp", "rho", "beta0", "folds", "reps", "seed", "methods", "learner",
                 "instrument_noise_corr", "gamma_scale", "workers"},
             where);
  ScenarioConfig cfg = base;
  if (j.contains("scenario")) {
    cfg.scenario = scenario_from_string(get<std::string>(j, "scenario", where));
    if (!j.contains("learner")) cfg.learner = default_learner(cfg.scenario);
  }
  if (j.contains("n")) cfg.n = get<int>(j, "n", where);
  if (j.contains("m")) cfg.m = get<int>(j, "m", where);
  if (j.contains("cp")) cfg.cp = get<double>(j, "cp", where);
  if (j.contains("rho")) cfg.rho = get<double>(j, "rho", where);
  if (j.contains("beta0")) cfg.beta0 = get<double>(j, "beta0", where);
  if (j.contains("folds")) cfg.folds = get<int>(j, "folds", where);
  if (j.contains("reps")) cfg.reps = get<int>(j, "reps", where);
  if (j.contains("seed")) cfg.base_seed = get<std::uint64_t>(j, "seed", where);
  if (j.contains("methods")) cfg.estimators = methods_from_string(get<std::string>(j, "methods", where));
  if (j.contains("learner")) cfg.learner = learner_from_json(j.at("learner"), cfg.learner);
  if (j.contains("instrument_noise_corr")) cfg.instrument_noise_corr = get<double>(j, "instrument_noise_corr", where);
  if (j.contains("gamma_scale")) cfg.gamma_scale = get<double>(j, "gamma_scale", where);
  if (j.contains("workers")) cfg.workers = get<int>(j, "workers", where);
  return cfg;
}

std::string render_estimate_summary(const EstimateRun& run) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "n = " << run.n << ", m = " << run.m << ", p = " << run.p << "\n\n";
  os << std::left << std::setw(14) << "method" << std::right << std::setw(11) << "estimate" << std::setw(11) << "se"
     << "  95% CI\n";
  for (const auto& r : run.methods) {
    os << std::left << std::setw(14) << method_label(r.estimate.method) << std::right << std::setw(11)
       << r.estimate.beta_hat;
    if (std::isfinite(r.se)) {
      os << std::setw(11) << r.se << "  [" << r.estimate.beta_hat - 1.96 * r.se << ", "
         << r.estimate.beta_hat + 1.96 * r.se << "]";
    } else {
      os << std::setw(11) << "n/a" << "  n/a";
    }
    if (r.estimate.boundary_flag) os << "  (at search boundary)";
    if (r.estimate.multi_min_flag) os << "  (multiple minima)";
    os << '\n';
    if (!r.inference_error.empty()) os << "  inference unavailable: " << r.inference_error << '\n';
  }
  os << '\n';
  if (run.first_stage.infinite) {
    os << "first-stage F: inf\n";
  } else {
    os << "first-stage F: " << std::setprecision(3) << run.first_stage.value << '\n';
  }
  for (const auto& r : run.methods) {
    if (!r.inference) continue;
    const auto& inf = *r.inference;
    if (inf.j.just_identified) {
      os << "J: not reported (just identified, m = 1)\n";
    } else {
      os << "J: " << std::setprecision(3) << inf.j.stat << " on " << inf.j.df << " df, p = " << std::setprecision(4)
         << inf.j.p_value << '\n';
    }
    os << "K (beta = " << std::setprecision(4) << inf.beta_star << "): " << std::setprecision(3) << inf.k_stat
       << ", p = " << std::setprecision(4) << inf.k_p << '\n';
  }
  return os.str();
}

}  // namespace dcue

#include "dcue/simulate.hpp"

#include "dcue/cross_fit.hpp"
#include "dcue/error.hpp"
#include "dcue/folds.hpp"
#include "dcue/inference.hpp"
#include "dcue/moments.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace dcue {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::json;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::s1_lowdim: return "s1_lowdim";
    case Scenario::s2_highdim: return "s2_highdim";
    case Scenario::local_to_zero: return "local_to_zero";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "s1_lowdim" || name == "s1" || name == "1") return Scenario::s1_lowdim;
  if (name == "s2_highdim" || name == "s2" || name == "2") return Scenario::s2_highdim;
  if (name == "local_to_zero" || name == "ltz") return Scenario::local_to_zero;
  throw ConfigError("unknown scenario '" + name + "' (expected s1_lowdim|s2_highdim|local_to_zero)");
}

void ScenarioConfig::validate() const {
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (n < 2 * folds) throw ConfigError("n must be at least 2 * folds");
  if (m < 1) throw ConfigError("m must be at least 1");
  if (!(cp > 0) || !std::isfinite(cp)) throw ConfigError("cp must be positive");
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (!(std::abs(rho) <= 1.0)) throw ConfigError("rho must lie in [-1, 1]");
  if (estimators.empty()) throw ConfigError("no estimators requested");
  if (!(instrument_noise_corr >= 0.0 && instrument_noise_corr < 1.0)) {
    throw ConfigError("instrument noise correlation must lie in [0, 1)");
  }
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (!std::isfinite(gamma_scale)) throw ConfigError("gamma_scale must be finite");
  if (learner.kind == LearnerKind::oracle) throw ConfigError("simulation learner cannot be the oracle");
  learner.validate();
}

LearnerSpec default_learner(Scenario s) {
  return LearnerSpec::of(s == Scenario::s2_highdim ? LearnerKind::lasso : LearnerKind::spline_additive);
}

namespace {

double s1_alpha(double x1, double x2, double x3) {
  return 1.0 + x1 - 0.5 * x2 + 0.1 * std::sin(x2) + 0.5 * x3 + std::exp(0.3 * x3);
}
double s1_f(double x1, double x2, double x3) {
  return 1.5 + 2.0 * x1 - 0.5 * x2 + 0.3 * x2 * x2 - 0.5 * x3 + 0.3 / (1.0 + std::exp(x3));
}
double s1_h(double x1, double x2, double x3) {
  return 2.0 + 1.5 * x1 + 0.5 * x2 + 0.2 * x2 * x2 + 0.5 * x3 + 0.2 * std::exp(-x3);
}

double first_five(const MatrixXd& x, Index i) {
  double s = 0.0;
  for (Index j = 0; j < std::min<Index>(5, x.cols()); ++j) s += x(i, j);
  return s;
}

// Shared draw of everything but the instrument means.
struct Draws {
  MatrixXd x;
  MatrixXd inst_noise;
  VectorXd nu;
  VectorXd eps;
};

Draws draw(int n, int m, int p, double noise_corr, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Draws d;
  d.x.resize(n, p);
  d.inst_noise.resize(n, m);
  d.nu.resize(n);
  d.eps.resize(n);
  const double a = std::sqrt(noise_corr);
  const double b = std::sqrt(1.0 - noise_corr);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = normal(rng);
    const double shared = noise_corr > 0.0 ? normal(rng) : 0.0;
    for (int j = 0; j < m; ++j) d.inst_noise(i, j) = a * shared + b * normal(rng);
    d.nu(i) = normal(rng);
    d.eps(i) = normal(rng);
  }
  return d;
}

// D = Z'pi + f + nu, Y = D beta0 + h + rho nu + sqrt(1 - rho^2) eps.
SimulatedData assemble(const ScenarioConfig& cfg, Draws&& dr, const MatrixXd& z, const VectorXd& f,
                       const VectorXd& h, const VectorXd& pi, std::shared_ptr<const TrueNuisance> truth) {
  SimulatedData out;
  out.data.x = std::move(dr.x);
  out.data.z = z;
  out.data.d = z * pi + f + dr.nu;
  out.data.y = cfg.beta0 * out.data.d + h + cfg.rho * dr.nu + std::sqrt(1.0 - cfg.rho * cfg.rho) * dr.eps;
  out.truth = std::move(truth);
  out.beta0 = cfg.beta0;
  return out;
}

}  // namespace

SimulatedData generate_s1(const ScenarioConfig& cfg, std::uint64_t seed) {
  const int n = cfg.n;
  const int m = cfg.m;
  Draws dr = draw(n, m, 3, cfg.instrument_noise_corr, seed);
  const double pij = std::sqrt(cfg.cp / (static_cast<double>(n) * m));
  const VectorXd pi = VectorXd::Constant(m, pij);
  VectorXd alpha(n), f(n), h(n);
  for (int i = 0; i < n; ++i) {
    const double x1 = dr.x(i, 0), x2 = dr.x(i, 1), x3 = dr.x(i, 2);
    alpha(i) = s1_alpha(x1, x2, x3);
    f(i) = s1_f(x1, x2, x3);
    h(i) = s1_h(x1, x2, x3);
  }
  const MatrixXd z = alpha.replicate(1, m) + dr.inst_noise;

  auto truth = std::make_shared<TrueNuisance>();
  const double pi_sum = pij * m;
  const double beta0 = cfg.beta0;
  truth->alpha = [m](const MatrixXd& x) {
    MatrixXd a(x.rows(), m);
    for (Index i = 0; i < x.rows(); ++i) a.row(i).setConstant(s1_alpha(x(i, 0), x(i, 1), x(i, 2)));
    return a;
  };
  truth->r = [pi_sum](const MatrixXd& x) {
    VectorXd r(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
      r(i) = pi_sum * s1_alpha(x(i, 0), x(i, 1), x(i, 2)) + s1_f(x(i, 0), x(i, 1), x(i, 2));
    }
    return r;
  };
  truth->ell = [pi_sum, beta0](const MatrixXd& x) {
    VectorXd l(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
      const double r = pi_sum * s1_alpha(x(i, 0), x(i, 1), x(i, 2)) + s1_f(x(i, 0), x(i, 1), x(i, 2));
      l(i) = r * beta0 + s1_h(x(i, 0), x(i, 1), x(i, 2));
    }
    return l;
  };
  return assemble(cfg, std::move(dr), z, f, h, pi, truth);
}

SimulatedData generate_s2(const ScenarioConfig& cfg, std::uint64_t seed) {
  constexpr int p = 100;
  const int n = cfg.n;
  const int m = cfg.m;
  Draws dr = draw(n, m, p, cfg.instrument_noise_corr, seed);
  const double pij = std::sqrt(cfg.cp / (static_cast<double>(n) * m));
  const VectorXd pi = VectorXd::Constant(m, pij);
  const double gs = cfg.gamma_scale;
  VectorXd lin(n);
  for (int i = 0; i < n; ++i) lin(i) = first_five(dr.x, i);
  const MatrixXd z = (gs * lin).replicate(1, m) + dr.inst_noise;

  auto truth = std::make_shared<TrueNuisance>();
  const double slope_r = pij * m * gs + 1.0;
  const double slope_l = slope_r * cfg.beta0 + 1.0;
  truth->alpha = [m, gs](const MatrixXd& x) {
    MatrixXd a(x.rows(), m);
    for (Index i = 0; i < x.rows(); ++i) a.row(i).setConstant(gs * first_five(x, i));
    return a;
  };
  truth->r = [slope_r](const MatrixXd& x) {
    VectorXd r(x.rows());
    for (Index i = 0; i < x.rows(); ++i) r(i) = slope_r * first_five(x, i);
    return r;
  };
  truth->ell = [slope_l](const MatrixXd& x) {
    VectorXd l(x.rows());
    for (Index i = 0; i < x.rows(); ++i) l(i) = slope_l * first_five(x, i);
    return l;
  };
  return assemble(cfg, std::move(dr), z, lin, lin, pi, truth);
}

SimulatedData generate_local_to_zero(const ScenarioConfig& cfg, std::uint64_t seed) {
  const int n = cfg.n;
  const int m = cfg.m;
  Draws dr = draw(n, m, 3, cfg.instrument_noise_corr, seed);
  const VectorXd pi = VectorXd::Constant(m, std::sqrt(cfg.cp / static_cast<double>(n)));
  VectorXd f(n), h(n);
  for (int i = 0; i < n; ++i) {
    f(i) = s1_f(dr.x(i, 0), dr.x(i, 1), dr.x(i, 2));
    h(i) = s1_h(dr.x(i, 0), dr.x(i, 1), dr.x(i, 2));
  }
  const MatrixXd z = dr.inst_noise;

  auto truth = std::make_shared<TrueNuisance>();
  const double beta0 = cfg.beta0;
  truth->alpha = [m](const MatrixXd& x) { return MatrixXd::Zero(x.rows(), m).eval(); };
  truth->r = [](const MatrixXd& x) {
    VectorXd r(x.rows());
    for (Index i = 0; i < x.rows(); ++i) r(i) = s1_f(x(i, 0), x(i, 1), x(i, 2));
    return r;
  };
  truth->ell = [beta0](const MatrixXd& x) {
    VectorXd l(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
      l(i) = s1_f(x(i, 0), x(i, 1), x(i, 2)) * beta0 + s1_h(x(i, 0), x(i, 1), x(i, 2));
    }
    return l;
  };
  return assemble(cfg, std::move(dr), z, f, h, pi, truth);
}

SimulatedData generate(const ScenarioConfig& cfg, std::uint64_t seed) {
  switch (cfg.scenario) {
    case Scenario::s1_lowdim: return generate_s1(cfg, seed);
    case Scenario::s2_highdim: return generate_s2(cfg, seed);
    case Scenario::local_to_zero: return generate_local_to_zero(cfg, seed);
  }
  throw ConfigError("unknown scenario");
}

double local_to_zero_concentration(const ScenarioConfig& cfg) {
  // G = E[Zbar Dbar] = pi, Omega = E[Zbar Zbar' u^2] = (rho^2 + 1 - rho^2) I = I at beta0.
  const VectorXd g = VectorXd::Constant(cfg.m, std::sqrt(cfg.cp / static_cast<double>(cfg.n)));
  const MatrixXd omega = MatrixXd::Identity(cfg.m, cfg.m);
  return static_cast<double>(cfg.n) * g.dot(omega.llt().solve(g));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool is_debiased(Method m) { return m == Method::cue || m == Method::gmm_identity || m == Method::gmm_two_step; }
bool is_oracle(Method m) { return m == Method::oracle_cue || m == Method::oracle_gmm; }

void run_cue(const ResidualData& rd, ReplicationRecord& rec) {
  const MomentSystem ms(rd);
  const EstimateReport est = estimate_cue(ms, default_search_interval(rd));
  rec.beta_hat = est.beta_hat;
  rec.boundary = est.boundary_flag;
  const JTest j = j_statistic(ms, est.beta_hat);
  rec.j_stat = j.stat;
  rec.j_p = j.p_value;
  rec.se = variance_hat(ms, est.beta_hat).se;
}

void run_gmm(const ResidualData& rd, bool two_step, ReplicationRecord& rec) {
  const MomentSystem ms(rd);
  const EstimateReport est = estimate_gmm_identity(ms, two_step);
  rec.beta_hat = est.beta_hat;
  rec.se = gmm_se(ms, est.beta_hat, two_step);
}

template <class F>
void guarded(ReplicationRecord& rec, F&& body) {
  try {
    body();
    rec.ok = std::isfinite(rec.beta_hat) && std::isfinite(rec.se) && rec.se > 0;
    if (!rec.ok) rec.error = "non-finite estimate or standard error";
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
}

std::uint64_t fold_seed_of(std::uint64_t seed) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<ReplicationRecord> run_replication(const ScenarioConfig& cfg, int rep, std::uint64_t seed) {
  const SimulatedData sim = generate(cfg, seed);
  std::vector<ReplicationRecord> out;
  out.reserve(cfg.estimators.size());

  // Cross-fitting is shared by all debiased estimators and charged to each.
  std::optional<ResidualData> cross;
  std::string cross_error;
  double cross_time = 0.0;
  if (std::any_of(cfg.estimators.begin(), cfg.estimators.end(), is_debiased)) {
    const auto t0 = Clock::now();
    try {
      const FoldPartition folds = make_folds(cfg.n, cfg.folds, fold_seed_of(seed));
      const NuisanceFit fit = cross_fit(sim.data, folds, cfg.learner, seed);
      cross = residualize(sim.data, fit, folds);
    } catch (const Error& e) {
      cross_error = e.what();
    }
    cross_time = seconds_since(t0);
  }
  std::optional<ResidualData> oracle;
  if (std::any_of(cfg.estimators.begin(), cfg.estimators.end(), is_oracle)) {
    oracle = residualize_oracle(sim.data, *sim.truth);
  }

  for (Method method : cfg.estimators) {
    ReplicationRecord rec;
    rec.rep = rep;
    rec.seed = seed;
    rec.method = method;
    const auto t0 = Clock::now();
    if (is_debiased(method) && !cross) {
      rec.error = "cross-fitting failed: " + cross_error;
      out.push_back(std::move(rec));
      continue;
    }
    switch (method) {
      case Method::cue: guarded(rec, [&] { run_cue(*cross, rec); }); break;
      case Method::gmm_identity: guarded(rec, [&] { run_gmm(*cross, false, rec); }); break;
      case Method::gmm_two_step: guarded(rec, [&] { run_gmm(*cross, true, rec); }); break;
      case Method::oracle_cue: guarded(rec, [&] { run_cue(*oracle, rec); }); break;
      case Method::oracle_gmm: guarded(rec, [&] { run_gmm(*oracle, false, rec); }); break;
      case Method::tsls:
        guarded(rec, [&] {
          const ResidualData rd = partial_out_linear(sim.data);
          rec.beta_hat = estimate_tsls(rd).beta_hat;
          rec.se = tsls_naive_se(rd, rec.beta_hat);
        });
        break;
    }
    rec.runtime = seconds_since(t0) + (is_debiased(method) ? cross_time : 0.0);
    out.push_back(std::move(rec));
  }
  return out;
}

EstimatorMetrics aggregate(Method method, const std::vector<ReplicationRecord>& records, double beta0) {
  EstimatorMetrics out;
  out.method = method;
  std::vector<double> beta;
  double evar = 0.0;
  double covered = 0.0;
  double runtime = 0.0;
  for (const auto& r : records) {
    if (r.method != method) continue;
    if (!r.ok) {
      ++out.failure_count;
      continue;
    }
    beta.push_back(r.beta_hat);
    evar += r.se * r.se;
    covered += std::abs(r.beta_hat - beta0) <= 1.96 * r.se ? 1.0 : 0.0;
    runtime += r.runtime;
  }
  const auto k = beta.size();
  if (k == 0) throw NumericalError("every replication failed for estimator " + to_string(method));
  out.successes = static_cast<int>(k);
  double mean = 0.0;
  for (double b : beta) mean += b;
  mean /= static_cast<double>(k);
  double ss = 0.0;
  for (double b : beta) ss += (b - mean) * (b - mean);
  std::vector<double> sorted = beta;
  std::sort(sorted.begin(), sorted.end());
  const double median = k % 2 == 1 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  out.abs_mean_bias = std::abs(mean - beta0);
  out.abs_median_bias = std::abs(median - beta0);
  out.sd = k > 1 ? std::sqrt(ss / static_cast<double>(k - 1)) : 0.0;
  out.root_mean_evar = std::sqrt(evar / static_cast<double>(k));
  out.cov95 = covered / static_cast<double>(k);
  out.mean_runtime = runtime / static_cast<double>(k);
  return out;
}

CellResult run_cell(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto reps = static_cast<std::size_t>(cfg.reps);
  std::vector<std::vector<ReplicationRecord>> per_rep(reps);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= reps) return;
      try {
        const int rep = static_cast<int>(r) + 1;
        per_rep[r] = run_replication(cfg, rep, cfg.base_seed + static_cast<std::uint64_t>(rep));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(reps);
        return;
      }
    }
  };
  const int threads = std::min<int>(cfg.workers, cfg.reps);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  CellResult out;
  for (auto& v : per_rep) {
    for (auto& r : v) out.records.push_back(std::move(r));
  }
  out.metrics.scenario = cfg.scenario;
  out.metrics.n = cfg.n;
  out.metrics.m = cfg.m;
  out.metrics.cp = cfg.cp;
  out.metrics.reps = cfg.reps;
  for (Method method : cfg.estimators) out.metrics.rows.push_back(aggregate(method, out.records, cfg.beta0));
  return out;
}

std::string method_label(Method m) {
  switch (m) {
    case Method::cue: return "debiased-CUE";
    case Method::tsls: return "TSLS";
    case Method::gmm_identity: return "debiased-GMM";
    case Method::gmm_two_step: return "debiased-GMM2";
    case Method::oracle_cue: return "oracle-CUE";
    case Method::oracle_gmm: return "oracle-GMM";
  }
  return "unknown";
}

TableFormat table_format_from_string(const std::string& name) {
  if (name == "markdown" || name == "md") return TableFormat::markdown;
  if (name == "json") return TableFormat::json;
  if (name == "csv") return TableFormat::csv;
  throw ConfigError("unknown format '" + name + "' (expected markdown|json|csv)");
}

namespace {

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// Shortest text that reads back to the same double.
std::string exact(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string cp_text(double cp) {
  return cp == std::floor(cp) && std::abs(cp) < 1e15 ? std::to_string(static_cast<long long>(cp)) : exact(cp);
}

// Estimator order of first appearance across cells.
std::vector<Method> method_order(const std::vector<CellMetrics>& cells) {
  std::vector<Method> order;
  for (const auto& c : cells) {
    for (const auto& r : c.rows) {
      if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
    }
  }
  return order;
}

json row_to_json(const EstimatorMetrics& r, bool runtime) {
  json j = {{"method", to_string(r.method)},
            {"abs_mean_bias", r.abs_mean_bias},
            {"abs_median_bias", r.abs_median_bias},
            {"sd", r.sd},
            {"root_mean_evar", r.root_mean_evar},
            {"cov95", r.cov95},
            {"successes", r.successes},
            {"failure_count", r.failure_count}};
  if (runtime) j["mean_runtime"] = r.mean_runtime;
  return j;
}

}  // namespace

std::string render_table(const std::vector<CellMetrics>& cells, TableFormat format, const RenderOptions& opts) {
  if (cells.empty()) throw ConfigError("render_table: no cells");
  for (const auto& c : cells) {
    if (c.rows.empty()) throw ConfigError("render_table: cell without estimators");
  }
  std::ostringstream os;
  if (format == TableFormat::json) {
    json arr = json::array();
    for (const auto& c : cells) {
      json rows = json::array();
      for (const auto& r : c.rows) rows.push_back(row_to_json(r, opts.include_runtime));
      arr.push_back({{"scenario", to_string(c.scenario)},
                     {"n", c.n},
                     {"m", c.m},
                     {"cp", c.cp},
                     {"reps", c.reps},
                     {"rows", rows}});
    }
    os << arr.dump(2) << '\n';
    return os.str();
  }

  const auto order = method_order(cells);
  if (format == TableFormat::markdown) {
    const int dg = opts.digits;
    os << "| Method | CP | m | \\|mean bias\\| | \\|median bias\\| | √Var | √EVar | Cov95 |";
    if (opts.include_runtime) os << " Runtime (s) |";
    os << '\n' << "|---|---:|---:|---:|---:|---:|---:|---:|";
    if (opts.include_runtime) os << "---:|";
    os << '\n';
    for (Method method : order) {
      for (const auto& c : cells) {
        for (const auto& r : c.rows) {
          if (r.method != method) continue;
          os << "| " << method_label(method) << " | " << cp_text(c.cp) << " | " << c.m << " | "
             << fixed(r.abs_mean_bias, dg) << " | " << fixed(r.abs_median_bias, dg) << " | " << fixed(r.sd, dg)
             << " | " << fixed(r.root_mean_evar, dg) << " | " << fixed(r.cov95, dg) << " |";
          if (opts.include_runtime) os << ' ' << fixed(r.mean_runtime, 4) << " |";
          os << '\n';
        }
      }
    }
    return os.str();
  }

  os << "method,scenario,n,cp,m,reps,abs_mean_bias,abs_median_bias,sd,root_mean_evar,cov95,successes,failure_count";
  if (opts.include_runtime) os << ",mean_runtime";
  os << '\n';
  for (Method method : order) {
    for (const auto& c : cells) {
      for (const auto& r : c.rows) {
        if (r.method != method) continue;
        os << to_string(method) << ',' << to_string(c.scenario) << ',' << c.n << ',' << exact(c.cp) << ',' << c.m << ','
           << c.reps << ',' << exact(r.abs_mean_bias) << ',' << exact(r.abs_median_bias) << ',' << exact(r.sd) << ','
           << exact(r.root_mean_evar) << ',' << exact(r.cov95) << ',' << r.successes << ',' << r.failure_count;
        if (opts.include_runtime) os << ',' << exact(r.mean_runtime);
        os << '\n';
      }
    }
  }
  return os.str();
}

std::vector<CellMetrics> cells_from_json(const std::string& text) {
  std::vector<CellMetrics> out;
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw ConfigError("metrics JSON must be an array of cells");
    for (const auto& jc : arr) {
      CellMetrics c;
      c.scenario = scenario_from_string(jc.at("scenario").get<std::string>());
      c.n = jc.at("n").get<int>();
      c.m = jc.at("m").get<int>();
      c.cp = jc.at("cp").get<double>();
      c.reps = jc.at("reps").get<int>();
      for (const auto& jr : jc.at("rows")) {
        EstimatorMetrics r;
        r.method = method_from_string(jr.at("method").get<std::string>());
        r.abs_mean_bias = jr.at("abs_mean_bias").get<double>();
        r.abs_median_bias = jr.at("abs_median_bias").get<double>();
        r.sd = jr.at("sd").get<double>();
        r.root_mean_evar = jr.at("root_mean_evar").get<double>();
        r.cov95 = jr.at("cov95").get<double>();
        r.successes = jr.at("successes").get<int>();
        r.failure_count = jr.at("failure_count").get<int>();
        r.mean_runtime = jr.value("mean_runtime", 0.0);
        c.rows.push_back(r);
      }
      out.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed metrics JSON: ") + e.what());
  }
  return out;
}

void write_replications_csv(std::ostream& out, const std::vector<ReplicationRecord>& records,
                            const CellMetrics& cell) {
  out << "scenario,n,m,cp,rep,seed,method,ok,beta_hat,se,j_stat,j_p,boundary,error\n";
  for (const auto& r : records) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    out << to_string(cell.scenario) << ',' << cell.n << ',' << cell.m << ',' << exact(cell.cp) << ',' << r.rep << ','
        << r.seed << ',' << to_string(r.method) << ',' << (r.ok ? 1 : 0) << ',' << exact(r.beta_hat) << ','
        << exact(r.se) << ',' << exact(r.j_stat) << ',' << exact(r.j_p) << ',' << (r.boundary ? 1 : 0) << ",\""
        << err << "\"\n";
  }
}

}  // namespace dcue

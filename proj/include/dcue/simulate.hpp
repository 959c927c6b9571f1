#pragma once

#include "dcue/dataset.hpp"
#include "dcue/estimators.hpp"
#include "dcue/learners.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace dcue {

enum class Scenario { s1_lowdim, s2_highdim, local_to_zero };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct ScenarioConfig {
  Scenario scenario = Scenario::s1_lowdim;
  int n = 1000;
  int m = 15;
  double cp = 30.0;
  double rho = 0.3;
  double beta0 = 0.0;
  int folds = 4;
  int reps = 100;
  std::uint64_t base_seed = 1;
  std::vector<Method> estimators{Method::cue, Method::tsls, Method::gmm_identity};
  LearnerSpec learner = LearnerSpec::of(LearnerKind::spline_additive);
  // Correlation between the noise terms of different instruments. 0 draws
  // them independently; 1 is the shared-noise design.
  double instrument_noise_corr = 0.0;
  // s2 only: multiplies gamma, the covariate loading of the instruments.
  double gamma_scale = 1.0;
  int workers = 1;

  /// Throws ConfigError when n < 2 folds, m < 1, cp <= 0, reps < 1, |rho| > 1,
  /// the estimator list is empty or the noise correlation is outside [0, 1).
  void validate() const;
};

/// Learner the paper's design pairs with a scenario: splines for s1 and the
/// local-to-zero preset, lasso for s2.
LearnerSpec default_learner(Scenario s);

struct SimulatedData {
  Dataset data;
  std::shared_ptr<const TrueNuisance> truth;
  double beta0 = 0.0;
};

/// p = 3 design with nonlinear nuisance functions.
SimulatedData generate_s1(const ScenarioConfig& cfg, std::uint64_t seed);

/// p = 100 sparse linear design (first five coefficients one).
SimulatedData generate_s2(const ScenarioConfig& cfg, std::uint64_t seed);

/// Instruments N(0, I) independent of X with pi_j = sqrt(cp / n), so that the
/// population concentration n G'Omega^-1 G equals cp * m. Covariates as in s1.
SimulatedData generate_local_to_zero(const ScenarioConfig& cfg, std::uint64_t seed);

SimulatedData generate(const ScenarioConfig& cfg, std::uint64_t seed);

/// Population n G'Omega^-1 G of the local-to-zero preset.
double local_to_zero_concentration(const ScenarioConfig& cfg);

/// One estimator on one replication.
struct ReplicationRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  Method method = Method::cue;
  bool ok = false;
  double beta_hat = 0.0;
  double se = 0.0;
  double j_stat = 0.0;  // CUE methods only
  double j_p = 1.0;
  bool boundary = false;
  double runtime = 0.0;  // seconds
  std::string error;
};

/// Runs every requested estimator on the replication with the given seed.
std::vector<ReplicationRecord> run_replication(const ScenarioConfig& cfg, int rep, std::uint64_t seed);

struct EstimatorMetrics {
  Method method = Method::cue;
  double abs_mean_bias = 0.0;
  double abs_median_bias = 0.0;
  double sd = 0.0;
  double root_mean_evar = 0.0;
  double cov95 = 0.0;
  int successes = 0;
  int failure_count = 0;
  double mean_runtime = 0.0;
};

struct CellMetrics {
  Scenario scenario = Scenario::s1_lowdim;
  int n = 0;
  int m = 0;
  double cp = 0.0;
  int reps = 0;
  std::vector<EstimatorMetrics> rows;  // one per requested estimator, in request order
};

/// Aggregates the records of one estimator. Failed replications are counted
/// and excluded. Throws NumericalError if every replication failed.
EstimatorMetrics aggregate(Method method, const std::vector<ReplicationRecord>& records, double beta0);

struct CellResult {
  CellMetrics metrics;
  std::vector<ReplicationRecord> records;  // ordered by (rep, request order)
};

/// Replication r uses seed base_seed + r, r = 1..reps. Replications run on
/// cfg.workers threads; results do not depend on the worker count.
CellResult run_cell(const ScenarioConfig& cfg);

/// Table label of an estimator ("debiased-CUE", "TSLS", ...).
std::string method_label(Method m);

enum class TableFormat { markdown, json, csv };

TableFormat table_format_from_string(const std::string& name);

struct RenderOptions {
  bool include_runtime = false;  // runtimes make output non-reproducible
  int digits = 3;                // markdown only
};

/// Rows grouped by estimator, then by cell in input order. Throws ConfigError
/// for an empty list or a cell without estimators.
std::string render_table(const std::vector<CellMetrics>& cells, TableFormat format, const RenderOptions& opts = {});

/// Inverse of render_table(..., TableFormat::json, ...).
std::vector<CellMetrics> cells_from_json(const std::string& text);

/// One line per record, header included.
void write_replications_csv(std::ostream& out, const std::vector<ReplicationRecord>& records,
                            const CellMetrics& cell);

}  // namespace dcue

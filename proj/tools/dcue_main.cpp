// dcue command line: estimate, simulate, selftest.

#include "dcue/dataset.hpp"
#include "dcue/error.hpp"
#include "dcue/pipeline.hpp"
#include "dcue/report.hpp"
#include "dcue/selftest.hpp"
#include "dcue/simulate.hpp"
#include "dcue/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitProperty = 5;

struct Flags {
  std::string config;
  std::string data, outcome, treatment, instruments, covariates;
  std::string learner, method, scenario, format, out;
  std::string n, m, cp;
  std::optional<int> folds, reps, workers;
  std::optional<std::uint64_t> seed;
  bool corrupt_gradient = false;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
std::vector<T> parse_numbers(const std::string& s, const char* flag) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
      if (static_cast<double>(out.back()) != v) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw dcue::ConfigError(std::string("--") + flag + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw dcue::ConfigError(std::string("--") + flag + ": empty list");
  return out;
}

// Scalar or array config value as a list.
template <class T>
std::vector<T> json_list(const json& j, const char* key) {
  try {
    if (j.is_array()) return j.get<std::vector<T>>();
    return {j.get<T>()};
  } catch (const json::exception&) {
    throw dcue::ConfigError(std::string("config: '") + key + "' must be a number or a list of numbers");
  }
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw dcue::ConfigError("cannot open config file '" + path + "'");
  try {
    json j = json::parse(in, nullptr, true, true);
    if (!j.is_object()) throw dcue::ConfigError("config file must hold a JSON object");
    for (const auto& item : j.items()) {
      if (item.key() != "estimate" && item.key() != "simulate" && item.key() != "selftest") {
        throw dcue::ConfigError("config: unknown section '" + item.key() + "'");
      }
    }
    return j;
  } catch (const json::parse_error& e) {
    throw dcue::ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

json section(const json& cfg, const char* name) { return cfg.contains(name) ? cfg.at(name) : json::object(); }

int default_workers() {
  if (const char* env = std::getenv("DCUE_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::logic_error&) {
    }
    throw dcue::ConfigError(std::string("DCUE_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw dcue::ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dcue::ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::string header_line(const json& resolved, const std::string& prefix) {
  return prefix + "dcue " + std::string(dcue::kVersion) + " config: " + resolved.dump() + "\n";
}

// ---------------------------------------------------------------------------

int cmd_estimate(const Flags& f, const json& file_cfg) {
  const json sec = section(file_cfg, "estimate");
  static const std::set<std::string> allowed{"data",  "outcome", "treatment", "instruments", "covariates", "learner",
                                             "folds", "methods", "seed",      "out",         "format",     "interval",
                                             "beta_star"};
  for (const auto& item : sec.items()) {
    if (!allowed.count(item.key())) throw dcue::ConfigError("estimate: unknown key '" + item.key() + "'");
  }
  auto str = [&](const std::string& flag, const char* key) -> std::string {
    if (!flag.empty()) return flag;
    if (!sec.contains(key)) return "";
    if (sec.at(key).is_array()) {
      std::string joined;
      for (const auto& v : sec.at(key)) joined += (joined.empty() ? "" : ",") + v.get<std::string>();
      return joined;
    }
    return sec.at(key).get<std::string>();
  };

  dcue::ColumnSchema schema;
  const std::string data = str(f.data, "data");
  schema.outcome = str(f.outcome, "outcome");
  schema.treatment = str(f.treatment, "treatment");
  schema.instruments = split_list(str(f.instruments, "instruments"));
  schema.covariates = split_list(str(f.covariates, "covariates"));
  if (data.empty()) throw dcue::ConfigError("estimate needs --data");
  schema.validate();

  dcue::EstimateOptions opts;
  if (sec.contains("learner")) opts.learner = dcue::learner_from_json(sec.at("learner"), opts.learner);
  if (!f.learner.empty()) opts.learner = dcue::learner_from_json(json(f.learner), opts.learner);
  if (sec.contains("folds")) opts.folds = sec.at("folds").get<int>();
  if (f.folds) opts.folds = *f.folds;
  const std::string methods = str(f.method, "methods");
  if (!methods.empty()) opts.methods = dcue::methods_from_string(methods);
  if (sec.contains("seed")) opts.seed = sec.at("seed").get<std::uint64_t>();
  if (f.seed) opts.seed = *f.seed;
  if (sec.contains("beta_star")) opts.beta_star = sec.at("beta_star").get<double>();
  if (sec.contains("interval")) {
    const auto& jb = sec.at("interval");
    dcue::SearchInterval b;
    b.lo = jb.value("lo", b.lo);
    b.hi = jb.value("hi", b.hi);
    b.grid_points = jb.value("grid_points", b.grid_points);
    b.refine_tol = jb.value("refine_tol", b.refine_tol);
    opts.interval = b;
  }
  const std::string format = str(f.format, "format").empty() ? "text" : str(f.format, "format");
  if (format != "text" && format != "json" && format != "markdown") {
    throw dcue::ConfigError("estimate --format must be text, markdown or json");
  }
  const std::string out = str(f.out, "out");
  opts.validate();

  std::string methods_text;
  for (auto m : opts.methods) methods_text += (methods_text.empty() ? "" : ",") + dcue::to_string(m);
  json resolved = {{"command", "estimate"},
                   {"data", data},
                   {"outcome", schema.outcome},
                   {"treatment", schema.treatment},
                   {"instruments", schema.instruments},
                   {"covariates", schema.covariates},
                   {"learner", dcue::to_json(opts.learner)},
                   {"folds", opts.folds},
                   {"methods", methods_text},
                   {"seed", opts.seed},
                   {"beta_star", opts.beta_star}};
  if (opts.interval) resolved["interval"] = dcue::to_json(*opts.interval);

  const dcue::Dataset ds = dcue::load_csv(data, schema);
  const dcue::EstimateRun run = dcue::run_estimate(ds, opts);

  json report = {{"version", dcue::kVersion}, {"config", resolved}, {"result", dcue::to_json(run)}};
  const std::string summary = dcue::render_estimate_summary(run);
  if (format == "json") {
    std::cout << report.dump(2) << '\n';
  } else {
    std::cout << summary;
  }
  if (!out.empty()) {
    ensure_dir(out);
    write_file(fs::path(out) / "report.json", report.dump(2) + "\n");
    write_file(fs::path(out) / "summary.txt", header_line(resolved, "# ") + summary);
  }
  return run.incomplete() ? kExitNumerical : kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Flags& f, const json& file_cfg) {
  json sec = section(file_cfg, "simulate");
  std::vector<int> ns, ms;
  std::vector<double> cps;
  // grid keys may hold lists; the rest goes through the shared parser
  if (sec.contains("n")) ns = json_list<int>(sec.at("n"), "n");
  if (sec.contains("m")) ms = json_list<int>(sec.at("m"), "m");
  if (sec.contains("cp")) cps = json_list<double>(sec.at("cp"), "cp");
  std::string out = sec.value("out", std::string());
  std::string format = sec.value("format", std::string("markdown"));
  for (const char* key : {"n", "m", "cp", "out", "format"}) sec.erase(key);

  dcue::ScenarioConfig cfg;
  cfg.workers = default_workers();
  if (!f.scenario.empty()) {
    cfg.scenario = dcue::scenario_from_string(f.scenario);
    cfg.learner = dcue::default_learner(cfg.scenario);
  }
  if (sec.contains("scenario") && !f.scenario.empty()) sec.erase("scenario");
  cfg = dcue::scenario_from_json(sec, cfg);
  if (!f.learner.empty()) cfg.learner = dcue::learner_from_json(json(f.learner), cfg.learner);
  if (!f.method.empty()) cfg.estimators = dcue::methods_from_string(f.method);
  if (f.folds) cfg.folds = *f.folds;
  if (f.reps) cfg.reps = *f.reps;
  if (f.seed) cfg.base_seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  if (!f.n.empty()) ns = parse_numbers<int>(f.n, "n");
  if (!f.m.empty()) ms = parse_numbers<int>(f.m, "m");
  if (!f.cp.empty()) cps = parse_numbers<double>(f.cp, "cp");
  if (ns.empty()) ns = {cfg.n};
  if (ms.empty()) ms = {cfg.m};
  if (cps.empty()) cps = {cfg.cp};
  if (!f.out.empty()) out = f.out;
  if (!f.format.empty()) format = f.format;
  const dcue::TableFormat table_format = dcue::table_format_from_string(format);

  std::vector<dcue::ScenarioConfig> grid;
  for (int n : ns) {
    for (double cp : cps) {
      for (int m : ms) {
        dcue::ScenarioConfig c = cfg;
        c.n = n;
        c.m = m;
        c.cp = cp;
        c.validate();
        grid.push_back(c);
      }
    }
  }

  json resolved = dcue::to_json(cfg);
  resolved.erase("n");
  resolved.erase("m");
  resolved.erase("cp");
  resolved["command"] = "simulate";
  resolved["n"] = ns;
  resolved["m"] = ms;
  resolved["cp"] = cps;

  std::vector<dcue::CellMetrics> cells;
  std::ostringstream raw;
  raw << header_line(resolved, "# ");
  bool first = true;
  for (const auto& c : grid) {
    const dcue::CellResult res = dcue::run_cell(c);
    cells.push_back(res.metrics);
    std::ostringstream part;
    dcue::write_replications_csv(part, res.records, res.metrics);
    std::string text = part.str();
    if (!first) text.erase(0, text.find('\n') + 1);  // one header line only
    raw << text;
    first = false;
  }

  const std::string table = dcue::render_table(cells, table_format);
  std::string file_text;
  std::string ext;
  switch (table_format) {
    case dcue::TableFormat::markdown:
      file_text = "<!-- " + header_line(resolved, "").substr(0, header_line(resolved, "").size() - 1) + " -->\n\n" + table;
      ext = "md";
      break;
    case dcue::TableFormat::csv:
      file_text = header_line(resolved, "# ") + table;
      ext = "csv";
      break;
    case dcue::TableFormat::json:
      file_text = json({{"version", dcue::kVersion}, {"config", resolved}, {"cells", json::parse(table)}}).dump(2) + "\n";
      ext = "json";
      break;
  }
  std::cout << table;
  if (!out.empty()) {
    ensure_dir(out);
    write_file(fs::path(out) / ("table." + ext), file_text);
    write_file(fs::path(out) / "replications.csv", raw.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_selftest(const Flags& f, const json& file_cfg) {
  const json sec = section(file_cfg, "selftest");
  dcue::SelftestOptions opts;
  for (const auto& item : sec.items()) {
    if (item.key() == "seed") {
      opts.seed = item.value().get<std::uint64_t>();
    } else if (item.key() == "instances") {
      opts.instances = item.value().get<int>();
    } else {
      throw dcue::ConfigError("selftest: unknown key '" + item.key() + "'");
    }
  }
  if (f.seed) opts.seed = *f.seed;
  opts.corrupt_gradient = f.corrupt_gradient;
  if (opts.instances < 1) throw dcue::ConfigError("selftest: instances must be positive");

  const auto results = dcue::run_selftest(opts);
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    all = all && r.passed;
  }
  std::cout << (all ? "all properties passed" : "some properties FAILED") << " (seed " << opts.seed << ")\n";
  return all ? kExitOk : kExitProperty;
}

int report_error(const char* kind, const std::string& message, int code) {
  const json err = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Debiased continuously updated GMM for partially linear IV models with many weak instruments"};
  app.set_version_flag("--version", std::string(dcue::kVersion));
  app.require_subcommand(1, 1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file (sections estimate, simulate, selftest)");
    sub->add_option("--seed", f.seed, "Random seed");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--learner", f.learner, "First-step learner: linear, ridge, lasso, spline");
    sub->add_option("--folds", f.folds, "Cross-fitting folds K");
    sub->add_option("--method", f.method, "Comma-separated methods: cue, tsls, gmm, gmm2 (+ oracle_cue, oracle_gmm in simulate)");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--format", f.format, "Output format");
    sub->add_option("--workers", f.workers, "Worker threads (default: DCUE_WORKERS or 1)");
  };

  CLI::App* est = app.add_subcommand("estimate", "Estimate beta from a CSV file");
  add_common(est);
  add_model(est);
  est->add_option("--data", f.data, "CSV file with a header row");
  est->add_option("--outcome", f.outcome, "Outcome column");
  est->add_option("--treatment", f.treatment, "Treatment column");
  est->add_option("--instruments", f.instruments, "Comma-separated instrument columns");
  est->add_option("--covariates", f.covariates, "Comma-separated covariate columns");

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo experiments");
  add_common(sim);
  add_model(sim);
  sim->add_option("--scenario", f.scenario, "s1_lowdim, s2_highdim or local_to_zero");
  sim->add_option("--n", f.n, "Sample size(s), comma-separated");
  sim->add_option("--m", f.m, "Instrument count(s), comma-separated");
  sim->add_option("--cp", f.cp, "Concentration parameter(s), comma-separated");
  sim->add_option("--reps", f.reps, "Replications per cell");

  CLI::App* self = app.add_subcommand("selftest", "Run the embedded property checks");
  add_common(self);
  self->add_flag("--corrupt-gradient", f.corrupt_gradient, "Test hook: perturb the analytic gradient")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("config", e.what(), kExitConfig);
  }

  try {
    const json file_cfg = load_config(f.config);
    if (est->parsed()) return cmd_estimate(f, file_cfg);
    if (sim->parsed()) return cmd_simulate(f, file_cfg);
    return cmd_selftest(f, file_cfg);
  } catch (const dcue::ConfigError& e) {
    return report_error("config", e.what(), kExitConfig);
  } catch (const dcue::DataError& e) {
    return report_error("data", e.what(), kExitData);
  } catch (const dcue::NumericalError& e) {
    return report_error("numerical", e.what(), kExitNumerical);
  } catch (const json::exception& e) {
    return report_error("config", std::string("config value: ") + e.what(), kExitConfig);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
}

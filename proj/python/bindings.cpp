#include "dcue/chisq.hpp"
#include "dcue/dataset.hpp"
#include "dcue/error.hpp"
#include "dcue/pipeline.hpp"
#include "dcue/report.hpp"
#include "dcue/selftest.hpp"
#include "dcue/simulate.hpp"
#include "dcue/version.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using json = nlohmann::json;

namespace {

dcue::EstimateOptions estimate_options(const std::string& methods, const std::string& learner, int folds,
                                       std::uint64_t seed, double beta_star) {
  dcue::EstimateOptions opts;
  opts.methods = dcue::methods_from_string(methods);
  opts.learner = dcue::learner_from_json(json::parse(learner), opts.learner);
  opts.folds = folds;
  opts.seed = seed;
  opts.beta_star = beta_star;
  opts.validate();
  return opts;
}

std::string run_json(const dcue::Dataset& ds, const dcue::EstimateOptions& opts) {
  py::gil_scoped_release release;
  return dcue::to_json(dcue::run_estimate(ds, opts)).dump();
}

}  // namespace

PYBIND11_MODULE(_dcue, m) {
  m.doc() = "Debiased CUE for partially linear IV models with many weak instruments";
  m.attr("__version__") = dcue::kVersion;

  py::register_exception<dcue::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<dcue::DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<dcue::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "estimate_arrays",
      [](const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& z, const Eigen::MatrixXd& x,
         const std::string& methods, const std::string& learner, int folds, std::uint64_t seed, double beta_star) {
        dcue::Dataset ds{y, d, z, x};
        ds.validate();
        return run_json(ds, estimate_options(methods, learner, folds, seed, beta_star));
      },
      py::arg("y"), py::arg("d"), py::arg("z"), py::arg("x"), py::arg("methods"), py::arg("learner"), py::arg("folds"),
      py::arg("seed"), py::arg("beta_star"));

  m.def(
      "estimate_csv",
      [](const std::string& path, const std::string& outcome, const std::string& treatment,
         const std::vector<std::string>& instruments, const std::vector<std::string>& covariates,
         const std::string& methods, const std::string& learner, int folds, std::uint64_t seed, double beta_star) {
        const dcue::Dataset ds = dcue::load_csv(path, dcue::ColumnSchema{outcome, treatment, instruments, covariates});
        return run_json(ds, estimate_options(methods, learner, folds, seed, beta_star));
      },
      py::arg("path"), py::arg("outcome"), py::arg("treatment"), py::arg("instruments"), py::arg("covariates"),
      py::arg("methods"), py::arg("learner"), py::arg("folds"), py::arg("seed"), py::arg("beta_star"));

  m.def(
      "generate",
      [](const std::string& config, std::uint64_t seed) {
        const auto cfg = dcue::scenario_from_json(json::parse(config), dcue::ScenarioConfig{});
        cfg.validate();
        const auto sim = dcue::generate(cfg, seed);
        py::dict out;
        out["y"] = sim.data.y;
        out["d"] = sim.data.d;
        out["z"] = sim.data.z;
        out["x"] = sim.data.x;
        out["beta0"] = sim.beta0;
        return out;
      },
      py::arg("config"), py::arg("seed"));

  m.def(
      "simulate",
      [](const std::string& config) {
        const auto cfg = dcue::scenario_from_json(json::parse(config), dcue::ScenarioConfig{});
        cfg.validate();
        dcue::CellResult res;
        {
          py::gil_scoped_release release;
          res = dcue::run_cell(cfg);
        }
        std::ostringstream records;
        dcue::write_replications_csv(records, res.records, res.metrics);
        const json cell = json::parse(dcue::render_table({res.metrics}, dcue::TableFormat::json)).at(0);
        return py::make_tuple(cell.dump(), records.str());
      },
      py::arg("config"));

  m.def(
      "render_table",
      [](const std::string& cells_json, const std::string& format) {
        return dcue::render_table(dcue::cells_from_json(cells_json), dcue::table_format_from_string(format));
      },
      py::arg("cells_json"), py::arg("format"));

  m.def(
      "selftest",
      [](std::uint64_t seed, int instances) {
        dcue::SelftestOptions opts;
        opts.seed = seed;
        opts.instances = instances;
        py::list out;
        for (const auto& r : dcue::run_selftest(opts)) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("seed"), py::arg("instances"));

  m.def("chisq_cdf", &dcue::chisq_cdf, py::arg("x"), py::arg("df"));
  m.def("chisq_sf", &dcue::chisq_sf, py::arg("x"), py::arg("df"));
  m.def("chisq_quantile", &dcue::chisq_quantile, py::arg("p"), py::arg("df"));
}

#include <sstream>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "arff/cli.hpp"

namespace py = pybind11;
using namespace arff;

namespace {

cli::RunSpec spec_from_text(const std::string& text) {
  std::istringstream in(text);
  return cli::parse_config(in);
}

FrequencySet continuous(const PointMatrix& w) { return FrequencySet::continuous(w); }

py::dict metrics_dict(const std::vector<IterationMetrics>& metrics) {
  std::vector<int> it, cg;
  std::vector<double> tr, va;
  std::vector<std::optional<double>> tv;
  for (const auto& m : metrics) {
    it.push_back(m.iteration);
    tr.push_back(m.train_rel_err);
    va.push_back(m.val_rel_err);
    cg.push_back(m.cg_iters);
    tv.push_back(m.tv_to_reference);
  }
  py::dict d;
  d["iteration"] = it;
  d["train_rel_err"] = tr;
  d["val_rel_err"] = va;
  d["cg_iters"] = cg;
  d["tv_to_reference"] = tv;
  return d;
}

py::dict sweep_row(const cli::SweepRow& r) {
  py::dict d;
  d["point"] = r.point;
  d["label"] = r.label;
  d["algorithm"] = r.algorithm;
  d["K"] = r.K;
  d["J"] = r.J;
  d["delta"] = r.delta;
  d["epsilon"] = r.epsilon;
  d["lambda1"] = r.lambda1;
  d["lambda2"] = r.lambda2;
  d["noise_std"] = r.noise_std;
  d["nsr"] = r.nsr;
  d["train_rel_err"] = r.train_rel_err;
  d["val_rel_err"] = r.val_rel_err;
  d["test_rel_err"] = r.test_rel_err;
  return d;
}

}  // namespace

PYBIND11_MODULE(_arff, m) {
  m.doc() = "Adaptive random Fourier features";

  static py::exception<Error> base(m, "ArffError", PyExc_RuntimeError);
  static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
  static py::exception<SolverError> solver(m, "SolverError", base.ptr());
  static py::exception<IoError> io(m, "IoError", base.ptr());
  static py::exception<FormatError> format(m, "FormatError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config, e.what());
    } catch (const SolverError& e) {
      py::set_error(solver, e.what());
    } catch (const IoError& e) {
      py::set_error(io, e.what());
    } catch (const FormatError& e) {
      py::set_error(format, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.attr("__version__") = ARFF_VERSION;

  m.def(
      "evaluate_model",
      [](const PointMatrix& freqs, const ComplexVector& amps, const PointMatrix& points) {
        return evaluate_model(RffModel(continuous(freqs), amps), points);
      },
      py::arg("frequencies"), py::arg("amplitudes"), py::arg("points"));

  m.def("relative_l2_error", &relative_l2_error, py::arg("predicted"), py::arg("truth"));

  m.def(
      "cg_solve",
      [](const PointMatrix& freqs, const PointMatrix& x, const ComplexVector& y, double lambda1,
         double tol, int max_iters) {
        SolverConfig cfg;
        cfg.lambda1 = lambda1;
        cfg.cg_rel_tol = tol;
        cfg.cg_max_iters = max_iters;
        auto r = cg_solve(continuous(freqs), Dataset(x, y), cfg);
        return py::make_tuple(r.amplitudes, r.report.iterations, r.report.relative_residual);
      },
      py::arg("frequencies"), py::arg("inputs"), py::arg("targets"), py::arg("lambda1"),
      py::arg("tol") = 1e-8, py::arg("max_iters") = 2000);

  m.def(
      "dense_solve",
      [](const PointMatrix& freqs, const PointMatrix& x, const ComplexVector& y, double lambda1) {
        return dense_solve(continuous(freqs), Dataset(x, y), lambda1);
      },
      py::arg("frequencies"), py::arg("inputs"), py::arg("targets"), py::arg("lambda1"));

  m.def(
      "train",
      [](const std::string& config_text, std::optional<std::uint64_t> seed) {
        auto spec = spec_from_text(config_text);
        if (seed) spec.train.seed = *seed;
        spec.train.record_timing = false;
        cli::RunOutcome out;
        {
          py::gil_scoped_release release;
          out = cli::execute(spec);
        }
        py::dict d;
        d["frequencies"] = out.result.model.frequencies.coordinates();
        d["amplitudes"] = out.result.model.amplitudes;
        d["metrics"] = metrics_dict(out.result.history.metrics);
        d["test_rel_err"] = out.result.history.test_rel_err;
        d["nsr"] = out.data.nsr;
        d["warnings"] = out.result.history.warnings;
        return d;
      },
      py::arg("config"), py::arg("seed") = py::none(),
      "Runs one training from INI text and returns the model and per-iteration metrics.");

  m.def("preset_names", &cli::preset_names);

  m.def(
      "run_experiment",
      [](const std::string& name, const std::string& scale, int jobs, std::uint64_t seed) {
        auto preset = cli::make_preset(name, cli::parse_scale(scale), seed);
        std::vector<cli::SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = cli::run_sweep(preset, jobs);
        }
        py::list out;
        for (const auto& r : rows) out.append(sweep_row(r));
        return out;
      },
      py::arg("name"), py::arg("scale") = "desk", py::arg("jobs") = 1, py::arg("seed") = 1);

  m.def(
      "oracle",
      [](const std::string& config_text, int nmax, bool refine) {
        FourierCoefficientTable table;
        auto s = cli::run_oracle(spec_from_text(config_text), nmax, refine, &table);
        py::dict d;
        d["n_max"] = s.n_max;
        d["grid"] = s.grid;
        d["c_pstar"] = s.c_pstar;
        d["rate_constant"] = s.rate_constant;
        d["table_energy"] = s.table_energy;
        d["mean_square"] = s.grid_mean_square;
        d["refine_delta"] = s.refine_delta;
        d["indices"] = table.indices;
        d["coefficients"] = table.coefficients;
        d["summary"] = s.line();
        return d;
      },
      py::arg("config"), py::arg("nmax"), py::arg("refine") = false);

  m.def(
      "load_idx_images",
      [](const std::filesystem::path& p) { return load_idx_images_file(p).pixels; },
      py::arg("path"), "Images as a count x (rows*cols) array scaled to [0, 1].");
  m.def(
      "load_idx_labels", [](const std::filesystem::path& p) { return load_idx_labels_file(p).labels; },
      py::arg("path"));
}

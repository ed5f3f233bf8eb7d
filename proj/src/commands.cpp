#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "arff/cli.hpp"
#include "arff/csv.hpp"

#ifndef ARFF_VERSION
#define ARFF_VERSION "unknown"
#endif

namespace arff::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const SupportError*>(&e)) {
    return kExitConfig;
  }
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitIo;
  }
  return kExitSolver;
}

namespace {

ordered_json versions() {
  return {{"arff", ARFF_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
#if defined(__clang__)
          {"compiler", "clang " __clang_version__}
#elif defined(__GNUC__)
          {"compiler", "gcc " __VERSION__}
#else
          {"compiler", "unknown"}
#endif
  };
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

template <class Fn>
void write_atomic(const fs::path& path, Fn&& fill) {
  std::ostringstream os;
  fill(os);
  csv::write_file_atomic(path, os.str());
}

std::string config_text(const RunSpec& spec) {
  std::ostringstream os;
  write_config(spec, os);
  return os.str();
}

RunSpec apply_options(RunSpec spec, const CommandOptions& opts) {
  if (opts.seed_override) spec.train.seed = *opts.seed_override;
  if (opts.deterministic) spec.train.record_timing = false;
  return spec;
}

std::string snapshot_name(int iteration) {
  std::ostringstream os;
  os << "iter_";
  os.width(5);
  os.fill('0');
  os << iteration << ".csv";
  return os.str();
}

SweepRow summarize(int point, const SweepPoint& p, const RunOutcome& o) {
  const auto& last = o.result.history.metrics.back();
  SweepRow r;
  r.point = point;
  r.label = p.label;
  r.algorithm = to_string(p.spec.train.algorithm);
  r.K = p.spec.train.K;
  r.J = p.spec.samples;
  r.delta = p.spec.train.walk.delta;
  r.epsilon = p.spec.train.cutoff.epsilon;
  r.lambda1 = p.spec.train.solver.lambda1;
  r.lambda2 = p.spec.train.solver.lambda2;
  r.noise_std = o.data.train.noise_std;
  r.nsr = o.data.nsr;
  r.train_rel_err = last.train_rel_err;
  r.val_rel_err = last.val_rel_err;
  r.test_rel_err = o.result.history.test_rel_err;
  return r;
}

int default_oracle_grid(int d, int n_max) {
  const int factor = d == 1 ? 32 : (d == 2 ? 8 : 4);
  int g = 64;
  while (g < factor * n_max) g *= 2;
  return g;
}

template <class Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace

int cmd_train(const fs::path& config, const fs::path& out_dir, const CommandOptions& opts,
              std::ostream& log) {
  return guarded(log, [&] {
    const RunSpec spec = apply_options(parse_config_file(config), opts);
    const RunOutcome o = execute(spec);
    make_dirs(out_dir);
    write_atomic(out_dir / "history.csv", [&](std::ostream& os) { write_history_csv(o.result.history, os); });
    write_atomic(out_dir / "model.csv", [&](std::ostream& os) { write_model_csv(o.result.model, os); });
    if (!o.result.history.snapshots.empty()) {
      make_dirs(out_dir / "snapshots");
      for (const auto& s : o.result.history.snapshots) {
        write_atomic(out_dir / "snapshots" / snapshot_name(s.iteration),
                     [&](std::ostream& os) { write_snapshot_csv(s, os); });
      }
    }
    const auto& last = o.result.history.metrics.back();
    ordered_json meta = {{"command", "train"},
                         {"seed", spec.train.seed},
                         {"versions", versions()},
                         {"config", config_text(spec)},
                         {"final", {{"train_rel_err", last.train_rel_err}, {"val_rel_err", last.val_rel_err}}},
                         {"nsr", o.data.nsr},
                         {"warnings", o.result.history.warnings}};
    if (o.result.history.test_rel_err) meta["final"]["test_rel_err"] = *o.result.history.test_rel_err;
    write_atomic(out_dir / "metadata.json", [&](std::ostream& os) { os << meta.dump(2) << '\n'; });
    log << "train: " << spec.train.iterations << " iterations, final val_rel_err "
        << csv::format_double(last.val_rel_err) << '\n';
    return static_cast<int>(kExitOk);
  });
}

std::vector<SweepRow> run_sweep(const ExperimentPreset& preset, int jobs, const fs::path* out_dir) {
  const auto n = preset.points.size();
  std::vector<SweepRow> rows(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const SweepPoint& p = preset.points[i];
        const RunOutcome o = execute(p.spec);
        rows[i] = summarize(static_cast<int>(i), p, o);
        if (out_dir) {
          const fs::path dir = *out_dir / p.label;
          make_dirs(dir);
          csv::write_file_atomic(dir / "config.ini", config_text(p.spec));
          write_atomic(dir / "history.csv", [&](std::ostream& os) { write_history_csv(o.result.history, os); });
          write_atomic(dir / "metrics.csv",
                       [&](std::ostream& os) { write_metrics_csv(o.result.history.metrics, os); });
          write_atomic(dir / "model.csv", [&](std::ostream& os) { write_model_csv(o.result.model, os); });
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

int cmd_experiment(const std::string& name, Scale scale, const fs::path& out_dir, int jobs,
                   const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
    const std::uint64_t seed = opts.seed_override.value_or(1);
    ExperimentPreset preset = make_preset(name, scale, seed);
    for (auto& p : preset.points) p.spec = apply_options(p.spec, opts);
    make_dirs(out_dir);
    const auto rows = run_sweep(preset, jobs, &out_dir);
    write_atomic(out_dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(rows, os); });
    ordered_json meta = {{"command", "experiment"}, {"preset", preset.name},  {"description", preset.description},
                         {"scale", to_string(scale)}, {"seed", seed},          {"versions", versions()}};
    ordered_json points = ordered_json::array();
    for (const auto& p : preset.points) points.push_back({{"label", p.label}, {"config", config_text(p.spec)}});
    meta["points"] = points;
    write_atomic(out_dir / "metadata.json", [&](std::ostream& os) { os << meta.dump(2) << '\n'; });
    for (const auto& r : rows) {
      log << r.label << ": val_rel_err " << csv::format_double(r.val_rel_err);
      if (r.test_rel_err) log << ", test_rel_err " << csv::format_double(*r.test_rel_err);
      log << '\n';
    }
    return static_cast<int>(kExitOk);
  });
}

std::string OracleSummary::line() const {
  std::ostringstream os;
  os << "n_max=" << n_max << " grid=" << grid << " entries=" << entries
     << " C_pstar=" << csv::format_double(c_pstar) << " rate_constant=" << csv::format_double(rate_constant)
     << " table_energy=" << csv::format_double(table_energy)
     << " mean_square=" << csv::format_double(grid_mean_square)
     << " parseval_gap=" << csv::format_double(grid_mean_square - table_energy);
  if (refine_delta) os << " refine_max_delta=" << csv::format_double(*refine_delta);
  return os.str();
}

OracleSummary run_oracle(const RunSpec& spec, int n_max, bool refine, FourierCoefficientTable* table_out) {
  if (n_max < 1) throw ConfigError("--nmax must be >= 1");
  RngStream rng = RngStream(spec.train.seed).split(1000);
  const TargetSpec target = resolve_target(spec, rng);
  if (!target.period) throw ConfigError("the oracle needs a periodic target (set [target] period)");
  OracleSummary s;
  s.n_max = n_max;
  s.grid = spec.oracle_grid > 0 ? spec.oracle_grid : default_oracle_grid(target.dimension(), n_max);
  FourierCoefficientTable table = compute_fourier_table(target, n_max, s.grid);
  const BaseDistribution pstar = optimal_distribution(table);
  const double l1 = table.coefficients.cwiseAbs().sum();
  s.c_pstar = l1 * l1;
  s.rate_constant = rate_constant(table, pstar);
  s.table_energy = table_energy(table);
  s.grid_mean_square = periodic_mean_square(target, s.grid);
  s.entries = table.coefficients.size();
  if (refine) {
    const FourierCoefficientTable fine = compute_fourier_table(target, n_max, 2 * s.grid);
    s.refine_delta = max_coefficient_delta(table, fine);
  }
  if (table_out) *table_out = std::move(table);
  return s;
}

int cmd_oracle(const fs::path& config, int n_max, const fs::path& output, bool refine, std::ostream& log) {
  return guarded(log, [&] {
    RunSpec spec = parse_config_file(config);
    if (auto env = seed_from_env()) spec.train.seed = *env;
    FourierCoefficientTable table;
    const OracleSummary s = run_oracle(spec, n_max, refine, &table);
    if (output.has_parent_path()) make_dirs(output.parent_path());
    write_atomic(output, [&](std::ostream& os) { write_table_csv(table, os); });
    log << s.line() << '\n';
    return static_cast<int>(kExitOk);
  });
}

MnistReport run_mnist(const MnistOptions& m, const CommandOptions& opts) {
  ClassifyConfig cfg = mnist_preset(m.scale, opts.seed_override.value_or(1));
  if (m.classes) cfg.classes = *m.classes;
  if (m.K) cfg.K = *m.K;
  if (m.iterations) cfg.iterations = *m.iterations;
  cfg.record_timing = !opts.deterministic;
  cfg.validate();
  if (m.test_images.has_value() != m.test_labels.has_value()) {
    throw ConfigError("--test-images and --test-labels go together");
  }

  const IdxImages images = load_idx_images_file(m.images);
  const IdxLabels labels = load_idx_labels_file(m.labels);
  if (images.count != labels.count) throw CountMismatchError("image and label files disagree on the count");

  RngStream rng = RngStream(cfg.seed).split(2000);
  PointMatrix test_x;
  std::vector<int> test_y;
  ThreeWaySplit split;
  if (m.test_images) {
    split = stratified_split(labels.labels, 1.0 / 6.0, 0.0, rng);
    const IdxImages ti = load_idx_images_file(*m.test_images);
    const IdxLabels tl = load_idx_labels_file(*m.test_labels);
    if (ti.count != tl.count) throw CountMismatchError("test image and label files disagree on the count");
    if (ti.pixels.cols() != images.pixels.cols()) throw DimensionError("test images differ in size");
    test_x = ti.pixels;
    test_y = tl.labels;
  } else {
    split = stratified_split(labels.labels, 0.2, 0.2, rng);
    test_x = gather_rows(images.pixels, split.test);
    test_y = gather_labels(labels.labels, split.test);
  }

  MnistReport rep;
  rep.result = train_one_vs_all(gather_rows(images.pixels, split.train), gather_labels(labels.labels, split.train),
                                gather_rows(images.pixels, split.validation),
                                gather_labels(labels.labels, split.validation), cfg);
  const auto keep = rows_with_labels(test_y, cfg.classes);
  const PointMatrix tx = gather_rows(test_x, keep);
  const std::vector<int> ty = gather_labels(test_y, keep);
  rep.test_accuracy = accuracy(rep.result.models, cfg.classes, tx, ty);
  rep.train_count = static_cast<Index>(rows_with_labels(gather_labels(labels.labels, split.train), cfg.classes).size());
  rep.validation_count =
      static_cast<Index>(rows_with_labels(gather_labels(labels.labels, split.validation), cfg.classes).size());
  rep.test_count = static_cast<Index>(ty.size());
  return rep;
}

int cmd_mnist(const MnistOptions& m, const fs::path& out_dir, const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    const MnistReport rep = run_mnist(m, opts);
    const auto& r = rep.result;
    make_dirs(out_dir);
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
      write_atomic(out_dir / ("digit_" + std::to_string(r.classes[c]) + "_history.csv"),
                   [&](std::ostream& os) { write_class_history_csv(r.class_history[c], os); });
    }
    write_atomic(out_dir / "overall.csv", [&](std::ostream& os) {
      os << "iteration,train_accuracy,val_accuracy\n";
      for (const auto& o : r.overall) {
        os << o.iteration << ',' << csv::format_double(o.train_accuracy) << ','
           << csv::format_double(o.val_accuracy) << '\n';
      }
    });
    write_atomic(out_dir / "accuracy.csv", [&](std::ostream& os) {
      os << "split,accuracy,iteration\n";
      os << "train," << csv::format_double(r.best_train_accuracy) << ',' << r.best_iteration << '\n';
      os << "validation," << csv::format_double(r.best_val_accuracy) << ',' << r.best_iteration << '\n';
      os << "test," << csv::format_double(rep.test_accuracy) << ',' << r.best_iteration << '\n';
    });
    const ClassifyConfig cfg = mnist_preset(m.scale, opts.seed_override.value_or(1));
    ordered_json meta = {{"command", "mnist"},
                         {"scale", to_string(m.scale)},
                         {"seed", cfg.seed},
                         {"classes", r.classes},
                         {"K", m.K.value_or(cfg.K)},
                         {"iterations", m.iterations.value_or(cfg.iterations)},
                         {"delta", cfg.delta},
                         {"lambda", cfg.lambda},
                         {"cg_rel_tol", cfg.cg_rel_tol},
                         {"images", m.images.string()},
                         {"labels", m.labels.string()},
                         {"counts", {{"train", rep.train_count}, {"validation", rep.validation_count}, {"test", rep.test_count}}},
                         {"versions", versions()}};
    write_atomic(out_dir / "metadata.json", [&](std::ostream& os) { os << meta.dump(2) << '\n'; });
    log << "mnist: best iteration " << r.best_iteration << ", train " << r.best_train_accuracy << ", validation "
        << r.best_val_accuracy << ", test " << rep.test_accuracy << '\n';
    return static_cast<int>(kExitOk);
  });
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive random Fourier features: training, experiment presets, oracles, MNIST"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Seed (overrides ARFF_SEED and the config)");
    sub->add_flag("--deterministic", deterministic, "Write zero timings so CSVs compare byte for byte");
  };

  std::string config, out_dir, name, scale = "desk", output, images, labels, test_images, test_labels;
  int jobs = 1, nmax = 0;
  bool refine = false, list = false;
  std::optional<Index> K;
  std::optional<int> iterations;
  std::vector<int> classes;

  auto* train = app.add_subcommand("train", "Run one training from an INI config");
  train->add_option("-c,--config", config, "INI config")->required();
  train->add_option("-o,--output", out_dir, "Output directory")->required();
  common(train);

  auto* exp = app.add_subcommand("experiment", "Run a preset sweep");
  exp->add_option("name", name, "Preset name");
  exp->add_option("--scale", scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  exp->add_option("-o,--output", out_dir, "Output directory");
  exp->add_option("--jobs", jobs, "Concurrent sweep points")->check(CLI::PositiveNumber);
  exp->add_flag("--list", list, "List presets and exit");
  common(exp);

  auto* orc = app.add_subcommand("oracle", "Fourier coefficient table and p* diagnostics");
  orc->add_option("-c,--config", config, "INI config ([target] section)")->required();
  orc->add_option("--nmax", nmax, "Largest lattice index per axis")->required();
  orc->add_option("-o,--output", output, "Table CSV")->required();
  orc->add_flag("--refine", refine, "Recompute on a doubled grid and report the max coefficient change");

  auto* mn = app.add_subcommand("mnist", "One-vs-all cos/sin networks on IDX data");
  mn->add_option("--images", images, "IDX image file (optionally gzipped)")->required();
  mn->add_option("--labels", labels, "IDX label file (optionally gzipped)")->required();
  mn->add_option("--test-images", test_images, "Separate test images");
  mn->add_option("--test-labels", test_labels, "Separate test labels");
  mn->add_option("--scale", scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  mn->add_option("-o,--output", out_dir, "Output directory")->required();
  mn->add_option("--classes", classes, "Digits to train (default by scale)")->delimiter(',');
  mn->add_option("--K", K, "Frequencies per network");
  mn->add_option("--iterations", iterations, "Resampling iterations");
  common(mn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(kExitConfig);
  }

  CommandOptions opts;
  opts.deterministic = deterministic;
  try {
    opts.seed_override = seed ? seed : seed_from_env();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (*train) return cmd_train(config, out_dir, opts, err);
  if (*exp) {
    if (list) {
      for (const auto& n : preset_names()) out << n << '\n';
      return kExitOk;
    }
    if (name.empty() || out_dir.empty()) {
      err << "error: experiment needs a preset name and -o DIR\n";
      return kExitConfig;
    }
    return cmd_experiment(name, parse_scale(scale), out_dir, jobs, opts, err);
  }
  if (*orc) return cmd_oracle(config, nmax, output, refine, out);
  MnistOptions m;
  m.images = images;
  m.labels = labels;
  if (!test_images.empty()) m.test_images = test_images;
  if (!test_labels.empty()) m.test_labels = test_labels;
  m.scale = parse_scale(scale);
  if (!classes.empty()) {
    std::sort(classes.begin(), classes.end());
    m.classes = classes;
  }
  m.K = K;
  m.iterations = iterations;
  return cmd_mnist(m, out_dir, opts, err);
}

}  // namespace arff::cli

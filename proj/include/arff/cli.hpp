#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arff/classify.hpp"
#include "arff/trainer.hpp"

namespace arff::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitIo = 4 };

/// Maps the library error hierarchy onto exit codes.
int exit_code_for(const std::exception& e);

/// Everything needed to generate data and run one training, as read from an INI file.
struct RunSpec {
  enum class Direction { Axis, Random, Given };

  TargetKind kind = TargetKind::Bump;
  int dimension = 1;
  Direction direction_mode = Direction::Axis;
  /// Given: as written in the file; normalized when the target is resolved.
  RealVector direction;
  double sharpness = 0.1;
  std::optional<double> period;
  double constant = 1.0;
  RealVector mode;

  Index samples = 1000;
  double noise_std = 0.0;
  /// When set, the noise level is chosen so the NSR of the training set is about this value.
  std::optional<double> nsr;
  /// Clean test set of round(test_fraction * samples) points; 0 disables it.
  double test_fraction = 0.5;

  /// Walk mode/lattice, base and reference are filled by resolve_train_config.
  TrainConfig train;
  /// auto | normal | lattice_normal
  std::string base = "auto";
  /// > 0 records the TV distance to p* computed from a table of this size.
  int reference_nmax = 0;
  int reference_grid = 0;
  /// Oracle grid (0 picks a default from n_max).
  int oracle_grid = 0;
};

/// Target with the direction resolved; Random draws from `rng`.
TargetSpec resolve_target(const RunSpec& spec, RngStream& rng);

/// Valid keys per section, in the order they are written back.
const std::vector<std::pair<std::string, std::vector<std::string>>>& config_schema();

/// Parses the INI text. All unknown sections/keys and bad values are collected
/// and reported together in one ConfigError.
RunSpec parse_config(std::istream& in);
RunSpec parse_config_file(const std::filesystem::path& path);

/// Writes a config that parses back to the same RunSpec.
void write_config(const RunSpec& spec, std::ostream& out);

std::size_t edit_distance(std::string_view a, std::string_view b);
/// Closest candidate by edit distance (first one on ties).
std::string nearest_key(std::string_view key, std::span<const std::string> candidates);

/// ARFF_SEED, if set; throws ConfigError when it is not an unsigned integer.
std::optional<std::uint64_t> seed_from_env();

struct PreparedData {
  TargetSpec target;  // direction resolved
  Dataset train;
  std::optional<Dataset> test;
  /// NSR of the training targets (0 for clean data).
  double nsr = 0.0;
};

/// Data stream: RngStream(seed).split(1000). Direction first (if random), then
/// training inputs, training noise, then the test set.
PreparedData prepare_data(const RunSpec& spec);

/// Fills walk lattice/base/reference from the resolved target and checks the whole spec.
TrainConfig resolve_train_config(const RunSpec& spec, const TargetSpec& resolved_target);

struct RunOutcome {
  PreparedData data;
  TrainResult result;
};
RunOutcome execute(const RunSpec& spec);

/// iteration,train_rel_err,val_rel_err,cg_iters,tv_to_reference
void write_metrics_csv(const std::vector<IterationMetrics>& metrics, std::ostream& out);
std::vector<IterationMetrics> read_metrics_csv(std::istream& in);

enum class Scale { Desk, Full };
std::string to_string(Scale s);
Scale parse_scale(const std::string& name);

struct SweepPoint {
  std::string label;
  RunSpec spec;
};

struct ExperimentPreset {
  std::string name;
  std::string description;
  std::vector<SweepPoint> points;
};

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names. "mnist" has no regression sweep; use mnist_preset.
ExperimentPreset make_preset(const std::string& name, Scale scale, std::uint64_t seed = 1);
ClassifyConfig mnist_preset(Scale scale, std::uint64_t seed = 1);

/// One row of sweep.csv.
struct SweepRow {
  int point = 0;
  std::string label;
  std::string algorithm;
  Index K = 0;
  Index J = 0;
  double delta = 0.0;
  double epsilon = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double noise_std = 0.0;
  double nsr = 0.0;
  double train_rel_err = 0.0;
  double val_rel_err = 0.0;
  std::optional<double> test_rel_err;
};
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);
std::vector<SweepRow> read_sweep_csv(std::istream& in);

struct CommandOptions {
  std::optional<std::uint64_t> seed_override;
  /// Forces record_timing off so every CSV is reproducible byte for byte.
  bool deterministic = false;
};

/// Writes history.csv, model.csv, metadata.json and snapshots/.
int cmd_train(const std::filesystem::path& config, const std::filesystem::path& out_dir,
              const CommandOptions& opts, std::ostream& log);

/// Writes <label>/{config.ini,history.csv,metrics.csv,model.csv} per point and sweep.csv.
int cmd_experiment(const std::string& preset, Scale scale, const std::filesystem::path& out_dir,
                   int jobs, const CommandOptions& opts, std::ostream& log);

/// Runs a sweep in memory (no files); rows are in point order whatever `jobs` is.
std::vector<SweepRow> run_sweep(const ExperimentPreset& preset, int jobs,
                                const std::filesystem::path* out_dir = nullptr);

struct OracleSummary {
  int n_max = 0;
  int grid = 0;
  double c_pstar = 0.0;
  double rate_constant = 0.0;
  double table_energy = 0.0;
  double grid_mean_square = 0.0;
  Index entries = 0;
  std::optional<double> refine_delta;

  std::string line() const;
};
OracleSummary run_oracle(const RunSpec& spec, int n_max, bool refine,
                         FourierCoefficientTable* table_out = nullptr);
int cmd_oracle(const std::filesystem::path& config, int n_max, const std::filesystem::path& output,
               bool refine, std::ostream& log);

struct MnistOptions {
  std::filesystem::path images;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> test_images;
  std::optional<std::filesystem::path> test_labels;
  Scale scale = Scale::Desk;
  std::optional<std::vector<int>> classes;
  std::optional<Index> K;
  std::optional<int> iterations;
};

struct MnistReport {
  OneVsAllResult result;
  double test_accuracy = 0.0;
  Index train_count = 0;
  Index validation_count = 0;
  Index test_count = 0;
};

/// Without separate test files the labelled set is split 60/20/20 per digit;
/// with them, the training file is split 5:1 into train/validation.
MnistReport run_mnist(const MnistOptions& mopts, const CommandOptions& opts);

/// Writes digit_<n>_history.csv, overall.csv, accuracy.csv and metadata.json.
int cmd_mnist(const MnistOptions& mopts, const std::filesystem::path& out_dir,
              const CommandOptions& opts, std::ostream& log);

/// Entry point shared by the executable; argv as given to main.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace arff::cli

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "arff/core.hpp"
#include "arff/linalg.hpp"
#include "arff/sampler.hpp"
#include "arff/targets.hpp"

namespace arff {

enum class Algorithm {
  RandomWalk = 1,      // continuous walk, resample on |beta_k|
  LatticeWalk = 2,     // lattice walk, cutoff + optional base mix
  AdaptiveWalk = 3,    // covariance-adapted walk, simplified cutoff
};

enum class InitMode { ZeroFrequencies, FromBase };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);
std::string to_string(InitMode m);
InitMode parse_init_mode(const std::string& name);

struct TrainConfig {
  Algorithm algorithm = Algorithm::LatticeWalk;
  Index K = 256;
  int iterations = 25;
  WalkConfig walk;
  CutoffConfig cutoff;
  SolverConfig solver;
  BaseDistribution base;
  InitMode init = InitMode::ZeroFrequencies;
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;

  /// Snapshot cadence; 0 means ceil(N/20), 1 keeps every iteration.
  int snapshot_every = 0;
  /// When false every wall_ms is written as 0 so histories compare byte for byte.
  bool record_timing = true;
  /// Cross-check against dense_solve every this many iterations (0 disables).
  int verify_every = 0;
  /// Optional p* used to record the total variation distance per iteration.
  std::optional<BaseDistribution> reference;

  /// Checks internal consistency against the data dimension.
  void validate(int dimension) const;
  int effective_snapshot_every() const;
};

enum class Phase { Walk, Solve, Resample, Final };
std::string to_string(Phase p);
Phase parse_phase(const std::string& name);

/// One line of the history CSV.
struct HistoryRow {
  int iteration = 0;
  Phase phase = Phase::Solve;
  std::optional<double> train_rel_err;
  std::optional<double> val_rel_err;
  int cg_iters = 0;
  double wall_ms = 0.0;
};

/// Metrics after the solve of one iteration (N entries plus the final solve).
struct IterationMetrics {
  int iteration = 0;
  double train_rel_err = 0.0;
  double val_rel_err = 0.0;
  int cg_iters = 0;
  std::optional<double> tv_to_reference;
  /// Largest relative spread of dense-solver amplitudes inside a duplicate group.
  std::optional<double> equal_amplitude_spread;
};

struct FrequencySnapshot {
  int iteration = 0;
  PointMatrix omega;
  RealVector abs_beta;
};

struct RunHistory {
  std::vector<HistoryRow> rows;
  std::vector<IterationMetrics> metrics;
  std::optional<double> test_rel_err;
  std::vector<FrequencySnapshot> snapshots;
  std::vector<std::string> warnings;
};

struct TrainResult {
  RffModel model;
  RunHistory history;
};

/// Index partition of J samples into training and validation rows.
struct DataSplit {
  std::vector<Index> train;
  std::vector<Index> validation;
};

/// Seeded permutation; at least one row on each side.
DataSplit split_dataset(Index samples, double validation_fraction, RngStream& rng);

TrainResult run(const TrainConfig& config, const Dataset& dataset,
                const std::optional<Dataset>& test_set = std::nullopt);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<Index> counts;
  Index underflow = 0;
  Index overflow = 0;

  Index total() const;
};

/// Counts of v . omega_k over [lo, hi) in equal bins.
Histogram histogram_projected(const FrequencySet& freqs, const RealVector& v, int bins, double lo,
                              double hi);

/// 1/2 sum |empirical - p*| over lattice indices; mass outside p* counts in full.
double tv_distance_to_optimal(const FrequencySet& freqs, const BaseDistribution& p_star);

void write_history_csv(const RunHistory& history, std::ostream& out);
std::vector<HistoryRow> read_history_csv(std::istream& in);

void write_snapshot_csv(const FrequencySnapshot& snapshot, std::ostream& out);
FrequencySnapshot read_snapshot_csv(std::istream& in, int iteration = 0);

/// omega_1..omega_d,re,im
void write_model_csv(const RffModel& model, std::ostream& out);
RffModel read_model_csv(std::istream& in);

}  // namespace arff

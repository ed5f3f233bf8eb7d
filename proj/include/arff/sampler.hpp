#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "arff/core.hpp"
#include "arff/rng.hpp"

namespace arff {

/// Amplitudes summed over coinciding frequencies.
///
/// Entry n corresponds to row n of `keys`; `group_of[k]` maps the k-th input
/// frequency to its entry.
struct AggregatedAmplitudes {
  FrequencySet keys;
  ComplexVector aggregate;          // beta-bar_n
  std::vector<Index> multiplicity;  // m_n
  std::vector<Index> group_of;

  Index size() const noexcept { return aggregate.size(); }
};

AggregatedAmplitudes aggregate_equal_frequencies(const FrequencySet& freqs,
                                                 const ComplexVector& amps);

/// Same result via sorting the frequency keys and merging equal neighbours;
/// entries come back in first-appearance order so the two paths compare directly.
AggregatedAmplitudes aggregate_by_sorting(const FrequencySet& freqs, const ComplexVector& amps);

struct CutoffConfig {
  double epsilon = 0.0;
  double q_epsilon = 0.0;

  void validate() const;
};

struct CutoffDistribution {
  std::vector<Index> keys;  // entries of the aggregation with |beta-bar| >= epsilon
  RealVector probabilities;
};

/// p_n = |beta-bar_n| / sum over survivors. Throws EmptyCutoffError if nothing survives.
CutoffDistribution cutoff_distribution(const AggregatedAmplitudes& agg, double epsilon);

/// `count` iid categorical draws, by inversion of the cumulative sum.
std::vector<Index> multinomial_resample(const RealVector& probabilities, Index count,
                                        RngStream& rng);

using FrequencySampler = std::function<FrequencySet(Index count, RngStream& rng)>;

struct ResampleReport {
  Index from_cutoff = 0;
  Index from_base = 0;
  bool cutoff_fell_back = false;
  std::vector<std::string> warnings;
};

/// K-bar = K - ceil(K q) draws from the cutoff distribution followed by
/// ceil(K q) draws from `base`. An empty cutoff set falls back to epsilon = 0.
FrequencySet mixed_resample(const AggregatedAmplitudes& agg, const CutoffConfig& cfg,
                            const FrequencySampler& base, Index count, RngStream& rng,
                            ResampleReport* report = nullptr);

/// Draws `count` rows of `freqs` with probability proportional to `weights`.
FrequencySet resample_by_weights(const FrequencySet& freqs, const RealVector& weights, Index count,
                                 RngStream& rng);

/// |beta_k|, set to zero below epsilon. If every weight is cut, returns the
/// uncut weights and sets *fell_back.
RealVector simplified_cutoff_weights(const ComplexVector& amps, double epsilon,
                                     bool* fell_back = nullptr);

struct WalkConfig {
  enum class Mode { Continuous, LatticeProjected, AdaptiveCovariance };

  Mode mode = Mode::Continuous;
  double delta = 0.5;
  LatticeSpec lattice;    // LatticeProjected only
  double eps_hat = 1e-3;  // AdaptiveCovariance only

  static WalkConfig continuous(double delta);
  static WalkConfig lattice_projected(double delta, const LatticeSpec& lattice);
  static WalkConfig adaptive(double delta, double eps_hat = 1e-3);

  void validate() const;
};

/// Running record of the per-iteration empirical frequency covariances.
struct CovarianceState {
  std::vector<Eigen::MatrixXd> per_iteration;
  /// Mean of per_iteration; the identity before the first update.
  Eigen::MatrixXd running_average;

  CovarianceState() = default;
  explicit CovarianceState(int dimension);

  int dimension() const noexcept { return static_cast<int>(running_average.rows()); }
};

/// omega_k + delta * zeta_k with zeta_k standard normal.
FrequencySet random_walk_step(const FrequencySet& freqs, const WalkConfig& cfg, RngStream& rng);

/// Continuous step, then nearest lattice point (ties away from zero).
FrequencySet lattice_walk_step(const FrequencySet& freqs, const WalkConfig& cfg, RngStream& rng);

/// omega_k + delta * z_k with z_k ~ N(0, C + eps_hat I).
FrequencySet adaptive_walk_step(const FrequencySet& freqs, const WalkConfig& cfg,
                                const CovarianceState& cov, RngStream& rng);

/// Dispatch on cfg.mode; `cov` is only read in adaptive mode.
FrequencySet walk_step(const FrequencySet& freqs, const WalkConfig& cfg,
                       const CovarianceState* cov, RngStream& rng);

/// Population covariance (1/K) sum (w - mean)(w - mean)^T.
Eigen::MatrixXd empirical_covariance(const FrequencySet& freqs);

/// Appends the covariance of `freqs` and refreshes the running average.
CovarianceState update_covariance(CovarianceState cov, const FrequencySet& freqs);

}  // namespace arff

#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "arff/errors.hpp"

namespace arff {

using Complex = std::complex<double>;
using Index = Eigen::Index;

/// Row j holds one point (or one frequency) in R^d.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Row k holds the integer lattice index n of a lattice frequency.
using IndexMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Periodic cell [-L, L]^d; frequencies live on (pi/L) Z^d.
struct LatticeSpec {
  double half_period = 1.0;
  int dimension = 1;

  LatticeSpec() = default;
  LatticeSpec(double half_period, int dimension);

  double spacing() const noexcept { return kPi / half_period; }
  double period() const noexcept { return 2.0 * half_period; }

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;
};

/// Ordered list of K frequencies, continuous or on a lattice.
///
/// Lattice sets keep the exact integer indices; coordinates are always
/// spacing * index so grouping never depends on floating point equality.
class FrequencySet {
 public:
  FrequencySet() = default;

  static FrequencySet continuous(PointMatrix coordinates);
  static FrequencySet lattice(const LatticeSpec& spec, IndexMatrix indices);
  /// `count` copies of the zero frequency; lattice-tagged when `lattice` is set.
  static FrequencySet zeros(Index count, int dimension,
                            const std::optional<LatticeSpec>& lattice = std::nullopt);

  Index size() const noexcept { return coords_.rows(); }
  int dimension() const noexcept { return static_cast<int>(coords_.cols()); }
  bool is_lattice() const noexcept { return lattice_.has_value(); }
  const std::optional<LatticeSpec>& lattice_spec() const noexcept { return lattice_; }

  const PointMatrix& coordinates() const noexcept { return coords_; }
  /// Lattice indices; empty matrix for continuous sets.
  const IndexMatrix& indices() const noexcept { return indices_; }

  /// Rows in the given order (with repetition allowed).
  FrequencySet gather(std::span<const Index> rows) const;
  /// Concatenation; both sets must share the domain tag.
  static FrequencySet concat(const FrequencySet& a, const FrequencySet& b);

 private:
  PointMatrix coords_;
  IndexMatrix indices_;
  std::optional<LatticeSpec> lattice_;
};

/// beta(x) = sum_k amplitudes_k exp(i nu_k . x)
struct RffModel {
  FrequencySet frequencies;
  ComplexVector amplitudes;

  RffModel() = default;
  RffModel(FrequencySet freqs, ComplexVector amps);
};

/// J samples x_j with targets y_j = f(x_j) + xi_j.
struct Dataset {
  PointMatrix inputs;
  ComplexVector targets;
  double noise_std = 0.0;

  Dataset() = default;
  Dataset(PointMatrix x, ComplexVector y, double noise_std = 0.0);

  Index size() const noexcept { return inputs.rows(); }
  int dimension() const noexcept { return static_cast<int>(inputs.cols()); }
  /// Subset of rows in the given order.
  Dataset subset(std::span<const Index> rows) const;
};

/// Partition of the K frequencies into classes of identical frequencies.
///
/// Groups are numbered by first appearance. Lattice sets compare integer
/// indices, continuous sets compare coordinate bit patterns.
struct FrequencyGrouping {
  std::vector<Index> group_of;        // size K
  std::vector<Index> representative;  // first member of each group
  std::vector<Index> multiplicity;    // members per group

  Index group_count() const noexcept { return static_cast<Index>(representative.size()); }
};

FrequencyGrouping group_frequencies(const FrequencySet& freqs);

/// Evaluates the model at every row of `points`.
ComplexVector evaluate_model(const RffModel& model, const PointMatrix& points);

/// sum |predicted - truth|^2 / sum |truth|^2
double relative_l2_error(const ComplexVector& predicted, const ComplexVector& truth);

/// sum |y_j - f(x_j)|^2 / sum |y_j|^2 with clean[j] = f(x_j).
double noise_to_signal_ratio(const Dataset& dataset, const ComplexVector& clean);

namespace detail {

/// Streams rows of the distinct-column design matrix E_jg = exp(i w_g . x_j)
/// in fixed blocks so every reduction happens in the same order.
///
/// For lattice frequencies the entries are products of per-axis powers
/// exp(i (pi/L) n x), tabulated once per point, which avoids a sin/cos pair
/// per entry.
class PhaseBlocks {
 public:
  static constexpr Index kBlockRows = 256;
  /// Upper bound on the per-axis power tables; larger problems use sin/cos.
  static constexpr std::size_t kMaxTableBytes = std::size_t{256} << 20;

  PhaseBlocks() = default;
  /// `distinct` holds one row per column of E.
  PhaseBlocks(const FrequencySet& distinct, const PointMatrix& points);

  Index rows() const noexcept { return points_.rows(); }
  Index cols() const noexcept { return freqs_.rows(); }
  Index block_count() const noexcept { return (rows() + kBlockRows - 1) / kBlockRows; }
  Index block_begin(Index b) const noexcept { return b * kBlockRows; }
  Index block_rows(Index b) const noexcept;
  bool tabulated() const noexcept { return !powers_.empty(); }

  /// Fills `out` (block_rows(b) x cols()) with the exponentials of block b.
  void fill(Index b, Eigen::MatrixXcd& out) const;

 private:
  PointMatrix freqs_;
  PointMatrix points_;
  IndexMatrix indices_;
  std::vector<Eigen::MatrixXcd> powers_;  // per axis: J x (hi - lo + 1)
  std::vector<std::int64_t> lowest_;
};

/// The group representatives, one row per group.
FrequencySet distinct_frequencies(const FrequencySet& freqs, const FrequencyGrouping& groups);

/// Sums v over each group in member order.
ComplexVector aggregate_by_group(const ComplexVector& v, const FrequencyGrouping& groups);

}  // namespace detail

}  // namespace arff

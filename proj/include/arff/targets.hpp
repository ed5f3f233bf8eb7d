#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "arff/core.hpp"
#include "arff/rng.hpp"

namespace arff {

enum class TargetKind {
  Bump,          // exp(-|v.x|/a) exp(-|x|^2/2)
  SineIntegral,  // Si(v.x/a) exp(-|x|^2/2)
  Constant,      // c
  Cosine,        // cos(w.x)
};

std::string to_string(TargetKind kind);
TargetKind parse_target_kind(const std::string& name);

struct TargetSpec {
  TargetKind kind = TargetKind::Bump;
  RealVector direction;           // unit vector v (Bump, SineIntegral)
  double sharpness = 0.1;         // a
  std::optional<double> period;   // q = 2L; periodizes when set
  double constant = 1.0;          // Constant
  RealVector mode;                // w (Cosine)

  static TargetSpec bump(RealVector v, double a, std::optional<double> q = std::nullopt);
  static TargetSpec sine_integral(RealVector v, double a, std::optional<double> q = std::nullopt);
  static TargetSpec constant_value(int dimension, double c, std::optional<double> q = std::nullopt);
  static TargetSpec cosine(RealVector w, std::optional<double> q = std::nullopt);

  int dimension() const;
  void validate() const;
  /// Lattice of the periodic cell; throws if `period` is unset.
  LatticeSpec lattice() const;
};

/// Si(t) = int_0^t sin(s)/s ds.
double sine_integral(double t);

/// x - q floor(x/q + 1/2), in [-q/2, q/2).
double wrap_periodic(double x, double q);

double evaluate_target(const TargetSpec& spec, std::span<const double> x);
RealVector evaluate_target(const TargetSpec& spec, const PointMatrix& points);

/// x_j iid standard normal, y_j = f(x_j) + s * N(0, 1). All inputs are drawn first.
Dataset sample_dataset(const TargetSpec& spec, Index samples, double noise_std, RngStream& rng);

/// f(x_j) for every input of the dataset.
ComplexVector clean_targets(const TargetSpec& spec, const Dataset& data);

/// Normalized standard normal vector.
RealVector random_direction(int dimension, RngStream& rng);

/// A unit vector orthogonal to v: the +pi/2 rotation in d = 2, Gram-Schmidt otherwise.
RealVector perpendicular_direction(const RealVector& v);

/// Coefficients f-hat(omega_n) for |n_i| <= n_max, stored as a full box in
/// lexicographic order with the last coordinate varying fastest.
struct FourierCoefficientTable {
  LatticeSpec lattice;
  int n_max = 0;
  IndexMatrix indices;
  ComplexVector coefficients;

  Index size() const noexcept { return coefficients.size(); }
  int dimension() const noexcept { return lattice.dimension; }
  /// Row of index n in the box, or -1 when n lies outside it.
  Index position(std::span<const std::int64_t> n) const;
  Complex at(std::span<const std::int64_t> n) const;
};

inline constexpr int kFourierOracleMaxDimension = 3;

/// Trapezoidal rule on a uniform periodic grid with `grid_points` nodes per axis.
FourierCoefficientTable compute_fourier_table(const TargetSpec& spec, int n_max, int grid_points);

/// (2L)^-d int |f|^2 over the periodic cell, by the same grid rule.
double periodic_mean_square(const TargetSpec& spec, int grid_points);

/// sum |f-hat|^2 over the table.
double table_energy(const FourierCoefficientTable& table);

/// The truncated Fourier series as a model on the table's lattice.
RffModel table_model(const FourierCoefficientTable& table);

/// Largest coefficient change between two tables on the same box.
double max_coefficient_delta(const FourierCoefficientTable& a, const FourierCoefficientTable& b);

void write_table_csv(const FourierCoefficientTable& table, std::ostream& out);
/// Reads the CSV back; `half_period` is not stored in the file.
FourierCoefficientTable read_table_csv(std::istream& in, double half_period);

struct BaseDistribution {
  enum class Kind { StandardNormal, LatticeProjectedNormal, Tabulated };

  Kind kind = Kind::StandardNormal;
  int dimension = 1;
  double scale = 1.0;
  LatticeSpec lattice;      // LatticeProjectedNormal and Tabulated
  IndexMatrix atoms;        // Tabulated
  RealVector probabilities; // Tabulated

  static BaseDistribution standard_normal(int dimension, double scale = 1.0);
  static BaseDistribution lattice_normal(const LatticeSpec& lattice, double scale = 1.0);
  static BaseDistribution tabulated(const LatticeSpec& lattice, IndexMatrix atoms,
                                    RealVector probabilities);

  bool on_lattice() const noexcept { return kind != Kind::StandardNormal; }
  void validate() const;
};

FrequencySet sample_base(const BaseDistribution& dist, Index count, RngStream& rng);

/// p*(n) = |f-hat(n)| / sum |f-hat| over the table's atoms.
BaseDistribution optimal_distribution(const FourierCoefficientTable& table);

/// C_p = sum |f-hat|^2 / p. Throws SupportError where p = 0 but f-hat != 0.
double rate_constant(const FourierCoefficientTable& table, const BaseDistribution& p);

/// sum |f-hat|^4 / p^3, a diagnostic companion of rate_constant.
double rate_constant_prime(const FourierCoefficientTable& table, const BaseDistribution& p);

/// Probability of each table atom under a tabulated p (0 for missing atoms).
RealVector probabilities_on_table(const FourierCoefficientTable& table, const BaseDistribution& p);

}  // namespace arff

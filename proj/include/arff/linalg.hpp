#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "arff/core.hpp"

namespace arff {

/// Regularization weights and solver tolerances for
///   (1/J) sum_j |beta(x_j) - y_j|^2 + lambda1 |b|^2 + lambda2 |b|^4.
struct SolverConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double cg_rel_tol = 1e-3;
  int cg_max_iters = 2000;
  double newton_tol = 1e-8;
  int newton_max_iters = 50;

  /// Throws ConfigError on bad tolerances, negative weights, or an
  /// unregularized over-parameterized problem (K > J, lambda1 = lambda2 = 0).
  void validate(Index samples, Index features) const;
};

struct SolveReport {
  /// CG iterations; for Newton, the sum over all inner solves.
  int iterations = 0;
  int newton_iterations = 0;
  /// Final smoothed relative residual of the (last) CG solve.
  double relative_residual = 0.0;
  /// Norm of the objective gradient at the returned point.
  double gradient_norm = 0.0;
  bool converged = false;
  /// Relative residual after each CG iteration (first entry: initial guess).
  std::vector<double> residual_history;
};

struct SolveResult {
  ComplexVector amplitudes;
  SolveReport report;
};

/// The map v -> A v with A_jk = exp(i nu_k . x_j), applied without storing A.
///
/// Coinciding frequencies share one column evaluation, and rows are processed
/// in fixed-size blocks so reductions are reproducible.
class DesignOperator {
 public:
  DesignOperator(const FrequencySet& freqs, const PointMatrix& inputs);

  Index rows() const noexcept { return blocks_.rows(); }
  Index cols() const noexcept { return static_cast<Index>(groups_.group_of.size()); }
  Index distinct_columns() const noexcept { return groups_.group_count(); }

  ComplexVector apply(const ComplexVector& v) const;
  ComplexVector adjoint(const ComplexVector& r) const;
  /// (A* A / J) v
  ComplexVector normal(const ComplexVector& v) const;

 private:
  ComplexVector expand(const ComplexVector& per_group) const;

  FrequencyGrouping groups_;
  detail::PhaseBlocks blocks_;
};

ComplexVector apply_design(const FrequencySet& freqs, const PointMatrix& inputs,
                           const ComplexVector& v);
ComplexVector apply_adjoint(const FrequencySet& freqs, const PointMatrix& inputs,
                            const ComplexVector& r);

/// Dense J x K design matrix. Oracle use only.
Eigen::MatrixXcd materialize_design(const FrequencySet& freqs, const PointMatrix& inputs);

/// Matrix-free CG on (A*A/J + lambda1 I) b = A*y/J. Requires lambda2 == 0.
/// Throws SolverError when the tolerance is not reached in cg_max_iters.
SolveResult cg_solve(const FrequencySet& freqs, const Dataset& data, const SolverConfig& cfg);

/// Direct LDL^T factorization of the normal equations (K <= 2000).
ComplexVector dense_solve(const FrequencySet& freqs, const Dataset& data, double lambda1);

/// Damped Newton-CG on the quartic objective. Requires lambda2 > 0.
SolveResult newton_solve(const FrequencySet& freqs, const Dataset& data, const SolverConfig& cfg);

/// Dispatches to cg_solve or newton_solve on lambda2.
SolveResult solve_amplitudes(const FrequencySet& freqs, const Dataset& data,
                             const SolverConfig& cfg);

double regularized_objective(const FrequencySet& freqs, const Dataset& data, double lambda1,
                             double lambda2, const ComplexVector& beta);

/// Gradient with respect to (Re b, Im b), packed as gradient_re + i gradient_im.
ComplexVector objective_gradient(const FrequencySet& freqs, const Dataset& data, double lambda1,
                                 double lambda2, const ComplexVector& beta);

inline constexpr Index kDenseSolveMaxFeatures = 2000;

// ---------------------------------------------------------------------------

struct CgOutcome {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::vector<double> residual_history;
};

template <class Vector>
double real_dot(const Vector& a, const Vector& b) {
  return std::real(a.dot(b));
}

/// Conjugate gradients for a self-adjoint positive definite operator under the
/// real inner product Re(a^H b), started from `x`.
///
/// Minimal residual smoothing is applied to the iterates, so the reported
/// residual norm never increases. On reaching the tolerance the true residual
/// of the smoothed iterate is recomputed; if it fails the test, CG restarts
/// from that iterate.
template <class Vector, class Operator>
CgOutcome conjugate_gradient(const Operator& op, const Vector& rhs, Vector& x, double rel_tol,
                             int max_iters) {
  CgOutcome out;
  const double b_norm = std::sqrt(real_dot(rhs, rhs));
  if (b_norm == 0.0) {
    x.setZero(rhs.size());
    out.converged = true;
    out.residual_history.push_back(0.0);
    return out;
  }
  if (!std::isfinite(b_norm)) throw SolverError("non-finite right-hand side", 0, b_norm);

  Vector r = rhs - op(x);
  Vector p = r;
  Vector y = x;
  Vector s = r;
  double rr = real_dot(r, r);
  double res = std::sqrt(rr) / b_norm;
  out.residual_history.push_back(res);

  for (int it = 1; it <= max_iters; ++it) {
    const Vector q = op(p);
    const double pq = real_dot(p, q);
    if (!(pq > 0.0) || !std::isfinite(pq)) {
      if (rr == 0.0) break;
      throw SolverError("conjugate gradient breakdown (operator not positive definite or NaN)",
                        it, res);
    }
    const double alpha = rr / pq;
    x += alpha * p;
    r -= alpha * q;

    const Vector diff = r - s;
    const double dd = real_dot(diff, diff);
    if (dd > 0.0) {
      const double eta = -real_dot(s, diff) / dd;
      y += eta * (x - y);
      s += eta * diff;
    }
    res = std::sqrt(real_dot(s, s)) / b_norm;
    if (!std::isfinite(res)) throw SolverError("non-finite residual in conjugate gradient", it, res);
    out.residual_history.push_back(res);
    out.iterations = it;

    if (res <= rel_tol) {
      const Vector t = rhs - op(y);
      const double true_res = std::sqrt(real_dot(t, t)) / b_norm;
      if (true_res <= rel_tol) {
        x = y;
        out.relative_residual = true_res;
        out.converged = true;
        return out;
      }
      // Recurrence drifted from the true residual: restart from the smoothed iterate.
      x = y;
      r = t;
      s = t;
      p = r;
      rr = real_dot(r, r);
      continue;
    }

    const double rr_new = real_dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    p = r + beta * p;
  }
  x = y;
  out.relative_residual = res;
  out.converged = false;
  return out;
}

}  // namespace arff

#include "arff/linalg.hpp"

#include <algorithm>
#include <string>

#include <Eigen/Cholesky>

namespace arff {

void SolverConfig::validate(Index samples, Index features) const {
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ConfigError("lambda1 must be >= 0");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw ConfigError("lambda2 must be >= 0");
  if (!(cg_rel_tol > 0.0)) throw ConfigError("cg_rel_tol must be > 0");
  if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be > 0");
  if (cg_max_iters < 1) throw ConfigError("cg_max_iters must be >= 1");
  if (newton_max_iters < 1) throw ConfigError("newton_max_iters must be >= 1");
  if (features > samples && lambda1 == 0.0 && lambda2 == 0.0) {
    throw ConfigError("over-parameterized problem (K=" + std::to_string(features) +
                      " > J=" + std::to_string(samples) + ") requires lambda1 > 0");
  }
}

DesignOperator::DesignOperator(const FrequencySet& freqs, const PointMatrix& inputs)
    : groups_(group_frequencies(freqs)),
      blocks_(detail::distinct_frequencies(freqs, groups_), inputs) {}

ComplexVector DesignOperator::expand(const ComplexVector& per_group) const {
  ComplexVector out(cols());
  for (Index k = 0; k < cols(); ++k) out(k) = per_group(groups_.group_of[static_cast<std::size_t>(k)]);
  return out;
}

ComplexVector DesignOperator::apply(const ComplexVector& v) const {
  if (v.size() != cols()) throw DimensionError("design apply: amplitude length mismatch");
  const ComplexVector w = detail::aggregate_by_group(v, groups_);
  const detail::PhaseBlocks& blocks = blocks_;
  ComplexVector out(rows());
  Eigen::MatrixXcd e;
  for (Index b = 0; b < blocks.block_count(); ++b) {
    blocks.fill(b, e);
    out.segment(blocks.block_begin(b), e.rows()).noalias() = e * w;
  }
  return out;
}

ComplexVector DesignOperator::adjoint(const ComplexVector& r) const {
  if (r.size() != rows()) throw DimensionError("design adjoint: residual length mismatch");
  const detail::PhaseBlocks& blocks = blocks_;
  ComplexVector acc = ComplexVector::Zero(distinct_columns());
  Eigen::MatrixXcd e;
  for (Index b = 0; b < blocks.block_count(); ++b) {
    blocks.fill(b, e);
    acc.noalias() += e.adjoint() * r.segment(blocks.block_begin(b), e.rows());
  }
  return expand(acc);
}

ComplexVector DesignOperator::normal(const ComplexVector& v) const {
  if (v.size() != cols()) throw DimensionError("normal operator: amplitude length mismatch");
  const ComplexVector w = detail::aggregate_by_group(v, groups_);
  const detail::PhaseBlocks& blocks = blocks_;
  ComplexVector acc = ComplexVector::Zero(distinct_columns());
  ComplexVector s;
  Eigen::MatrixXcd e;
  for (Index b = 0; b < blocks.block_count(); ++b) {
    blocks.fill(b, e);
    s.noalias() = e * w;
    acc.noalias() += e.adjoint() * s;
  }
  acc /= static_cast<double>(rows());
  return expand(acc);
}

ComplexVector apply_design(const FrequencySet& freqs, const PointMatrix& inputs,
                           const ComplexVector& v) {
  return DesignOperator(freqs, inputs).apply(v);
}

ComplexVector apply_adjoint(const FrequencySet& freqs, const PointMatrix& inputs,
                            const ComplexVector& r) {
  return DesignOperator(freqs, inputs).adjoint(r);
}

Eigen::MatrixXcd materialize_design(const FrequencySet& freqs, const PointMatrix& inputs) {
  if (inputs.cols() != freqs.dimension()) throw DimensionError("design: dimension mismatch");
  const Eigen::MatrixXd phase = inputs * freqs.coordinates().transpose();
  Eigen::MatrixXcd a(phase.rows(), phase.cols());
  a.real() = phase.array().cos().matrix();
  a.imag() = phase.array().sin().matrix();
  return a;
}

namespace {

void check_data(const FrequencySet& freqs, const Dataset& data) {
  if (data.dimension() != freqs.dimension()) {
    throw DimensionError("dataset dimension " + std::to_string(data.dimension()) +
                         " does not match frequency dimension " +
                         std::to_string(freqs.dimension()));
  }
  if (freqs.size() < 1) throw InvalidArgument("at least one frequency is required");
}

}  // namespace

SolveResult cg_solve(const FrequencySet& freqs, const Dataset& data, const SolverConfig& cfg) {
  check_data(freqs, data);
  cfg.validate(data.size(), freqs.size());
  if (cfg.lambda2 != 0.0) throw ConfigError("cg_solve requires lambda2 == 0; use newton_solve");

  const DesignOperator design(freqs, data.inputs);
  const double inv_j = 1.0 / static_cast<double>(data.size());
  const ComplexVector rhs = design.adjoint(data.targets) * inv_j;
  const double lambda = cfg.lambda1;
  auto op = [&](const ComplexVector& v) -> ComplexVector { return design.normal(v) + lambda * v; };

  ComplexVector beta = ComplexVector::Zero(freqs.size());
  CgOutcome cg = conjugate_gradient(op, rhs, beta, cfg.cg_rel_tol, cfg.cg_max_iters);
  if (!cg.converged) {
    throw SolverError("conjugate gradient did not reach relative tolerance " +
                          std::to_string(cfg.cg_rel_tol) + " within " +
                          std::to_string(cfg.cg_max_iters) + " iterations",
                      cg.iterations, cg.relative_residual);
  }
  SolveResult result;
  result.amplitudes = std::move(beta);
  result.report.iterations = cg.iterations;
  result.report.relative_residual = cg.relative_residual;
  result.report.converged = true;
  result.report.residual_history = std::move(cg.residual_history);
  return result;
}

ComplexVector dense_solve(const FrequencySet& freqs, const Dataset& data, double lambda1) {
  check_data(freqs, data);
  const Index K = freqs.size();
  if (K > kDenseSolveMaxFeatures) {
    throw InvalidArgument("dense_solve limited to K <= " + std::to_string(kDenseSolveMaxFeatures) +
                          " (got " + std::to_string(K) + ")");
  }
  if (!(lambda1 >= 0.0)) throw InvalidArgument("lambda1 must be >= 0");
  const Eigen::MatrixXcd a = materialize_design(freqs, data.inputs);
  const double inv_j = 1.0 / static_cast<double>(data.size());
  Eigen::MatrixXcd m = (a.adjoint() * a) * inv_j;
  m.diagonal().array() += lambda1;
  const ComplexVector rhs = (a.adjoint() * data.targets) * inv_j;

  const Eigen::LDLT<Eigen::MatrixXcd> ldlt(m);
  const Eigen::VectorXd pivots = ldlt.vectorD().real();
  const double scale = std::max(pivots.cwiseAbs().maxCoeff(), 1e-300);
  if (ldlt.info() != Eigen::Success || pivots.minCoeff() <= 1e-13 * scale) {
    throw SolverError("normal equations are singular to working precision", 0,
                      pivots.minCoeff() / scale);
  }
  return ldlt.solve(rhs);
}

double regularized_objective(const FrequencySet& freqs, const Dataset& data, double lambda1,
                             double lambda2, const ComplexVector& beta) {
  check_data(freqs, data);
  const ComplexVector residual = apply_design(freqs, data.inputs, beta) - data.targets;
  const double n2 = beta.squaredNorm();
  return residual.squaredNorm() / static_cast<double>(data.size()) + lambda1 * n2 +
         lambda2 * n2 * n2;
}

namespace {

struct QuarticObjective {
  const DesignOperator& design;
  const Dataset& data;
  double lambda1;
  double lambda2;

  double value(const ComplexVector& beta) const {
    const double n2 = beta.squaredNorm();
    return (design.apply(beta) - data.targets).squaredNorm() / static_cast<double>(data.size()) +
           lambda1 * n2 + lambda2 * n2 * n2;
  }

  ComplexVector gradient(const ComplexVector& beta) const {
    const double inv_j = 1.0 / static_cast<double>(data.size());
    const ComplexVector residual = design.apply(beta) - data.targets;
    return 2.0 * (design.adjoint(residual) * inv_j +
                  (lambda1 + 2.0 * lambda2 * beta.squaredNorm()) * beta);
  }

  /// Hessian of the objective in (Re b, Im b) coordinates, acting on p.
  ComplexVector hessian(const ComplexVector& beta, const ComplexVector& p) const {
    const double shift = lambda1 + 2.0 * lambda2 * beta.squaredNorm();
    const double proj = real_dot(beta, p);
    return 2.0 * (design.normal(p) + shift * p + (4.0 * lambda2 * proj) * beta);
  }
};

}  // namespace

ComplexVector objective_gradient(const FrequencySet& freqs, const Dataset& data, double lambda1,
                                 double lambda2, const ComplexVector& beta) {
  check_data(freqs, data);
  const DesignOperator design(freqs, data.inputs);
  return QuarticObjective{design, data, lambda1, lambda2}.gradient(beta);
}

SolveResult newton_solve(const FrequencySet& freqs, const Dataset& data, const SolverConfig& cfg) {
  check_data(freqs, data);
  cfg.validate(data.size(), freqs.size());
  if (!(cfg.lambda2 > 0.0)) throw ConfigError("newton_solve requires lambda2 > 0");

  SolverConfig linear = cfg;
  linear.lambda2 = 0.0;
  SolveResult start;
  if (cfg.lambda1 > 0.0 || data.size() >= freqs.size()) {
    start = cg_solve(freqs, data, linear);
  } else {
    start.amplitudes = ComplexVector::Zero(freqs.size());
  }

  const DesignOperator design(freqs, data.inputs);
  const QuarticObjective obj{design, data, cfg.lambda1, cfg.lambda2};

  SolveResult result;
  result.report.iterations = start.report.iterations;
  ComplexVector beta = std::move(start.amplitudes);
  double f = obj.value(beta);
  ComplexVector g = obj.gradient(beta);
  double gnorm = g.norm();

  int newton_it = 0;
  while (gnorm > cfg.newton_tol) {
    if (newton_it == cfg.newton_max_iters) {
      throw SolverError("Newton iteration did not converge", newton_it, gnorm);
    }
    ++newton_it;
    // Inexact Newton: forcing term shrinks with the gradient for superlinear convergence.
    const double forcing = std::clamp(gnorm, 1e-13, 0.1);
    auto hess = [&](const ComplexVector& p) -> ComplexVector { return obj.hessian(beta, p); };
    const ComplexVector rhs = -g;
    ComplexVector step = ComplexVector::Zero(beta.size());
    const CgOutcome inner = conjugate_gradient(hess, rhs, step, forcing, cfg.cg_max_iters);
    result.report.iterations += inner.iterations;
    result.report.relative_residual = inner.relative_residual;

    double t = 1.0;
    ComplexVector trial = beta + step;
    double f_trial = obj.value(trial);
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    int halvings = 0;
    while (!(f_trial <= f + slack)) {
      if (++halvings > 30) {
        throw SolverError("Newton step failed to decrease the objective after 30 halvings",
                          newton_it, gnorm);
      }
      t *= 0.5;
      trial = beta + t * step;
      f_trial = obj.value(trial);
    }
    beta = std::move(trial);
    f = f_trial;
    g = obj.gradient(beta);
    const double prev = gnorm;
    gnorm = g.norm();
    if (!std::isfinite(gnorm)) throw SolverError("non-finite gradient in Newton iteration", newton_it, gnorm);
    // A rounding-level step that neither moves f nor shrinks g cannot make progress.
    if (halvings > 0 && gnorm >= prev && f_trial >= f - slack && t < 1e-6) {
      throw SolverError("Newton iteration stalled", newton_it, gnorm);
    }
  }

  result.amplitudes = std::move(beta);
  result.report.newton_iterations = newton_it;
  result.report.gradient_norm = gnorm;
  result.report.converged = true;
  return result;
}

SolveResult solve_amplitudes(const FrequencySet& freqs, const Dataset& data,
                             const SolverConfig& cfg) {
  return cfg.lambda2 > 0.0 ? newton_solve(freqs, data, cfg) : cg_solve(freqs, data, cfg);
}

}  // namespace arff

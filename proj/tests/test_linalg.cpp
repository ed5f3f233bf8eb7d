#include <doctest.h>

#include <cmath>

#include "arff/linalg.hpp"
#include "arff/rng.hpp"

using namespace arff;

namespace {

struct Problem {
  FrequencySet freqs;
  Dataset data;
};

Problem random_problem(Index K, Index J, int d, std::uint64_t seed, bool duplicates = false) {
  RngStream rng(seed);
  PointMatrix w(K, d), x(J, d);
  for (Index k = 0; k < K; ++k)
    for (int i = 0; i < d; ++i) w(k, i) = rng.normal();
  if (duplicates && K > 3) {
    w.row(1) = w.row(0);
    w.row(3) = w.row(0);
  }
  ComplexVector y(J);
  for (Index j = 0; j < J; ++j) {
    for (int i = 0; i < d; ++i) x(j, i) = rng.normal();
    y(j) = Complex(std::exp(-x.row(j).squaredNorm() / 2), 0.0);
  }
  return {FrequencySet::continuous(w), Dataset(x, y)};
}

ComplexVector random_complex(Index n, RngStream& rng) {
  ComplexVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = Complex(rng.normal(), rng.normal());
  return v;
}

}  // namespace

TEST_CASE("design operator matches the dense matrix") {
  auto p = random_problem(13, 300, 2, 1, true);
  DesignOperator op(p.freqs, p.data.inputs);
  CHECK(op.cols() == 13);
  CHECK(op.distinct_columns() == 11);
  auto A = materialize_design(p.freqs, p.data.inputs);
  RngStream rng(2);
  auto v = random_complex(13, rng);
  auto r = random_complex(300, rng);
  CHECK((op.apply(v) - A * v).norm() < 1e-11 * (A * v).norm());
  CHECK((op.adjoint(r) - A.adjoint() * r).norm() < 1e-11 * (A.adjoint() * r).norm());
  // <Av, r> = <v, A* r>
  const Complex lhs = (op.apply(v)).dot(r);
  const Complex rhs = v.dot(op.adjoint(r));
  CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
  ComplexVector n = op.normal(v);
  CHECK((n - A.adjoint() * (A * v) / 300.0).norm() < 1e-11 * n.norm());
}

TEST_CASE("design operator on lattice frequencies with power tables") {
  LatticeSpec lat(2.0, 3);
  RngStream rng(4);
  IndexMatrix idx(20, 3);
  for (Index k = 0; k < 20; ++k)
    for (int i = 0; i < 3; ++i) idx(k, i) = static_cast<std::int64_t>(rng.uniform_index(21)) - 10;
  auto f = FrequencySet::lattice(lat, idx);
  PointMatrix x(600, 3);
  for (Index j = 0; j < 600; ++j) x.row(j) << rng.normal(), rng.normal(), rng.normal();
  auto A = materialize_design(FrequencySet::continuous(f.coordinates()), x);
  auto v = random_complex(20, rng);
  auto got = apply_design(f, x, v);
  CHECK((got - A * v).norm() < 1e-10 * (A * v).norm());
  auto r = random_complex(600, rng);
  CHECK((apply_adjoint(f, x, r) - A.adjoint() * r).norm() < 1e-9 * (A.adjoint() * r).norm());
}

TEST_CASE("cg on a single sample and frequency") {
  // A = 1, system (1 + lambda) b = y.
  PointMatrix x(1, 1), w(1, 1);
  x << 0.0;
  w << 0.0;
  ComplexVector y(1);
  y << 1.0;
  SolverConfig cfg;
  cfg.lambda1 = 0.25;
  cfg.cg_rel_tol = 1e-12;
  auto res = cg_solve(FrequencySet::continuous(w), Dataset(x, y), cfg);
  CHECK(res.amplitudes(0).real() == doctest::Approx(1.0 / 1.25).epsilon(1e-12));
  CHECK(res.report.converged);
  CHECK(res.report.iterations == 1);
}

TEST_CASE("cg agrees with the dense solve") {
  auto p = random_problem(40, 400, 2, 7, true);
  SolverConfig cfg;
  cfg.lambda1 = 1e-3;
  cfg.cg_rel_tol = 1e-10;
  cfg.cg_max_iters = 5000;
  auto cg = cg_solve(p.freqs, p.data, cfg);
  auto dense = dense_solve(p.freqs, p.data, cfg.lambda1);
  CHECK((cg.amplitudes - dense).norm() < 1e-6 * dense.norm());
  // duplicates get equal amplitudes from a zero start
  CHECK(std::abs(dense(0) - dense(1)) < 1e-8 * std::abs(dense(0)));
  // residual smoothing never increases
  const auto& h = cg.report.residual_history;
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] * (1 + 1e-12));
  // zero gradient at the solution
  auto g = objective_gradient(p.freqs, p.data, cfg.lambda1, 0.0, dense);
  CHECK(g.norm() < 1e-8);
}

TEST_CASE("cg failure raises SolverError with diagnostics") {
  auto p = random_problem(60, 100, 2, 9);
  SolverConfig cfg;
  cfg.lambda1 = 1e-8;
  cfg.cg_rel_tol = 1e-14;
  cfg.cg_max_iters = 2;
  try {
    cg_solve(p.freqs, p.data, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.iterations() == 2);
    CHECK(e.residual() > 1e-14);
  }
}

TEST_CASE("config validation") {
  SolverConfig cfg;
  CHECK_THROWS_AS(cfg.validate(10, 20), ConfigError);  // K > J with no regularization
  cfg.lambda1 = 0.1;
  CHECK_NOTHROW(cfg.validate(10, 20));
  cfg.lambda1 = -1.0;
  CHECK_THROWS_AS(cfg.validate(10, 5), ConfigError);
  cfg.lambda1 = 0.0;
  cfg.cg_rel_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(10, 5), ConfigError);
}

TEST_CASE("dense solve size limit") {
  PointMatrix w = PointMatrix::Zero(kDenseSolveMaxFeatures + 1, 1);
  PointMatrix x = PointMatrix::Zero(2, 1);
  CHECK_THROWS_AS(dense_solve(FrequencySet::continuous(w), Dataset(x, ComplexVector::Ones(2)), 1.0),
                  InvalidArgument);
}

TEST_CASE("newton solves the scalar quartic problem") {
  // one sample, A = 1, y = 1: stationarity 2 lambda2 t^3 + (1 + lambda1) t - 1 = 0
  PointMatrix x(1, 1), w(1, 1);
  x << 0.0;
  w << 0.0;
  ComplexVector y(1);
  y << 1.0;
  SolverConfig cfg;
  cfg.lambda1 = 0.5;
  cfg.lambda2 = 0.75;
  cfg.newton_tol = 1e-12;
  cfg.cg_rel_tol = 1e-12;
  auto res = newton_solve(FrequencySet::continuous(w), Dataset(x, y), cfg);
  const double t = res.amplitudes(0).real();
  // independent root: bisection on the cubic
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (2 * cfg.lambda2 * m * m * m + (1 + cfg.lambda1) * m - 1 > 0 ? hi : lo) = m;
  }
  CHECK(t == doctest::Approx(lo).epsilon(1e-9));
  CHECK(std::abs(res.amplitudes(0).imag()) < 1e-12);
  CHECK(res.report.converged);
}

TEST_CASE("newton on a random problem has zero gradient and lower objective") {
  auto p = random_problem(30, 200, 2, 13);
  SolverConfig cfg;
  cfg.lambda1 = 1e-3;
  cfg.lambda2 = 1e-2;
  cfg.cg_rel_tol = 1e-10;
  cfg.newton_tol = 1e-10;
  auto res = solve_amplitudes(p.freqs, p.data, cfg);
  auto g = objective_gradient(p.freqs, p.data, cfg.lambda1, cfg.lambda2, res.amplitudes);
  CHECK(g.norm() < 1e-7);
  const double f0 = regularized_objective(p.freqs, p.data, cfg.lambda1, cfg.lambda2, res.amplitudes);
  RngStream rng(1);
  for (int t = 0; t < 5; ++t) {
    ComplexVector b = res.amplitudes + 1e-3 * random_complex(30, rng);
    CHECK(regularized_objective(p.freqs, p.data, cfg.lambda1, cfg.lambda2, b) >= f0);
  }
  cfg.lambda2 = 0.0;
  CHECK_THROWS(newton_solve(p.freqs, p.data, cfg));
}

TEST_CASE("objective gradient matches central differences") {
  auto p = random_problem(6, 50, 1, 21);
  RngStream rng(3);
  ComplexVector b = random_complex(6, rng);
  const double l1 = 0.3, l2 = 0.2;
  auto g = objective_gradient(p.freqs, p.data, l1, l2, b);
  const double h = 1e-6;
  for (Index k = 0; k < 6; ++k) {
    for (int part = 0; part < 2; ++part) {
      ComplexVector bp = b, bm = b;
      const Complex e = part == 0 ? Complex(h, 0) : Complex(0, h);
      bp(k) += e;
      bm(k) -= e;
      const double fd = (regularized_objective(p.freqs, p.data, l1, l2, bp) -
                         regularized_objective(p.freqs, p.data, l1, l2, bm)) /
                        (2 * h);
      const double an = part == 0 ? g(k).real() : g(k).imag();
      CHECK(fd == doctest::Approx(an).epsilon(1e-6));
    }
  }
}

#include <doctest.h>

#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "arff/targets.hpp"

using namespace arff;

namespace {

RealVector vec(std::initializer_list<double> v) {
  RealVector r(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

}  // namespace

TEST_CASE("target values at simple points") {
  auto b = TargetSpec::bump(vec({1.0, 0.0}), 0.1);
  double zero[2] = {0.0, 0.0};
  CHECK(evaluate_target(b, zero) == doctest::Approx(1.0));
  double p[2] = {0.2, 1.0};
  CHECK(evaluate_target(b, p) == doctest::Approx(std::exp(-2.0) * std::exp(-(0.04 + 1.0) / 2)));

  auto s = TargetSpec::sine_integral(vec({1.0}), 1.0);
  double x = kPi;
  CHECK(evaluate_target(s, std::span<const double>(&x, 1)) ==
        doctest::Approx(1.851937052 * std::exp(-kPi * kPi / 2)).epsilon(1e-8));

  auto c = TargetSpec::constant_value(3, 2.5);
  double q[3] = {1, 2, 3};
  CHECK(evaluate_target(c, q) == 2.5);

  CHECK_THROWS(TargetSpec::bump(vec({1.0}), 0.0).validate());
  double bad[1] = {0.0};
  CHECK_THROWS_AS(evaluate_target(b, bad), DimensionError);
}

TEST_CASE("sine integral") {
  CHECK(sine_integral(0.0) == 0.0);
  CHECK(sine_integral(kPi) == doctest::Approx(1.851937052).epsilon(1e-9));
  CHECK(sine_integral(-kPi) == doctest::Approx(-1.851937052).epsilon(1e-9));
  CHECK(sine_integral(1e6) == doctest::Approx(kPi / 2).epsilon(1e-5));
  for (double t : {0.01, 0.7, 3.0, 12.5, 40.0}) {
    const double ref = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [](double u) { return u == 0.0 ? 1.0 : std::sin(u) / u; }, 0.0, t, 15, 1e-13);
    CHECK(sine_integral(t) == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("periodic wrapping") {
  CHECK(wrap_periodic(0.0, 2.0) == 0.0);
  CHECK(wrap_periodic(1.0, 2.0) == doctest::Approx(-1.0));
  CHECK(wrap_periodic(-1.0, 2.0) == doctest::Approx(-1.0));
  CHECK(wrap_periodic(2.7, 2.0) == doctest::Approx(0.7));
  CHECK(wrap_periodic(-5.3, 2.0) == doctest::Approx(0.7));
  auto b = TargetSpec::bump(vec({1.0}), 0.5, 4.0);
  double x1 = 0.3, x2 = 4.3;
  CHECK(evaluate_target(b, std::span<const double>(&x1, 1)) ==
        doctest::Approx(evaluate_target(b, std::span<const double>(&x2, 1))));
}

TEST_CASE("dataset sampling") {
  auto b = TargetSpec::bump(vec({0.6, 0.8}), 0.3);
  RngStream r1(5), r2(5);
  auto d = sample_dataset(b, 4000, 0.0, r1);
  auto e = sample_dataset(b, 4000, 0.1, r2);
  CHECK(d.size() == 4000);
  CHECK(d.inputs == e.inputs);  // inputs come first
  CHECK((clean_targets(b, d) - d.targets).norm() == 0.0);
  const double s = (e.targets - d.targets).norm() / std::sqrt(4000.0);
  CHECK(s == doctest::Approx(0.1).epsilon(0.05));
  CHECK(std::abs(d.inputs.col(0).mean()) < 0.06);
}

TEST_CASE("directions") {
  RngStream rng(1);
  auto v = random_direction(5, rng);
  CHECK(v.norm() == doctest::Approx(1.0));
  auto p = perpendicular_direction(vec({0.6, 0.8}));
  CHECK(p(0) == doctest::Approx(-0.8));
  CHECK(p(1) == doctest::Approx(0.6));
  auto w = vec({0.0, 0.6, 0.8});
  auto q = perpendicular_direction(w);
  CHECK(std::abs(q.dot(w)) < 1e-14);
  CHECK(q.norm() == doctest::Approx(1.0));
}

TEST_CASE("cosine coefficients on the lattice") {
  // cos(pi x / L) on [-L, L]: coefficients 1/2 at n = +-1
  const double L = 1.5;
  auto t = TargetSpec::cosine(vec({kPi / L}), 2 * L);
  auto tab = compute_fourier_table(t, 4, 64);
  std::int64_t one = 1, mone = -1, zero = 0, two = 2;
  CHECK(std::abs(tab.at(std::span(&one, 1)) - Complex(0.5)) < 1e-12);
  CHECK(std::abs(tab.at(std::span(&mone, 1)) - Complex(0.5)) < 1e-12);
  CHECK(std::abs(tab.at(std::span(&zero, 1))) < 1e-12);
  CHECK(std::abs(tab.at(std::span(&two, 1))) < 1e-12);
  CHECK(table_energy(tab) == doctest::Approx(0.5));
  CHECK(periodic_mean_square(t, 64) == doctest::Approx(0.5));
  std::int64_t far = 9;
  CHECK(tab.position(std::span(&far, 1)) == -1);
}

TEST_CASE("fourier table against direct quadrature") {
  const double q = 3.0, L = q / 2;
  auto b = TargetSpec::bump(vec({1.0}), 0.4, q);
  // the kink at 0 limits the grid rule to second order, hence the fine grid
  auto tab = compute_fourier_table(b, 6, 8192);
  for (std::int64_t n : {0, 1, -3, 5}) {
    const double w = kPi / L * static_cast<double>(n);
    auto re = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double x) { double xx = x; return evaluate_target(b, std::span(&xx, 1)) * std::cos(w * x); },
        -L, L, 12, 1e-13);
    // bump is even, imaginary part vanishes
    CHECK(std::abs(tab.at(std::span(&n, 1)) - Complex(re / q)) < 5e-8);
  }
  auto coarse = compute_fourier_table(b, 6, 1024);
  auto finer = compute_fourier_table(b, 6, 2048);
  const double e1 = max_coefficient_delta(coarse, tab), e2 = max_coefficient_delta(finer, tab);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
  // Parseval on a table that holds most of the energy
  auto big = compute_fourier_table(b, 200, 1024);
  CHECK(table_energy(big) == doctest::Approx(periodic_mean_square(b, 1024)).epsilon(1e-6));

  std::ostringstream os;
  write_table_csv(tab, os);
  std::istringstream is(os.str());
  auto back = read_table_csv(is, L);
  CHECK(back.size() == tab.size());
  CHECK(max_coefficient_delta(back, tab) == 0.0);
}

TEST_CASE("optimal distribution and rate constant") {
  FourierCoefficientTable tab;
  tab.lattice = LatticeSpec(1.0, 1);
  tab.n_max = 1;
  tab.indices.resize(3, 1);
  tab.indices << -1, 0, 1;
  tab.coefficients.resize(3);
  tab.coefficients << 3.0, 0.0, Complex(0.0, 1.0);
  auto p = optimal_distribution(tab);
  auto probs = probabilities_on_table(tab, p);
  CHECK(probs(0) == doctest::Approx(0.75));
  CHECK(probs(1) == 0.0);
  CHECK(probs(2) == doctest::Approx(0.25));
  CHECK(rate_constant(tab, p) == doctest::Approx(16.0));
  // C_p* = (sum |f-hat|)^2 and p* beats another distribution
  IndexMatrix atoms(2, 1);
  atoms << -1, 1;
  RealVector half(2);
  half << 0.5, 0.5;
  auto u = BaseDistribution::tabulated(tab.lattice, atoms, half);
  CHECK(rate_constant(tab, u) == doctest::Approx(20.0));
  CHECK(rate_constant_prime(tab, p) == doctest::Approx(81.0 / 0.421875 + 1.0 / 0.015625));

  IndexMatrix one(1, 1);
  one << -1;
  RealVector w(1);
  w << 1.0;
  CHECK_THROWS_AS(rate_constant(tab, BaseDistribution::tabulated(tab.lattice, one, w)), SupportError);
}

TEST_CASE("base sampling") {
  RngStream rng(3);
  auto n = sample_base(BaseDistribution::standard_normal(2, 2.0), 20000, rng);
  CHECK(n.coordinates().col(1).squaredNorm() / 20000 == doctest::Approx(4.0).epsilon(0.05));
  auto l = sample_base(BaseDistribution::lattice_normal(LatticeSpec(1.0, 1)), 100, rng);
  CHECK(l.is_lattice());

  IndexMatrix atoms(2, 1);
  atoms << 4, -2;
  RealVector p(2);
  p << 0.2, 0.8;
  auto t = sample_base(BaseDistribution::tabulated(LatticeSpec(1.0, 1), atoms, p), 20000, rng);
  Index fours = 0;
  for (Index k = 0; k < t.size(); ++k) fours += t.indices()(k, 0) == 4;
  CHECK(static_cast<double>(fours) / 20000 == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("table model reproduces the periodic target") {
  auto b = TargetSpec::bump(vec({1.0}), 0.5, 4.0);
  auto tab = compute_fourier_table(b, 300, 2048);
  auto m = table_model(tab);
  PointMatrix x(5, 1);
  x << -1.9, -0.7, 0.05, 1.3, 1.99;
  auto y = evaluate_model(m, x);
  auto f = evaluate_target(b, x);
  for (Index i = 0; i < 5; ++i) CHECK(std::abs(y(i) - f(i)) < 1e-3);
}

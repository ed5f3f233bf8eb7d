#include <doctest.h>

#include <cmath>
#include <map>

#include "arff/sampler.hpp"

using namespace arff;

namespace {

FrequencySet lattice1(std::initializer_list<std::int64_t> n, double L = 1.0) {
  IndexMatrix idx(static_cast<Index>(n.size()), 1);
  Index i = 0;
  for (auto v : n) idx(i++, 0) = v;
  return FrequencySet::lattice(LatticeSpec(L, 1), idx);
}

FrequencySampler constant_base(double value) {
  return [value](Index count, RngStream&) {
    return FrequencySet::continuous(PointMatrix::Constant(count, 1, value));
  };
}

}  // namespace

TEST_CASE("aggregation sums amplitudes of equal frequencies") {
  auto f = lattice1({3, -1, 3, 0, -1, 3});
  ComplexVector b(6);
  b << 1.0, Complex(0, 1), 2.0, 5.0, Complex(0, -3), Complex(1, 1);
  auto a = aggregate_equal_frequencies(f, b);
  REQUIRE(a.size() == 3);
  CHECK(a.keys.indices()(0, 0) == 3);
  CHECK(std::abs(a.aggregate(0) - Complex(4, 1)) < 1e-15);
  CHECK(a.multiplicity[0] == 3);
  CHECK(std::abs(a.aggregate(1) - Complex(0, -2)) < 1e-15);
  CHECK(a.group_of[4] == 1);

  auto s = aggregate_by_sorting(f, b);
  REQUIRE(s.size() == a.size());
  CHECK((s.aggregate - a.aggregate).norm() < 1e-15);
  CHECK(s.multiplicity == a.multiplicity);
  CHECK(s.group_of == a.group_of);
}

TEST_CASE("aggregation paths agree on random lattice data") {
  RngStream rng(8);
  IndexMatrix idx(500, 2);
  ComplexVector b(500);
  for (Index k = 0; k < 500; ++k) {
    idx(k, 0) = static_cast<std::int64_t>(rng.uniform_index(7)) - 3;
    idx(k, 1) = static_cast<std::int64_t>(rng.uniform_index(5)) - 2;
    b(k) = Complex(rng.normal(), rng.normal());
  }
  auto f = FrequencySet::lattice(LatticeSpec(2.0, 2), idx);
  auto a = aggregate_equal_frequencies(f, b);
  auto s = aggregate_by_sorting(f, b);
  CHECK(a.size() <= 35);
  CHECK((a.aggregate - s.aggregate).norm() < 1e-12);
  CHECK(std::abs(a.aggregate.sum() - b.sum()) < 1e-10);
}

TEST_CASE("cutoff distribution") {
  auto f = lattice1({0, 1, 2});
  ComplexVector b(3);
  b << 0.5, 0.3, 0.2;
  auto agg = aggregate_equal_frequencies(f, b);
  auto c = cutoff_distribution(agg, 0.25);
  REQUIRE(c.keys.size() == 2);
  CHECK(c.probabilities(0) == doctest::Approx(0.625));
  CHECK(c.probabilities(1) == doctest::Approx(0.375));
  auto all = cutoff_distribution(agg, 0.0);
  CHECK(all.probabilities.sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(cutoff_distribution(agg, 0.6), EmptyCutoffError);
}

TEST_CASE("multinomial draws follow the probabilities") {
  RealVector p(3);
  p << 0.5, 0.3, 0.2;
  RngStream rng(17);
  const Index n = 60000;
  auto draws = multinomial_resample(p, n, rng);
  std::vector<double> counts(3, 0.0);
  for (auto d : draws) counts[static_cast<std::size_t>(d)] += 1;
  double chi2 = 0.0;
  for (int i = 0; i < 3; ++i) chi2 += std::pow(counts[i] - n * p(i), 2) / (n * p(i));
  // chi-square with 2 dof, 99.9% quantile 13.8
  CHECK(chi2 < 13.8);

  RealVector bad(2);
  bad << 0.7, -0.1;
  CHECK_THROWS_AS(multinomial_resample(bad, 5, rng), InvalidArgument);
  bad << 0.0, 0.0;
  CHECK_THROWS_AS(multinomial_resample(bad, 5, rng), InvalidArgument);
  RealVector one(1);
  one << 1.0;
  CHECK(multinomial_resample(one, 4, rng) == std::vector<Index>(4, 0));
}

TEST_CASE("mixed resampling splits the budget") {
  PointMatrix w(2, 1);
  w << 1.0, 2.0;
  ComplexVector b(2);
  b << 1.0, 1.0;
  auto agg = aggregate_equal_frequencies(FrequencySet::continuous(w), b);
  CutoffConfig cfg;
  cfg.q_epsilon = 0.25;
  RngStream rng(2);
  ResampleReport rep;
  auto out = mixed_resample(agg, cfg, constant_base(-9.0), 10, rng, &rep);
  CHECK(out.size() == 10);
  CHECK(rep.from_cutoff == 7);
  CHECK(rep.from_base == 3);
  int base_rows = 0;
  for (Index k = 0; k < 10; ++k) base_rows += out.coordinates()(k, 0) == -9.0;
  CHECK(base_rows == 3);
  for (Index k = 7; k < 10; ++k) CHECK(out.coordinates()(k, 0) == -9.0);

  cfg.q_epsilon = 0.0;
  cfg.epsilon = 5.0;
  ResampleReport fb;
  auto out2 = mixed_resample(agg, cfg, constant_base(-9.0), 4, rng, &fb);
  CHECK(fb.cutoff_fell_back);
  CHECK_FALSE(fb.warnings.empty());
  CHECK(out2.size() == 4);
}

TEST_CASE("simplified cutoff weights") {
  ComplexVector b(3);
  b << Complex(3, 4), 0.1, Complex(0, -1);
  bool fell = true;
  auto w = simplified_cutoff_weights(b, 0.5, &fell);
  CHECK_FALSE(fell);
  CHECK(w(0) == doctest::Approx(5.0));
  CHECK(w(1) == 0.0);
  CHECK(w(2) == doctest::Approx(1.0));
  auto w2 = simplified_cutoff_weights(b, 10.0, &fell);
  CHECK(fell);
  CHECK(w2(1) == doctest::Approx(0.1));
}

TEST_CASE("continuous walk moves by delta times a normal") {
  PointMatrix w = PointMatrix::Zero(20000, 1);
  auto f = FrequencySet::continuous(w);
  RngStream rng(4);
  auto g = random_walk_step(f, WalkConfig::continuous(0.5), rng);
  const double var = g.coordinates().squaredNorm() / 20000.0;
  CHECK(var == doctest::Approx(0.25).epsilon(0.05));

  RngStream r1(3), r2(3);
  auto tiny = random_walk_step(f, WalkConfig::continuous(1e-300), r1);
  CHECK(tiny.coordinates().cwiseAbs().maxCoeff() < 1e-290);
  (void)r2;

  CHECK_THROWS_AS(WalkConfig::continuous(0.0).validate(), ConfigError);
  CHECK_THROWS_AS(WalkConfig::continuous(-1.0).validate(), ConfigError);
  CHECK_THROWS(random_walk_step(lattice1({1}), WalkConfig::continuous(0.5), rng));
}

TEST_CASE("lattice walk rounds to the nearest lattice point") {
  LatticeSpec lat(2.0, 1);
  auto f = FrequencySet::lattice(lat, IndexMatrix::Zero(1, 1));
  const double h = lat.spacing();
  // learn the first normal of the stream, then size delta so the move is 0.49 or 0.51 of h
  RngStream probe(12);
  const double z = probe.normal();
  for (double frac : {0.49, 0.51}) {
    RngStream rng(12);
    auto g = lattice_walk_step(f, WalkConfig::lattice_projected(frac * h / std::abs(z), lat), rng);
    const std::int64_t expect = frac < 0.5 ? 0 : (z > 0 ? 1 : -1);
    CHECK(g.indices()(0, 0) == expect);
    CHECK(g.coordinates()(0, 0) == doctest::Approx(h * static_cast<double>(expect)));
  }
  RngStream rng(1);
  CHECK_THROWS(lattice_walk_step(f, WalkConfig::lattice_projected(0.5, LatticeSpec(3.0, 1)), rng));
}

TEST_CASE("empirical covariance and running average") {
  PointMatrix a(2, 1), b(2, 1);
  a << -1.0, 1.0;
  b << -std::sqrt(3.0), std::sqrt(3.0);
  CovarianceState cov(1);
  CHECK(cov.running_average(0, 0) == 1.0);
  cov = update_covariance(cov, FrequencySet::continuous(a));
  CHECK(cov.running_average(0, 0) == doctest::Approx(1.0));
  cov = update_covariance(cov, FrequencySet::continuous(b));
  CHECK(cov.running_average(0, 0) == doctest::Approx(2.0));
  CHECK(cov.per_iteration.size() == 2);

  PointMatrix c(4, 2);
  c << 1, 0, -1, 0, 0, 2, 0, -2;
  auto e = empirical_covariance(FrequencySet::continuous(c));
  CHECK(e(0, 0) == doctest::Approx(0.5));
  CHECK(e(1, 1) == doctest::Approx(2.0));
  CHECK(e(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("adaptive walk follows the covariance") {
  CovarianceState cov(2);
  cov.running_average << 4.0, 0.0, 0.0, 0.25;
  auto f = FrequencySet::continuous(PointMatrix::Zero(20000, 2));
  RngStream rng(6);
  auto g = adaptive_walk_step(f, WalkConfig::adaptive(1.0, 1e-12), cov, rng);
  auto e = empirical_covariance(g);
  CHECK(e(0, 0) == doctest::Approx(4.0).epsilon(0.05));
  CHECK(e(1, 1) == doctest::Approx(0.25).epsilon(0.05));
  CHECK(std::abs(e(0, 1)) < 0.05);
  CHECK_THROWS(walk_step(f, WalkConfig::adaptive(1.0), nullptr, rng));
}

TEST_CASE("resample by weights") {
  PointMatrix w(3, 1);
  w << 1.0, 2.0, 3.0;
  RealVector p(3);
  p << 0.0, 1.0, 0.0;
  RngStream rng(1);
  auto g = resample_by_weights(FrequencySet::continuous(w), p, 5, rng);
  for (Index k = 0; k < 5; ++k) CHECK(g.coordinates()(k, 0) == 2.0);
}

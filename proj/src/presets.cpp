#include <cmath>
#include <sstream>

#include "arff/cli.hpp"
#include "arff/csv.hpp"

namespace arff::cli {

std::string to_string(Scale s) { return s == Scale::Desk ? "desk" : "full"; }

Scale parse_scale(const std::string& name) {
  if (name == "desk") return Scale::Desk;
  if (name == "full") return Scale::Full;
  throw ConfigError("scale must be desk or full, got '" + name + "'");
}

namespace {

// Desk scale divides J and K by 8 and N by 4 unless a preset says otherwise.
struct Sizes {
  Index J;
  Index K;
  int N;
};

Sizes scaled(Scale s, Index J, Index K, int N) {
  if (s == Scale::Full) return {J, K, N};
  return {J / 8, K / 8, (N + 3) / 4};
}

std::string num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

RealVector f29_direction() {
  RealVector v(2);
  v << 0.3308, 0.9437;
  return v;
}

struct SpecBuilder {
  RunSpec s;

  SpecBuilder(TargetKind kind, int d, std::uint64_t seed) {
    s.kind = kind;
    s.dimension = d;
    s.sharpness = 0.1;
    s.train.seed = seed;
    s.train.snapshot_every = 0;
  }
  SpecBuilder& periodic(double q) {
    s.period = q;
    return *this;
  }
  SpecBuilder& direction(RealVector v) {
    s.direction_mode = RunSpec::Direction::Given;
    s.direction = std::move(v);
    return *this;
  }
  SpecBuilder& random_direction() {
    s.direction_mode = RunSpec::Direction::Random;
    return *this;
  }
  SpecBuilder& sharpness(double a) {
    s.sharpness = a;
    return *this;
  }
  SpecBuilder& algorithm(Algorithm a) {
    s.train.algorithm = a;
    return *this;
  }
  SpecBuilder& sizes(Sizes z) {
    s.samples = z.J;
    s.train.K = z.K;
    s.train.iterations = z.N;
    return *this;
  }
  SpecBuilder& delta(double d) {
    s.train.walk.delta = d;
    return *this;
  }
  double train_rows() const { return static_cast<double>(s.samples) * (1.0 - s.train.validation_fraction); }
  // lambda1 = c K / sqrt(J_train)
  SpecBuilder& lambda_factor(double c) {
    s.train.solver.lambda1 = c * static_cast<double>(s.train.K) / std::sqrt(train_rows());
    return *this;
  }
  // epsilon = c / sqrt(K)
  SpecBuilder& epsilon_factor(double c) {
    s.train.cutoff.epsilon = c / std::sqrt(static_cast<double>(s.train.K));
    return *this;
  }
  SpecBuilder& from_base() {
    s.train.init = InitMode::FromBase;
    return *this;
  }
  RunSpec done() const { return s; }
};

constexpr double kQ = 12.0;

RunSpec sine_integral_alg2(Sizes z, double delta, double lambda_c, int d, std::uint64_t seed) {
  return SpecBuilder(TargetKind::SineIntegral, d, seed)
      .periodic(kQ)
      .random_direction()
      .algorithm(Algorithm::LatticeWalk)
      .sizes(z)
      .delta(delta)
      .lambda_factor(lambda_c)
      .epsilon_factor(1.0 / 200)
      .done();
}

ExperimentPreset test1(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"test1", "random walk step size delta, alg2 and alg3", {}};
  const Sizes z = scaled(sc, 8000, 2500, 100);
  const std::vector<double> deltas = sc == Scale::Desk ? std::vector<double>{0.02, 0.2, 2.0}
                                                        : std::vector<double>{0.02, 0.05, 0.2, 0.5, 2.0};
  for (Algorithm a : {Algorithm::LatticeWalk, Algorithm::AdaptiveWalk}) {
    for (double delta : deltas) {
      RunSpec s = sine_integral_alg2(z, delta, 1.0 / 100, 4, seed);
      s.train.algorithm = a;
      p.points.push_back({to_string(a) + "_delta" + num(delta), s});
    }
  }
  return p;
}

ExperimentPreset test2(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"test2", "number of frequencies K", {}};
  if (sc == Scale::Desk) {
    // d=2 Bump at J=5000 with 25 iterations; delta=2 keeps delta*N at the full-scale 0.5*100.
    for (Index K : {312, 625, 1250, 2500}) {
      RunSpec s = SpecBuilder(TargetKind::Bump, 2, seed)
                      .periodic(kQ)
                      .direction(f29_direction())
                      .algorithm(Algorithm::LatticeWalk)
                      .sizes({5000, K, 25})
                      .delta(2.0)
                      .lambda_factor(1.0 / 20)
                      .epsilon_factor(1.0 / 200)
                      .done();
      p.points.push_back({"alg2_K" + std::to_string(K), s});
    }
    return p;
  }
  for (Index K : {312, 625, 1250, 2500, 5000, 10000}) {
    p.points.push_back({"alg2_K" + std::to_string(K),
                        sine_integral_alg2({20000, K, 100}, 0.5, 1.0 / 20, 4, seed)});
  }
  for (Algorithm a : {Algorithm::RandomWalk, Algorithm::AdaptiveWalk}) {
    for (Index K : {312, 625, 1250, 2500, 5000, 10000}) {
      RunSpec s = SpecBuilder(TargetKind::Bump, 4, seed)
                      .random_direction()
                      .algorithm(a)
                      .sizes({20000, K, 100})
                      .delta(0.2)
                      .lambda_factor(1.0 / 20)
                      .epsilon_factor(1.0 / 200)
                      .done();
      p.points.push_back({to_string(a) + "_K" + std::to_string(K), s});
    }
  }
  return p;
}

ExperimentPreset test3(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"test3", "alg1 against the adaptive walk of alg3", {}};
  const Sizes z = scaled(sc, 20000, 5000, 100);
  for (Algorithm a : {Algorithm::RandomWalk, Algorithm::AdaptiveWalk}) {
    RunSpec s = SpecBuilder(TargetKind::Bump, 4, seed)
                    .random_direction()
                    .algorithm(a)
                    .sizes(z)
                    .delta(0.2)
                    .lambda_factor(1.0 / 20)
                    .epsilon_factor(1.0 / 200)
                    .done();
    p.points.push_back({to_string(a), s});
  }
  return p;
}

ExperimentPreset test4(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"test4", "training set size J, noiseless and noisy", {}};
  for (double noise : {0.0, 2.5e-3}) {
    for (Index J : {2000, 8000, 32000}) {
      const Sizes z = scaled(sc, J, 2500, 100);
      RunSpec s = sine_integral_alg2(z, 0.2, 1.0 / 20, 4, seed);
      s.noise_std = noise;
      p.points.push_back({(noise > 0 ? "noisy_J" : "clean_J") + std::to_string(z.J), s});
    }
  }
  return p;
}

ExperimentPreset test5(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"test5", "cutoff epsilon", {}};
  const Sizes z = scaled(sc, 8000, 2500, 100);
  for (double c : {0.0, 1.0 / 2000, 1.0 / 200, 1.0 / 20}) {
    RunSpec s = sine_integral_alg2(z, 0.5, 1.0 / 20, 4, seed);
    s.train.cutoff.epsilon = c / std::sqrt(static_cast<double>(z.K));
    p.points.push_back({"eps_" + num(c), s});
  }
  return p;
}

ExperimentPreset test6(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"test6", "Tikhonov weight lambda1 (alg3)", {}};
  const Sizes z = scaled(sc, 8000, 2500, 100);
  for (double c : {1.0 / 20, 1.0 / 100, 1.0 / 500, 1.0 / 2500}) {
    RunSpec s = sine_integral_alg2(z, 0.5, c, 4, seed);
    s.train.algorithm = Algorithm::AdaptiveWalk;
    p.points.push_back({"lambda1_" + num(c), s});
  }
  return p;
}

ExperimentPreset test7(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"test7", "quartic weight lambda2 (alg3, Newton)", {}};
  const Sizes z = scaled(sc, 4000, 1250, 100);
  for (double l2 : {0.0, 1e-3, 1e-2, 1e-1}) {
    RunSpec s = sine_integral_alg2(z, 0.5, 1.0 / 20, 4, seed);
    s.train.algorithm = Algorithm::AdaptiveWalk;
    s.train.solver.lambda2 = l2;
    p.points.push_back({"lambda2_" + num(l2), s});
  }
  return p;
}

ExperimentPreset test8(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"test8", "training noise level", {}};
  if (sc == Scale::Desk) {
    // d=2, K=1250, J=6000; noise set by the NSR the full-scale levels produce.
    for (double nsr : {0.0025, 0.01, 0.04}) {
      RunSpec s = sine_integral_alg2({6000, 1250, 25}, 0.5, 1.0 / 100, 2, seed);
      s.nsr = nsr;
      p.points.push_back({"nsr_" + num(nsr), s});
    }
    return p;
  }
  for (double noise : {0.025, 0.05, 0.1}) {
    RunSpec s = sine_integral_alg2({50000, 10000, 100}, 0.5, 1.0 / 100, 4, seed);
    s.noise_std = noise;
    p.points.push_back({"s_" + num(noise), s});
  }
  return p;
}

RunSpec f29_like(Algorithm a, Scale sc, std::uint64_t seed, int N_full) {
  const Sizes z = scaled(sc, 15000, 22500, N_full);
  return SpecBuilder(TargetKind::Bump, 2, seed)
      .direction(f29_direction())
      .algorithm(a)
      .sizes(z)
      .delta(0.5)
      .lambda_factor(1.0 / 100)
      .from_base()
      .done();
}

ExperimentPreset fig_f29(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"fig_f29", "alg1, d=2 Bump, non-periodic, normal initial frequencies", {}};
  p.points.push_back({"alg1", f29_like(Algorithm::RandomWalk, sc, seed, 200)});
  return p;
}

ExperimentPreset fig_f27(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"fig_f27", "alg2 on the q=12 lattice; d=1 run tracks TV distance to p*", {}};
  RunSpec s = f29_like(Algorithm::LatticeWalk, sc, seed, 200);
  s.period = kQ;
  s.train.walk.delta = 0.2;
  SpecBuilder b{TargetKind::Bump, 2, seed};
  b.s = s;
  b.lambda_factor(1.0 / 500).epsilon_factor(1.0 / 200);
  p.points.push_back({"alg2_d2", b.done()});

  // One-dimensional companion where p* is computable exactly from the coefficient table.
  const Sizes z1{8000, 2000, 60};
  RunSpec t = SpecBuilder(TargetKind::Bump, 1, seed)
                  .periodic(kQ)
                  .sharpness(0.5)
                  .algorithm(Algorithm::LatticeWalk)
                  .sizes(z1)
                  .delta(0.2)
                  .lambda_factor(1.0 / 500)
                  .epsilon_factor(1.0 / 200)
                  .done();
  t.reference_nmax = 400;
  t.reference_grid = 1 << 14;
  t.test_fraction = 0.0;
  p.points.push_back({"alg2_d1_tv", t});
  return p;
}

ExperimentPreset fig_alg3(Scale sc, std::uint64_t seed) {
  ExperimentPreset p{"fig_alg3", "alg3 adaptive covariance walk, d=2 Bump, non-periodic", {}};
  RunSpec s = f29_like(Algorithm::AdaptiveWalk, sc, seed, 30);
  s.train.walk.eps_hat = 1e-3;
  p.points.push_back({"alg3", s});
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"test1", "test2", "test3", "test4", "test5", "test6", "test7", "test8",
          "fig_f29", "fig_f27", "fig_alg3", "mnist"};
}

ExperimentPreset make_preset(const std::string& name, Scale scale, std::uint64_t seed) {
  if (name == "test1") return test1(scale, seed);
  if (name == "test2") return test2(scale, seed);
  if (name == "test3") return test3(scale, seed);
  if (name == "test4") return test4(scale, seed);
  if (name == "test5") return test5(scale, seed);
  if (name == "test6") return test6(scale, seed);
  if (name == "test7") return test7(scale, seed);
  if (name == "test8") return test8(scale, seed);
  if (name == "fig_f29") return fig_f29(scale, seed);
  if (name == "fig_f27") return fig_f27(scale, seed);
  if (name == "fig_alg3") return fig_alg3(scale, seed);
  if (name == "mnist") throw ConfigError("the mnist preset runs through `arff mnist`");
  const auto names = preset_names();
  throw ConfigError("unknown preset '" + name + "' (did you mean '" + nearest_key(name, names) + "'?)");
}

ClassifyConfig mnist_preset(Scale scale, std::uint64_t seed) {
  ClassifyConfig c;
  c.delta = 0.005;
  c.lambda = 2.0;
  c.cg_rel_tol = 1e-4;
  c.seed = seed;
  if (scale == Scale::Desk) {
    c.classes = {0, 1, 2, 8};
    c.K = 2000;
    c.iterations = 300;
  } else {
    c.classes = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    c.K = 10000;
    c.iterations = 6000;
  }
  return c;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "point,label,algorithm,K,J,delta,epsilon,lambda1,lambda2,noise_std,nsr,train_rel_err,"
         "val_rel_err,test_rel_err\n";
  for (const auto& r : rows) {
    out << r.point << ',' << r.label << ',' << r.algorithm << ',' << r.K << ',' << r.J << ','
        << csv::format_double(r.delta) << ',' << csv::format_double(r.epsilon) << ','
        << csv::format_double(r.lambda1) << ',' << csv::format_double(r.lambda2) << ','
        << csv::format_double(r.noise_std) << ',' << csv::format_double(r.nsr) << ','
        << csv::format_double(r.train_rel_err) << ',' << csv::format_double(r.val_rel_err) << ','
        << (r.test_rel_err ? csv::format_double(*r.test_rel_err) : std::string()) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  std::vector<SweepRow> out;
  auto d = [&](const std::vector<std::string>& r, const char* c) { return csv::parse_double(r[t.column(c)]); };
  for (const auto& r : t.rows) {
    SweepRow s;
    s.point = static_cast<int>(csv::parse_int(r[t.column("point")]));
    s.label = r[t.column("label")];
    s.algorithm = r[t.column("algorithm")];
    s.K = static_cast<Index>(csv::parse_int(r[t.column("K")]));
    s.J = static_cast<Index>(csv::parse_int(r[t.column("J")]));
    s.delta = d(r, "delta");
    s.epsilon = d(r, "epsilon");
    s.lambda1 = d(r, "lambda1");
    s.lambda2 = d(r, "lambda2");
    s.noise_std = d(r, "noise_std");
    s.nsr = d(r, "nsr");
    s.train_rel_err = d(r, "train_rel_err");
    s.val_rel_err = d(r, "val_rel_err");
    const auto& te = r[t.column("test_rel_err")];
    if (!te.empty()) s.test_rel_err = csv::parse_double(te);
    out.push_back(s);
  }
  return out;
}

}  // namespace arff::cli

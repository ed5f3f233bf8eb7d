#include "arff/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "arff/csv.hpp"

namespace arff {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::RandomWalk: return "alg1";
    case Algorithm::LatticeWalk: return "alg2";
    case Algorithm::AdaptiveWalk: return "alg3";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "alg1" || name == "1" || name == "random_walk") return Algorithm::RandomWalk;
  if (name == "alg2" || name == "2" || name == "lattice_walk") return Algorithm::LatticeWalk;
  if (name == "alg3" || name == "3" || name == "adaptive_walk") return Algorithm::AdaptiveWalk;
  throw ConfigError("unknown algorithm '" + name + "' (expected alg1, alg2 or alg3)");
}

std::string to_string(InitMode m) { return m == InitMode::ZeroFrequencies ? "zero" : "base"; }

InitMode parse_init_mode(const std::string& name) {
  if (name == "zero") return InitMode::ZeroFrequencies;
  if (name == "base") return InitMode::FromBase;
  throw ConfigError("unknown init mode '" + name + "' (expected zero or base)");
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Walk: return "walk";
    case Phase::Solve: return "solve";
    case Phase::Resample: return "resample";
    case Phase::Final: return "final";
  }
  return "unknown";
}

Phase parse_phase(const std::string& name) {
  if (name == "walk") return Phase::Walk;
  if (name == "solve") return Phase::Solve;
  if (name == "resample") return Phase::Resample;
  if (name == "final") return Phase::Final;
  throw IoError("unknown history phase '" + name + "'");
}

void TrainConfig::validate(int dimension) const {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
  if (verify_every < 0) throw ConfigError("verify_every must be >= 0");
  walk.validate();
  cutoff.validate();
  base.validate();
  if (base.dimension != dimension) {
    throw ConfigError("base distribution dimension " + std::to_string(base.dimension) +
                      " does not match data dimension " + std::to_string(dimension));
  }
  switch (algorithm) {
    case Algorithm::RandomWalk:
      if (walk.mode != WalkConfig::Mode::Continuous) throw ConfigError("alg1 needs a continuous walk");
      break;
    case Algorithm::LatticeWalk:
      if (walk.mode != WalkConfig::Mode::LatticeProjected) {
        throw ConfigError("alg2 needs a lattice-projected walk (set a period)");
      }
      if (walk.lattice.dimension != dimension) throw ConfigError("walk lattice dimension mismatch");
      if ((cutoff.q_epsilon > 0.0 || init == InitMode::FromBase) &&
          (!base.on_lattice() || !(base.lattice == walk.lattice))) {
        throw ConfigError("alg2 base draws must live on the walk lattice");
      }
      break;
    case Algorithm::AdaptiveWalk:
      if (walk.mode != WalkConfig::Mode::AdaptiveCovariance) {
        throw ConfigError("alg3 needs the adaptive covariance walk");
      }
      break;
  }
  if (algorithm != Algorithm::LatticeWalk && init == InitMode::FromBase && base.on_lattice()) {
    throw ConfigError("continuous algorithms need a continuous base distribution");
  }
}

int TrainConfig::effective_snapshot_every() const {
  return snapshot_every > 0 ? snapshot_every : std::max(1, (iterations + 19) / 20);
}

DataSplit split_dataset(Index samples, double validation_fraction, RngStream& rng) {
  if (samples < 2) throw InvalidArgument("a train/validation split needs at least two samples");
  Index n_val = static_cast<Index>(std::llround(validation_fraction * static_cast<double>(samples)));
  n_val = std::clamp<Index>(n_val, 1, samples - 1);
  std::vector<Index> perm(static_cast<std::size_t>(samples));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = samples - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  DataSplit s;
  s.validation.assign(perm.begin(), perm.begin() + n_val);
  s.train.assign(perm.begin() + n_val, perm.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0, bool enabled) {
  if (!enabled) return 0.0;
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

FrequencySet initial_frequencies(const TrainConfig& cfg, int d, RngStream& rng) {
  if (cfg.init == InitMode::FromBase) return sample_base(cfg.base, cfg.K, rng);
  if (cfg.algorithm == Algorithm::LatticeWalk) return FrequencySet::zeros(cfg.K, d, cfg.walk.lattice);
  return FrequencySet::zeros(cfg.K, d);
}

double equal_amplitude_spread(const FrequencySet& freqs, const ComplexVector& beta) {
  const FrequencyGrouping g = group_frequencies(freqs);
  const double scale = std::max(beta.cwiseAbs().maxCoeff(), 1e-300);
  double spread = 0.0;
  for (Index k = 0; k < freqs.size(); ++k) {
    const Index rep = g.representative[static_cast<std::size_t>(g.group_of[static_cast<std::size_t>(k)])];
    spread = std::max(spread, std::abs(beta(k) - beta(rep)) / scale);
  }
  return spread;
}

RealVector guarded_weights(RealVector w, int iteration, RunHistory& hist) {
  if (!(w.sum() > 0.0)) {
    hist.warnings.push_back("iteration " + std::to_string(iteration) +
                            ": all amplitudes vanish; resampled uniformly");
    w.setOnes();
  }
  return w;
}

}  // namespace

TrainResult run(const TrainConfig& config, const Dataset& dataset,
                const std::optional<Dataset>& test_set) {
  const int d = dataset.dimension();
  config.validate(d);
  if (test_set && test_set->dimension() != d) throw DimensionError("test set dimension mismatch");

  const RngStream master(config.seed);
  RngStream split_rng = master.split(0);
  RngStream rng = master.split(1);
  RngStream init_rng = master.split(2);

  const DataSplit split = split_dataset(dataset.size(), config.validation_fraction, split_rng);
  const Dataset train = dataset.subset(split.train);
  const Dataset val = dataset.subset(split.validation);

  const int N = config.iterations;
  const int snap_every = config.effective_snapshot_every();
  const bool timing = config.record_timing;

  RunHistory hist;
  hist.metrics.reserve(static_cast<std::size_t>(N) + 1);
  FrequencySet omega = initial_frequencies(config, d, init_rng);
  CovarianceState cov(d);
  ComplexVector beta;

  auto solve = [&](int iteration, Phase phase) {
    const auto t0 = Clock::now();
    SolveResult res;
    try {
      res = solve_amplitudes(omega, train, config.solver);
    } catch (const SolverError& e) {
      throw SolverError("iteration " + std::to_string(iteration) + ": " + e.what(), e.iterations(),
                        e.residual());
    }
    beta = std::move(res.amplitudes);
    const RffModel model(omega, beta);
    IterationMetrics m;
    m.iteration = iteration;
    m.train_rel_err = relative_l2_error(evaluate_model(model, train.inputs), train.targets);
    m.val_rel_err = relative_l2_error(evaluate_model(model, val.inputs), val.targets);
    m.cg_iters = res.report.iterations;
    if (config.reference && omega.is_lattice()) {
      m.tv_to_reference = tv_distance_to_optimal(omega, *config.reference);
    }
    if (config.verify_every > 0 && iteration % config.verify_every == 0 &&
        omega.size() <= kDenseSolveMaxFeatures && config.solver.lambda2 == 0.0 &&
        config.solver.lambda1 > 0.0) {
      m.equal_amplitude_spread = equal_amplitude_spread(omega, dense_solve(omega, train, config.solver.lambda1));
    }
    HistoryRow row;
    row.iteration = iteration;
    row.phase = phase;
    row.train_rel_err = m.train_rel_err;
    row.val_rel_err = m.val_rel_err;
    row.cg_iters = m.cg_iters;
    row.wall_ms = elapsed_ms(t0, timing);
    hist.rows.push_back(row);
    hist.metrics.push_back(m);
    if (iteration % snap_every == 0 || phase == Phase::Final) {
      hist.snapshots.push_back({iteration, omega.coordinates(), beta.cwiseAbs()});
    }
  };

  const FrequencySampler base_sampler = [&](Index count, RngStream& r) {
    return sample_base(config.base, count, r);
  };

  for (int n = 1; n <= N; ++n) {
    auto t0 = Clock::now();
    omega = walk_step(omega, config.walk, &cov, rng);
    hist.rows.push_back({n, Phase::Walk, std::nullopt, std::nullopt, 0, elapsed_ms(t0, timing)});

    solve(n, Phase::Solve);

    t0 = Clock::now();
    switch (config.algorithm) {
      case Algorithm::RandomWalk:
        omega = resample_by_weights(omega, guarded_weights(beta.cwiseAbs(), n, hist), config.K, rng);
        break;
      case Algorithm::LatticeWalk: {
        const AggregatedAmplitudes agg = aggregate_equal_frequencies(omega, beta);
        if (!(agg.aggregate.cwiseAbs().maxCoeff() > 0.0)) {
          omega = resample_by_weights(omega, guarded_weights(RealVector::Zero(omega.size()), n, hist),
                                      config.K, rng);
          break;
        }
        ResampleReport rep;
        omega = mixed_resample(agg, config.cutoff, base_sampler, config.K, rng, &rep);
        if (rep.cutoff_fell_back) {
          for (const auto& w : rep.warnings) hist.warnings.push_back("iteration " + std::to_string(n) + ": " + w);
        }
        break;
      }
      case Algorithm::AdaptiveWalk: {
        bool fell_back = false;
        RealVector w = simplified_cutoff_weights(beta, config.cutoff.epsilon, &fell_back);
        if (fell_back && w.sum() > 0.0) {
          hist.warnings.push_back("iteration " + std::to_string(n) +
                                  ": every amplitude fell below epsilon; resampled without cutoff");
        }
        omega = resample_by_weights(omega, guarded_weights(std::move(w), n, hist), config.K, rng);
        cov = update_covariance(std::move(cov), omega);
        break;
      }
    }
    hist.rows.push_back({n, Phase::Resample, std::nullopt, std::nullopt, 0, elapsed_ms(t0, timing)});
  }

  solve(N + 1, Phase::Final);

  TrainResult result{RffModel(omega, beta), std::move(hist)};
  if (test_set) {
    result.history.test_rel_err =
        relative_l2_error(evaluate_model(result.model, test_set->inputs), test_set->targets);
  }
  return result;
}

Index Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), Index{0}) + underflow + overflow;
}

Histogram histogram_projected(const FrequencySet& freqs, const RealVector& v, int bins, double lo,
                              double hi) {
  if (v.size() != freqs.dimension()) throw DimensionError("projection direction dimension mismatch");
  if (std::abs(v.norm() - 1.0) > 1e-12) throw InvalidArgument("projection direction must be a unit vector");
  if (bins < 1) throw InvalidArgument("histogram needs at least one bin");
  if (!(hi > lo)) throw InvalidArgument("histogram range must satisfy lo < hi");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const RealVector proj = freqs.coordinates() * v;
  const double width = (hi - lo) / bins;
  for (Index k = 0; k < proj.size(); ++k) {
    const double t = proj(k);
    if (t < lo) {
      ++h.underflow;
    } else if (t >= hi) {
      ++h.overflow;
    } else {
      const auto b = std::min(static_cast<int>((t - lo) / width), bins - 1);
      ++h.counts[static_cast<std::size_t>(b)];
    }
  }
  return h;
}

double tv_distance_to_optimal(const FrequencySet& freqs, const BaseDistribution& p_star) {
  if (!freqs.is_lattice()) throw InvalidArgument("total variation needs lattice frequencies");
  if (p_star.kind != BaseDistribution::Kind::Tabulated) throw InvalidArgument("p* must be tabulated");
  if (p_star.dimension != freqs.dimension()) throw DimensionError("p* dimension mismatch");
  if (freqs.size() < 1) throw InvalidArgument("empty frequency set");
  using Key = std::vector<std::int64_t>;
  std::map<Key, double> diff;
  const auto row_key = [](const IndexMatrix& m, Index r) {
    return Key(m.row(r).data(), m.row(r).data() + m.cols());
  };
  for (Index a = 0; a < p_star.atoms.rows(); ++a) diff[row_key(p_star.atoms, a)] -= p_star.probabilities(a);
  const double w = 1.0 / static_cast<double>(freqs.size());
  for (Index k = 0; k < freqs.size(); ++k) diff[row_key(freqs.indices(), k)] += w;
  double tv = 0.0;
  for (const auto& [key, value] : diff) tv += std::abs(value);
  return std::min(1.0, 0.5 * tv);
}

void write_history_csv(const RunHistory& history, std::ostream& out) {
  out << "iteration,phase,train_rel_err,val_rel_err,cg_iters,wall_ms\n";
  for (const auto& r : history.rows) {
    out << r.iteration << ',' << to_string(r.phase) << ','
        << (r.train_rel_err ? csv::format_double(*r.train_rel_err) : "") << ','
        << (r.val_rel_err ? csv::format_double(*r.val_rel_err) : "") << ',' << r.cg_iters << ','
        << csv::format_double(r.wall_ms) << '\n';
  }
}

std::vector<HistoryRow> read_history_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const std::size_t c_it = t.column("iteration"), c_ph = t.column("phase"),
                    c_tr = t.column("train_rel_err"), c_va = t.column("val_rel_err"),
                    c_cg = t.column("cg_iters"), c_ms = t.column("wall_ms");
  std::vector<HistoryRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& f : t.rows) {
    HistoryRow r;
    r.iteration = static_cast<int>(csv::parse_int(f[c_it]));
    r.phase = parse_phase(f[c_ph]);
    if (!f[c_tr].empty()) r.train_rel_err = csv::parse_double(f[c_tr]);
    if (!f[c_va].empty()) r.val_rel_err = csv::parse_double(f[c_va]);
    r.cg_iters = static_cast<int>(csv::parse_int(f[c_cg]));
    r.wall_ms = csv::parse_double(f[c_ms]);
    rows.push_back(r);
  }
  return rows;
}

void write_snapshot_csv(const FrequencySnapshot& snapshot, std::ostream& out) {
  const Index d = snapshot.omega.cols();
  for (Index i = 0; i < d; ++i) out << "omega_" << (i + 1) << ',';
  out << "abs_beta\n";
  for (Index k = 0; k < snapshot.omega.rows(); ++k) {
    for (Index i = 0; i < d; ++i) out << csv::format_double(snapshot.omega(k, i)) << ',';
    out << csv::format_double(snapshot.abs_beta(k)) << '\n';
  }
}

FrequencySnapshot read_snapshot_csv(std::istream& in, int iteration) {
  const csv::Table t = csv::read(in);
  const Index d = static_cast<Index>(t.header.size()) - 1;
  if (d < 1 || t.header.back() != "abs_beta") throw IoError("snapshot CSV must end with abs_beta");
  FrequencySnapshot s;
  s.iteration = iteration;
  s.omega.resize(static_cast<Index>(t.rows.size()), d);
  s.abs_beta.resize(static_cast<Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (Index i = 0; i < d; ++i) s.omega(static_cast<Index>(r), i) = csv::parse_double(t.rows[r][static_cast<std::size_t>(i)]);
    s.abs_beta(static_cast<Index>(r)) = csv::parse_double(t.rows[r][static_cast<std::size_t>(d)]);
  }
  return s;
}

void write_model_csv(const RffModel& model, std::ostream& out) {
  const int d = model.frequencies.dimension();
  for (int i = 0; i < d; ++i) out << "omega_" << (i + 1) << ',';
  out << "re,im\n";
  const auto& w = model.frequencies.coordinates();
  for (Index k = 0; k < model.frequencies.size(); ++k) {
    for (int i = 0; i < d; ++i) out << csv::format_double(w(k, i)) << ',';
    out << csv::format_double(model.amplitudes(k).real()) << ','
        << csv::format_double(model.amplitudes(k).imag()) << '\n';
  }
}

RffModel read_model_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const Index d = static_cast<Index>(t.header.size()) - 2;
  if (d < 1) throw IoError("model CSV needs omega_1..omega_d,re,im columns");
  const std::size_t c_re = t.column("re"), c_im = t.column("im");
  PointMatrix w(static_cast<Index>(t.rows.size()), d);
  ComplexVector a(static_cast<Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (Index i = 0; i < d; ++i) w(static_cast<Index>(r), i) = csv::parse_double(t.rows[r][static_cast<std::size_t>(i)]);
    a(static_cast<Index>(r)) = Complex(csv::parse_double(t.rows[r][c_re]), csv::parse_double(t.rows[r][c_im]));
  }
  return RffModel(FrequencySet::continuous(std::move(w)), std::move(a));
}

}  // namespace arff

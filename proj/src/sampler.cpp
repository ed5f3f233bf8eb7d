#include "arff/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

namespace arff {

namespace {

void check_lengths(const FrequencySet& freqs, const ComplexVector& amps) {
  if (freqs.size() != amps.size()) {
    throw DimensionError("frequency count " + std::to_string(freqs.size()) +
                         " does not match amplitude count " + std::to_string(amps.size()));
  }
}

AggregatedAmplitudes build_aggregate(const FrequencySet& freqs, const ComplexVector& amps,
                                     FrequencyGrouping g) {
  AggregatedAmplitudes agg;
  agg.keys = freqs.gather(g.representative);
  agg.aggregate = detail::aggregate_by_group(amps, g);
  agg.multiplicity = std::move(g.multiplicity);
  agg.group_of = std::move(g.group_of);
  return agg;
}

std::uint64_t key_word(const FrequencySet& freqs, Index k, Index i) {
  return freqs.is_lattice() ? static_cast<std::uint64_t>(freqs.indices()(k, i))
                            : std::bit_cast<std::uint64_t>(freqs.coordinates()(k, i));
}

}  // namespace

AggregatedAmplitudes aggregate_equal_frequencies(const FrequencySet& freqs,
                                                 const ComplexVector& amps) {
  check_lengths(freqs, amps);
  return build_aggregate(freqs, amps, group_frequencies(freqs));
}

AggregatedAmplitudes aggregate_by_sorting(const FrequencySet& freqs, const ComplexVector& amps) {
  check_lengths(freqs, amps);
  const Index K = freqs.size();
  const Index d = freqs.dimension();
  auto less = [&](Index a, Index b) {
    for (Index i = 0; i < d; ++i) {
      const auto ka = key_word(freqs, a, i), kb = key_word(freqs, b, i);
      if (ka != kb) return ka < kb;
    }
    return false;
  };
  std::vector<Index> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), less);

  // Runs of equal keys; the stable sort puts the smallest index first in each run.
  std::vector<Index> run_of(static_cast<std::size_t>(K));
  std::vector<Index> run_head;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || less(order[i - 1], order[i])) run_head.push_back(order[i]);
    run_of[static_cast<std::size_t>(order[i])] = static_cast<Index>(run_head.size()) - 1;
  }
  std::vector<Index> runs(run_head.size());
  std::iota(runs.begin(), runs.end(), Index{0});
  std::sort(runs.begin(), runs.end(), [&](Index a, Index b) {
    return run_head[static_cast<std::size_t>(a)] < run_head[static_cast<std::size_t>(b)];
  });
  std::vector<Index> rank(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) rank[static_cast<std::size_t>(runs[r])] = static_cast<Index>(r);

  FrequencyGrouping g;
  g.group_of.resize(static_cast<std::size_t>(K));
  g.representative.resize(runs.size());
  g.multiplicity.assign(runs.size(), 0);
  for (std::size_t r = 0; r < runs.size(); ++r) g.representative[r] = run_head[static_cast<std::size_t>(runs[r])];
  for (Index k = 0; k < K; ++k) {
    const Index grp = rank[static_cast<std::size_t>(run_of[static_cast<std::size_t>(k)])];
    g.group_of[static_cast<std::size_t>(k)] = grp;
    ++g.multiplicity[static_cast<std::size_t>(grp)];
  }
  return build_aggregate(freqs, amps, std::move(g));
}

void CutoffConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("cutoff epsilon must be >= 0");
  if (!(q_epsilon >= 0.0 && q_epsilon < 1.0)) throw ConfigError("q_epsilon must lie in [0, 1)");
}

CutoffDistribution cutoff_distribution(const AggregatedAmplitudes& agg, double epsilon) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("cutoff epsilon must be >= 0");
  CutoffDistribution out;
  std::vector<double> w;
  for (Index n = 0; n < agg.size(); ++n) {
    const double a = std::abs(agg.aggregate(n));
    if (a >= epsilon && a > 0.0) {
      out.keys.push_back(n);
      w.push_back(a);
    }
  }
  if (out.keys.empty()) {
    throw EmptyCutoffError("no aggregated amplitude reaches the cutoff " + std::to_string(epsilon));
  }
  out.probabilities = Eigen::Map<const RealVector>(w.data(), static_cast<Index>(w.size()));
  out.probabilities /= out.probabilities.sum();
  return out;
}

std::vector<Index> multinomial_resample(const RealVector& probabilities, Index count,
                                        RngStream& rng) {
  if (count < 0) throw InvalidArgument("resample count must be >= 0");
  if (probabilities.size() < 1) throw InvalidArgument("empty probability vector");
  double total = 0.0;
  for (Index i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities(i);
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("probabilities sum to " + std::to_string(total) + ", expected 1");
  }
  std::vector<double> cdf(static_cast<std::size_t>(probabilities.size()));
  std::partial_sum(probabilities.data(), probabilities.data() + probabilities.size(), cdf.begin());
  // Last positive atom absorbs the rounding slack of the cumulative sum.
  Index last = probabilities.size() - 1;
  while (last > 0 && probabilities(last) == 0.0) --last;

  std::vector<Index> out(static_cast<std::size_t>(count));
  for (auto& idx : out) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    idx = std::min(static_cast<Index>(it - cdf.begin()), last);
  }
  return out;
}

FrequencySet mixed_resample(const AggregatedAmplitudes& agg, const CutoffConfig& cfg,
                            const FrequencySampler& base, Index count, RngStream& rng,
                            ResampleReport* report) {
  cfg.validate();
  if (count < 1) throw InvalidArgument("resample count must be >= 1");
  ResampleReport local;
  ResampleReport& rep = report ? *report : local;

  CutoffDistribution dist;
  try {
    dist = cutoff_distribution(agg, cfg.epsilon);
  } catch (const EmptyCutoffError&) {
    rep.cutoff_fell_back = true;
    rep.warnings.push_back("every aggregated amplitude fell below epsilon=" +
                           std::to_string(cfg.epsilon) + "; resampled without cutoff");
    dist = cutoff_distribution(agg, 0.0);
  }

  const Index k_base = static_cast<Index>(std::ceil(static_cast<double>(count) * cfg.q_epsilon));
  const Index k_cut = count - k_base;
  const std::vector<Index> picks = multinomial_resample(dist.probabilities, k_cut, rng);
  std::vector<Index> rows(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) rows[i] = dist.keys[static_cast<std::size_t>(picks[i])];
  FrequencySet out = agg.keys.gather(rows);
  rep.from_cutoff = k_cut;
  rep.from_base = k_base;
  if (k_base > 0) {
    if (!base) throw InvalidArgument("q_epsilon > 0 requires a base sampler");
    FrequencySet extra = base(k_base, rng);
    if (extra.size() != k_base) throw InvalidArgument("base sampler returned the wrong count");
    out = FrequencySet::concat(out, extra);
  }
  return out;
}

FrequencySet resample_by_weights(const FrequencySet& freqs, const RealVector& weights, Index count,
                                 RngStream& rng) {
  if (weights.size() != freqs.size()) throw DimensionError("one weight per frequency required");
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ZeroDenominatorError("resampling weights have no positive mass");
  }
  const RealVector p = weights / total;
  const std::vector<Index> picks = multinomial_resample(p, count, rng);
  return freqs.gather(picks);
}

RealVector simplified_cutoff_weights(const ComplexVector& amps, double epsilon, bool* fell_back) {
  RealVector w = amps.cwiseAbs();
  RealVector cut = (w.array() >= epsilon).select(w, 0.0);
  const bool empty = !(cut.sum() > 0.0);
  if (fell_back) *fell_back = empty;
  return empty ? w : cut;
}

WalkConfig WalkConfig::continuous(double delta) {
  WalkConfig c;
  c.mode = Mode::Continuous;
  c.delta = delta;
  return c;
}

WalkConfig WalkConfig::lattice_projected(double delta, const LatticeSpec& lattice) {
  WalkConfig c;
  c.mode = Mode::LatticeProjected;
  c.delta = delta;
  c.lattice = lattice;
  return c;
}

WalkConfig WalkConfig::adaptive(double delta, double eps_hat) {
  WalkConfig c;
  c.mode = Mode::AdaptiveCovariance;
  c.delta = delta;
  c.eps_hat = eps_hat;
  return c;
}

void WalkConfig::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("walk delta must be > 0");
  if (mode == Mode::AdaptiveCovariance && !(eps_hat > 0.0)) {
    throw ConfigError("eps_hat must be > 0 for the adaptive walk");
  }
}

CovarianceState::CovarianceState(int dimension)
    : running_average(Eigen::MatrixXd::Identity(dimension, dimension)) {
  if (dimension < 1) throw InvalidArgument("covariance dimension must be >= 1");
}

FrequencySet random_walk_step(const FrequencySet& freqs, const WalkConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (freqs.is_lattice()) throw InvalidArgument("continuous walk applied to a lattice set");
  PointMatrix w = freqs.coordinates();
  for (Index k = 0; k < w.rows(); ++k)
    for (Index i = 0; i < w.cols(); ++i) w(k, i) += cfg.delta * rng.normal();
  return FrequencySet::continuous(std::move(w));
}

FrequencySet lattice_walk_step(const FrequencySet& freqs, const WalkConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (!freqs.is_lattice()) throw InvalidArgument("lattice walk applied to a continuous set");
  const LatticeSpec& spec = *freqs.lattice_spec();
  if (cfg.mode == WalkConfig::Mode::LatticeProjected && !(cfg.lattice == spec)) {
    throw InvalidArgument("walk lattice differs from the frequency lattice");
  }
  const double scale = cfg.delta / spec.spacing();
  IndexMatrix n = freqs.indices();
  for (Index k = 0; k < n.rows(); ++k) {
    for (Index i = 0; i < n.cols(); ++i) {
      const double u = static_cast<double>(n(k, i)) + scale * rng.normal();
      n(k, i) = static_cast<std::int64_t>(std::round(u));
    }
  }
  return FrequencySet::lattice(spec, std::move(n));
}

FrequencySet adaptive_walk_step(const FrequencySet& freqs, const WalkConfig& cfg,
                                const CovarianceState& cov, RngStream& rng) {
  cfg.validate();
  if (freqs.is_lattice()) throw InvalidArgument("adaptive walk applied to a lattice set");
  const int d = freqs.dimension();
  if (cov.dimension() != d) throw DimensionError("covariance dimension mismatch");
  Eigen::MatrixXd c = cov.running_average;
  c.diagonal().array() += cfg.eps_hat;
  const Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    throw SolverError("walk covariance is not positive definite", 0, 0.0);
  }
  const Eigen::MatrixXd l = llt.matrixL();
  PointMatrix w = freqs.coordinates();
  Eigen::VectorXd z(d);
  for (Index k = 0; k < w.rows(); ++k) {
    for (int i = 0; i < d; ++i) z(i) = rng.normal();
    w.row(k) += cfg.delta * (l * z).transpose();
  }
  return FrequencySet::continuous(std::move(w));
}

FrequencySet walk_step(const FrequencySet& freqs, const WalkConfig& cfg,
                       const CovarianceState* cov, RngStream& rng) {
  switch (cfg.mode) {
    case WalkConfig::Mode::Continuous:
      return random_walk_step(freqs, cfg, rng);
    case WalkConfig::Mode::LatticeProjected:
      return lattice_walk_step(freqs, cfg, rng);
    case WalkConfig::Mode::AdaptiveCovariance:
      if (!cov) throw InvalidArgument("adaptive walk needs a covariance state");
      return adaptive_walk_step(freqs, cfg, *cov, rng);
  }
  throw InvalidArgument("unknown walk mode");
}

Eigen::MatrixXd empirical_covariance(const FrequencySet& freqs) {
  if (freqs.size() < 1) throw InvalidArgument("covariance of an empty frequency set");
  const auto& w = freqs.coordinates();
  const Eigen::RowVectorXd mean = w.colwise().mean();
  const Eigen::MatrixXd centered = w.rowwise() - mean;
  Eigen::MatrixXd c = (centered.transpose() * centered) / static_cast<double>(freqs.size());
  return 0.5 * (c + c.transpose());
}

CovarianceState update_covariance(CovarianceState cov, const FrequencySet& freqs) {
  if (cov.running_average.size() == 0) cov = CovarianceState(freqs.dimension());
  if (cov.dimension() != freqs.dimension()) throw DimensionError("covariance dimension mismatch");
  cov.per_iteration.push_back(empirical_covariance(freqs));
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(cov.dimension(), cov.dimension());
  for (const auto& c : cov.per_iteration) sum += c;
  cov.running_average = sum / static_cast<double>(cov.per_iteration.size());
  return cov;
}

}  // namespace arff

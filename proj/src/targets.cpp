#include "arff/targets.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "arff/csv.hpp"
#include "arff/sampler.hpp"

namespace arff {

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::Bump: return "bump";
    case TargetKind::SineIntegral: return "sine_integral";
    case TargetKind::Constant: return "constant";
    case TargetKind::Cosine: return "cosine";
  }
  return "unknown";
}

TargetKind parse_target_kind(const std::string& name) {
  if (name == "bump") return TargetKind::Bump;
  if (name == "sine_integral" || name == "si") return TargetKind::SineIntegral;
  if (name == "constant") return TargetKind::Constant;
  if (name == "cosine" || name == "cos") return TargetKind::Cosine;
  throw ConfigError("unknown target kind '" + name +
                    "' (expected bump, sine_integral, constant or cosine)");
}

TargetSpec TargetSpec::bump(RealVector v, double a, std::optional<double> q) {
  TargetSpec s;
  s.kind = TargetKind::Bump;
  s.direction = std::move(v);
  s.sharpness = a;
  s.period = q;
  s.validate();
  return s;
}

TargetSpec TargetSpec::sine_integral(RealVector v, double a, std::optional<double> q) {
  TargetSpec s = bump(std::move(v), a, q);
  s.kind = TargetKind::SineIntegral;
  return s;
}

TargetSpec TargetSpec::constant_value(int dimension, double c, std::optional<double> q) {
  TargetSpec s;
  s.kind = TargetKind::Constant;
  s.direction = RealVector::Unit(dimension, 0);
  s.constant = c;
  s.period = q;
  s.validate();
  return s;
}

TargetSpec TargetSpec::cosine(RealVector w, std::optional<double> q) {
  TargetSpec s;
  s.kind = TargetKind::Cosine;
  s.direction = RealVector::Unit(w.size(), 0);
  s.mode = std::move(w);
  s.period = q;
  s.validate();
  return s;
}

int TargetSpec::dimension() const { return static_cast<int>(direction.size()); }

void TargetSpec::validate() const {
  if (direction.size() < 1) throw ConfigError("target dimension must be >= 1");
  if (std::abs(direction.norm() - 1.0) > 1e-12) {
    throw ConfigError("target direction must be a unit vector (norm " +
                      std::to_string(direction.norm()) + ")");
  }
  if (!(sharpness > 0.0)) throw ConfigError("target sharpness a must be > 0");
  if (period && !(*period > 0.0)) throw ConfigError("target period q must be > 0");
  if (kind == TargetKind::Cosine && mode.size() != direction.size()) {
    throw ConfigError("cosine mode has the wrong dimension");
  }
}

LatticeSpec TargetSpec::lattice() const {
  if (!period) throw ConfigError("target has no period; the lattice is undefined");
  return LatticeSpec(*period / 2.0, dimension());
}

namespace {

double si_series(double t) {
  double a = t;
  double sum = t;
  const double t2 = t * t;
  for (int n = 1; n < 60; ++n) {
    a *= -t2 / ((2.0 * n) * (2.0 * n + 1.0));
    const double term = a / (2.0 * n + 1.0);
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

constexpr double kSeriesLimit = 4.0;
// Above this the asymptotic series is accurate to rounding.
constexpr double kAsymptoticLimit = 40.0;

// pi/2 - f(x) cos x - g(x) sin x with the divergent auxiliary series cut at their smallest term.
double si_asymptotic(double x) {
  const double inv2 = 1.0 / (x * x);
  double f = 0.0, g = 0.0;
  double tf = 1.0 / x, tg = inv2;
  for (int k = 1; k < 40; ++k) {
    f += tf;
    g += tg;
    const double nf = -tf * (2.0 * k - 1) * (2.0 * k) * inv2;
    const double ng = -tg * (2.0 * k) * (2.0 * k + 1) * inv2;
    if (std::abs(nf) >= std::abs(tf) || std::abs(nf) < 1e-18 * std::abs(f)) break;
    tf = nf;
    tg = ng;
  }
  return kPi / 2.0 - f * std::cos(x) - g * std::sin(x);
}

}  // namespace

double sine_integral(double t) {
  if (!std::isfinite(t)) {
    if (std::isnan(t)) return t;
    return std::copysign(kPi / 2.0, t);
  }
  const double x = std::abs(t);
  if (x <= kSeriesLimit) return si_series(t);
  if (x >= kAsymptoticLimit) return std::copysign(si_asymptotic(x), t);

  static const double si_at_limit = si_series(kSeriesLimit);
  auto integrand = [](double s) { return std::sin(s) / s; };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  double acc = si_at_limit;
  // Panels no wider than pi keep each piece nearly polynomial.
  const int panels = static_cast<int>(std::ceil((x - kSeriesLimit) / kPi));
  const double width = (x - kSeriesLimit) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = kSeriesLimit + p * width;
    const double hi = (p + 1 == panels) ? x : lo + width;
    acc += Quad::integrate(integrand, lo, hi, 8, 1e-14);
  }
  return std::copysign(acc, t);
}

double wrap_periodic(double x, double q) { return x - q * std::floor(x / q + 0.5); }

double evaluate_target(const TargetSpec& spec, std::span<const double> x) {
  const int d = spec.dimension();
  if (static_cast<int>(x.size()) != d) {
    throw DimensionError("target of dimension " + std::to_string(d) + " evaluated at a point of dimension " +
                         std::to_string(x.size()));
  }
  double proj = 0.0, r2 = 0.0, phase = 0.0;
  for (int i = 0; i < d; ++i) {
    const double xi = spec.period ? wrap_periodic(x[static_cast<std::size_t>(i)], *spec.period)
                                  : x[static_cast<std::size_t>(i)];
    proj += spec.direction(i) * xi;
    r2 += xi * xi;
    if (spec.kind == TargetKind::Cosine) phase += spec.mode(i) * xi;
  }
  switch (spec.kind) {
    case TargetKind::Bump:
      return std::exp(-std::abs(proj) / spec.sharpness) * std::exp(-0.5 * r2);
    case TargetKind::SineIntegral:
      return sine_integral(proj / spec.sharpness) * std::exp(-0.5 * r2);
    case TargetKind::Constant:
      return spec.constant;
    case TargetKind::Cosine:
      return std::cos(phase);
  }
  return 0.0;
}

RealVector evaluate_target(const TargetSpec& spec, const PointMatrix& points) {
  if (points.cols() != spec.dimension()) {
    throw DimensionError("target of dimension " + std::to_string(spec.dimension()) +
                         " evaluated at points of dimension " + std::to_string(points.cols()));
  }
  RealVector out(points.rows());
  for (Index j = 0; j < points.rows(); ++j) {
    out(j) = evaluate_target(spec, std::span<const double>(points.row(j).data(),
                                                           static_cast<std::size_t>(points.cols())));
  }
  return out;
}

Dataset sample_dataset(const TargetSpec& spec, Index samples, double noise_std, RngStream& rng) {
  spec.validate();
  if (samples < 1) throw InvalidArgument("dataset needs at least one sample");
  if (!(noise_std >= 0.0)) throw InvalidArgument("noise_std must be >= 0");
  PointMatrix x(samples, spec.dimension());
  for (Index j = 0; j < samples; ++j)
    for (Index i = 0; i < x.cols(); ++i) x(j, i) = rng.normal();
  ComplexVector y = evaluate_target(spec, x).cast<Complex>();
  if (noise_std > 0.0) {
    for (Index j = 0; j < samples; ++j) y(j) += noise_std * rng.normal();
  }
  return Dataset(std::move(x), std::move(y), noise_std);
}

ComplexVector clean_targets(const TargetSpec& spec, const Dataset& data) {
  return evaluate_target(spec, data.inputs).cast<Complex>();
}

RealVector random_direction(int dimension, RngStream& rng) {
  if (dimension < 1) throw InvalidArgument("direction dimension must be >= 1");
  RealVector v(dimension);
  double n = 0.0;
  do {
    for (int i = 0; i < dimension; ++i) v(i) = rng.normal();
    n = v.norm();
  } while (n == 0.0);
  return v / n;
}

RealVector perpendicular_direction(const RealVector& v) {
  const Index d = v.size();
  if (d < 2) throw InvalidArgument("no perpendicular direction exists in one dimension");
  if (d == 2) {
    RealVector w(2);
    w << -v(1), v(0);
    return w / w.norm();
  }
  const RealVector u = v / v.norm();
  for (Index i = 0; i < d; ++i) {
    RealVector w = RealVector::Unit(d, i) - u(i) * u;
    const double n = w.norm();
    if (n > 1e-8) return w / n;
  }
  throw InvalidArgument("cannot orthogonalize direction");
}

Index FourierCoefficientTable::position(std::span<const std::int64_t> n) const {
  if (static_cast<int>(n.size()) != dimension()) throw DimensionError("lattice index dimension mismatch");
  const std::int64_t m = 2 * n_max + 1;
  Index pos = 0;
  for (std::int64_t ni : n) {
    if (ni < -n_max || ni > n_max) return -1;
    pos = pos * m + (ni + n_max);
  }
  return pos;
}

Complex FourierCoefficientTable::at(std::span<const std::int64_t> n) const {
  const Index p = position(n);
  return p < 0 ? Complex(0.0, 0.0) : coefficients(p);
}

namespace {

IndexMatrix box_indices(int d, int n_max) {
  const std::int64_t m = 2 * n_max + 1;
  Index total = 1;
  for (int i = 0; i < d; ++i) total *= m;
  IndexMatrix idx(total, d);
  for (Index p = 0; p < total; ++p) {
    Index rem = p;
    for (int i = d - 1; i >= 0; --i) {
      idx(p, i) = rem % m - n_max;
      rem /= m;
    }
  }
  return idx;
}

// Grid samples of f on x_g = -L + g h in lexicographic order (last axis fastest).
RealVector grid_samples(const TargetSpec& spec, int grid_points) {
  const int d = spec.dimension();
  const double L = *spec.period / 2.0;
  const double h = *spec.period / grid_points;
  Index total = 1;
  for (int i = 0; i < d; ++i) total *= grid_points;
  RealVector out(total);
  std::vector<double> x(static_cast<std::size_t>(d));
  for (Index p = 0; p < total; ++p) {
    Index rem = p;
    for (int i = d - 1; i >= 0; --i) {
      x[static_cast<std::size_t>(i)] = -L + static_cast<double>(rem % grid_points) * h;
      rem /= grid_points;
    }
    out(p) = evaluate_target(spec, x);
  }
  return out;
}

void check_oracle_guard(const TargetSpec& spec, int grid_points) {
  spec.validate();
  if (!spec.period) throw ConfigError("the Fourier oracle needs a periodized target (set period)");
  if (spec.dimension() > kFourierOracleMaxDimension) {
    throw ConfigError("the Fourier oracle is limited to d <= " +
                      std::to_string(kFourierOracleMaxDimension));
  }
  if (grid_points < 2) throw ConfigError("grid_points must be >= 2");
}

}  // namespace

FourierCoefficientTable compute_fourier_table(const TargetSpec& spec, int n_max, int grid_points) {
  check_oracle_guard(spec, grid_points);
  if (n_max < 0) throw ConfigError("n_max must be >= 0");
  if (grid_points < 4 * n_max) {
    throw ConfigError("grid_points (" + std::to_string(grid_points) + ") must be >= 4 * n_max (" +
                      std::to_string(4 * n_max) + ")");
  }
  const int d = spec.dimension();
  const Index G = grid_points;
  const Index M = 2 * n_max + 1;

  // T(m, g) = (-1)^n exp(-2 pi i n g / G) / G with n = m - n_max; the sign
  // accounts for the grid starting at -L.
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> twiddle(M, G);
  for (Index m = 0; m < M; ++m) {
    const std::int64_t n = m - n_max;
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    for (Index g = 0; g < G; ++g) {
      const std::int64_t r = ((n * g) % G + G) % G;
      const double ang = -2.0 * kPi * static_cast<double>(r) / static_cast<double>(G);
      twiddle(m, g) = Complex(std::cos(ang), std::sin(ang)) * (sign / static_cast<double>(G));
    }
  }

  ComplexVector data = grid_samples(spec, grid_points).cast<Complex>();
  std::vector<Index> shape(static_cast<std::size_t>(d), G);
  using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (int axis = 0; axis < d; ++axis) {
    Index pre = 1, post = 1;
    for (int i = 0; i < axis; ++i) pre *= shape[static_cast<std::size_t>(i)];
    for (int i = axis + 1; i < d; ++i) post *= shape[static_cast<std::size_t>(i)];
    ComplexVector next(pre * M * post);
    for (Index b = 0; b < pre; ++b) {
      Eigen::Map<const RowMat> in(data.data() + b * G * post, G, post);
      Eigen::Map<RowMat> out(next.data() + b * M * post, M, post);
      out.noalias() = twiddle * in;
    }
    data = std::move(next);
    shape[static_cast<std::size_t>(axis)] = M;
  }

  FourierCoefficientTable t;
  t.lattice = spec.lattice();
  t.n_max = n_max;
  t.indices = box_indices(d, n_max);
  t.coefficients = std::move(data);
  return t;
}

double periodic_mean_square(const TargetSpec& spec, int grid_points) {
  check_oracle_guard(spec, grid_points);
  const RealVector f = grid_samples(spec, grid_points);
  return f.squaredNorm() / static_cast<double>(f.size());
}

double table_energy(const FourierCoefficientTable& table) { return table.coefficients.squaredNorm(); }

RffModel table_model(const FourierCoefficientTable& table) {
  return RffModel(FrequencySet::lattice(table.lattice, table.indices), table.coefficients);
}

double max_coefficient_delta(const FourierCoefficientTable& a, const FourierCoefficientTable& b) {
  if (a.dimension() != b.dimension()) throw DimensionError("tables differ in dimension");
  const FourierCoefficientTable& small = a.n_max <= b.n_max ? a : b;
  const FourierCoefficientTable& large = a.n_max <= b.n_max ? b : a;
  double delta = 0.0;
  for (Index p = 0; p < small.size(); ++p) {
    const auto row = small.indices.row(p);
    const Complex other = large.at(std::span<const std::int64_t>(row.data(), static_cast<std::size_t>(row.size())));
    delta = std::max(delta, std::abs(small.coefficients(p) - other));
  }
  return delta;
}

void write_table_csv(const FourierCoefficientTable& table, std::ostream& out) {
  const int d = table.dimension();
  for (int i = 0; i < d; ++i) out << "n_" << (i + 1) << ',';
  out << "re,im\n";
  for (Index p = 0; p < table.size(); ++p) {
    for (int i = 0; i < d; ++i) out << table.indices(p, i) << ',';
    out << csv::format_double(table.coefficients(p).real()) << ','
        << csv::format_double(table.coefficients(p).imag()) << '\n';
  }
}

FourierCoefficientTable read_table_csv(std::istream& in, double half_period) {
  const csv::Table raw = csv::read(in);
  const int d = static_cast<int>(raw.header.size()) - 2;
  if (d < 1) throw IoError("coefficient table needs n_1..n_d,re,im columns");
  for (int i = 0; i < d; ++i) {
    if (raw.header[static_cast<std::size_t>(i)] != "n_" + std::to_string(i + 1)) {
      throw IoError("unexpected coefficient table column '" + raw.header[static_cast<std::size_t>(i)] + "'");
    }
  }
  if (raw.header[static_cast<std::size_t>(d)] != "re" || raw.header[static_cast<std::size_t>(d) + 1] != "im") {
    throw IoError("coefficient table must end with re,im columns");
  }
  std::int64_t n_max = 0;
  IndexMatrix idx(static_cast<Index>(raw.rows.size()), d);
  ComplexVector c(static_cast<Index>(raw.rows.size()));
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    for (int i = 0; i < d; ++i) {
      idx(static_cast<Index>(r), i) = csv::parse_int(raw.rows[r][static_cast<std::size_t>(i)]);
      n_max = std::max(n_max, std::abs(idx(static_cast<Index>(r), i)));
    }
    c(static_cast<Index>(r)) = Complex(csv::parse_double(raw.rows[r][static_cast<std::size_t>(d)]),
                                       csv::parse_double(raw.rows[r][static_cast<std::size_t>(d) + 1]));
  }
  FourierCoefficientTable t;
  t.lattice = LatticeSpec(half_period, d);
  t.n_max = static_cast<int>(n_max);
  t.indices = box_indices(d, t.n_max);
  if (t.indices.rows() != idx.rows()) throw IoError("coefficient table is not a full index box");
  t.coefficients = ComplexVector::Zero(t.indices.rows());
  std::vector<bool> seen(static_cast<std::size_t>(t.indices.rows()), false);
  for (Index r = 0; r < idx.rows(); ++r) {
    const Index p = t.position(std::span<const std::int64_t>(idx.row(r).data(), static_cast<std::size_t>(d)));
    if (seen[static_cast<std::size_t>(p)]) throw IoError("duplicate index in coefficient table");
    seen[static_cast<std::size_t>(p)] = true;
    t.coefficients(p) = c(r);
  }
  return t;
}

BaseDistribution BaseDistribution::standard_normal(int dimension, double scale) {
  BaseDistribution b;
  b.kind = Kind::StandardNormal;
  b.dimension = dimension;
  b.scale = scale;
  b.validate();
  return b;
}

BaseDistribution BaseDistribution::lattice_normal(const LatticeSpec& lattice, double scale) {
  BaseDistribution b;
  b.kind = Kind::LatticeProjectedNormal;
  b.dimension = lattice.dimension;
  b.scale = scale;
  b.lattice = lattice;
  b.validate();
  return b;
}

BaseDistribution BaseDistribution::tabulated(const LatticeSpec& lattice, IndexMatrix atoms,
                                             RealVector probabilities) {
  BaseDistribution b;
  b.kind = Kind::Tabulated;
  b.dimension = lattice.dimension;
  b.lattice = lattice;
  b.atoms = std::move(atoms);
  b.probabilities = std::move(probabilities);
  b.validate();
  return b;
}

void BaseDistribution::validate() const {
  if (dimension < 1) throw ConfigError("base distribution dimension must be >= 1");
  if (kind != Kind::Tabulated) {
    if (!(scale > 0.0)) throw ConfigError("base distribution scale must be > 0");
    return;
  }
  if (atoms.cols() != dimension || atoms.rows() != probabilities.size() || atoms.rows() < 1) {
    throw ConfigError("tabulated distribution needs one probability per atom");
  }
  if ((probabilities.array() < 0.0).any() || !probabilities.allFinite()) {
    throw ConfigError("tabulated probabilities must be finite and >= 0");
  }
  if (std::abs(probabilities.sum() - 1.0) > 1e-12) {
    throw ConfigError("tabulated probabilities must sum to 1");
  }
}

FrequencySet sample_base(const BaseDistribution& dist, Index count, RngStream& rng) {
  dist.validate();
  if (count < 1) throw InvalidArgument("sample count must be >= 1");
  switch (dist.kind) {
    case BaseDistribution::Kind::StandardNormal: {
      PointMatrix w(count, dist.dimension);
      for (Index k = 0; k < count; ++k)
        for (Index i = 0; i < w.cols(); ++i) w(k, i) = dist.scale * rng.normal();
      return FrequencySet::continuous(std::move(w));
    }
    case BaseDistribution::Kind::LatticeProjectedNormal: {
      IndexMatrix n(count, dist.dimension);
      const double s = dist.scale / dist.lattice.spacing();
      for (Index k = 0; k < count; ++k)
        for (Index i = 0; i < n.cols(); ++i) n(k, i) = static_cast<std::int64_t>(std::round(s * rng.normal()));
      return FrequencySet::lattice(dist.lattice, std::move(n));
    }
    case BaseDistribution::Kind::Tabulated: {
      const std::vector<Index> picks = multinomial_resample(dist.probabilities, count, rng);
      IndexMatrix n(count, dist.dimension);
      for (Index k = 0; k < count; ++k) n.row(k) = dist.atoms.row(picks[static_cast<std::size_t>(k)]);
      return FrequencySet::lattice(dist.lattice, std::move(n));
    }
  }
  throw InvalidArgument("unknown base distribution");
}

BaseDistribution optimal_distribution(const FourierCoefficientTable& table) {
  if (table.size() < 1) throw InvalidArgument("empty coefficient table");
  const RealVector mag = table.coefficients.cwiseAbs();
  const double total = mag.sum();
  if (!(total > 0.0)) throw ZeroDenominatorError("all Fourier coefficients vanish");
  return BaseDistribution::tabulated(table.lattice, table.indices, mag / total);
}

RealVector probabilities_on_table(const FourierCoefficientTable& table, const BaseDistribution& p) {
  if (p.kind != BaseDistribution::Kind::Tabulated) {
    throw InvalidArgument("rate constants need a tabulated distribution");
  }
  if (p.dimension != table.dimension()) throw DimensionError("distribution and table differ in dimension");
  RealVector out = RealVector::Zero(table.size());
  for (Index a = 0; a < p.atoms.rows(); ++a) {
    const Index pos = table.position(
        std::span<const std::int64_t>(p.atoms.row(a).data(), static_cast<std::size_t>(p.dimension)));
    if (pos >= 0) out(pos) += p.probabilities(a);
  }
  return out;
}

namespace {

double weighted_moment(const FourierCoefficientTable& table, const BaseDistribution& p, int power) {
  const RealVector prob = probabilities_on_table(table, p);
  double sum = 0.0;
  for (Index n = 0; n < table.size(); ++n) {
    const double a = std::abs(table.coefficients(n));
    if (a == 0.0) continue;
    if (!(prob(n) > 0.0)) {
      throw SupportError("p vanishes at a lattice point where the Fourier coefficient is nonzero");
    }
    sum += std::pow(a, 2 * power) / std::pow(prob(n), 2 * power - 1);
  }
  return sum;
}

}  // namespace

double rate_constant(const FourierCoefficientTable& table, const BaseDistribution& p) {
  return weighted_moment(table, p, 1);
}

double rate_constant_prime(const FourierCoefficientTable& table, const BaseDistribution& p) {
  return weighted_moment(table, p, 2);
}

}  // namespace arff

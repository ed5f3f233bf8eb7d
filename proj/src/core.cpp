#include "arff/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <unordered_map>

namespace arff {

namespace {

struct KeyHash {
  std::size_t operator()(const std::vector<std::uint64_t>& key) const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (std::uint64_t w : key) {
      h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

bool all_finite(const PointMatrix& m) { return m.allFinite(); }

}  // namespace

LatticeSpec::LatticeSpec(double half_period_, int dimension_)
    : half_period(half_period_), dimension(dimension_) {
  if (!(half_period > 0.0) || !std::isfinite(half_period)) {
    throw InvalidArgument("lattice half period must be positive");
  }
  if (dimension < 1) throw InvalidArgument("lattice dimension must be >= 1");
}

FrequencySet FrequencySet::continuous(PointMatrix coordinates) {
  if (coordinates.cols() < 1) throw DimensionError("frequency dimension must be >= 1");
  if (!all_finite(coordinates)) throw InvalidArgument("frequencies must be finite");
  FrequencySet s;
  s.coords_ = std::move(coordinates);
  return s;
}

FrequencySet FrequencySet::lattice(const LatticeSpec& spec, IndexMatrix indices) {
  if (indices.cols() != spec.dimension) {
    throw DimensionError("lattice index width " + std::to_string(indices.cols()) +
                         " does not match lattice dimension " + std::to_string(spec.dimension));
  }
  FrequencySet s;
  s.coords_ = indices.cast<double>() * spec.spacing();
  s.indices_ = std::move(indices);
  s.lattice_ = spec;
  return s;
}

FrequencySet FrequencySet::zeros(Index count, int dimension,
                                 const std::optional<LatticeSpec>& lattice) {
  if (lattice) {
    if (lattice->dimension != dimension) throw DimensionError("lattice dimension mismatch");
    return FrequencySet::lattice(*lattice, IndexMatrix::Zero(count, dimension));
  }
  return FrequencySet::continuous(PointMatrix::Zero(count, dimension));
}

FrequencySet FrequencySet::gather(std::span<const Index> rows) const {
  FrequencySet s;
  s.lattice_ = lattice_;
  s.coords_.resize(static_cast<Index>(rows.size()), coords_.cols());
  if (lattice_) s.indices_.resize(static_cast<Index>(rows.size()), indices_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    if (r < 0 || r >= size()) throw InvalidArgument("gather row out of range");
    s.coords_.row(static_cast<Index>(i)) = coords_.row(r);
    if (lattice_) s.indices_.row(static_cast<Index>(i)) = indices_.row(r);
  }
  return s;
}

FrequencySet FrequencySet::concat(const FrequencySet& a, const FrequencySet& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.dimension() != b.dimension()) throw DimensionError("cannot concatenate: dimension mismatch");
  if (a.lattice_ != b.lattice_) throw InvalidArgument("cannot concatenate: domain tags differ");
  FrequencySet s;
  s.lattice_ = a.lattice_;
  s.coords_.resize(a.size() + b.size(), a.coords_.cols());
  s.coords_ << a.coords_, b.coords_;
  if (a.lattice_) {
    s.indices_.resize(a.size() + b.size(), a.indices_.cols());
    s.indices_ << a.indices_, b.indices_;
  }
  return s;
}

RffModel::RffModel(FrequencySet freqs, ComplexVector amps)
    : frequencies(std::move(freqs)), amplitudes(std::move(amps)) {
  if (frequencies.size() != amplitudes.size()) {
    throw DimensionError("model has " + std::to_string(frequencies.size()) + " frequencies but " +
                         std::to_string(amplitudes.size()) + " amplitudes");
  }
  if (!amplitudes.allFinite()) throw InvalidArgument("amplitudes must be finite");
}

Dataset::Dataset(PointMatrix x, ComplexVector y, double noise_std_)
    : inputs(std::move(x)), targets(std::move(y)), noise_std(noise_std_) {
  if (inputs.rows() != targets.size()) throw DimensionError("inputs and targets differ in length");
  if (inputs.rows() < 1) throw InvalidArgument("dataset must contain at least one sample");
  if (!inputs.allFinite() || !targets.allFinite()) throw InvalidArgument("dataset must be finite");
  if (!(noise_std >= 0.0)) throw InvalidArgument("noise_std must be nonnegative");
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  PointMatrix x(static_cast<Index>(rows.size()), inputs.cols());
  ComplexVector y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Index>(i)) = inputs.row(rows[i]);
    y(static_cast<Index>(i)) = targets(rows[i]);
  }
  return Dataset(std::move(x), std::move(y), noise_std);
}

FrequencyGrouping group_frequencies(const FrequencySet& freqs) {
  FrequencyGrouping g;
  const Index K = freqs.size();
  const Index d = freqs.dimension();
  g.group_of.resize(static_cast<std::size_t>(K));
  std::unordered_map<std::vector<std::uint64_t>, Index, KeyHash> seen;
  seen.reserve(static_cast<std::size_t>(K));
  std::vector<std::uint64_t> key(static_cast<std::size_t>(d));
  for (Index k = 0; k < K; ++k) {
    for (Index i = 0; i < d; ++i) {
      key[static_cast<std::size_t>(i)] =
          freqs.is_lattice() ? static_cast<std::uint64_t>(freqs.indices()(k, i))
                             : std::bit_cast<std::uint64_t>(freqs.coordinates()(k, i));
    }
    auto [it, inserted] = seen.try_emplace(key, g.group_count());
    if (inserted) {
      g.representative.push_back(k);
      g.multiplicity.push_back(0);
    }
    g.group_of[static_cast<std::size_t>(k)] = it->second;
    ++g.multiplicity[static_cast<std::size_t>(it->second)];
  }
  return g;
}

namespace detail {

PhaseBlocks::PhaseBlocks(const FrequencySet& distinct, const PointMatrix& points)
    : freqs_(distinct.coordinates()), points_(points) {
  if (distinct.dimension() != points.cols()) {
    throw DimensionError("point dimension " + std::to_string(points.cols()) +
                         " does not match frequency dimension " +
                         std::to_string(distinct.dimension()));
  }
  if (!distinct.is_lattice() || distinct.size() == 0) return;
  const Index d = distinct.dimension();
  const IndexMatrix& n = distinct.indices();
  std::size_t entries = 0;
  std::vector<std::int64_t> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) {
    lo[static_cast<std::size_t>(i)] = n.col(i).minCoeff();
    hi[static_cast<std::size_t>(i)] = n.col(i).maxCoeff();
    entries += static_cast<std::size_t>(hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)] + 1);
  }
  if (entries * static_cast<std::size_t>(points.rows()) * sizeof(Complex) > kMaxTableBytes) return;
  const double h = distinct.lattice_spec()->spacing();
  indices_ = n;
  lowest_ = lo;
  powers_.resize(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) {
    const std::int64_t l = lo[static_cast<std::size_t>(i)];
    const Index width = static_cast<Index>(hi[static_cast<std::size_t>(i)] - l + 1);
    Eigen::MatrixXcd& p = powers_[static_cast<std::size_t>(i)];
    p.resize(points.rows(), width);
    for (Index c = 0; c < width; ++c) {
      const double w = h * static_cast<double>(l + c);
      for (Index j = 0; j < points.rows(); ++j) {
        const double t = w * points(j, i);
        p(j, c) = Complex(std::cos(t), std::sin(t));
      }
    }
  }
}

Index PhaseBlocks::block_rows(Index b) const noexcept {
  return std::min(kBlockRows, rows() - block_begin(b));
}

void PhaseBlocks::fill(Index b, Eigen::MatrixXcd& out) const {
  const Index n = block_rows(b);
  const Index begin = block_begin(b);
  out.resize(n, cols());
  if (tabulated()) {
    const Index d = static_cast<Index>(powers_.size());
    for (Index g = 0; g < cols(); ++g) {
      auto col = out.col(g);
      col = powers_[0].col(static_cast<Index>(indices_(g, 0) - lowest_[0])).segment(begin, n);
      for (Index i = 1; i < d; ++i) {
        col.array() *= powers_[static_cast<std::size_t>(i)]
                           .col(static_cast<Index>(indices_(g, i) - lowest_[static_cast<std::size_t>(i)]))
                           .segment(begin, n)
                           .array();
      }
    }
    return;
  }
  const Eigen::MatrixXd phase = points_.middleRows(begin, n) * freqs_.transpose();
  double* re = reinterpret_cast<double*>(out.data());
  const double* ph = phase.data();
  const Index total = n * cols();
  for (Index e = 0; e < total; ++e) {
    re[2 * e] = std::cos(ph[e]);
    re[2 * e + 1] = std::sin(ph[e]);
  }
}

FrequencySet distinct_frequencies(const FrequencySet& freqs, const FrequencyGrouping& groups) {
  return freqs.gather(groups.representative);
}

ComplexVector aggregate_by_group(const ComplexVector& v, const FrequencyGrouping& groups) {
  ComplexVector w = ComplexVector::Zero(groups.group_count());
  for (Index k = 0; k < v.size(); ++k) w(groups.group_of[static_cast<std::size_t>(k)]) += v(k);
  return w;
}

}  // namespace detail

ComplexVector evaluate_model(const RffModel& model, const PointMatrix& points) {
  const FrequencySet& freqs = model.frequencies;
  if (points.cols() != freqs.dimension()) {
    throw DimensionError("point dimension " + std::to_string(points.cols()) +
                         " does not match model dimension " + std::to_string(freqs.dimension()));
  }
  const FrequencyGrouping groups = group_frequencies(freqs);
  const ComplexVector agg = detail::aggregate_by_group(model.amplitudes, groups);
  const detail::PhaseBlocks blocks(detail::distinct_frequencies(freqs, groups), points);
  ComplexVector out(points.rows());
  Eigen::MatrixXcd e;
  for (Index b = 0; b < blocks.block_count(); ++b) {
    blocks.fill(b, e);
    out.segment(blocks.block_begin(b), e.rows()).noalias() = e * agg;
  }
  return out;
}

double relative_l2_error(const ComplexVector& predicted, const ComplexVector& truth) {
  if (predicted.size() != truth.size()) throw DimensionError("length mismatch in relative error");
  if (truth.size() < 1) throw InvalidArgument("relative error of empty vectors");
  const double den = truth.squaredNorm();
  if (den == 0.0) throw ZeroDenominatorError("relative error against an all-zero truth vector");
  return (predicted - truth).squaredNorm() / den;
}

double noise_to_signal_ratio(const Dataset& dataset, const ComplexVector& clean) {
  if (clean.size() != dataset.size()) throw DimensionError("length mismatch in NSR");
  const double den = dataset.targets.squaredNorm();
  if (den == 0.0) throw ZeroDenominatorError("NSR of all-zero targets");
  return (dataset.targets - clean).squaredNorm() / den;
}

}  // namespace arff

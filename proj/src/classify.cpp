#include "arff/classify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <ostream>

#include <zlib.h>

#include "arff/csv.hpp"
#include "arff/linalg.hpp"
#include "arff/sampler.hpp"

namespace arff {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

bool is_gzip(std::span<const std::uint8_t> b) { return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b; }

// Owns the decompressed copy when the input was gzipped.
struct Payload {
  std::vector<std::uint8_t> storage;
  std::span<const std::uint8_t> bytes;

  explicit Payload(std::span<const std::uint8_t> in) {
    if (is_gzip(in)) {
      storage = gunzip(in);
      bytes = storage;
    } else {
      bytes = in;
    }
  }
};

void check_payload(std::size_t have, std::size_t need, const char* what) {
  if (have < need) {
    throw TruncatedError(std::string(what) + " payload truncated: expected " + std::to_string(need) +
                         " bytes, found " + std::to_string(have));
  }
  if (have > need) {
    throw CountMismatchError(std::string(what) + " header count disagrees with the payload length (" +
                             std::to_string(have) + " bytes for " + std::to_string(need) + " expected)");
  }
}

}  // namespace

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("zlib initialization failed");
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw TruncatedError("corrupt or truncated gzip stream");
    }
    out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw TruncatedError("gzip stream ended early");
    }
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

IdxImages load_idx_images(std::span<const std::uint8_t> raw) {
  const Payload p(raw);
  const auto b = p.bytes;
  if (b.size() < 4) throw TruncatedError("IDX image header truncated");
  const std::uint32_t magic = read_be32(b, 0);
  if (magic != kIdxImageMagic) {
    throw BadMagicError("IDX image magic is " + std::to_string(magic) + ", expected 2051");
  }
  if (b.size() < 16) throw TruncatedError("IDX image header truncated");
  IdxImages img;
  img.count = read_be32(b, 4);
  img.rows = static_cast<int>(read_be32(b, 8));
  img.cols = static_cast<int>(read_be32(b, 12));
  const std::size_t per = static_cast<std::size_t>(img.rows) * static_cast<std::size_t>(img.cols);
  check_payload(b.size() - 16, per * static_cast<std::size_t>(img.count), "IDX image");
  img.pixels.resize(img.count, static_cast<Index>(per));
  const std::uint8_t* px = b.data() + 16;
  for (Index i = 0; i < img.pixels.size(); ++i) img.pixels.data()[i] = px[i] / 255.0;
  return img;
}

IdxLabels load_idx_labels(std::span<const std::uint8_t> raw) {
  const Payload p(raw);
  const auto b = p.bytes;
  if (b.size() < 4) throw TruncatedError("IDX label header truncated");
  const std::uint32_t magic = read_be32(b, 0);
  if (magic != kIdxLabelMagic) {
    throw BadMagicError("IDX label magic is " + std::to_string(magic) + ", expected 2049");
  }
  if (b.size() < 8) throw TruncatedError("IDX label header truncated");
  IdxLabels lab;
  lab.count = read_be32(b, 4);
  check_payload(b.size() - 8, static_cast<std::size_t>(lab.count), "IDX label");
  lab.labels.assign(b.begin() + 8, b.end());
  for (int l : lab.labels) {
    if (l > 9) throw FormatError("IDX label " + std::to_string(l) + " outside 0-9");
  }
  return lab;
}

IdxImages load_idx_images_file(const std::filesystem::path& path) {
  return load_idx_images(read_file_bytes(path));
}

IdxLabels load_idx_labels_file(const std::filesystem::path& path) {
  return load_idx_labels(read_file_bytes(path));
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(images.count));
  put_be32(out, static_cast<std::uint32_t>(images.rows));
  put_be32(out, static_cast<std::uint32_t>(images.cols));
  for (Index i = 0; i < images.pixels.size(); ++i) {
    const double v = std::clamp(images.pixels.data()[i], 0.0, 1.0);
    out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const IdxLabels& labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.count));
  for (int l : labels.labels) out.push_back(static_cast<std::uint8_t>(l));
  return out;
}

void CosSinModel::validate() const {
  if (cos_weights.size() != frequencies.rows() || sin_weights.size() != frequencies.rows()) {
    throw DimensionError("cos/sin model needs one weight pair per frequency");
  }
}

RealVector CosSinModel::evaluate(const PointMatrix& points) const {
  validate();
  if (points.cols() != frequencies.cols()) throw DimensionError("image dimension mismatch");
  const Eigen::MatrixXd phase = points * frequencies.transpose();
  return phase.array().cos().matrix() * cos_weights + phase.array().sin().matrix() * sin_weights;
}

RffModel to_complex_model(const CosSinModel& model) {
  model.validate();
  const Index K = model.size();
  PointMatrix w(2 * K, model.frequencies.cols());
  w.topRows(K) = model.frequencies;
  w.bottomRows(K) = -model.frequencies;
  ComplexVector a(2 * K);
  for (Index k = 0; k < K; ++k) {
    a(k) = Complex(model.cos_weights(k), -model.sin_weights(k)) * 0.5;
    a(K + k) = Complex(model.cos_weights(k), model.sin_weights(k)) * 0.5;
  }
  return RffModel(FrequencySet::continuous(std::move(w)), std::move(a));
}

void ClassifyConfig::validate() const {
  if (classes.size() < 2) throw ConfigError("classification needs at least two classes");
  if (!std::is_sorted(classes.begin(), classes.end()) ||
      std::adjacent_find(classes.begin(), classes.end()) != classes.end()) {
    throw ConfigError("classes must be distinct and ascending");
  }
  if (K < 1) throw ConfigError("K must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (!(cg_rel_tol > 0.0)) throw ConfigError("cg_rel_tol must be > 0");
  if (cg_max_iters < 1) throw ConfigError("cg_max_iters must be >= 1");
}

Eigen::MatrixXd class_scores(const std::vector<CosSinModel>& models, const PointMatrix& images) {
  Eigen::MatrixXd s(images.rows(), static_cast<Index>(models.size()));
  for (std::size_t c = 0; c < models.size(); ++c) s.col(static_cast<Index>(c)) = models[c].evaluate(images);
  return s;
}

namespace {

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores, const std::vector<int>& classes) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index j = 0; j < scores.rows(); ++j) {
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c)
      if (scores(j, c) > scores(j, best)) best = c;
    out[static_cast<std::size_t>(j)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

double match_fraction(const std::vector<int>& pred, const std::vector<int>& labels) {
  if (labels.empty()) throw ZeroDenominatorError("accuracy of an empty set");
  if (pred.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  Index hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

void check_models(const std::vector<CosSinModel>& models, const std::vector<int>& classes) {
  if (models.empty() || models.size() != classes.size()) {
    throw DimensionError("one model per class is required");
  }
  if (!std::is_sorted(classes.begin(), classes.end())) throw InvalidArgument("classes must be ascending");
}

using Clock = std::chrono::steady_clock;

// Per-class state of the lockstep training loop.
struct ClassState {
  int label = 0;
  RngStream rng{0};
  PointMatrix omega;
  RealVector weights;  // [cos; sin]
  RealVector train_target;
  RealVector val_target;
};

struct SolveOutcome {
  RealVector train_out;
  RealVector val_out;
  int cg_iters = 0;
};

SolveOutcome solve_class(ClassState& s, const PointMatrix& train_x, const PointMatrix& val_x,
                         const ClassifyConfig& cfg, int iteration) {
  const Index K = s.omega.rows();
  const Index J = train_x.rows();
  Eigen::MatrixXd phi(J, 2 * K);
  {
    const Eigen::MatrixXd phase = train_x * s.omega.transpose();
    phi.leftCols(K) = phase.array().cos().matrix();
    phi.rightCols(K) = phase.array().sin().matrix();
  }
  const double inv_j = 1.0 / static_cast<double>(J);
  const RealVector rhs = phi.transpose() * s.train_target * inv_j;
  auto op = [&](const RealVector& v) -> RealVector {
    const RealVector u = phi * v;
    RealVector out = phi.transpose() * u * inv_j;
    out += cfg.lambda * v;
    return out;
  };
  RealVector b = RealVector::Zero(2 * K);
  const CgOutcome cg = conjugate_gradient(op, rhs, b, cfg.cg_rel_tol, cfg.cg_max_iters);
  if (!cg.converged) {
    throw SolverError("class " + std::to_string(s.label) + ", iteration " + std::to_string(iteration) +
                          ": conjugate gradient did not converge",
                      cg.iterations, cg.relative_residual);
  }
  s.weights = std::move(b);
  SolveOutcome o;
  o.cg_iters = cg.iterations;
  o.train_out = phi * s.weights;
  const Eigen::MatrixXd vphase = val_x * s.omega.transpose();
  o.val_out = vphase.array().cos().matrix() * s.weights.head(K) +
              vphase.array().sin().matrix() * s.weights.tail(K);
  return o;
}

double binary_accuracy(const RealVector& out, const RealVector& target) {
  Index hit = 0;
  for (Index j = 0; j < out.size(); ++j) hit += (out(j) > 0.5) == (target(j) > 0.5);
  return static_cast<double>(hit) / static_cast<double>(out.size());
}

double rel_err(const RealVector& out, const RealVector& target) {
  const double den = target.squaredNorm();
  return den > 0.0 ? (out - target).squaredNorm() / den : (out - target).squaredNorm();
}

CosSinModel snapshot(const ClassState& s) {
  const Index K = s.omega.rows();
  return CosSinModel{s.omega, s.weights.head(K), s.weights.tail(K)};
}

}  // namespace

OneVsAllResult train_one_vs_all(const PointMatrix& train_x, const std::vector<int>& train_y,
                                const PointMatrix& val_x, const std::vector<int>& val_y,
                                const ClassifyConfig& config) {
  config.validate();
  if (train_x.rows() != static_cast<Index>(train_y.size()) || val_x.rows() != static_cast<Index>(val_y.size())) {
    throw CountMismatchError("image and label counts differ");
  }
  if (train_x.cols() != val_x.cols()) throw DimensionError("train and validation images differ in size");

  const std::vector<Index> tr_rows = rows_with_labels(train_y, config.classes);
  const std::vector<Index> va_rows = rows_with_labels(val_y, config.classes);
  if (tr_rows.empty() || va_rows.empty()) throw InvalidArgument("no images carry the selected classes");
  const PointMatrix tx = gather_rows(train_x, tr_rows);
  const PointMatrix vx = gather_rows(val_x, va_rows);
  const std::vector<int> ty = gather_labels(train_y, tr_rows);
  const std::vector<int> vy = gather_labels(val_y, va_rows);

  const RngStream master(config.seed);
  const Index C = static_cast<Index>(config.classes.size());
  const Index D = tx.cols();
  std::vector<ClassState> states(static_cast<std::size_t>(C));
  for (Index c = 0; c < C; ++c) {
    ClassState& s = states[static_cast<std::size_t>(c)];
    s.label = config.classes[static_cast<std::size_t>(c)];
    s.rng = master.split(100 + static_cast<std::uint64_t>(s.label));
    s.omega = PointMatrix::Zero(config.K, D);
    s.train_target = RealVector(tx.rows());
    s.val_target = RealVector(vx.rows());
    for (Index j = 0; j < tx.rows(); ++j) s.train_target(j) = ty[static_cast<std::size_t>(j)] == s.label;
    for (Index j = 0; j < vx.rows(); ++j) s.val_target(j) = vy[static_cast<std::size_t>(j)] == s.label;
  }

  OneVsAllResult res;
  res.classes = config.classes;
  res.class_history.resize(static_cast<std::size_t>(C));
  res.best_val_accuracy = -1.0;
  Eigen::MatrixXd train_scores(tx.rows(), C), val_scores(vx.rows(), C);

  auto solve_all = [&](int iteration) {
    for (Index c = 0; c < C; ++c) {
      ClassState& s = states[static_cast<std::size_t>(c)];
      const auto t0 = Clock::now();
      const SolveOutcome o = solve_class(s, tx, vx, config, iteration);
      train_scores.col(c) = o.train_out;
      val_scores.col(c) = o.val_out;
      ClassHistoryRow row;
      row.iteration = iteration;
      row.train_rel_err = rel_err(o.train_out, s.train_target);
      row.val_rel_err = rel_err(o.val_out, s.val_target);
      row.train_accuracy = binary_accuracy(o.train_out, s.train_target);
      row.val_accuracy = binary_accuracy(o.val_out, s.val_target);
      row.cg_iters = o.cg_iters;
      row.wall_ms = config.record_timing
                        ? std::chrono::duration<double, std::milli>(Clock::now() - t0).count()
                        : 0.0;
      res.class_history[static_cast<std::size_t>(c)].push_back(row);
    }
    OverallRow o{iteration, match_fraction(argmax_rows(train_scores, config.classes), ty),
                 match_fraction(argmax_rows(val_scores, config.classes), vy)};
    res.overall.push_back(o);
    if (o.val_accuracy > res.best_val_accuracy) {
      res.best_val_accuracy = o.val_accuracy;
      res.best_train_accuracy = o.train_accuracy;
      res.best_iteration = iteration;
      res.models.clear();
      for (const auto& s : states) res.models.push_back(snapshot(s));
    }
  };

  for (int n = 1; n <= config.iterations; ++n) {
    for (auto& s : states) {
      for (Index k = 0; k < s.omega.rows(); ++k)
        for (Index i = 0; i < D; ++i) s.omega(k, i) += config.delta * s.rng.normal();
    }
    solve_all(n);
    for (auto& s : states) {
      const Index K = s.omega.rows();
      RealVector w = (s.weights.head(K).array().square() + s.weights.tail(K).array().square()).sqrt().matrix();
      if (!(w.sum() > 0.0)) w.setOnes();
      const std::vector<Index> picks = multinomial_resample(w / w.sum(), K, s.rng);
      s.omega = gather_rows(s.omega, picks);
    }
  }
  solve_all(config.iterations + 1);
  return res;
}

int predict(const std::vector<CosSinModel>& models, const std::vector<int>& classes,
            std::span<const double> image) {
  check_models(models, classes);
  PointMatrix x(1, static_cast<Index>(image.size()));
  for (std::size_t i = 0; i < image.size(); ++i) x(0, static_cast<Index>(i)) = image[i];
  return argmax_rows(class_scores(models, x), classes).front();
}

std::vector<int> predict(const std::vector<CosSinModel>& models, const std::vector<int>& classes,
                         const PointMatrix& images) {
  check_models(models, classes);
  return argmax_rows(class_scores(models, images), classes);
}

double accuracy(const std::vector<CosSinModel>& models, const std::vector<int>& classes,
                const PointMatrix& images, const std::vector<int>& labels) {
  if (labels.empty()) throw ZeroDenominatorError("accuracy of an empty set");
  if (images.rows() != static_cast<Index>(labels.size())) throw CountMismatchError("image and label counts differ");
  return match_fraction(predict(models, classes, images), labels);
}

ThreeWaySplit stratified_split(const std::vector<int>& labels, double validation_fraction,
                               double test_fraction, RngStream& rng) {
  if (!(validation_fraction >= 0.0 && test_fraction >= 0.0 && validation_fraction + test_fraction < 1.0)) {
    throw ConfigError("split fractions must be >= 0 and sum to less than 1");
  }
  ThreeWaySplit out;
  const int top = labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
  for (int label = 0; label <= top; ++label) {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) rows.push_back(static_cast<Index>(i));
    for (Index i = static_cast<Index>(rows.size()) - 1; i > 0; --i) {
      const auto j = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
      std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
    }
    const auto n = static_cast<double>(rows.size());
    const auto n_val = static_cast<std::size_t>(std::llround(n * validation_fraction));
    const auto n_test = static_cast<std::size_t>(std::llround(n * test_fraction));
    out.validation.insert(out.validation.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.test.insert(out.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val),
                    rows.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<Index> rows_with_labels(const std::vector<int>& labels, const std::vector<int>& classes) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (std::binary_search(classes.begin(), classes.end(), labels[i])) rows.push_back(static_cast<Index>(i));
  return rows;
}

PointMatrix gather_rows(const PointMatrix& m, std::span<const Index> rows) {
  PointMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, std::span<const Index> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

void write_class_history_csv(const std::vector<ClassHistoryRow>& rows, std::ostream& out) {
  out << "iteration,train_rel_err,val_rel_err,train_accuracy,val_accuracy,cg_iters,wall_ms\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << csv::format_double(r.train_rel_err) << ','
        << csv::format_double(r.val_rel_err) << ',' << csv::format_double(r.train_accuracy) << ','
        << csv::format_double(r.val_accuracy) << ',' << r.cg_iters << ','
        << csv::format_double(r.wall_ms) << '\n';
  }
}

}  // namespace arff

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "arff/classify.hpp"

using namespace arff;

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> image_header(std::uint32_t magic, std::uint32_t n, std::uint32_t r,
                                       std::uint32_t c) {
  std::vector<std::uint8_t> b;
  put_u32(b, magic);
  put_u32(b, n);
  put_u32(b, r);
  put_u32(b, c);
  return b;
}

struct Blobs {
  PointMatrix x;
  std::vector<int> y;
};

// two separable Gaussian blobs in R^4, labels 3 and 7
Blobs blobs(Index n, RngStream& rng) {
  Blobs b;
  b.x.resize(n, 4);
  for (Index j = 0; j < n; ++j) {
    const int lab = j % 2 == 0 ? 3 : 7;
    const double c = lab == 3 ? -1.5 : 1.5;
    b.x.row(j) << c + 0.3 * rng.normal(), 0.3 * rng.normal(), c + 0.3 * rng.normal(),
        0.3 * rng.normal();
    b.y.push_back(lab);
  }
  return b;
}

ClassifyConfig toy_config() {
  ClassifyConfig c;
  c.classes = {3, 7};
  c.K = 200;
  c.iterations = 50;
  c.delta = 0.3;
  c.lambda = 1e-3;
  c.cg_rel_tol = 1e-6;
  c.record_timing = false;
  return c;
}

}  // namespace

TEST_CASE("idx headers") {
  auto empty = image_header(kIdxImageMagic, 0, 28, 28);
  auto im = load_idx_images(empty);
  CHECK(im.count == 0);
  CHECK(im.pixels.rows() == 0);
  CHECK(im.pixels_per_image() == 784);

  CHECK_THROWS_AS(load_idx_images(image_header(2052, 0, 28, 28)), BadMagicError);

  auto short_payload = image_header(kIdxImageMagic, 2, 2, 2);
  short_payload.insert(short_payload.end(), 7, 0);
  CHECK_THROWS_AS(load_idx_images(short_payload), TruncatedError);
  auto long_payload = image_header(kIdxImageMagic, 1, 2, 2);
  long_payload.insert(long_payload.end(), 5, 0);
  CHECK_THROWS_AS(load_idx_images(long_payload), CountMismatchError);
  std::vector<std::uint8_t> stub{0, 0, 8};
  CHECK_THROWS_AS(load_idx_images(stub), TruncatedError);

  std::vector<std::uint8_t> labels;
  put_u32(labels, kIdxLabelMagic);
  put_u32(labels, 3);
  labels.insert(labels.end(), {1, 9, 0});
  auto l = load_idx_labels(labels);
  CHECK(l.labels == std::vector<int>{1, 9, 0});
  labels.back() = 12;
  CHECK_THROWS_AS(load_idx_labels(labels), FormatError);
}

TEST_CASE("idx round trip and gzip") {
  IdxImages im;
  im.count = 2;
  im.rows = 2;
  im.cols = 3;
  im.pixels.resize(2, 6);
  for (Index i = 0; i < 12; ++i) im.pixels.data()[i] = static_cast<double>(i * 20) / 255.0;
  auto bytes = encode_idx_images(im);
  CHECK(bytes.size() == 16 + 12);
  auto back = load_idx_images(bytes);
  CHECK(back.rows == 2);
  CHECK(back.cols == 3);
  CHECK((back.pixels - im.pixels).cwiseAbs().maxCoeff() < 1e-15);

  IdxLabels lab{4, {0, 5, 9, 2}};
  CHECK(load_idx_labels(encode_idx_labels(lab)).labels == lab.labels);

  const std::filesystem::path dir = ARFF_TEST_DATA_DIR;
  auto gi = load_idx_images_file(dir / "mnist5k-images-idx3-ubyte.gz");
  auto gl = load_idx_labels_file(dir / "mnist5k-labels-idx1-ubyte.gz");
  CHECK(gi.count == gl.count);
  CHECK(gi.rows == 28);
  CHECK(gi.pixels.maxCoeff() <= 1.0);
  CHECK(gi.pixels.minCoeff() >= 0.0);
  CHECK_THROWS_AS(load_idx_images_file(dir / "missing.gz"), IoError);
}

TEST_CASE("cos/sin model equals its complex form") {
  RngStream rng(9);
  CosSinModel m;
  m.frequencies.resize(7, 3);
  m.cos_weights.resize(7);
  m.sin_weights.resize(7);
  for (Index k = 0; k < 7; ++k) {
    m.frequencies.row(k) << rng.normal(), rng.normal(), rng.normal();
    m.cos_weights(k) = rng.normal();
    m.sin_weights(k) = rng.normal();
  }
  PointMatrix x(40, 3);
  for (Index j = 0; j < 40; ++j) x.row(j) << rng.normal(), rng.normal(), rng.normal();
  auto real = m.evaluate(x);
  auto cplx = evaluate_model(to_complex_model(m), x);
  for (Index j = 0; j < 40; ++j) {
    CHECK(std::abs(cplx(j).real() - real(j)) < 1e-10);
    CHECK(std::abs(cplx(j).imag()) < 1e-10);
  }
}

TEST_CASE("separable blobs are learned") {
  RngStream rng(1);
  auto tr = blobs(200, rng);
  auto va = blobs(100, rng);
  auto res = train_one_vs_all(tr.x, tr.y, va.x, va.y, toy_config());
  CHECK(res.best_val_accuracy == 1.0);
  CHECK(res.overall.size() >= 50);
  REQUIRE(res.models.size() == 2);

  // predictions match the Bayes rule of the two symmetric blobs: sign of x0 + x2
  auto te = blobs(200, rng);
  auto pred = predict(res.models, res.classes, te.x);
  int agree = 0;
  for (Index j = 0; j < te.x.rows(); ++j) {
    const int bayes = te.x(j, 0) + te.x(j, 2) < 0 ? 3 : 7;
    agree += pred[static_cast<std::size_t>(j)] == bayes;
  }
  CHECK(agree == 200);
  CHECK(accuracy(res.models, res.classes, te.x, te.y) == 1.0);
}

TEST_CASE("training accuracy improves on the toy set") {
  std::vector<double> first, last;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RngStream rng(100 + seed);
    auto tr = blobs(60, rng);
    auto va = blobs(30, rng);
    auto cfg = toy_config();
    cfg.K = 20;
    cfg.iterations = 15;
    cfg.delta = 0.05;
    cfg.seed = seed;
    auto res = train_one_vs_all(tr.x, tr.y, va.x, va.y, cfg);
    first.push_back(res.overall.front().train_accuracy);
    last.push_back(res.overall.back().train_accuracy);
  }
  std::sort(first.begin(), first.end());
  std::sort(last.begin(), last.end());
  CHECK(last[5] >= first[5]);
}

TEST_CASE("identical images give the majority class") {
  PointMatrix x = PointMatrix::Constant(10, 4, 0.25);
  std::vector<int> y{1, 1, 1, 1, 1, 1, 2, 2, 2, 2};
  auto cfg = toy_config();
  cfg.classes = {1, 2};
  cfg.K = 10;
  cfg.iterations = 3;
  auto res = train_one_vs_all(x, y, x, y, cfg);
  CHECK(accuracy(res.models, res.classes, x, y) == doctest::Approx(0.6));
}

TEST_CASE("prediction ties go to the smallest label") {
  CosSinModel zero;
  zero.frequencies = PointMatrix::Zero(1, 2);
  zero.cos_weights = RealVector::Zero(1);
  zero.sin_weights = RealVector::Zero(1);
  std::vector<CosSinModel> models{zero, zero, zero};
  double img[2] = {0.1, 0.2};
  CHECK(predict(models, {4, 6, 8}, img) == 4);
  CHECK_THROWS_AS(accuracy(models, {4, 6, 8}, PointMatrix(0, 2), {}), ZeroDenominatorError);
}

TEST_CASE("stratified split keeps class proportions") {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i < 70 ? 0 : 1);
  RngStream r1(4), r2(4);
  auto s = stratified_split(labels, 0.2, 0.1, r1);
  auto t = stratified_split(labels, 0.2, 0.1, r2);
  CHECK(s.validation == t.validation);
  CHECK(s.train.size() + s.validation.size() + s.test.size() == 100);
  int val_zero = 0;
  for (auto i : s.validation) val_zero += labels[static_cast<std::size_t>(i)] == 0;
  CHECK(val_zero == 14);
  CHECK(s.validation.size() == 20);
  CHECK(s.test.size() == 10);

  auto rows = rows_with_labels({3, 1, 3, 0}, {3});
  CHECK(rows == std::vector<Index>{0, 2});
  CHECK(gather_labels({3, 1, 3, 0}, rows) == std::vector<int>{3, 3});
}

TEST_CASE("history csv is deterministic without timing") {
  RngStream rng(5);
  auto tr = blobs(40, rng);
  auto va = blobs(20, rng);
  auto cfg = toy_config();
  cfg.K = 16;
  cfg.iterations = 4;
  auto a = train_one_vs_all(tr.x, tr.y, va.x, va.y, cfg);
  auto b = train_one_vs_all(tr.x, tr.y, va.x, va.y, cfg);
  std::ostringstream oa, ob;
  write_class_history_csv(a.class_history[0], oa);
  write_class_history_csv(b.class_history[0], ob);
  CHECK(oa.str() == ob.str());
  CHECK(oa.str().find("wall_ms") != std::string::npos);
}

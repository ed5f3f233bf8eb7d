#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "arff/core.hpp"
#include "arff/rng.hpp"

namespace arff {

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

struct IdxImages {
  Index count = 0;
  int rows = 0;
  int cols = 0;
  PointMatrix pixels;  // count x (rows*cols), scaled to [0, 1]

  int pixels_per_image() const noexcept { return rows * cols; }
};

struct IdxLabels {
  Index count = 0;
  std::vector<int> labels;
};

/// Parses an IDX stream, gunzipping first when it starts with 0x1f 0x8b.
IdxImages load_idx_images(std::span<const std::uint8_t> bytes);
IdxLabels load_idx_labels(std::span<const std::uint8_t> bytes);
IdxImages load_idx_images_file(const std::filesystem::path& path);
IdxLabels load_idx_labels_file(const std::filesystem::path& path);

/// Raw IDX encodings; pixels are rounded back to bytes.
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(const IdxLabels& labels);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);

/// beta(x) = sum_k c_k cos(w_k . x) + s_k sin(w_k . x)
struct CosSinModel {
  PointMatrix frequencies;
  RealVector cos_weights;
  RealVector sin_weights;

  Index size() const noexcept { return frequencies.rows(); }
  void validate() const;
  RealVector evaluate(const PointMatrix& points) const;
};

/// The equivalent complex model: (c - i s)/2 on w_k and (c + i s)/2 on -w_k.
RffModel to_complex_model(const CosSinModel& model);

struct ClassifyConfig {
  std::vector<int> classes{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  Index K = 2000;
  int iterations = 300;
  double delta = 0.005;
  double lambda = 2.0;
  double cg_rel_tol = 1e-4;
  int cg_max_iters = 2000;
  std::uint64_t seed = 1;
  bool record_timing = true;

  void validate() const;
};

struct ClassHistoryRow {
  int iteration = 0;
  double train_rel_err = 0.0;
  double val_rel_err = 0.0;
  double train_accuracy = 0.0;  // one-vs-all accuracy at threshold 1/2
  double val_accuracy = 0.0;
  int cg_iters = 0;
  double wall_ms = 0.0;
};

struct OverallRow {
  int iteration = 0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct OneVsAllResult {
  std::vector<int> classes;
  /// Weights from the iteration with the best overall validation accuracy.
  std::vector<CosSinModel> models;
  int best_iteration = 0;
  double best_train_accuracy = 0.0;
  double best_val_accuracy = 0.0;
  std::vector<std::vector<ClassHistoryRow>> class_history;
  std::vector<OverallRow> overall;
};

/// Trains one cos/sin network per class in lockstep: continuous random walk,
/// ridge solve of the 2K-dimensional real system, resampling on ||(c_k, s_k)||.
/// Images whose label is not in `classes` are ignored.
OneVsAllResult train_one_vs_all(const PointMatrix& train_x, const std::vector<int>& train_y,
                                const PointMatrix& val_x, const std::vector<int>& val_y,
                                const ClassifyConfig& config);

/// Output scores, one column per model.
Eigen::MatrixXd class_scores(const std::vector<CosSinModel>& models, const PointMatrix& images);

/// argmax of the scores; ties go to the smallest class label.
int predict(const std::vector<CosSinModel>& models, const std::vector<int>& classes,
            std::span<const double> image);
std::vector<int> predict(const std::vector<CosSinModel>& models, const std::vector<int>& classes,
                         const PointMatrix& images);

/// Fraction of labels matched. Throws ZeroDenominatorError on an empty set.
double accuracy(const std::vector<CosSinModel>& models, const std::vector<int>& classes,
                const PointMatrix& images, const std::vector<int>& labels);

/// Seeded stratified split of row indices into train/validation/test.
struct ThreeWaySplit {
  std::vector<Index> train;
  std::vector<Index> validation;
  std::vector<Index> test;
};
ThreeWaySplit stratified_split(const std::vector<int>& labels, double validation_fraction,
                               double test_fraction, RngStream& rng);

/// Rows whose label is in `classes`.
std::vector<Index> rows_with_labels(const std::vector<int>& labels, const std::vector<int>& classes);

PointMatrix gather_rows(const PointMatrix& m, std::span<const Index> rows);
std::vector<int> gather_labels(const std::vector<int>& labels, std::span<const Index> rows);

void write_class_history_csv(const std::vector<ClassHistoryRow>& rows, std::ostream& out);

}  // namespace arff

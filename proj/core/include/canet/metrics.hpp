#pragma once

#include <cstdint>
#include <vector>

#include "canet/ops.hpp"
#include "canet/tensor.hpp"

namespace canet {

/// K x K pixel counts, rows = ground truth, columns = prediction. Pixels
/// whose ground truth is the ignore index are tallied separately.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);
  /// Builds a matrix from explicit row-major counts (rows = ground truth).
  static ConfusionMatrix from_counts(
      const std::vector<std::vector<std::uint64_t>>& counts);

  /// Predictions must lie in [0,K); ground truth in [0,K) or ignore_index.
  /// The matrix is unchanged when validation fails.
  void update(const LabelMap& pred, const LabelMap& gt,
              int ignore_index = kIgnoreIndex);
  void merge(const ConfusionMatrix& other);

  int num_classes() const { return k_; }
  std::uint64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * k_ + pred];
  }
  std::uint64_t ignored_pixels() const { return ignored_; }
  std::uint64_t counted_pixels() const;
  std::uint64_t row_sum(int gt) const;
  std::uint64_t col_sum(int pred) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int k_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

/// sum_i p_ii / sum_ij p_ij. Throws std::domain_error on an empty matrix.
double pixel_accuracy(const ConfusionMatrix& cm);

enum class ClassPolicy {
  kExcludeAbsent,  ///< classes absent from both gt and prediction are skipped
  kAllClasses,     ///< absent classes enter the mean with IoU 0
};

struct IouResult {
  double mean = 0.0;
  /// p_ii / (row_i + col_i - p_ii); NaN where the class is absent.
  std::vector<double> per_class;
};

/// Throws std::domain_error on an empty matrix.
IouResult mean_iou(const ConfusionMatrix& cm,
                   ClassPolicy policy = ClassPolicy::kExcludeAbsent);

}  // namespace canet

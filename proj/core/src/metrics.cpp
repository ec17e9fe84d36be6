#include "canet/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "canet/errors.hpp"

namespace canet {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : k_(num_classes),
      counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 1) throw ShapeError("confusion matrix needs >= 1 class");
}

ConfusionMatrix ConfusionMatrix::from_counts(
    const std::vector<std::vector<std::uint64_t>>& counts) {
  ConfusionMatrix cm(static_cast<int>(counts.size()));
  for (int i = 0; i < cm.k_; ++i) {
    if (counts[i].size() != counts.size()) {
      throw ShapeError("confusion matrix counts must be square");
    }
    for (int j = 0; j < cm.k_; ++j) {
      cm.counts_[static_cast<std::size_t>(i) * cm.k_ + j] = counts[i][j];
    }
  }
  return cm;
}

void ConfusionMatrix::update(const LabelMap& pred, const LabelMap& gt,
                             int ignore_index) {
  if (pred.n != gt.n || pred.h != gt.h || pred.w != gt.w) {
    throw ShapeError("confusion update: prediction and ground truth extents "
                     "differ");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt.values[i];
    const int p = pred.values[i];
    if (p < 0 || p >= k_) {
      throw ShapeError("confusion update: predicted class " +
                       std::to_string(p) + " outside [0," + std::to_string(k_) +
                       ")");
    }
    if (g != ignore_index && (g < 0 || g >= k_)) {
      throw ShapeError("confusion update: ground-truth class " +
                       std::to_string(g) + " outside [0," + std::to_string(k_) +
                       ")");
    }
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt.values[i];
    if (g == ignore_index) {
      ++ignored_;
      continue;
    }
    ++counts_[static_cast<std::size_t>(g) * k_ + pred.values[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) {
    throw ShapeError("confusion merge: class counts differ");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
}

std::uint64_t ConfusionMatrix::counted_pixels() const {
  std::uint64_t total = 0;
  for (auto c : counts_) total += c;
  return total;
}

std::uint64_t ConfusionMatrix::row_sum(int gt) const {
  std::uint64_t s = 0;
  for (int j = 0; j < k_; ++j) s += at(gt, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(int pred) const {
  std::uint64_t s = 0;
  for (int i = 0; i < k_; ++i) s += at(i, pred);
  return s;
}

double pixel_accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.counted_pixels();
  if (total == 0) throw std::domain_error("pixel_accuracy: empty confusion matrix");
  std::uint64_t diag = 0;
  for (int i = 0; i < cm.num_classes(); ++i) diag += cm.at(i, i);
  return static_cast<double>(diag) / static_cast<double>(total);
}

IouResult mean_iou(const ConfusionMatrix& cm, ClassPolicy policy) {
  if (cm.counted_pixels() == 0) {
    throw std::domain_error("mean_iou: empty confusion matrix");
  }
  IouResult out;
  out.per_class.assign(cm.num_classes(),
                       std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int classes = 0;
  for (int i = 0; i < cm.num_classes(); ++i) {
    const std::uint64_t tp = cm.at(i, i);
    const std::uint64_t uni = cm.row_sum(i) + cm.col_sum(i) - tp;
    if (uni == 0) {
      if (policy == ClassPolicy::kAllClasses) ++classes;
      continue;
    }
    out.per_class[i] = static_cast<double>(tp) / static_cast<double>(uni);
    sum += out.per_class[i];
    ++classes;
  }
  out.mean = sum / classes;
  return out;
}

}  // namespace canet

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace canet {

/// NCHW extent of a rank-4 tensor.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense rank-4 array of doubles in row-major NCHW layout.
///
/// Tensor is a plain value type. Gradients and graph position live on the
/// Tape node that owns a recorded value (see tape.hpp).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w + w;
  }
  double& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const {
    return data_[index(n, c, h, w)];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Pointer to the (n, c) spatial plane.
  double* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const double* plane(int n, int c) const {
    return data_.data() + index(n, c, 0, 0);
  }

  void fill(double v);
  /// this += other, shapes must match.
  void add_inplace(const Tensor& other);
  bool all_finite() const;

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

/// Integer label maps (N,H,W) share the NCHW convention with C == 1.
struct LabelMap {
  int n = 1;
  int h = 0;
  int w = 0;
  std::vector<int> values;

  LabelMap() = default;
  LabelMap(int n_, int h_, int w_, int fill = 0)
      : n(n_), h(h_), w(w_),
        values(static_cast<std::size_t>(n_) * h_ * w_, fill) {}

  int& at(int b, int y, int x) {
    return values[(static_cast<std::size_t>(b) * h + y) * w + x];
  }
  int at(int b, int y, int x) const {
    return values[(static_cast<std::size_t>(b) * h + y) * w + x];
  }
  std::size_t size() const { return values.size(); }
  bool operator==(const LabelMap&) const = default;
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace canet

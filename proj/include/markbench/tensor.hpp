#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "markbench/rng.hpp"

namespace markbench {

// Dense row-major float64 tensor.  Images are [H,W]; network activations are
// [N,C,H,W].  Shapes are small so they are stored as plain ints.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, double fill);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor from(std::vector<int> shape, std::vector<double> data);
  static Tensor randn(std::vector<int> shape, Rng& rng);

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 2-D accessors (rows x cols).
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  // 4-D accessors ([N,C,H,W]).
  double& at4(int n, int c, int h, int w) {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at4(int n, int c, int h, int w) const {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  Tensor reshaped(std::vector<int> shape) const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& s);

// Throws std::invalid_argument naming both shapes when they differ.
void check_same_shape(const char* op, const Tensor& a, const Tensor& b);

// ---- plain (non-autodiff) elementwise helpers ------------------------------
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
Tensor& operator+=(Tensor& a, const Tensor& b);
Tensor& operator-=(Tensor& a, const Tensor& b);

Tensor clamp01(const Tensor& a);
double mean_abs_diff(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
double l2_diff(const Tensor& a, const Tensor& b);
double psnr(const Tensor& ref, const Tensor& x);  // peak = 1.0, in dB

// Plain 2-D matrix product for [m,k] x [k,n].
Tensor matmul2d(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

}  // namespace markbench

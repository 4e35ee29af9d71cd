#include "markbench/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>

namespace markbench {

namespace {
int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension in " + shape_str(shape));
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_size(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_size(shape_)), fill) {}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  if (shape_size(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = rng.normal();
  return t;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (shape_size(shape) != size())
    throw std::invalid_argument("tensor: cannot reshape " + shape_str(shape_) + " to " +
                                shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  for (int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Tensor& operator-=(Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  for (int64_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

Tensor clamp01(const Tensor& a) {
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0.0) out[i] = 0.0;
    if (out[i] > 1.0) out[i] = 1.0;
  }
  return out;
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape("mean_abs_diff", a, b);
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return a.size() ? s / static_cast<double>(a.size()) : 0.0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape("max_abs_diff", a, b);
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double l2_diff(const Tensor& a, const Tensor& b) {
  check_same_shape("l2_diff", a, b);
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double psnr(const Tensor& ref, const Tensor& x) {
  check_same_shape("psnr", ref, x);
  double mse = 0.0;
  for (int64_t i = 0; i < ref.size(); ++i) {
    const double d = ref[i] - x[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ref.size());
  if (mse <= 0.0) return 1e9;
  return 10.0 * std::log10(1.0 / mse);
}

Tensor matmul2d(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul2d: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    const double* arow = a.data() + static_cast<size_t>(i) * k;
    double* orow = out.data() + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.data() + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose2d(const Tensor& a) {
  if (a.ndim() != 2) throw std::invalid_argument("transpose2d: need 2-D, got " + shape_str(a.shape()));
  Tensor out({a.dim(1), a.dim(0)});
  for (int i = 0; i < a.dim(0); ++i)
    for (int j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

}  // namespace markbench

#include "markbench/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace markbench::nn {

static Tensor gaussian(std::vector<int> shape, double std, Rng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = std * rng.normal();
  return t;
}

Tensor kaiming_conv(int cout, int cin, int kh, int kw, Rng& rng) {
  const double std = std::sqrt(2.0 / (static_cast<double>(cin) * kh * kw));
  return gaussian({cout, cin, kh, kw}, std, rng);
}

Tensor kaiming_convt(int cin, int cout, int kh, int kw, Rng& rng) {
  // Fan-in of the transposed op seen as a layer is cin*kh*kw.
  const double std = std::sqrt(2.0 / (static_cast<double>(cin) * kh * kw));
  return gaussian({cin, cout, kh, kw}, std, rng);
}

Tensor kaiming_linear(int in, int out, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(in));
  return gaussian({in, out}, std, rng);
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam: params/grads count mismatch");
  if (m_.empty()) {
    for (Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("adam: parameter set changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, t_);
  const double bc2 = 1.0 - std::pow(b2_, t_);
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    if (g.empty()) continue;  // parameter did not participate this step
    check_same_shape("adam", p, g);
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (int64_t i = 0; i < p.size(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace markbench::nn

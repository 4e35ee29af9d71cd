#pragma once

#include <stdexcept>
#include <vector>

#include "markbench/autodiff.hpp"
#include "markbench/rng.hpp"
#include "markbench/tensor.hpp"

namespace markbench::nn {

// Kaiming fan-in init: N(0, sqrt(2/fan_in)).
Tensor kaiming_conv(int cout, int cin, int kh, int kw, Rng& rng);
Tensor kaiming_convt(int cin, int cout, int kh, int kw, Rng& rng);
Tensor kaiming_linear(int in, int out, Rng& rng);

// Adam with bias correction.  State slots are keyed by parameter order, so a
// model must register its parameters in the same order every step.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);
  int steps_taken() const { return t_; }
  double lr() const { return lr_; }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Per-step binding of persistent parameters onto a fresh tape.  After
// backward(), collected gradients are handed to Adam in registration order.
// Binding the same parameter twice reuses its node, so multi-use parameters
// accumulate a single gradient.  With trainable=false parameters enter the
// tape as constants (frozen nets inside attack graphs).
class ParamBinder {
 public:
  explicit ParamBinder(ad::Tape& tape, bool trainable = true)
      : tape_(&tape), trainable_(trainable) {}

  ad::Var bind(Tensor& param) {
    for (size_t i = 0; i < params_.size(); ++i)
      if (params_[i] == &param) return vars_[i];
    ad::Var v = trainable_ ? tape_->input(param) : tape_->constant(param);
    params_.push_back(&param);
    vars_.push_back(v);
    return v;
  }

  void apply(Adam& opt) {
    if (!trainable_) throw std::invalid_argument("ParamBinder: frozen parameters cannot be stepped");
    std::vector<const Tensor*> grads;
    grads.reserve(vars_.size());
    for (ad::Var v : vars_) grads.push_back(&tape_->grad(v));
    opt.step(params_, grads);
  }

  const std::vector<Tensor*>& params() const { return params_; }

 private:
  ad::Tape* tape_;
  bool trainable_ = true;
  std::vector<Tensor*> params_;
  std::vector<ad::Var> vars_;
};

// ---- layer parameter bundles -----------------------------------------------

struct Conv2d {
  Tensor w;  // [Cout,Cin,kh,kw]
  Tensor b;  // [Cout]
  int stride = 1;
  int pad = 1;

  Conv2d() = default;
  Conv2d(int cin, int cout, int k, int stride, Rng& rng)
      : w(kaiming_conv(cout, cin, k, k, rng)), b(Tensor({cout})), stride(stride), pad(k / 2) {}

  ad::Var forward(ad::Tape& t, ParamBinder& pb, ad::Var x) {
    return t.conv2d(x, pb.bind(w), pb.bind(b), stride, pad);
  }
  // Inference path without a tape.
  Tensor forward(const Tensor& x) const { return ad::conv2d_forward(x, w, &b, stride, pad); }
};

struct ConvT2d {
  Tensor w;  // [Cin,Cout,kh,kw]
  Tensor b;  // [Cout]
  int stride = 2;
  int pad = 1;

  ConvT2d() = default;
  ConvT2d(int cin, int cout, int k, int stride, Rng& rng)
      : w(kaiming_convt(cin, cout, k, k, rng)), b(Tensor({cout})), stride(stride), pad(k / 2) {}

  ad::Var forward(ad::Tape& t, ParamBinder& pb, ad::Var x) {
    return t.conv2d_transpose(x, pb.bind(w), pb.bind(b), stride, pad);
  }
  Tensor forward(const Tensor& x) const { return ad::convt2d_forward(x, w, &b, stride, pad); }
};

struct Linear {
  Tensor w;  // [In,Out]
  Tensor b;  // [Out]

  Linear() = default;
  Linear(int in, int out, Rng& rng) : w(kaiming_linear(in, out, rng)), b(Tensor({out})) {}

  ad::Var forward(ad::Tape& t, ParamBinder& pb, ad::Var x) {
    return t.linear(x, pb.bind(w), pb.bind(b));
  }
  Tensor forward(const Tensor& x) const {
    Tensor y = matmul2d(x, w);
    for (int n = 0; n < y.dim(0); ++n)
      for (int m = 0; m < y.dim(1); ++m) y.at(n, m) += b[m];
    return y;
  }
};

}  // namespace markbench::nn

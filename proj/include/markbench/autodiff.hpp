#pragma once

#include <functional>
#include <vector>

#include "markbench/tensor.hpp"

namespace markbench::ad {

class Tape;

// Handle to a node on the tape.  Cheap to copy; valid until the tape resets.
struct Var {
  int id = -1;
};

// Reverse-mode tape.  Nodes are appended in evaluation order, which is
// already a topological order, so backward() is a single reverse sweep.
// The tape is rebuilt every optimization step.
class Tape {
 public:
  // Differentiable leaf (parameters, attacked pixels, ...).
  Var input(const Tensor& t);
  // Non-differentiable leaf (data, fixed matrices); backward skips it.
  Var constant(const Tensor& t);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  // Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse.  `loss` must be
  // a scalar (single-element tensor).
  void backward(Var loss);

  void reset();
  size_t size() const { return nodes_.size(); }

  // ---- ops -----------------------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scalar_mul(double s, Var a);
  Var scalar_add(double s, Var a);
  Var matmul(Var a, Var b);  // [m,k] x [k,n]
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var abs(Var a);
  Var sum(Var a);   // -> scalar
  Var mean(Var a);  // -> scalar
  Var clamp(Var a, double lo, double hi);
  Var l1_distance(Var a, Var b);            // sum(|a-b|) -> scalar
  Var bce_with_logits(Var logits, Var targets);  // mean -> scalar
  Var square(Var a);
  Var log(Var a);  // natural log, elementwise
  Var cos(Var a);  // cosine, elementwise
  Var reshape(Var a, std::vector<int> shape);

  // [N,Cin,H,W] * [Cout,Cin,kh,kw] (+bias [Cout]), stride 1 or 2.
  Var conv2d(Var x, Var w, Var bias, int stride, int pad);
  // [N,Cin,H,W] * [Cin,Cout,kh,kw] (+bias [Cout]); output size
  // (H-1)*stride - 2*pad + kh.
  Var conv2d_transpose(Var x, Var w, Var bias, int stride, int pad);

  Var add_channel_bias(Var x, Var bias);  // [N,C,H,W] + [C]
  Var linear(Var x, Var w, Var bias);     // [N,K] x [K,M] + [M]
  Var global_avg_pool(Var x);             // [N,C,H,W] -> [N,C]

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> back;  // accumulates into parents' grads
  };

  int push(Tensor value, bool needs_grad, std::function<void()> back = nullptr);
  // Gradient buffer of node i, or nullptr if that node does not need one.
  Tensor* gptr(int i);

  std::vector<Node> nodes_;
};

// ---- raw convolution kernels (shared with plain inference paths) -----------
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad);
Tensor conv2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad, int H, int W);
Tensor conv2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad, int kh, int kw);
Tensor convt2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad);
Tensor convt2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad);
Tensor convt2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad, int kh, int kw);

}  // namespace markbench::ad

#include "markbench/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace markbench::ad {

// ---- raw convolution kernels ------------------------------------------------

static void check4(const char* op, const Tensor& t) {
  if (t.ndim() != 4) throw std::invalid_argument(std::string(op) + ": need 4-D, got " + shape_str(t.shape()));
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad) {
  check4("conv2d", x);
  check4("conv2d", w);
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != Cin)
    throw std::invalid_argument("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  Tensor y({N, Cout, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co) {
      const double b = bias ? (*bias)[co] : 0.0;
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = b;
          for (int ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < kh; ++i) {
              const int ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              const double* xrow = x.data() + ((static_cast<size_t>(n) * Cin + ci) * H + ih) * W;
              const double* wrow = w.data() + ((static_cast<size_t>(co) * Cin + ci) * kh + i) * kw;
              for (int j = 0; j < kw; ++j) {
                const int iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                acc += xrow[iw] * wrow[j];
              }
            }
          y.at4(n, co, oh, ow) = acc;
        }
    }
  return y;
}

Tensor conv2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad, int H, int W) {
  const int N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  const int Cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  Tensor gx({N, Cin, H, W});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          const double g = gy.at4(n, co, oh, ow);
          if (g == 0.0) continue;
          for (int ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < kh; ++i) {
              const int ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              double* gxrow = gx.data() + ((static_cast<size_t>(n) * Cin + ci) * H + ih) * W;
              const double* wrow = w.data() + ((static_cast<size_t>(co) * Cin + ci) * kh + i) * kw;
              for (int j = 0; j < kw; ++j) {
                const int iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                gxrow[iw] += g * wrow[j];
              }
            }
        }
  return gx;
}

Tensor conv2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad, int kh, int kw) {
  const int N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  const int Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor gw({Cout, Cin, kh, kw});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          const double g = gy.at4(n, co, oh, ow);
          if (g == 0.0) continue;
          for (int ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < kh; ++i) {
              const int ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              const double* xrow = x.data() + ((static_cast<size_t>(n) * Cin + ci) * H + ih) * W;
              double* gwrow = gw.data() + ((static_cast<size_t>(co) * Cin + ci) * kh + i) * kw;
              for (int j = 0; j < kw; ++j) {
                const int iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                gwrow[j] += g * xrow[iw];
              }
            }
        }
  return gw;
}

Tensor convt2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad) {
  check4("conv2d_transpose", x);
  check4("conv2d_transpose", w);
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(0) != Cin)
    throw std::invalid_argument("conv2d_transpose: channel mismatch " + shape_str(x.shape()) + " vs " +
                                shape_str(w.shape()));
  const int OH = (H - 1) * stride - 2 * pad + kh;
  const int OW = (W - 1) * stride - 2 * pad + kw;
  Tensor y({N, Cout, OH, OW});
  if (bias) {
    for (int n = 0; n < N; ++n)
      for (int co = 0; co < Cout; ++co) {
        double* base = y.data() + (static_cast<size_t>(n) * Cout + co) * OH * OW;
        const double b = (*bias)[co];
        for (int i = 0; i < OH * OW; ++i) base[i] += b;
      }
  }
  for (int n = 0; n < N; ++n)
    for (int ci = 0; ci < Cin; ++ci)
      for (int ih = 0; ih < H; ++ih)
        for (int iw = 0; iw < W; ++iw) {
          const double xv = x.at4(n, ci, ih, iw);
          if (xv == 0.0) continue;
          for (int co = 0; co < Cout; ++co)
            for (int i = 0; i < kh; ++i) {
              const int oh = ih * stride - pad + i;
              if (oh < 0 || oh >= OH) continue;
              double* yrow = y.data() + ((static_cast<size_t>(n) * Cout + co) * OH + oh) * OW;
              const double* wrow = w.data() + ((static_cast<size_t>(ci) * Cout + co) * kh + i) * kw;
              for (int j = 0; j < kw; ++j) {
                const int ow = iw * stride - pad + j;
                if (ow < 0 || ow >= OW) continue;
                yrow[ow] += xv * wrow[j];
              }
            }
        }
  return y;
}

Tensor convt2d_grad_input(const Tensor& gy, const Tensor& w, int stride, int pad) {
  const int N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  const int Cin = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  // Input size follows from the forward relation.
  const int H = (OH + 2 * pad - kh) / stride + 1;
  const int W = (OW + 2 * pad - kw) / stride + 1;
  Tensor gx({N, Cin, H, W});
  for (int n = 0; n < N; ++n)
    for (int ci = 0; ci < Cin; ++ci)
      for (int ih = 0; ih < H; ++ih)
        for (int iw = 0; iw < W; ++iw) {
          double acc = 0.0;
          for (int co = 0; co < Cout; ++co)
            for (int i = 0; i < kh; ++i) {
              const int oh = ih * stride - pad + i;
              if (oh < 0 || oh >= OH) continue;
              const double* gyrow = gy.data() + ((static_cast<size_t>(n) * Cout + co) * OH + oh) * OW;
              const double* wrow = w.data() + ((static_cast<size_t>(ci) * Cout + co) * kh + i) * kw;
              for (int j = 0; j < kw; ++j) {
                const int ow = iw * stride - pad + j;
                if (ow < 0 || ow >= OW) continue;
                acc += gyrow[ow] * wrow[j];
              }
            }
          gx.at4(n, ci, ih, iw) = acc;
        }
  return gx;
}

Tensor convt2d_grad_weight(const Tensor& gy, const Tensor& x, int stride, int pad, int kh, int kw) {
  const int N = gy.dim(0), Cout = gy.dim(1), OH = gy.dim(2), OW = gy.dim(3);
  const int Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor gw({Cin, Cout, kh, kw});
  for (int n = 0; n < N; ++n)
    for (int ci = 0; ci < Cin; ++ci)
      for (int ih = 0; ih < H; ++ih)
        for (int iw = 0; iw < W; ++iw) {
          const double xv = x.at4(n, ci, ih, iw);
          if (xv == 0.0) continue;
          for (int co = 0; co < Cout; ++co)
            for (int i = 0; i < kh; ++i) {
              const int oh = ih * stride - pad + i;
              if (oh < 0 || oh >= OH) continue;
              const double* gyrow = gy.data() + ((static_cast<size_t>(n) * Cout + co) * OH + oh) * OW;
              double* gwrow = gw.data() + ((static_cast<size_t>(ci) * Cout + co) * kh + i) * kw;
              for (int j = 0; j < kw; ++j) {
                const int ow = iw * stride - pad + j;
                if (ow < 0 || ow >= OW) continue;
                gwrow[j] += xv * gyrow[ow];
              }
            }
        }
  return gw;
}

// ---- tape -------------------------------------------------------------------

int Tape::push(Tensor value, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor* Tape::gptr(int i) {
  if (!nodes_[i].needs_grad) return nullptr;
  if (nodes_[i].grad.empty()) nodes_[i].grad = Tensor(nodes_[i].value.shape());
  return &nodes_[i].grad;
}

Var Tape::input(const Tensor& t) { return {push(t, true)}; }
Var Tape::constant(const Tensor& t) { return {push(t, false)}; }

void Tape::reset() { nodes_.clear(); }

void Tape::backward(Var loss) {
  if (nodes_[loss.id].value.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(nodes_[loss.id].value.shape()));
  if (!nodes_[loss.id].needs_grad)
    throw std::invalid_argument("backward: loss does not depend on any input");
  for (auto& n : nodes_)
    if (!n.grad.empty())
      n.grad = Tensor(n.value.shape());
  *gptr(loss.id) = Tensor::from({1}, {1.0});
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.needs_grad && !n.grad.empty()) n.back();
  }
}

#define NEEDS(v) nodes_[(v).id].needs_grad

Var Tape::add(Var a, Var b) {
  check_same_shape("add", value(a), value(b));
  Tensor out = value(a) + value(b);
  const bool ng = NEEDS(a) || NEEDS(b);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a, b]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* ga = gptr(a.id)) *ga += g;
      if (Tensor* gb = gptr(b.id)) *gb += g;
    };
  return {id};
}

Var Tape::sub(Var a, Var b) {
  check_same_shape("sub", value(a), value(b));
  Tensor out = value(a) - value(b);
  const bool ng = NEEDS(a) || NEEDS(b);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a, b]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* ga = gptr(a.id)) *ga += g;
      if (Tensor* gb = gptr(b.id)) *gb -= g;
    };
  return {id};
}

Var Tape::mul(Var a, Var b) {
  check_same_shape("mul", value(a), value(b));
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= value(b)[i];
  const bool ng = NEEDS(a) || NEEDS(b);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a, b]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* ga = gptr(a.id)) {
        const Tensor& bv = value(b);
        for (int64_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
      }
      if (Tensor* gb = gptr(b.id)) {
        const Tensor& av = value(a);
        for (int64_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
      }
    };
  return {id};
}

Var Tape::scalar_mul(double s, Var a) {
  Tensor out = s * value(a);
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a, s]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
    };
  return {id};
}

Var Tape::scalar_add(double s, Var a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] += s;
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* ga = gptr(a.id)) *ga += g;
    };
  return {id};
}

Var Tape::matmul(Var a, Var b) {
  Tensor out = matmul2d(value(a), value(b));
  const bool ng = NEEDS(a) || NEEDS(b);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a, b]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* ga = gptr(a.id)) *ga += matmul2d(g, transpose2d(value(b)));
      if (Tensor* gb = gptr(b.id)) *gb += matmul2d(transpose2d(value(a)), g);
    };
  return {id};
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] = 0.0;
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& av = value(a);
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i)
          if (av[i] > 0.0) (*ga)[i] += g[i];
    };
  return {id};
}

Var Tape::tanh(Var a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& y = nodes_[id].value;
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
    };
  return {id};
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& y = nodes_[id].value;
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
    };
  return {id};
}

Var Tape::abs(Var a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& av = value(a);
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i) {
          if (av[i] > 0.0)
            (*ga)[i] += g[i];
          else if (av[i] < 0.0)
            (*ga)[i] -= g[i];
        }
    };
  return {id};
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (int64_t i = 0; i < value(a).size(); ++i) s += value(a)[i];
  const bool ng = NEEDS(a);
  int id = push(Tensor::from({1}, {s}), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const double g = nodes_[id].grad[0];
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
    };
  return {id};
}

Var Tape::mean(Var a) {
  const int64_t n = value(a).size();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += value(a)[i];
  const bool ng = NEEDS(a);
  int id = push(Tensor::from({1}, {s / static_cast<double>(n)}), ng);
  if (ng)
    nodes_[id].back = [this, id, a, n]() {
      const double g = nodes_[id].grad[0] / static_cast<double>(n);
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
    };
  return {id};
}

Var Tape::clamp(Var a, double lo, double hi) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) {
    if (out[i] < lo) out[i] = lo;
    if (out[i] > hi) out[i] = hi;
  }
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a, lo, hi]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& av = value(a);
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i)
          if (av[i] > lo && av[i] < hi) (*ga)[i] += g[i];
    };
  return {id};
}

Var Tape::l1_distance(Var a, Var b) {
  check_same_shape("l1_distance", value(a), value(b));
  double s = 0.0;
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  for (int64_t i = 0; i < av.size(); ++i) s += std::fabs(av[i] - bv[i]);
  const bool ng = NEEDS(a) || NEEDS(b);
  int id = push(Tensor::from({1}, {s}), ng);
  if (ng)
    nodes_[id].back = [this, id, a, b]() {
      const double g = nodes_[id].grad[0];
      const Tensor& av = value(a);
      const Tensor& bv = value(b);
      Tensor* ga = gptr(a.id);
      Tensor* gb = gptr(b.id);
      for (int64_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (ga) (*ga)[i] += g * sg;
        if (gb) (*gb)[i] -= g * sg;
      }
    };
  return {id};
}

Var Tape::bce_with_logits(Var logits, Var targets) {
  check_same_shape("bce_with_logits", value(logits), value(targets));
  const Tensor& z = value(logits);
  const Tensor& t = value(targets);
  const int64_t n = z.size();
  // Numerically stable form: max(z,0) - z*t + log1p(exp(-|z|)).
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i)
    s += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::fabs(z[i])));
  const bool ng = NEEDS(logits) || NEEDS(targets);
  int id = push(Tensor::from({1}, {s / static_cast<double>(n)}), ng);
  if (ng)
    nodes_[id].back = [this, id, logits, targets, n]() {
      const double g = nodes_[id].grad[0] / static_cast<double>(n);
      const Tensor& z = value(logits);
      const Tensor& t = value(targets);
      Tensor* gz = gptr(logits.id);
      Tensor* gt = gptr(targets.id);
      for (int64_t i = 0; i < n; ++i) {
        const double sig = 1.0 / (1.0 + std::exp(-z[i]));
        if (gz) (*gz)[i] += g * (sig - t[i]);
        if (gt) (*gt)[i] -= g * z[i];
      }
    };
  return {id};
}

Var Tape::square(Var a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= out[i];
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& av = value(a);
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i) (*ga)[i] += 2.0 * av[i] * g[i];
    };
  return {id};
}

Var Tape::log(Var a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& av = value(a);
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / av[i];
    };
  return {id};
}

Var Tape::cos(Var a) {
  Tensor out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::cos(out[i]);
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& av = value(a);
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i) (*ga)[i] -= g[i] * std::sin(av[i]);
    };
  return {id};
}

Var Tape::reshape(Var a, std::vector<int> shape) {
  Tensor out = value(a).reshaped(shape);
  const bool ng = NEEDS(a);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, a]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* ga = gptr(a.id))
        for (int64_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    };
  return {id};
}

Var Tape::conv2d(Var x, Var w, Var bias, int stride, int pad) {
  const Tensor* bp = bias.id >= 0 ? &value(bias) : nullptr;
  Tensor out = conv2d_forward(value(x), value(w), bp, stride, pad);
  const bool ng = NEEDS(x) || NEEDS(w) || (bias.id >= 0 && NEEDS(bias));
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, x, w, bias, stride, pad]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& xv = value(x);
      const Tensor& wv = value(w);
      if (Tensor* gx = gptr(x.id)) *gx += conv2d_grad_input(g, wv, stride, pad, xv.dim(2), xv.dim(3));
      if (Tensor* gw = gptr(w.id)) *gw += conv2d_grad_weight(g, xv, stride, pad, wv.dim(2), wv.dim(3));
      if (bias.id >= 0)
        if (Tensor* gb = gptr(bias.id)) {
          const int N = g.dim(0), Cout = g.dim(1), OH = g.dim(2), OW = g.dim(3);
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < Cout; ++c) {
              double s = 0.0;
              const double* base = g.data() + (static_cast<size_t>(n) * Cout + c) * OH * OW;
              for (int i = 0; i < OH * OW; ++i) s += base[i];
              (*gb)[c] += s;
            }
        }
    };
  return {id};
}

Var Tape::conv2d_transpose(Var x, Var w, Var bias, int stride, int pad) {
  const Tensor* bp = bias.id >= 0 ? &value(bias) : nullptr;
  Tensor out = convt2d_forward(value(x), value(w), bp, stride, pad);
  const bool ng = NEEDS(x) || NEEDS(w) || (bias.id >= 0 && NEEDS(bias));
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, x, w, bias, stride, pad]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& xv = value(x);
      const Tensor& wv = value(w);
      if (Tensor* gx = gptr(x.id)) *gx += convt2d_grad_input(g, wv, stride, pad);
      if (Tensor* gw = gptr(w.id)) *gw += convt2d_grad_weight(g, xv, stride, pad, wv.dim(2), wv.dim(3));
      if (bias.id >= 0)
        if (Tensor* gb = gptr(bias.id)) {
          const int N = g.dim(0), Cout = g.dim(1), OH = g.dim(2), OW = g.dim(3);
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < Cout; ++c) {
              double s = 0.0;
              const double* base = g.data() + (static_cast<size_t>(n) * Cout + c) * OH * OW;
              for (int i = 0; i < OH * OW; ++i) s += base[i];
              (*gb)[c] += s;
            }
        }
    };
  return {id};
}

Var Tape::add_channel_bias(Var x, Var bias) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(bias);
  if (xv.ndim() != 4 || bv.ndim() != 1 || bv.dim(0) != xv.dim(1))
    throw std::invalid_argument("add_channel_bias: shapes " + shape_str(xv.shape()) + " vs " +
                                shape_str(bv.shape()));
  Tensor out = xv;
  const int N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double* base = out.data() + (static_cast<size_t>(n) * C + c) * HW;
      for (int i = 0; i < HW; ++i) base[i] += bv[c];
    }
  const bool ng = NEEDS(x) || NEEDS(bias);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, x, bias, N, C, HW]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* gx = gptr(x.id)) *gx += g;
      if (Tensor* gb = gptr(bias.id))
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            double s = 0.0;
            const double* base = g.data() + (static_cast<size_t>(n) * C + c) * HW;
            for (int i = 0; i < HW; ++i) s += base[i];
            (*gb)[c] += s;
          }
    };
  return {id};
}

Var Tape::linear(Var x, Var w, Var bias) {
  Var y = matmul(x, w);
  if (bias.id < 0) return y;
  const Tensor& bv = value(bias);
  const Tensor& yv = value(y);
  if (bv.ndim() != 1 || bv.dim(0) != yv.dim(1))
    throw std::invalid_argument("linear: bias shape " + shape_str(bv.shape()) + " vs output " +
                                shape_str(yv.shape()));
  Tensor out = yv;
  const int N = yv.dim(0), M = yv.dim(1);
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < M; ++m) out.at(n, m) += bv[m];
  const bool ng = NEEDS(y) || NEEDS(bias);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, y, bias, N, M]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* gy = gptr(y.id)) *gy += g;
      if (Tensor* gb = gptr(bias.id))
        for (int n = 0; n < N; ++n)
          for (int m = 0; m < M; ++m) (*gb)[m] += g.at(n, m);
    };
  return {id};
}

Var Tape::global_avg_pool(Var x) {
  const Tensor& xv = value(x);
  if (xv.ndim() != 4) throw std::invalid_argument("global_avg_pool: need 4-D, got " + shape_str(xv.shape()));
  const int N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  Tensor out({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      const double* base = xv.data() + (static_cast<size_t>(n) * C + c) * HW;
      for (int i = 0; i < HW; ++i) s += base[i];
      out.at(n, c) = s / HW;
    }
  const bool ng = NEEDS(x);
  int id = push(std::move(out), ng);
  if (ng)
    nodes_[id].back = [this, id, x, N, C, HW]() {
      const Tensor& g = nodes_[id].grad;
      if (Tensor* gx = gptr(x.id))
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const double gv = g.at(n, c) / HW;
            double* base = gx->data() + (static_cast<size_t>(n) * C + c) * HW;
            for (int i = 0; i < HW; ++i) base[i] += gv;
          }
    };
  return {id};
}

#undef NEEDS

}  // namespace markbench::ad

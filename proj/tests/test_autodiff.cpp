#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "markbench/autodiff.hpp"
#include "markbench/rng.hpp"
#include "markbench/tensor.hpp"

using namespace markbench;
using ad::Tape;
using ad::Var;

namespace {

// Central finite difference of a scalar graph with respect to every entry of
// one leaf tensor, compared against the tape gradient.
void check_gradient(const Tensor& x0,
                    const std::function<Var(Tape&, Var)>& graph,
                    double h = 1e-6, double tol = 1e-5) {
  Tape tape;
  Var x = tape.input(x0);
  Var loss = graph(tape, x);
  tape.backward(loss);
  const Tensor analytic = tape.grad(x);
  REQUIRE(analytic.same_shape(x0));

  for (int64_t i = 0; i < x0.size(); ++i) {
    Tensor xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    Tape tp, tm;
    const double fp = tp.value(graph(tp, tp.input(xp)))[0];
    const double fm = tm.value(graph(tm, tm.input(xm)))[0];
    const double numeric = (fp - fm) / (2 * h);
    CHECK(analytic[i] == doctest::Approx(numeric).epsilon(tol).scale(1.0));
  }
}

Tensor rand_tensor(std::vector<int> shape, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor t = Tensor::randn(std::move(shape), rng);
  for (int64_t i = 0; i < t.size(); ++i) t[i] *= scale;
  return t;
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
  const Tensor x = rand_tensor({6}, 1);
  const Tensor y = rand_tensor({6}, 2);

  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.add(v, t.constant(y))); });
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.sub(v, t.constant(y))); });
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.mul(v, t.constant(y))); });
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.scalar_mul(-2.5, v)); });
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.scalar_add(0.3, v)); });
  check_gradient(x, [&](Tape& t, Var v) { return t.mean(t.square(v)); });
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.tanh(v)); });
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.sigmoid(v)); });
}

TEST_CASE("gradients of kinked and composite ops away from the kink") {
  // Keep all inputs away from 0 so relu/abs are differentiable at the sample.
  Tensor x = rand_tensor({6}, 3);
  for (int64_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) < 0.2) x[i] = x[i] < 0 ? -0.3 : 0.3;
  const Tensor y = rand_tensor({6}, 4);

  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.relu(v)); });
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.abs(v)); });
  check_gradient(x, [&](Tape& t, Var v) { return t.l1_distance(v, t.constant(y)); });
  // clamp: pick bounds so no input sits on them
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.clamp(v, -10.0, 10.0)); });
}

TEST_CASE("log gradient") {
  Tensor x = rand_tensor({5}, 5);
  for (int64_t i = 0; i < x.size(); ++i) x[i] = 0.2 + std::abs(x[i]);
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.log(v)); });
}

TEST_CASE("bce_with_logits matches the explicit formula and its gradient") {
  const Tensor z = rand_tensor({8}, 6, 2.0);
  Tensor tgt({8});
  Rng rng(7);
  for (int i = 0; i < 8; ++i) tgt[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;

  Tape t;
  Var vz = t.input(z);
  Var loss = t.bce_with_logits(vz, t.constant(tgt));
  double expect = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-z[i]));
    expect += -(tgt[i] * std::log(s) + (1 - tgt[i]) * std::log(1 - s)) / 8.0;
  }
  CHECK(t.value(loss)[0] == doctest::Approx(expect).epsilon(1e-10));

  check_gradient(z, [&](Tape& tp, Var v) { return tp.bce_with_logits(v, tp.constant(tgt)); });
}

TEST_CASE("matmul, linear and reshape gradients") {
  const Tensor a = rand_tensor({3, 4}, 8);
  const Tensor b = rand_tensor({4, 2}, 9);
  const Tensor bias = rand_tensor({2}, 10);

  check_gradient(a, [&](Tape& t, Var v) { return t.sum(t.matmul(v, t.constant(b))); });
  check_gradient(b, [&](Tape& t, Var v) { return t.sum(t.matmul(t.constant(a), v)); });
  check_gradient(a, [&](Tape& t, Var v) {
    return t.sum(t.linear(v, t.constant(b), t.constant(bias)));
  });
  check_gradient(bias, [&](Tape& t, Var v) {
    return t.sum(t.linear(t.constant(a), t.constant(b), v));
  });
  check_gradient(a, [&](Tape& t, Var v) { return t.sum(t.square(t.reshape(v, {4, 3}))); });
}

TEST_CASE("conv2d forward matches a direct dense computation") {
  const Tensor x = rand_tensor({1, 2, 5, 5}, 11);
  const Tensor w = rand_tensor({3, 2, 3, 3}, 12);
  const Tensor b = rand_tensor({3}, 13);
  const int stride = 2, pad = 1;
  const Tensor y = ad::conv2d_forward(x, w, &b, stride, pad);
  REQUIRE(y.shape() == std::vector<int>{1, 3, 3, 3});
  for (int co = 0; co < 3; ++co)
    for (int oh = 0; oh < 3; ++oh)
      for (int ow = 0; ow < 3; ++ow) {
        double acc = b[co];
        for (int ci = 0; ci < 2; ++ci)
          for (int kh = 0; kh < 3; ++kh)
            for (int kw = 0; kw < 3; ++kw) {
              const int ih = oh * stride + kh - pad;
              const int iw = ow * stride + kw - pad;
              if (ih < 0 || ih >= 5 || iw < 0 || iw >= 5) continue;
              acc += x.at4(0, ci, ih, iw) * w.at4(co, ci, kh, kw);
            }
        CHECK(y.at4(0, co, oh, ow) == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("conv2d gradients match finite differences") {
  const Tensor x = rand_tensor({2, 2, 6, 6}, 14, 0.5);
  const Tensor w = rand_tensor({3, 2, 3, 3}, 15, 0.5);
  const Tensor b = rand_tensor({3}, 16, 0.5);

  for (int stride : {1, 2}) {
    check_gradient(x, [&](Tape& t, Var v) {
      return t.sum(t.square(t.conv2d(v, t.constant(w), t.constant(b), stride, 1)));
    });
    check_gradient(w, [&](Tape& t, Var v) {
      return t.sum(t.square(t.conv2d(t.constant(x), v, t.constant(b), stride, 1)));
    });
    check_gradient(b, [&](Tape& t, Var v) {
      return t.sum(t.square(t.conv2d(t.constant(x), t.constant(w), v, stride, 1)));
    });
  }
}

TEST_CASE("transposed conv is the adjoint of conv") {
  // <conv(x, w), y> == <x, conv_transpose(y, w)> for bias-free maps.
  const int stride = 2, pad = 1;
  const Tensor x = rand_tensor({1, 2, 6, 6}, 17);
  const Tensor w = rand_tensor({3, 2, 4, 4}, 18);
  const Tensor cx = ad::conv2d_forward(x, w, nullptr, stride, pad);
  const Tensor y = rand_tensor(cx.shape(), 19);
  // conv_transpose wants weights as [Cin,Cout,kh,kw] where Cin are the y
  // channels; conv2d_grad_input implements exactly the adjoint, use it as the
  // reference and check convt2d_forward against it with rearranged weights.
  const Tensor xadj = ad::conv2d_grad_input(y, w, stride, pad, 6, 6);
  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < cx.size(); ++i) lhs += cx[i] * y[i];
  for (int64_t i = 0; i < x.size(); ++i) rhs += x[i] * xadj[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

  // convt2d weights are [Cin,Cout,kh,kw]; conv weights [Cout,Cin,kh,kw] read
  // as [Cin,Cout,...] give exactly the adjoint map.
  const Tensor xt = ad::convt2d_forward(y, w, nullptr, stride, pad);
  REQUIRE(xt.same_shape(x));
  CHECK(max_abs_diff(xt, xadj) < 1e-12);
}

TEST_CASE("conv2d_transpose gradients match finite differences") {
  const Tensor x = rand_tensor({1, 3, 3, 3}, 20, 0.5);
  const Tensor w = rand_tensor({3, 2, 4, 4}, 21, 0.5);
  const Tensor b = rand_tensor({2}, 22, 0.5);
  check_gradient(x, [&](Tape& t, Var v) {
    return t.sum(t.square(t.conv2d_transpose(v, t.constant(w), t.constant(b), 2, 1)));
  });
  check_gradient(w, [&](Tape& t, Var v) {
    return t.sum(t.square(t.conv2d_transpose(t.constant(x), v, t.constant(b), 2, 1)));
  });
  check_gradient(b, [&](Tape& t, Var v) {
    return t.sum(t.square(t.conv2d_transpose(t.constant(x), t.constant(w), v, 2, 1)));
  });
}

TEST_CASE("add_channel_bias and global_avg_pool gradients") {
  const Tensor x = rand_tensor({2, 3, 4, 4}, 23);
  const Tensor b = rand_tensor({3}, 24);
  check_gradient(x, [&](Tape& t, Var v) {
    return t.sum(t.square(t.add_channel_bias(v, t.constant(b))));
  });
  check_gradient(b, [&](Tape& t, Var v) {
    return t.sum(t.square(t.add_channel_bias(t.constant(x), v)));
  });
  check_gradient(x, [&](Tape& t, Var v) { return t.sum(t.square(t.global_avg_pool(v))); });
}

TEST_CASE("multi-use parameters accumulate gradients") {
  const Tensor x = Tensor::from({2}, {1.0, 2.0});
  Tape t;
  Var v = t.input(x);
  Var loss = t.sum(t.add(v, v));  // d/dx sum(2x) = 2
  t.backward(loss);
  CHECK(t.grad(v)[0] == doctest::Approx(2.0));
  CHECK(t.grad(v)[1] == doctest::Approx(2.0));
}

TEST_CASE("backward rejects non-scalar loss and constants get no grad") {
  Tape t;
  Var v = t.input(Tensor::from({2}, {1, 2}));
  Var w = t.add(v, v);
  CHECK_THROWS(t.backward(w));
  Var c = t.constant(Tensor::from({2}, {3, 4}));
  Var loss = t.sum(t.mul(v, c));
  t.backward(loss);
  CHECK(t.grad(v)[0] == doctest::Approx(3.0));
}

TEST_CASE("backward twice on fresh tapes is consistent") {
  const Tensor x = rand_tensor({4}, 25);
  Tape t1, t2;
  Var a1 = t1.input(x);
  t1.backward(t1.mean(t1.square(a1)));
  Var a2 = t2.input(x);
  t2.backward(t2.mean(t2.square(a2)));
  CHECK(max_abs_diff(t1.grad(a1), t2.grad(a2)) == 0.0);
}

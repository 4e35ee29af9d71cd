#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "markbench/rng.hpp"
#include "markbench/tensor.hpp"

using namespace markbench;

TEST_CASE("construction and shape") {
  Tensor t({2, 3});
  CHECK(t.ndim() == 2);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(1) == 3);
  CHECK(t.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(t[i] == 0.0);

  Tensor f = Tensor::full({4}, 2.5);
  for (int i = 0; i < 4; ++i) CHECK(f[i] == 2.5);

  Tensor d;
  CHECK(d.empty());
  CHECK(d.size() == 0);
}

TEST_CASE("from rejects wrong element count") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
  Tensor ok = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(ok.at(1, 0) == 3.0);
}

TEST_CASE("accessors agree with row-major layout") {
  Tensor t = Tensor::from({2, 3}, {0, 1, 2, 3, 4, 5});
  CHECK(t.at(0, 2) == 2.0);
  CHECK(t.at(1, 1) == 4.0);

  Tensor u({2, 3, 2, 2});
  u.at4(1, 2, 1, 0) = 9.0;
  CHECK(u[((1 * 3 + 2) * 2 + 1) * 2 + 0] == 9.0);
}

TEST_CASE("reshaped preserves data and checks size") {
  Tensor t = Tensor::from({2, 3}, {0, 1, 2, 3, 4, 5});
  Tensor r = t.reshaped({3, 2});
  CHECK(r.at(2, 1) == 5.0);
  CHECK_THROWS_AS(t.reshaped({4, 2}), std::invalid_argument);
}

TEST_CASE("arithmetic and shape checks") {
  Tensor a = Tensor::from({2}, {1, 2});
  Tensor b = Tensor::from({2}, {10, 20});
  Tensor c = a + b;
  CHECK(c[0] == 11.0);
  Tensor d = b - a;
  CHECK(d[1] == 18.0);
  Tensor e = 3.0 * a;
  CHECK(e[1] == 6.0);
  e += a;
  CHECK(e[0] == 4.0);
  e -= a;
  CHECK(e[0] == 3.0);
  Tensor wrong({3});
  CHECK_THROWS_AS(a + wrong, std::invalid_argument);
}

TEST_CASE("clamp01 and diffs") {
  Tensor a = Tensor::from({3}, {-0.5, 0.25, 1.5});
  Tensor c = clamp01(a);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 0.25);
  CHECK(c[2] == 1.0);

  Tensor x = Tensor::from({2}, {0.0, 1.0});
  Tensor y = Tensor::from({2}, {0.5, 0.0});
  CHECK(mean_abs_diff(x, y) == doctest::Approx(0.75));
  CHECK(max_abs_diff(x, y) == doctest::Approx(1.0));
  CHECK(l2_diff(x, y) == doctest::Approx(std::sqrt(0.25 + 1.0)));
}

TEST_CASE("psnr of identical images is large, of offset images matches formula") {
  Tensor x = Tensor::full({8, 8}, 0.5);
  CHECK(psnr(x, x) > 90.0);
  Tensor y = Tensor::full({8, 8}, 0.6);
  // mse = 0.01 -> psnr = 10*log10(1/0.01) = 20 dB
  CHECK(psnr(x, y) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("matmul2d against a hand computation") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = matmul2d(a, b);
  CHECK(c.at(0, 0) == doctest::Approx(58.0));
  CHECK(c.at(0, 1) == doctest::Approx(64.0));
  CHECK(c.at(1, 0) == doctest::Approx(139.0));
  CHECK(c.at(1, 1) == doctest::Approx(154.0));
  Tensor at = transpose2d(a);
  CHECK(at.dim(0) == 3);
  CHECK(at.at(0, 1) == 4.0);
}

TEST_CASE("randn is deterministic per seed and roughly standard") {
  Rng r1(42), r2(42), r3(43);
  Tensor a = Tensor::randn({1000}, r1);
  Tensor b = Tensor::randn({1000}, r2);
  Tensor c = Tensor::randn({1000}, r3);
  CHECK(max_abs_diff(a, b) == 0.0);
  CHECK(max_abs_diff(a, c) > 0.0);
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < 1000; ++i) mean += a[i] / 1000.0;
  for (int i = 0; i < 1000; ++i) var += (a[i] - mean) * (a[i] - mean) / 999.0;
  CHECK(std::abs(mean) < 0.15);
  CHECK(var == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("rng utility distributions") {
  Rng r(7);
  for (int i = 0; i < 200; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const int k = r.uniform_int(5);
    CHECK(k >= 0);
    CHECK(k < 5);
  }
  const auto perm = r.permutation(16);
  std::vector<bool> seen(16, false);
  for (int v : perm) {
    CHECK(!seen[static_cast<size_t>(v)]);
    seen[static_cast<size_t>(v)] = true;
  }
}

TEST_CASE("derive_seed decorrelates streams deterministically") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

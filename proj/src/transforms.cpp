#include "markbench/transforms.hpp"

#include <cmath>
#include <stdexcept>

namespace markbench::transforms {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;

void haar_rows(Tensor& x, int h, int w) {
  std::vector<double> tmp(static_cast<size_t>(w));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w / 2; ++c) {
      const double a = x.at(r, 2 * c), b = x.at(r, 2 * c + 1);
      tmp[static_cast<size_t>(c)] = (a + b) * kInvSqrt2;
      tmp[static_cast<size_t>(w / 2 + c)] = (a - b) * kInvSqrt2;
    }
    for (int c = 0; c < w; ++c) x.at(r, c) = tmp[static_cast<size_t>(c)];
  }
}

void haar_cols(Tensor& x, int h, int w) {
  std::vector<double> tmp(static_cast<size_t>(h));
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h / 2; ++r) {
      const double a = x.at(2 * r, c), b = x.at(2 * r + 1, c);
      tmp[static_cast<size_t>(r)] = (a + b) * kInvSqrt2;
      tmp[static_cast<size_t>(h / 2 + r)] = (a - b) * kInvSqrt2;
    }
    for (int r = 0; r < h; ++r) x.at(r, c) = tmp[static_cast<size_t>(r)];
  }
}

void ihaar_rows(Tensor& x, int h, int w) {
  std::vector<double> tmp(static_cast<size_t>(w));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w / 2; ++c) {
      const double s = x.at(r, c), d = x.at(r, w / 2 + c);
      tmp[static_cast<size_t>(2 * c)] = (s + d) * kInvSqrt2;
      tmp[static_cast<size_t>(2 * c + 1)] = (s - d) * kInvSqrt2;
    }
    for (int c = 0; c < w; ++c) x.at(r, c) = tmp[static_cast<size_t>(c)];
  }
}

void ihaar_cols(Tensor& x, int h, int w) {
  std::vector<double> tmp(static_cast<size_t>(h));
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h / 2; ++r) {
      const double s = x.at(r, c), d = x.at(h / 2 + r, c);
      tmp[static_cast<size_t>(2 * r)] = (s + d) * kInvSqrt2;
      tmp[static_cast<size_t>(2 * r + 1)] = (s - d) * kInvSqrt2;
    }
    for (int r = 0; r < h; ++r) x.at(r, c) = tmp[static_cast<size_t>(r)];
  }
}

void check_levels(const Tensor& x, int levels) {
  if (x.ndim() != 2) throw std::invalid_argument("haar: need 2-D, got " + shape_str(x.shape()));
  int h = x.dim(0), w = x.dim(1);
  for (int l = 0; l < levels; ++l) {
    if (h % 2 || w % 2)
      throw std::invalid_argument("haar: dimensions not divisible at level " + std::to_string(l + 1));
    h /= 2;
    w /= 2;
  }
}
}  // namespace

Tensor haar_forward(const Tensor& x, int levels) {
  check_levels(x, levels);
  Tensor out = x;
  int h = x.dim(0), w = x.dim(1);
  for (int l = 0; l < levels; ++l) {
    haar_rows(out, h, w);
    haar_cols(out, h, w);
    h /= 2;
    w /= 2;
  }
  return out;
}

Tensor haar_inverse(const Tensor& coeffs, int levels) {
  check_levels(coeffs, levels);
  Tensor out = coeffs;
  int h = coeffs.dim(0) >> levels, w = coeffs.dim(1) >> levels;
  for (int l = 0; l < levels; ++l) {
    h *= 2;
    w *= 2;
    ihaar_cols(out, h, w);
    ihaar_rows(out, h, w);
  }
  return out;
}

Rect band_rect(int H, int W, int level, Band band) {
  const int h = H >> level, w = W >> level;
  switch (band) {
    case Band::LL:
      return {0, 0, h, w};
    case Band::HL:
      return {0, w, h, w};
    case Band::LH:
      return {h, 0, h, w};
    case Band::HH:
      return {h, w, h, w};
  }
  throw std::invalid_argument("band_rect: bad band");
}

// ---- DFT ---------------------------------------------------------------------

Spectrum dft2_centered(const Tensor& x) {
  if (x.ndim() != 2) throw std::invalid_argument("dft2: need 2-D, got " + shape_str(x.shape()));
  const int H = x.dim(0), W = x.dim(1);
  // Row pass: for each image row h, coefficients over w.
  Tensor row_re({H, W}), row_im({H, W});
  std::vector<double> cosw(static_cast<size_t>(W) * W), sinw(static_cast<size_t>(W) * W);
  for (int l = 0; l < W; ++l)
    for (int w = 0; w < W; ++w) {
      const double ang = -2.0 * M_PI * (l - W / 2) * w / W;
      cosw[static_cast<size_t>(l) * W + w] = std::cos(ang);
      sinw[static_cast<size_t>(l) * W + w] = std::sin(ang);
    }
  for (int h = 0; h < H; ++h)
    for (int l = 0; l < W; ++l) {
      double sre = 0.0, sim = 0.0;
      const double* cr = &cosw[static_cast<size_t>(l) * W];
      const double* si = &sinw[static_cast<size_t>(l) * W];
      for (int w = 0; w < W; ++w) {
        sre += x.at(h, w) * cr[w];
        sim += x.at(h, w) * si[w];
      }
      row_re.at(h, l) = sre;
      row_im.at(h, l) = sim;
    }
  // Column pass.
  Spectrum out{Tensor({H, W}), Tensor({H, W})};
  std::vector<double> cosh_(static_cast<size_t>(H) * H), sinh_(static_cast<size_t>(H) * H);
  for (int k = 0; k < H; ++k)
    for (int h = 0; h < H; ++h) {
      const double ang = -2.0 * M_PI * (k - H / 2) * h / H;
      cosh_[static_cast<size_t>(k) * H + h] = std::cos(ang);
      sinh_[static_cast<size_t>(k) * H + h] = std::sin(ang);
    }
  const double norm = 1.0 / std::sqrt(static_cast<double>(H) * W);
  for (int k = 0; k < H; ++k)
    for (int l = 0; l < W; ++l) {
      double sre = 0.0, sim = 0.0;
      const double* cr = &cosh_[static_cast<size_t>(k) * H];
      const double* si = &sinh_[static_cast<size_t>(k) * H];
      for (int h = 0; h < H; ++h) {
        const double a = row_re.at(h, l), b = row_im.at(h, l);
        sre += a * cr[h] - b * si[h];
        sim += a * si[h] + b * cr[h];
      }
      out.re.at(k, l) = norm * sre;
      out.im.at(k, l) = norm * sim;
    }
  return out;
}

Tensor idft2_centered(const Spectrum& s) {
  check_same_shape("idft2", s.re, s.im);
  const int H = s.re.dim(0), W = s.re.dim(1);
  // Conjugate trick: IDFT(X) = conj(DFT(conj(X))) with matching normalization.
  // Direct implementation with +i kernels instead.
  Tensor col_re({H, W}), col_im({H, W});
  for (int h = 0; h < H; ++h)
    for (int l = 0; l < W; ++l) {
      double sre = 0.0, sim = 0.0;
      for (int k = 0; k < H; ++k) {
        const double ang = 2.0 * M_PI * (k - H / 2) * h / H;
        const double cr = std::cos(ang), si = std::sin(ang);
        const double a = s.re.at(k, l), b = s.im.at(k, l);
        sre += a * cr - b * si;
        sim += a * si + b * cr;
      }
      col_re.at(h, l) = sre;
      col_im.at(h, l) = sim;
    }
  Tensor out({H, W});
  const double norm = 1.0 / std::sqrt(static_cast<double>(H) * W);
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) {
      double sre = 0.0;
      for (int l = 0; l < W; ++l) {
        const double ang = 2.0 * M_PI * (l - W / 2) * w / W;
        const double cr = std::cos(ang), si = std::sin(ang);
        sre += col_re.at(h, l) * cr - col_im.at(h, l) * si;
      }
      out.at(h, w) = norm * sre;
    }
  return out;
}

bool self_conjugate(int H, int W, int u, int v) {
  const int fr = u - H / 2, fc = v - W / 2;
  const bool r_self = ((-fr - fr) % H) == 0;
  const bool c_self = ((-fc - fc) % W) == 0;
  return r_self && c_self;
}

void conjugate_index(int H, int W, int u, int v, int* uc, int* vc) {
  const int fr = u - H / 2, fc = v - W / 2;
  int mr = (-fr) % H, mc = (-fc) % W;
  // Map back into centered index range [-H/2, H/2).
  if (mr >= H / 2) mr -= H;
  if (mr < -H / 2) mr += H;
  if (mc >= W / 2) mc -= W;
  if (mc < -W / 2) mc += W;
  *uc = mr + H / 2;
  *vc = mc + W / 2;
}

// ---- Jacobi SVD ----------------------------------------------------------------

Svd svd_small(const Tensor& a) {
  if (a.ndim() != 2) throw std::invalid_argument("svd_small: need 2-D, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  if (m < n) throw std::invalid_argument("svd_small: need rows >= cols in " + shape_str(a.shape()));
  Tensor u = a;           // becomes U * diag(S)
  Tensor v({n, n});       // accumulated right rotations
  for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

  const double eps = 1e-12;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          app += u.at(i, p) * u.at(i, p);
          aqq += u.at(i, q) * u.at(i, q);
          apq += u.at(i, p) * u.at(i, q);
        }
        if (std::fabs(apq) <= eps * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double up = u.at(i, p), uq = u.at(i, q);
          u.at(i, p) = c * up - s * uq;
          u.at(i, q) = s * up + c * uq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v.at(i, p), vq = v.at(i, q);
          v.at(i, p) = c * vp - s * vq;
          v.at(i, q) = s * vp + c * vq;
        }
      }
    if (!rotated) break;
  }

  Tensor s({n});
  for (int j = 0; j < n; ++j) {
    double norm = 0.0;
    for (int i = 0; i < m; ++i) norm += u.at(i, j) * u.at(i, j);
    s[j] = std::sqrt(norm);
  }
  // Sort descending (stable selection keeps determinism).
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n - 1; ++i) {
    int best = i;
    for (int j = i + 1; j < n; ++j)
      if (s[order[static_cast<size_t>(j)]] > s[order[static_cast<size_t>(best)]]) best = j;
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(best)]);
  }
  Svd out{Tensor({m, n}), Tensor({n}), Tensor({n, n})};
  for (int jj = 0; jj < n; ++jj) {
    const int j = order[static_cast<size_t>(jj)];
    const double sv = s[j];
    out.s[jj] = sv;
    for (int i = 0; i < m; ++i) out.u.at(i, jj) = sv > 0.0 ? u.at(i, j) / sv : (i == jj ? 1.0 : 0.0);
    for (int i = 0; i < n; ++i) out.v.at(i, jj) = v.at(i, j);
  }
  return out;
}

}  // namespace markbench::transforms

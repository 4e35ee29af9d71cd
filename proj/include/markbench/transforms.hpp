#pragma once

#include "markbench/tensor.hpp"

namespace markbench::transforms {

// ---- orthonormal 2-D Haar DWT ------------------------------------------------
// Pairs map to ((a+b)/sqrt2, (a-b)/sqrt2), rows then columns, recursing on the
// LL quadrant (Mallat layout: approximations in the top-left corner).
Tensor haar_forward(const Tensor& x, int levels);
Tensor haar_inverse(const Tensor& coeffs, int levels);

enum class Band { LL, HL, LH, HH };  // HL = top-right, LH = bottom-left

struct Rect {
  int r0, c0, h, w;
};
// Rectangle of a band at `level` (1-based) in the Mallat layout of an
// H x W coefficient grid.
Rect band_rect(int H, int W, int level, Band band);

// ---- centered unitary 2-D DFT -------------------------------------------------
// X[u,v] = (1/sqrt(HW)) sum x[h,w] exp(-2*pi*i*(k h/H + l w/W)) with
// k = u - H/2, l = v - W/2, i.e. the DC term sits at (H/2, W/2).
struct Spectrum {
  Tensor re, im;
};

Spectrum dft2_centered(const Tensor& x);
// Inverse transform; returns the real part (imaginary part is ~0 for
// conjugate-symmetric spectra).
Tensor idft2_centered(const Spectrum& s);

// True if centered frequency (fr,fc) = (u-H/2, v-W/2) is its own conjugate
// mirror, i.e. -f == f mod (H,W).
bool self_conjugate(int H, int W, int u, int v);
// Index (u',v') of the conjugate mirror of (u,v) in the centered layout.
void conjugate_index(int H, int W, int u, int v, int* uc, int* vc);

// ---- small dense SVD ----------------------------------------------------------
// One-sided Jacobi; singular values descending, A == U * diag(S) * V^T.
struct Svd {
  Tensor u;  // [m,n]
  Tensor s;  // [n]
  Tensor v;  // [n,n]
};
Svd svd_small(const Tensor& a);

}  // namespace markbench::transforms

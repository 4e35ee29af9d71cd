#include "markbench/generator.hpp"

#include <cmath>
#include <stdexcept>

#include "markbench/transforms.hpp"

namespace markbench {

Tensor orthonormal_matrix(int n, uint64_t seed) {
  Rng rng(seed);
  Tensor a = Tensor::randn({n, n}, rng);
  // Householder QR; Q assembled by applying the reflectors to the identity.
  std::vector<Tensor> vs;
  for (int k = 0; k < n; ++k) {
    double norm = 0.0;
    for (int i = k; i < n; ++i) norm += a.at(i, k) * a.at(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = a.at(k, k) >= 0.0 ? -norm : norm;
    Tensor v({n});
    for (int i = k; i < n; ++i) v[i] = a.at(i, k);
    v[k] -= alpha;
    double vnorm2 = 0.0;
    for (int i = k; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    // Apply I - 2vv^T/(v^T v) to the remaining columns.
    for (int j = k; j < n; ++j) {
      double dot = 0.0;
      for (int i = k; i < n; ++i) dot += v[i] * a.at(i, j);
      const double f = 2.0 * dot / vnorm2;
      for (int i = k; i < n; ++i) a.at(i, j) -= f * v[i];
    }
    vs.push_back(std::move(v));
  }
  // Q = H_1 H_2 ... H_m (each H applied to identity columns).
  Tensor q({n, n});
  for (int i = 0; i < n; ++i) q.at(i, i) = 1.0;
  for (int k = static_cast<int>(vs.size()) - 1; k >= 0; --k) {
    const Tensor& v = vs[static_cast<size_t>(k)];
    double vnorm2 = 0.0;
    for (int i = 0; i < n; ++i) vnorm2 += v[i] * v[i];
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += v[i] * q.at(i, j);
      const double f = 2.0 * dot / vnorm2;
      for (int i = 0; i < n; ++i) q.at(i, j) -= f * v[i];
    }
  }
  // Fix signs so the diagonal of R is positive: deterministic orientation.
  for (int j = 0; j < n; ++j)
    if (a.at(j, j) < 0.0)
      for (int i = 0; i < n; ++i) q.at(i, j) = -q.at(i, j);
  return q;
}

namespace {
// Smooth band-limited texture: seeded coefficients in the coarse Haar bands
// only, synthesized and normalized to unit RMS.
Tensor make_texture(int size, int levels, uint64_t seed) {
  Rng rng(seed);
  Tensor coeffs({size, size});
  const int coarse = size >> levels;  // top-left (coarse * 2) block holds
  // every band of the deepest level plus the next level's approximations.
  for (int r = 0; r < 2 * coarse; ++r)
    for (int c = 0; c < 2 * coarse; ++c) coeffs.at(r, c) = rng.normal();
  Tensor t = transforms::haar_inverse(coeffs, levels);
  double rms = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) rms += t[i] * t[i];
  rms = std::sqrt(rms / static_cast<double>(t.size()));
  if (rms > 0.0)
    for (int64_t i = 0; i < t.size(); ++i) t[i] /= rms;
  return t;
}
}  // namespace

Generator::Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
  if (cfg_.size <= 0 || (cfg_.size & (cfg_.size - 1)) != 0)
    throw std::invalid_argument("generator: size must be a power of two");
  if (cfg_.gap < 0.0 || cfg_.gap > 1.0)
    throw std::invalid_argument("generator: gap must be in [0,1]");
  ql_ = orthonormal_matrix(cfg_.size, derive_seed(cfg_.seed, 1));
  qr_ = orthonormal_matrix(cfg_.size, derive_seed(cfg_.seed, 2));

  // Gap rotations: seeded index pairs with angles scaled by gap, so gap=0 is
  // exactly the identity and small gaps are small basis changes.
  const int n2 = cfg_.size * cfg_.size;
  Rng grot(derive_seed(cfg_.seed, 3));
  const int n_rot = 2048;
  gap_rot_.reserve(n_rot);
  for (int k = 0; k < n_rot; ++k) {
    int i = grot.uniform_int(n2);
    int j = grot.uniform_int(n2);
    const double base = grot.uniform(-M_PI / 2.0, M_PI / 2.0);
    if (i == j) continue;
    const double ang = cfg_.gap * base;
    gap_rot_.push_back({i, j, std::cos(ang), std::sin(ang)});
  }

  // Texture: unit-norm blend between two seeded smooth fields; the blend
  // angle follows gap so the gap=0 texture is exactly the first field.
  Tensor t0 = make_texture(cfg_.size, cfg_.mix_levels, derive_seed(cfg_.seed, 4));
  Tensor t1 = make_texture(cfg_.size, cfg_.mix_levels, derive_seed(cfg_.seed, 5));
  const double a = std::cos(cfg_.gap * M_PI / 2.0), b = std::sin(cfg_.gap * M_PI / 2.0);
  tex_ = Tensor({cfg_.size, cfg_.size});
  for (int64_t i = 0; i < tex_.size(); ++i) tex_[i] = cfg_.texture_amp * (a * t0[i] + b * t1[i]);
}

Tensor Generator::sample_latent(uint64_t seed) const {
  Rng rng(derive_seed(seed, 101));
  return Tensor::randn({cfg_.size, cfg_.size}, rng);
}

void Generator::apply_gap(Tensor& u, bool inverse) const {
  if (cfg_.gap == 0.0) return;
  double* d = u.data();
  if (!inverse) {
    for (const Givens& g : gap_rot_) {
      const double a = d[g.i], b = d[g.j];
      d[g.i] = g.c * a - g.s * b;
      d[g.j] = g.s * a + g.c * b;
    }
  } else {
    for (auto it = gap_rot_.rbegin(); it != gap_rot_.rend(); ++it) {
      const double a = d[it->i], b = d[it->j];
      d[it->i] = it->c * a + it->s * b;
      d[it->j] = -it->s * a + it->c * b;
    }
  }
}

Tensor Generator::mix(const Tensor& z) const {
  if (z.ndim() != 2 || z.dim(0) != cfg_.size || z.dim(1) != cfg_.size)
    throw std::invalid_argument("mix: latent shape " + shape_str(z.shape()));
  Tensor u = matmul2d(matmul2d(ql_, z), transpose2d(qr_));
  apply_gap(u, false);
  return transforms::haar_inverse(u, cfg_.mix_levels);
}

Tensor Generator::unmix(const Tensor& v) const {
  Tensor u = transforms::haar_forward(v, cfg_.mix_levels);
  apply_gap(u, true);
  return matmul2d(matmul2d(transpose2d(ql_), u), qr_);
}

double Generator::tone(double v) const { return 1.0 / (1.0 + std::exp(-cfg_.tone_slope * v)); }

double Generator::tone_inverse(double y) const { return std::log(y / (1.0 - y)) / cfg_.tone_slope; }

Tensor Generator::tone(const Tensor& v) const {
  Tensor y = v;
  for (int64_t i = 0; i < y.size(); ++i) y[i] = tone(y[i]);
  return y;
}

Tensor Generator::tone_inverse(const Tensor& y, bool* clamped) const {
  Tensor v = y;
  bool hit = false;
  for (int64_t i = 0; i < v.size(); ++i) {
    double p = v[i];
    if (p < kClampDelta) {
      p = kClampDelta;
      hit = true;
    }
    if (p > 1.0 - kClampDelta) {
      p = 1.0 - kClampDelta;
      hit = true;
    }
    v[i] = tone_inverse(p);
  }
  if (clamped) *clamped = hit;
  return v;
}

Tensor Generator::generate(const Tensor& latent) const {
  Tensor v = mix(latent);
  v += tex_;
  return tone(v);
}

Generator::InvertResult Generator::invert(const Tensor& image) const {
  InvertResult out;
  Tensor v = tone_inverse(image, &out.clamped);
  v -= tex_;
  out.latent = unmix(v);
  return out;
}

}  // namespace markbench

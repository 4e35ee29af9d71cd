#include "markbench/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "markbench/generator.hpp"
#include "markbench/watermark.hpp"

namespace markbench::attacks {

// ---- non-adaptive baselines --------------------------------------------------

namespace {
// reflect-101 index (no edge repeat): ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}
}  // namespace

Tensor blur(const Tensor& x, double sigma) {
  const int H = x.dim(0), W = x.dim(1);
  const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<size_t>(2 * rad + 1));
  double sum = 0.0;
  for (int i = -rad; i <= rad; ++i) {
    k[static_cast<size_t>(i + rad)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<size_t>(i + rad)];
  }
  for (auto& v : k) v /= sum;
  Tensor tmp({H, W}), out({H, W});
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double acc = 0.0;
      for (int i = -rad; i <= rad; ++i) acc += k[static_cast<size_t>(i + rad)] * x.at(r, reflect(c + i, W));
      tmp.at(r, c) = acc;
    }
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double acc = 0.0;
      for (int i = -rad; i <= rad; ++i) acc += k[static_cast<size_t>(i + rad)] * tmp.at(reflect(r + i, H), c);
      out.at(r, c) = acc;
    }
  return out;
}

namespace {

// Standard luminance quantization table.
constexpr int kLumaTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

// Orthonormal 8x8 DCT-II matrix.
const Tensor& dct8() {
  static const Tensor d = [] {
    Tensor m({8, 8});
    for (int k = 0; k < 8; ++k)
      for (int n = 0; n < 8; ++n)
        m.at(k, n) = (k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                     std::cos(M_PI * (2 * n + 1) * k / 16.0);
    return m;
  }();
  return d;
}

}  // namespace

Tensor jpeg_like(const Tensor& x, int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg_like: quality in [1,100]");
  const int H = x.dim(0), W = x.dim(1);
  if (H % 8 || W % 8) throw std::invalid_argument("jpeg_like: size must be a multiple of 8");
  const double s = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  // The quantization steps follow the standard table but are shrunk to suit
  // low-contrast content, where the nominal steps would erase everything.
  const double content_scale = 0.25;
  const Tensor& d = dct8();
  Tensor out({H, W});
  Tensor block({8, 8});
  for (int br = 0; br < H; br += 8)
    for (int bc = 0; bc < W; bc += 8) {
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) block.at(i, j) = x.at(br + i, bc + j) * 255.0 - 128.0;
      Tensor f = matmul2d(matmul2d(d, block), transpose2d(d));
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          const double step = std::max(1e-9, kLumaTable[i * 8 + j] * (s / 100.0) * content_scale);
          f.at(i, j) = std::round(f.at(i, j) / step) * step;
        }
      Tensor rec = matmul2d(matmul2d(transpose2d(d), f), d);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          const double v = (rec.at(i, j) + 128.0) / 255.0;
          out.at(br + i, bc + j) = std::min(1.0, std::max(0.0, v));
        }
    }
  return out;
}

Tensor crop_repad(const Tensor& x, double keep) {
  const int H = x.dim(0), W = x.dim(1);
  const int kh = static_cast<int>(std::round(H * keep));
  const int kw = static_cast<int>(std::round(W * keep));
  const int r0 = (H - kh) / 2, c0 = (W - kw) / 2;
  Tensor out = Tensor::full({H, W}, 0.5);
  for (int r = 0; r < kh; ++r)
    for (int c = 0; c < kw; ++c) out.at(r0 + r, c0 + c) = x.at(r0 + r, c0 + c);
  return out;
}

Tensor gauss_noise(const Tensor& x, double sigma, uint64_t seed) {
  Rng rng(seed);
  Tensor out = x;
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = std::min(1.0, std::max(0.0, out[i] + sigma * rng.normal()));
  return out;
}

Tensor jitter(const Tensor& x, int dx, int dy) {
  const int H = x.dim(0), W = x.dim(1);
  Tensor out = Tensor::full({H, W}, 0.5);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const int sr = r - dy, sc = c - dx;
      if (sr >= 0 && sr < H && sc >= 0 && sc < W) out.at(r, c) = x.at(sr, sc);
    }
  return out;
}

Tensor quantize(const Tensor& x, int levels) {
  if (levels < 2) throw std::invalid_argument("quantize: need at least 2 levels");
  Tensor out = x;
  const double q = levels - 1;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::round(out[i] * q) / q;
  return out;
}

Tensor rotate_deg(const Tensor& x, double degrees) {
  const int H = x.dim(0), W = x.dim(1);
  const double th = degrees * M_PI / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
  Tensor out({H, W});
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      // Inverse-rotate the destination coordinate into the source.
      const double yr = r - cy, xc = c - cx;
      const double sy = cs * yr + sn * xc + cy;
      const double sx = -sn * yr + cs * xc + cx;
      const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      const double fy = sy - y0, fx = sx - x0;
      double acc = 0.0;
      for (int dyi = 0; dyi < 2; ++dyi)
        for (int dxi = 0; dxi < 2; ++dxi) {
          const int yy = y0 + dyi, xx = x0 + dxi;
          const double wgt = (dyi ? fy : 1.0 - fy) * (dxi ? fx : 1.0 - fx);
          const double v = (yy >= 0 && yy < H && xx >= 0 && xx < W) ? x.at(yy, xx) : 0.5;
          acc += wgt * v;
        }
      out.at(r, c) = acc;
    }
  return out;
}

// ---- perceptual distance -------------------------------------------------------

PerceptualMetric::PerceptualMetric() {
  Rng r1(derive_seed(0x7A57E5EEDull, 1)), r2(derive_seed(0x7A57E5EEDull, 2)),
      r3(derive_seed(0x7A57E5EEDull, 3));
  f1 = nn::Conv2d(1, 8, 3, 2, r1);
  f2 = nn::Conv2d(8, 16, 3, 2, r2);
  f3 = nn::Conv2d(16, 16, 3, 2, r3);
}

namespace {
void relu_inplace(Tensor& t) {
  for (int64_t i = 0; i < t.size(); ++i)
    if (t[i] < 0.0) t[i] = 0.0;
}

Tensor features(const PerceptualMetric& m, const Tensor& img4) {
  Tensor h = m.f1.forward(img4);
  relu_inplace(h);
  h = m.f2.forward(h);
  relu_inplace(h);
  return m.f3.forward(h);
}

double mean_sq_diff(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}
}  // namespace

double PerceptualMetric::distance(const Tensor& a, const Tensor& b) const {
  const Tensor a4 = a.reshaped({1, 1, a.dim(0), a.dim(1)});
  const Tensor b4 = b.reshaped({1, 1, b.dim(0), b.dim(1)});
  return mean_sq_diff(features(*this, a4), features(*this, b4)) + 0.1 * mean_sq_diff(a4, b4);
}

ad::Var PerceptualMetric::distance_graph(ad::Tape& t, nn::ParamBinder& frozen, ad::Var a,
                                         ad::Var b) const {
  auto& self = *const_cast<PerceptualMetric*>(this);
  auto feats = [&](ad::Var x) {
    ad::Var h = t.relu(self.f1.forward(t, frozen, x));
    h = t.relu(self.f2.forward(t, frozen, h));
    return self.f3.forward(t, frozen, h);
  };
  ad::Var fd = t.mean(t.square(t.sub(feats(a), feats(b))));
  ad::Var pd = t.mean(t.square(t.sub(a, b)));
  return t.add(fd, t.scalar_mul(0.1, pd));
}

// ---- adversarial noising --------------------------------------------------------

namespace {

double plain_objective(const surrogate::SurrogateKey& sk, const Tensor& image,
                       const Tensor& anchor_bits_or_coords, bool bits) {
  const Tensor m = sk.extract(image);
  if (!bits) {
    double s = 0.0;
    for (int64_t i = 0; i < m.size(); ++i) s += std::fabs(m[i] - anchor_bits_or_coords[i]);
    return s;
  }
  double s = 0.0;
  for (int64_t i = 0; i < m.size(); ++i) {
    const double z = m[i], t = anchor_bits_or_coords[i];
    s += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
  }
  return s / static_cast<double>(m.size());
}

}  // namespace

NoisingResult adversarial_noising(const Tensor& image, const surrogate::SurrogateKey& sk,
                                  const NoisingConfig& cfg) {
  const int H = image.dim(0), W = image.dim(1);
  const Tensor x4 = image.reshaped({1, 1, H, W});
  const bool bits = sk.message_is_bits();
  const int d = sk.message_dim();

  Tensor anchor = sk.extract(image).reshaped({d});
  if (bits)
    for (int i = 0; i < d; ++i) anchor[i] = anchor[i] > 0.0 ? 1.0 : 0.0;

  Tensor theta({1, 1, H, W});
  nn::Adam opt(cfg.lr);
  NoisingResult res;
  res.trace.reserve(static_cast<size_t>(cfg.steps));
  Tensor best_theta = theta;
  double best = plain_objective(sk, image, anchor, bits);

  for (int step = 0; step < cfg.steps; ++step) {
    ad::Tape tape;
    nn::ParamBinder frozen(tape, false);
    ad::Var th = tape.input(theta);
    ad::Var xadv = tape.clamp(tape.add(tape.constant(x4), th), 0.0, 1.0);
    ad::Var m = tape.reshape(sk.extract_graph(tape, frozen, xadv), {d});
    ad::Var obj = bits ? tape.bce_with_logits(m, tape.constant(anchor))
                       : tape.l1_distance(m, tape.constant(anchor));
    ad::Var loss = tape.scalar_mul(-1.0, obj);
    tape.backward(loss);
    opt.step({&theta}, {&tape.grad(th)});

    // Project onto the budget: L-inf ball, then keep x + theta a valid image.
    for (int64_t i = 0; i < theta.size(); ++i) {
      double v = std::min(cfg.epsilon, std::max(-cfg.epsilon, theta[i]));
      v = std::min(1.0, std::max(0.0, x4[i] + v)) - x4[i];
      theta[i] = v;
    }

    Tensor cand = x4;
    for (int64_t i = 0; i < cand.size(); ++i) cand[i] += theta[i];
    const double obj_val = plain_objective(sk, cand.reshaped({H, W}), anchor, bits);
    if (obj_val > best) {
      best = obj_val;
      best_theta = theta;
    }
    res.trace.push_back(best);
  }

  Tensor out = x4;
  for (int64_t i = 0; i < out.size(); ++i)
    out[i] = std::min(1.0, std::max(0.0, out[i] + best_theta[i]));
  res.image = out.reshaped({H, W});
  res.objective = best;
  return res;
}

// ---- learned compression ---------------------------------------------------------

void Compressor::init(uint64_t seed) {
  Rng r1(derive_seed(seed, 81)), r2(derive_seed(seed, 82)), r3(derive_seed(seed, 83)),
      r4(derive_seed(seed, 84)), r5(derive_seed(seed, 85)), r6(derive_seed(seed, 86));
  ec1 = nn::Conv2d(1, 8, 3, 2, r1);
  ec2 = nn::Conv2d(8, 16, 3, 2, r2);
  ec3 = nn::Conv2d(16, 8, 3, 1, r3);
  dc1 = nn::ConvT2d(8, 16, 4, 2, r4);
  dc1.pad = 1;  // exact 2x upsampling
  dc2 = nn::ConvT2d(16, 8, 4, 2, r5);
  dc2.pad = 1;
  dc3 = nn::Conv2d(8, 1, 3, 1, r6);
}

std::vector<Tensor*> Compressor::params() {
  return {&ec1.w, &ec1.b, &ec2.w, &ec2.b, &ec3.w, &ec3.b,
          &dc1.w, &dc1.b, &dc2.w, &dc2.b, &dc3.w, &dc3.b};
}

Tensor Compressor::compress(const Tensor& image) const {
  Tensor h = ec1.forward(image.reshaped({1, 1, image.dim(0), image.dim(1)}));
  relu_inplace(h);
  h = ec2.forward(h);
  relu_inplace(h);
  h = ec3.forward(h);  // linear bottleneck
  h = dc1.forward(h);
  relu_inplace(h);
  h = dc2.forward(h);
  relu_inplace(h);
  h = dc3.forward(h);
  for (int64_t i = 0; i < h.size(); ++i) h[i] = 1.0 / (1.0 + std::exp(-h[i]));
  return h.reshaped({image.dim(0), image.dim(1)});
}

ad::Var Compressor::compress_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x) const {
  auto& self = *const_cast<Compressor*>(this);
  ad::Var h = t.relu(self.ec1.forward(t, pb, x));
  h = t.relu(self.ec2.forward(t, pb, h));
  h = self.ec3.forward(t, pb, h);
  h = t.relu(self.dc1.forward(t, pb, h));
  h = t.relu(self.dc2.forward(t, pb, h));
  return t.sigmoid(self.dc3.forward(t, pb, h));
}

Tensor apply_compressor(const Compressor& c, const Tensor& image, int repetitions) {
  Tensor out = image;
  for (int r = 0; r < repetitions; ++r) out = c.compress(out);
  return out;
}

Compressor train_compressor(const GeneratorConfig& gen, uint64_t seed,
                            const CompressorTrainConfig& cfg) {
  Compressor c;
  c.init(derive_seed(seed, 91));
  const Generator g(gen);
  Rng data_rng(derive_seed(seed, 92));
  nn::Adam opt(cfg.lr);
  for (int step = 0; step < cfg.steps; ++step) {
    ad::Tape tape;
    nn::ParamBinder pb(tape);
    ad::Var loss{-1};
    for (int b = 0; b < cfg.batch; ++b) {
      const Tensor img = g.generate(g.sample_latent(data_rng.next_u64()));
      ad::Var x = tape.constant(img.reshaped({1, 1, img.dim(0), img.dim(1)}));
      ad::Var y = c.compress_graph(tape, pb, x);
      ad::Var item = tape.mean(tape.square(tape.sub(y, x)));
      loss = loss.id < 0 ? item : tape.add(loss, item);
    }
    loss = tape.scalar_mul(1.0 / cfg.batch, loss);
    tape.backward(loss);
    pb.apply(opt);
  }
  return c;
}

double compressor_psnr(const Compressor& c, const GeneratorConfig& gen, uint64_t seed, int n) {
  const Generator g(gen);
  Rng rng(derive_seed(seed, 93));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Tensor img = g.generate(g.sample_latent(rng.next_u64()));
    acc += psnr(c.compress(img), img);
  }
  return acc / n;
}

namespace {

// Per-coordinate values of a ring message over the mask, in extractor order.
Tensor expand_ring_message(const wm::RingKey& rk, const wm::RingMessage& msg, int size) {
  const auto mask = wm::ring_mask(rk, size);
  Tensor out({2 * static_cast<int>(mask.size())});
  for (size_t j = 0; j < mask.size(); ++j) {
    out[2 * static_cast<int64_t>(j)] = msg.re[static_cast<size_t>(mask[j].ring)];
    out[2 * static_cast<int64_t>(j) + 1] = msg.im[static_cast<size_t>(mask[j].ring)];
  }
  return out;
}

}  // namespace

Compressor finetune_compressor(const Compressor& base, const surrogate::SurrogateKey& sk,
                               uint64_t seed, const CompressFinetuneConfig& cfg) {
  Compressor c = base;
  const Generator g(sk.gen);
  const PerceptualMetric metric;
  Rng data_rng(derive_seed(seed, 94));
  nn::Adam opt(cfg.lr);
  const bool bits = sk.message_is_bits();
  const int d = sk.message_dim();

  for (int step = 0; step < cfg.steps; ++step) {
    ad::Tape tape;
    nn::ParamBinder pb(tape);
    nn::ParamBinder frozen(tape, false);
    ad::Var loss{-1};
    for (int b = 0; b < cfg.batch; ++b) {
      const wm::Message msg = wm::sample_message(sk.tau, data_rng.next_u64());
      const Tensor latent = g.sample_latent(data_rng.next_u64());
      const Tensor img = wm::embed(g, sk.tau, msg, latent).image;
      Tensor target({d});
      if (bits) {
        const auto& mb = std::get<wm::BitMessage>(msg).bits;
        for (int i = 0; i < d; ++i) target[i] = mb[static_cast<size_t>(i)];
      } else {
        target = expand_ring_message(std::get<wm::RingKey>(sk.tau.payload),
                                     std::get<wm::RingMessage>(msg), sk.gen.size);
      }
      ad::Var x = tape.constant(img.reshaped({1, 1, img.dim(0), img.dim(1)}));
      ad::Var y = c.compress_graph(tape, pb, x);
      ad::Var percep = metric.distance_graph(tape, frozen, y, x);
      ad::Var m = tape.reshape(sk.extract_graph(tape, frozen, y), {d});
      ad::Var dist = bits ? tape.bce_with_logits(m, tape.constant(target))
                          : tape.l1_distance(m, tape.constant(target));
      ad::Var item = tape.sub(percep, tape.scalar_mul(cfg.alpha, dist));
      loss = loss.id < 0 ? item : tape.add(loss, item);
    }
    loss = tape.scalar_mul(1.0 / cfg.batch, loss);
    tape.backward(loss);
    pb.apply(opt);
  }
  return c;
}

}  // namespace markbench::attacks

#include "markbench/surrogate.hpp"

#include <cmath>
#include <stdexcept>


namespace markbench::surrogate {

void SurrogateDecoder::init(int bits, int c4_channels, uint64_t seed) {
  n_bits = bits;
  Rng r1(derive_seed(seed, 61)), r2(derive_seed(seed, 62)), r3(derive_seed(seed, 63)),
      r4(derive_seed(seed, 64)), r5(derive_seed(seed, 65));
  // Strides 2,2,1,1 keep the feature grid at quarter resolution so each cell
  // lines up with one transform-domain coefficient block.
  c1 = nn::Conv2d(1, 12, 3, 2, r1);
  c2 = nn::Conv2d(12, 16, 3, 2, r2);
  c3 = nn::Conv2d(16, 16, 3, 1, r3);
  c4 = nn::Conv2d(16, c4_channels, 3, 1, r4);
  head = nn::Linear(c4_channels, bits, r5);
  route = Tensor();
  link_phase = Tensor();
  link_freq = 0.0;
  link_gain = 0.0;
}

std::vector<Tensor*> SurrogateDecoder::params() {
  return {&c1.w, &c1.b, &c2.w, &c2.b, &c3.w, &c3.b, &c4.w, &c4.b, &head.w, &head.b};
}

namespace {
void relu_inplace(Tensor& t) {
  for (int64_t i = 0; i < t.size(); ++i)
    if (t[i] < 0.0) t[i] = 0.0;
}
}  // namespace

Tensor SurrogateDecoder::logits(const Tensor& image) const {
  Tensor h = c1.forward(image.reshaped({1, 1, image.dim(0), image.dim(1)}));
  relu_inplace(h);
  h = c2.forward(h);
  relu_inplace(h);
  h = c3.forward(h);
  relu_inplace(h);
  h = c4.forward(h);  // no relu: the last layer hosts signed detectors
  if (route.size() > 0)
    for (int64_t i = 0; i < h.size(); ++i) h[i] *= route[i];
  const int C = h.dim(1), HW = h.dim(2) * h.dim(3);
  Tensor pooled({1, C});
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    const double* base = h.data() + static_cast<size_t>(c) * HW;
    for (int i = 0; i < HW; ++i) s += base[i];
    pooled.at(0, c) = s / HW;
  }
  Tensor out = head.forward(pooled).reshaped({n_bits});
  if (link_phase.size() > 0)
    for (int b = 0; b < n_bits; ++b)
      out[b] = -link_gain * std::cos(link_freq * out[b] - link_phase[b]);
  return out;
}

ad::Var SurrogateDecoder::logits_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x) const {
  auto& self = *const_cast<SurrogateDecoder*>(this);
  ad::Var h = t.relu(self.c1.forward(t, pb, x));
  h = t.relu(self.c2.forward(t, pb, h));
  h = t.relu(self.c3.forward(t, pb, h));
  h = self.c4.forward(t, pb, h);
  if (route.size() > 0) h = t.mul(h, t.constant(route));
  ad::Var out = self.head.forward(t, pb, t.global_avg_pool(h));
  if (link_phase.size() > 0) {
    Tensor neg_phase = link_phase.reshaped({1, n_bits});
    for (int64_t i = 0; i < neg_phase.size(); ++i) neg_phase[i] = -neg_phase[i];
    ad::Var u = t.add(t.scalar_mul(link_freq, out), t.constant(neg_phase));
    out = t.scalar_mul(-link_gain, t.cos(u));
  }
  return out;
}

int SurrogateKey::message_dim() const {
  switch (kind) {
    case wm::SchemeKind::RingLatent:
      return lin_rows.dim(0);
    case wm::SchemeKind::DwtSs:
    case wm::SchemeKind::DwtSvd:
      return dec.n_bits;
    case wm::SchemeKind::LearnedStamp:
      return std::get<wm::StampKey>(tau.payload).nets.n_bits;
  }
  return 0;
}

namespace {

// Differentiable inverse of the generator's logistic squashing.
ad::Var tone_inverse_graph(ad::Tape& t, ad::Var y, double slope) {
  ad::Var p = t.clamp(y, Generator::kClampDelta, 1.0 - Generator::kClampDelta);
  ad::Var one_minus = t.scalar_add(1.0, t.scalar_mul(-1.0, p));
  return t.scalar_mul(1.0 / slope, t.sub(t.log(p), t.log(one_minus)));
}

Tensor tone_inverse_plain(const Tensor& y, double slope) {
  Tensor u = y;
  for (int64_t i = 0; i < u.size(); ++i) {
    double p = u[i];
    p = std::min(1.0 - Generator::kClampDelta, std::max(Generator::kClampDelta, p));
    u[i] = std::log(p / (1.0 - p)) / slope;
  }
  return u;
}

}  // namespace

Tensor SurrogateKey::extract(const Tensor& image) const {
  switch (kind) {
    case wm::SchemeKind::RingLatent: {
      const Tensor u = tone_inverse_plain(image, gen.tone_slope).reshaped(
          {image.dim(0) * image.dim(1), 1});
      Tensor out = matmul2d(lin_rows, u).reshaped({lin_rows.dim(0)});
      for (int i = 0; i < out.dim(0); ++i) out[i] += lin_bias[i];
      return out;
    }
    case wm::SchemeKind::DwtSs:
    case wm::SchemeKind::DwtSvd:
      return dec.logits(image);
    case wm::SchemeKind::LearnedStamp:
      return std::get<wm::StampKey>(tau.payload).nets.decode_logits(image);
  }
  throw std::logic_error("extract: unreachable");
}

ad::Var SurrogateKey::extract_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x) const {
  auto& self = *const_cast<SurrogateKey*>(this);
  const int H = t.value(x).dim(2), W = t.value(x).dim(3);
  switch (kind) {
    case wm::SchemeKind::RingLatent: {
      ad::Var u = tone_inverse_graph(t, x, gen.tone_slope);
      ad::Var col = t.reshape(u, {H * W, 1});
      ad::Var coords = t.matmul(pb.bind(self.lin_rows), col);
      return t.add(t.reshape(coords, {lin_rows.dim(0)}), pb.bind(self.lin_bias));
    }
    case wm::SchemeKind::DwtSs:
    case wm::SchemeKind::DwtSvd:
      return dec.logits_graph(t, pb, x);
    case wm::SchemeKind::LearnedStamp:
      return std::get<wm::StampKey>(self.tau.payload).nets.decode_graph(t, pb, x);
  }
  throw std::logic_error("extract_graph: unreachable");
}

// ---- construction -------------------------------------------------------------

namespace {

// Linear form of the masked-spectrum read-out.  Each message coordinate is a
// linear functional of the squashed pixels: coord = <mix(K), u - texture>
// with K the matching Fourier kernel, using that the mixing basis is
// orthonormal.
void build_ring_rows(SurrogateKey& sk) {
  const Generator g(sk.gen);
  const auto& rk = std::get<wm::RingKey>(sk.tau.payload);
  const int size = sk.gen.size;
  const auto mask = wm::ring_mask(rk, size);
  const int d = 2 * static_cast<int>(mask.size());
  sk.lin_rows = Tensor({d, size * size});
  sk.lin_bias = Tensor({d});
  const double norm = 1.0 / std::sqrt(static_cast<double>(size) * size);
  Tensor kernel({size, size});
  for (size_t j = 0; j < mask.size(); ++j) {
    const int fr = mask[j].u - size / 2, fc = mask[j].v - size / 2;
    for (int part = 0; part < 2; ++part) {
      for (int h = 0; h < size; ++h)
        for (int w = 0; w < size; ++w) {
          const double ang = 2.0 * M_PI * (static_cast<double>(fr) * h / size +
                                           static_cast<double>(fc) * w / size);
          kernel.at(h, w) = part == 0 ? norm * std::cos(ang) : -norm * std::sin(ang);
        }
      const Tensor row = g.mix(kernel);
      const int r = 2 * static_cast<int>(j) + part;
      double bias = 0.0;
      for (int64_t i = 0; i < row.size(); ++i) {
        sk.lin_rows.at(r, static_cast<int>(i)) = row[i];
        bias -= row[i] * g.texture()[i];
      }
      sk.lin_bias[r] = bias;
    }
  }
}

// Pooling masks for the spread-spectrum layout: each bit gets one channel per
// detail band, weighted by the carrier sign at that bit's slots and zero
// elsewhere.  Slot indices, carriers, and band geometry are all read from the
// attacker's own key.  Masks are scaled so the masked average equals the mean
// over the bit's own slots rather than over the whole grid.
void build_ss_routing(SurrogateKey& sk) {
  const auto& k = std::get<wm::DwtSsKey>(sk.tau.payload);
  const int n = sk.gen.size / 4;  // band edge at depth two == feature grid edge
  const int per_band = n * n;
  sk.dec.route = Tensor({1, 2 * k.n_bits, n, n});
  const double scale = static_cast<double>(per_band) / k.slots_per_bit;
  for (int b = 0; b < k.n_bits; ++b)
    for (int s = 0; s < k.slots_per_bit; ++s) {
      const int slot = k.slot_perm[static_cast<size_t>(b) * k.slots_per_bit + s];
      int r = 0, c = 0;
      wm::ss_slot_pos(sk.gen.size, slot, &r, &c);
      const int bank = slot < per_band ? 0 : 1;  // which detail band
      sk.dec.route.at4(0, bank * k.n_bits + b, r % n, c % n) = k.carriers[static_cast<size_t>(slot)] * scale;
    }
}

// Pooling masks for the block-singular-value layout: each bit reads the 2x2
// patch of feature cells covering its scheduled block (a 4x4 block of the
// half-resolution smooth band spans 8x8 pixels, i.e. 2x2 cells of the
// quarter-resolution feature grid).  The quantizer offset differs per block,
// so a single shared detector channel cannot serve every bit: the bit's logit
// must be a per-bit linear blend of several shared basis channels, which the
// head can phase-shift.  Each bit therefore gets kSvdBases routed copies.
constexpr int kSvdBases = 4;

void build_svd_routing(SurrogateKey& sk) {
  const auto& k = std::get<wm::DwtSvdKey>(sk.tau.payload);
  const int n = sk.gen.size / 4;           // feature grid edge
  const int per_row = (sk.gen.size / 2) / 4;  // coefficient blocks per row
  sk.dec.route = Tensor({1, kSvdBases * k.n_bits, n, n});
  const double scale = static_cast<double>(n) * n / 4.0;
  for (int b = 0; b < k.n_bits; ++b) {
    const int blk = k.schedule[static_cast<size_t>(b)];
    const int fr = (blk / per_row) * 2, fc = (blk % per_row) * 2;
    for (int copy = 0; copy < kSvdBases; ++copy)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          sk.dec.route.at4(0, copy * k.n_bits + b, fr + i, fc + j) = scale;
  }
  // The head regresses each block's leading singular value; the bit is its
  // quantizer coset, read out through a fixed cosine whose per-bit phase is
  // the attacker's own dither.
  sk.dec.link_freq = M_PI / k.delta;
  sk.dec.link_gain = 4.0;
  sk.dec.link_phase = Tensor({k.n_bits});
  for (int b = 0; b < k.n_bits; ++b)
    sk.dec.link_phase[b] = M_PI * k.dither[static_cast<size_t>(b)] / k.delta;
}

// Trains the conv decoder to read the attacker key's own bits off images the
// attacker watermarks itself.  Each step draws ONE fresh message, embeds it
// on a batch of fresh latents, and updates by Adam on the bit cross-entropy;
// the fresh-message count is recorded so the loop discipline is testable.
void train_bit_decoder(SurrogateKey& sk, const SurrogateTrainOverride& budget) {
  const Generator g(sk.gen);
  const int n_bits = sk.tau.message_bits();
  const bool two_banks = sk.kind == wm::SchemeKind::DwtSs;
  sk.dec.init(n_bits, (two_banks ? 2 : kSvdBases) * n_bits, derive_seed(sk.seed, 71));
  if (sk.kind == wm::SchemeKind::DwtSs)
    build_ss_routing(sk);
  else
    build_svd_routing(sk);
  Rng data_rng(derive_seed(sk.seed, 72));
  nn::Adam opt(1e-3);
  sk.messages_sampled = 0;
  sk.log.clear();

  // Final training bit error = mean over the last tenth of the run.
  const int tail_start = budget.steps - std::max(1, budget.steps / 10);
  double tail_err = 0.0;
  int tail_n = 0;

  for (int step = 0; step < budget.steps; ++step) {
    const wm::Message msg = wm::sample_message(sk.tau, data_rng.next_u64());
    ++sk.messages_sampled;
    const auto& bits = std::get<wm::BitMessage>(msg).bits;
    Tensor target({1, n_bits});
    for (int i = 0; i < n_bits; ++i) target[i] = bits[static_cast<size_t>(i)];

    ad::Tape tape;
    nn::ParamBinder pb(tape);
    ad::Var loss{-1};
    int wrong = 0;
    for (int b = 0; b < budget.batch; ++b) {
      const Tensor latent = g.sample_latent(data_rng.next_u64());
      const Tensor img = wm::embed(g, sk.tau, msg, latent).image;
      ad::Var x = tape.constant(img.reshaped({1, 1, img.dim(0), img.dim(1)}));
      ad::Var logits = sk.dec.logits_graph(tape, pb, x);
      const Tensor lv = tape.value(logits);  // copy: the tape may reallocate
      for (int i = 0; i < n_bits; ++i)
        wrong += (lv[i] > 0.0 ? 1 : 0) != bits[static_cast<size_t>(i)];
      ad::Var item = tape.bce_with_logits(logits, tape.constant(target));
      loss = loss.id < 0 ? item : tape.add(loss, item);
    }
    loss = tape.scalar_mul(1.0 / budget.batch, loss);
    tape.backward(loss);
    const double loss_val = tape.value(loss)[0];
    pb.apply(opt);

    const double ber = static_cast<double>(wrong) / (budget.batch * n_bits);
    if (step >= tail_start) {
      tail_err += ber;
      ++tail_n;
    }
    if (step % 10 == 0 || step + 1 == budget.steps)
      sk.log.push_back({step, loss_val, ber});
  }

  sk.train_ber = tail_n > 0 ? tail_err / tail_n : 1.0;
  sk.trained_ok = tail_n > 0 && sk.train_ber <= 0.05;

  // Held-out accuracy against fresh self-watermarked images.
  Rng eval_rng(derive_seed(sk.seed, 73));
  int ok = 0, total = 0;
  for (int i = 0; i < 100; ++i) {
    const wm::Message msg = wm::sample_message(sk.tau, eval_rng.next_u64());
    const Tensor latent = g.sample_latent(eval_rng.next_u64());
    const Tensor img = wm::embed(g, sk.tau, msg, latent).image;
    const Tensor logits = sk.dec.logits(img);
    const auto& bits = std::get<wm::BitMessage>(msg).bits;
    for (int j = 0; j < n_bits; ++j) {
      const uint8_t got = logits[j] > 0.0 ? 1 : 0;
      if (got == bits[static_cast<size_t>(j)]) ++ok;
      ++total;
    }
  }
  sk.heldout_acc = static_cast<double>(ok) / total;
}

}  // namespace

SurrogateKey gkeygen_with_budget(wm::SchemeKind kind, const GeneratorConfig& gen, uint64_t seed,
                                 const SurrogateTrainOverride& budget,
                                 const wm::StampTrainOverride& stamp_budget) {
  SurrogateKey sk;
  sk.kind = kind;
  sk.seed = seed;
  sk.gen = gen;
  const Generator g(gen);
  sk.tau = wm::keygen_with_budget(kind, g, seed, stamp_budget);
  switch (kind) {
    case wm::SchemeKind::RingLatent:
      build_ring_rows(sk);
      break;
    case wm::SchemeKind::DwtSs:
    case wm::SchemeKind::DwtSvd:
      train_bit_decoder(sk, budget);
      break;
    case wm::SchemeKind::LearnedStamp:
      sk.train_ber = std::get<wm::StampKey>(sk.tau.payload).train_ber;
      break;
  }
  return sk;
}

SurrogateKey gkeygen(wm::SchemeKind kind, const GeneratorConfig& gen, uint64_t seed) {
  return gkeygen_with_budget(kind, gen, seed, SurrogateTrainOverride{}, wm::StampTrainOverride{});
}

}  // namespace markbench::surrogate

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "markbench/autodiff.hpp"
#include "markbench/generator.hpp"
#include "markbench/nn.hpp"
#include "markbench/surrogate.hpp"
#include "markbench/tensor.hpp"
#include "markbench/transforms.hpp"
#include "markbench/watermark.hpp"

using namespace markbench;
namespace wm = markbench::wm;
namespace sg = markbench::surrogate;
namespace tf = markbench::transforms;

namespace {

GeneratorConfig provider_cfg() { return GeneratorConfig{}; }

// Reference spectrum readout: exact inversion, centered DFT, mask coords
// interleaved as (re, im) per coordinate.
std::vector<double> ref_ring_coords(const Generator& g, const wm::RingKey& rk, const Tensor& img) {
  const auto inv = g.invert(img);
  const tf::Spectrum spec = tf::dft2_centered(inv.latent);
  std::vector<double> out;
  for (const auto& mc : wm::ring_mask(rk, g.config().size)) {
    out.push_back(spec.re.at(mc.u, mc.v));
    out.push_back(spec.im.at(mc.u, mc.v));
  }
  return out;
}

sg::SurrogateTrainOverride small_budget() {
  sg::SurrogateTrainOverride b;
  b.steps = 300;
  b.batch = 8;
  return b;
}

wm::StampTrainOverride small_stamp_budget() {
  wm::StampTrainOverride b;
  b.steps = 400;
  b.batch = 8;
  return b;
}

}  // namespace

TEST_CASE("ring surrogate with a perfect generator copy matches the exact readout") {
  const GeneratorConfig cfg = provider_cfg();
  const Generator g(cfg);
  const auto sk = sg::gkeygen(wm::SchemeKind::RingLatent, cfg, 5);
  CHECK(sk.message_dim() > 0);
  CHECK(!sk.message_is_bits());

  const auto& rk = std::get<wm::RingKey>(sk.tau.payload);
  const auto msg = wm::sample_message(sk.tau, 15);
  const auto er = wm::embed(g, sk.tau, msg, g.sample_latent(25));

  const Tensor got = sk.extract(er.image);
  const auto want = ref_ring_coords(g, rk, er.image);
  REQUIRE(got.size() == static_cast<int64_t>(want.size()));
  for (int64_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[static_cast<size_t>(i)]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("ring surrogate readout recovers the embedded message coordinates") {
  const GeneratorConfig cfg = provider_cfg();
  const Generator g(cfg);
  const auto sk = sg::gkeygen(wm::SchemeKind::RingLatent, cfg, 6);
  const auto msg = std::get<wm::RingMessage>(wm::sample_message(sk.tau, 16));
  const auto er = wm::embed(g, sk.tau, wm::Message{msg}, g.sample_latent(26));

  const Tensor coords = sk.extract(er.image);
  const auto mask = wm::ring_mask(std::get<wm::RingKey>(sk.tau.payload), cfg.size);
  for (size_t i = 0; i < mask.size(); ++i) {
    const size_t ring = static_cast<size_t>(mask[i].ring);
    CHECK(coords[static_cast<int64_t>(2 * i)] ==
          doctest::Approx(msg.re[ring]).epsilon(1e-6).scale(0.1));
    CHECK(coords[static_cast<int64_t>(2 * i + 1)] ==
          doctest::Approx(msg.im[ring]).epsilon(1e-6).scale(0.1));
  }
}

TEST_CASE("ring surrogate graph equals the plain path and is differentiable") {
  const GeneratorConfig cfg = provider_cfg();
  const Generator g(cfg);
  const auto sk = sg::gkeygen(wm::SchemeKind::RingLatent, cfg, 7);
  const Tensor img = g.generate(g.sample_latent(27));

  ad::Tape tape;
  nn::ParamBinder frozen(tape, /*trainable=*/false);
  ad::Var x = tape.input(img.reshaped({1, 1, cfg.size, cfg.size}));
  ad::Var out = sk.extract_graph(tape, frozen, x);
  const Tensor plain = sk.extract(img);
  const Tensor& taped = tape.value(out);
  REQUIRE(taped.size() == plain.size());
  for (int64_t i = 0; i < plain.size(); ++i)
    CHECK(taped[i] == doctest::Approx(plain[i]).epsilon(1e-9).scale(1.0));

  tape.backward(tape.sum(tape.square(out)));
  const Tensor& gx = tape.grad(x);
  double gnorm = 0.0;
  for (int64_t i = 0; i < gx.size(); ++i) gnorm += std::abs(gx[i]);
  CHECK(gnorm > 0.0);
}

TEST_CASE("ring surrogate tolerates a small generator gap") {
  GeneratorConfig atk = provider_cfg();
  atk.gap = 0.02;
  const Generator g(provider_cfg());  // the provider stays at gap 0
  const auto sk = sg::gkeygen(wm::SchemeKind::RingLatent, atk, 8);
  const auto msg = std::get<wm::RingMessage>(wm::sample_message(sk.tau, 18));
  const auto er = wm::embed(g, sk.tau, wm::Message{msg}, g.sample_latent(28));

  // The readout drifts but must stay well correlated with the exact one.
  const Tensor got = sk.extract(er.image);
  const auto want = ref_ring_coords(g, std::get<wm::RingKey>(sk.tau.payload), er.image);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int64_t i = 0; i < got.size(); ++i) {
    dot += got[i] * want[static_cast<size_t>(i)];
    na += got[i] * got[i];
    nb += want[static_cast<size_t>(i)] * want[static_cast<size_t>(i)];
  }
  CHECK(dot / std::sqrt(na * nb) > 0.5);
}

TEST_CASE("spread-spectrum surrogate rows are exact for arbitrary images") {
  const GeneratorConfig cfg = provider_cfg();
  const auto sk = sg::gkeygen(wm::SchemeKind::DwtSs, cfg, 9);
  CHECK(sk.message_is_bits());
  CHECK(sk.message_dim() == 32);

  // Correlation scores computed through the wavelet transform, per bit.
  Rng rng(99);
  Tensor img({cfg.size, cfg.size});
  for (int64_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
  const auto& key = std::get<wm::DwtSsKey>(sk.tau.payload);
  const Tensor co = tf::haar_forward(img, 2);
  std::vector<double> want(static_cast<size_t>(key.n_bits), 0.0);
  for (int b = 0; b < key.n_bits; ++b)
    for (int s = 0; s < key.slots_per_bit; ++s) {
      const int slot = key.slot_perm[static_cast<size_t>(b * key.slots_per_bit + s)];
      int r, c;
      wm::ss_slot_pos(cfg.size, slot, &r, &c);
      want[static_cast<size_t>(b)] +=
          key.carriers[static_cast<size_t>(slot)] * co.at(r, c);
    }
  const Tensor got = sk.extract(img);
  for (int b = 0; b < key.n_bits; ++b)
    CHECK(got[b] == doctest::Approx(want[static_cast<size_t>(b)]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("spread-spectrum surrogate signs agree with the scheme extractor") {
  const GeneratorConfig cfg = provider_cfg();
  const Generator g(cfg);
  const auto sk = sg::gkeygen(wm::SchemeKind::DwtSs, cfg, 10);
  const auto msg = wm::sample_message(sk.tau, 20);
  const auto er = wm::embed(g, sk.tau, msg, g.sample_latent(30));

  const Tensor scores = sk.extract(er.image);
  const auto bits = wm::extract_bits(er.image, sk.tau);
  for (size_t b = 0; b < bits.size(); ++b)
    CHECK((scores[static_cast<int64_t>(b)] > 0.0 ? 1 : 0) == bits[b]);

  // graph path equals the plain path
  ad::Tape tape;
  nn::ParamBinder frozen(tape, false);
  ad::Var x = tape.input(er.image.reshaped({1, 1, cfg.size, cfg.size}));
  const Tensor& taped = tape.value(sk.extract_graph(tape, frozen, x));
  for (int64_t i = 0; i < scores.size(); ++i)
    CHECK(taped[i] == doctest::Approx(scores[i]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("svd surrogate decoder learns the lattice readout above chance") {
  const GeneratorConfig cfg = provider_cfg();
  const auto sk = sg::gkeygen_with_budget(wm::SchemeKind::DwtSvd, cfg, 11, small_budget());
  CHECK(sk.message_is_bits());
  CHECK(sk.message_dim() == 32);
  CHECK(sk.heldout_acc > 0.6);  // the acceptance run trains to the full bar
  CHECK(sk.trained_ok == (sk.heldout_acc >= 0.95));

  // decoder graph equals plain logits
  const Generator g(cfg);
  const auto msg = wm::sample_message(sk.tau, 21);
  const auto er = wm::embed(g, sk.tau, msg, g.sample_latent(31));
  const Tensor plain = sk.extract(er.image);
  ad::Tape tape;
  nn::ParamBinder frozen(tape, false);
  ad::Var x = tape.input(er.image.reshaped({1, 1, cfg.size, cfg.size}));
  const Tensor& taped = tape.value(sk.extract_graph(tape, frozen, x));
  REQUIRE(taped.size() == plain.size());
  for (int64_t i = 0; i < plain.size(); ++i)
    CHECK(taped[i] == doctest::Approx(plain[i]).epsilon(1e-7).scale(1.0));
}

TEST_CASE("stamp surrogate reads its own key's bits") {
  const GeneratorConfig cfg = provider_cfg();
  const Generator g(cfg);
  const auto sk = sg::gkeygen_with_budget(wm::SchemeKind::LearnedStamp, cfg, 12,
                                          small_budget(), small_stamp_budget());
  CHECK(sk.message_dim() == 40);

  const auto msg = wm::sample_message(sk.tau, 22);
  const auto& bits = std::get<wm::BitMessage>(msg).bits;
  const auto er = wm::embed(g, sk.tau, msg, g.sample_latent(32));
  const Tensor logits = sk.extract(er.image);
  int agree = 0;
  for (size_t b = 0; b < bits.size(); ++b)
    agree += (logits[static_cast<int64_t>(b)] > 0.0 ? 1 : 0) == bits[b];
  CHECK(agree >= 38);  // trained to <= 1% BER on average

  ad::Tape tape;
  nn::ParamBinder frozen(tape, false);
  ad::Var x = tape.input(er.image.reshaped({1, 1, cfg.size, cfg.size}));
  const Tensor& taped = tape.value(sk.extract_graph(tape, frozen, x));
  for (int64_t i = 0; i < logits.size(); ++i)
    CHECK(taped[i] == doctest::Approx(logits[i]).epsilon(1e-7).scale(1.0));
}

TEST_CASE("surrogate keys never read provider state") {
  // The surrogate is a function of (scheme, attacker generator, seed) only:
  // two identical calls agree bit for bit, and a different seed diverges.
  const GeneratorConfig cfg = provider_cfg();
  const auto a = sg::gkeygen(wm::SchemeKind::DwtSs, cfg, 13);
  const auto b = sg::gkeygen(wm::SchemeKind::DwtSs, cfg, 13);
  const auto c = sg::gkeygen(wm::SchemeKind::DwtSs, cfg, 14);
  CHECK(max_abs_diff(a.lin_rows, b.lin_rows) == 0.0);
  const auto& ka = std::get<wm::DwtSsKey>(a.tau.payload);
  const auto& kc = std::get<wm::DwtSsKey>(c.tau.payload);
  CHECK(ka.slot_perm != kc.slot_perm);
}

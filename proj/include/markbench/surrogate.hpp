#pragma once

#include <cstdint>

#include "markbench/generator.hpp"
#include "markbench/nn.hpp"
#include "markbench/tensor.hpp"
#include "markbench/watermark.hpp"

namespace markbench::surrogate {

// Trained stand-in for a scheme's extractor when only its bit pattern, not
// its exact computation, is differentiable.  Four conv layers feed a pooled
// linear head; pooling is weighted by fixed signed per-channel masks built
// from the attacker's own key layout (uniform pooling cannot express the
// scattered slot readouts, so routing is supplied and only the local
// coefficient detectors are learned).
struct SurrogateDecoder {
  nn::Conv2d c1, c2, c3, c4;
  nn::Linear head;
  Tensor route;  // [1, C4, Hf, Wf] signed pooling masks; empty = uniform
  // Optional fixed periodic readout for quantization-lattice bits: the head
  // output is treated as a learned regression s and the logit for bit b is
  // -gain * cos(freq * s_b - phase_b).  Phase/freq come from the attacker's
  // own quantizer key; a raw linear head cannot express a per-bit phase and
  // gradient descent cannot discover the oscillation on its own.
  Tensor link_phase;  // [n_bits]; empty = identity link (logits = head output)
  double link_freq = 0.0;
  double link_gain = 0.0;
  int n_bits = 0;

  void init(int bits, int c4_channels, uint64_t seed);
  std::vector<Tensor*> params();

  Tensor logits(const Tensor& image) const;  // [H,W] -> [n]
  ad::Var logits_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x) const;  // [1,1,H,W] -> [1,n]
};

// One row of the extractor-training history.
struct SurrogateTrainLogRow {
  int step = 0;
  double loss = 0.0;
  double bit_error = 0.0;
};

// An attacker-side key: a scheme key generated under the attacker's own
// generator, paired with a differentiable message extractor for it.  No
// provider secrets are consulted; attacks transfer (or fail to) purely
// through structure the two keys share.
struct SurrogateKey {
  wm::SchemeKind kind = wm::SchemeKind::RingLatent;
  uint64_t seed = 0;
  GeneratorConfig gen;     // the attacker's generator belief
  wm::WatermarkKey tau;    // the attacker's own scheme key

  // Extractor payloads (used per scheme):
  //  - ring-latent: message coords = lin_rows * tone_inverse(pixels) + lin_bias
  //    (the key is differentiable as-is, so no decoder training happens)
  //  - dwt-ss, dwt-svd: conv decoder trained on self-watermarked images
  //  - learned-stamp: the key's own decoder network (differentiable as-is)
  Tensor lin_rows;  // [d, H*W]
  Tensor lin_bias;  // [d]
  SurrogateDecoder dec;

  bool trained_ok = true;    // decoder reached <= 5% training bit error
  double heldout_acc = 1.0;  // decoder held-out bit accuracy
  double train_ber = 0.0;    // final training bit error (decoder or stamp key)
  int64_t messages_sampled = 0;          // fresh messages drawn by the trainer
  std::vector<SurrogateTrainLogRow> log;  // sparse (step, loss, bit-error) history

  // Length of the extracted message vector (coords or logits).
  int message_dim() const;
  bool message_is_bits() const { return kind != wm::SchemeKind::RingLatent; }

  // Reference (tape-free) extraction: ring coords, or bit logits.
  Tensor extract(const Tensor& image) const;
  // The same computation as a differentiable graph over x = [1,1,H,W].
  ad::Var extract_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x) const;
};

struct SurrogateTrainOverride {
  int steps = 3000;
  int batch = 16;
};

// Builds the attacker's key pair: runs the scheme's own key generation under
// `gen`, then constructs (or trains) the differentiable extractor.
SurrogateKey gkeygen(wm::SchemeKind kind, const GeneratorConfig& gen, uint64_t seed);
SurrogateKey gkeygen_with_budget(wm::SchemeKind kind, const GeneratorConfig& gen, uint64_t seed,
                                 const SurrogateTrainOverride& budget,
                                 const wm::StampTrainOverride& stamp_budget = {});

}  // namespace markbench::surrogate

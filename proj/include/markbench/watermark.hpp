#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "markbench/generator.hpp"
#include "markbench/nn.hpp"
#include "markbench/tensor.hpp"

namespace markbench::wm {

enum class SchemeKind { RingLatent, DwtSs, DwtSvd, LearnedStamp };

std::string scheme_name(SchemeKind k);
std::optional<SchemeKind> scheme_from_name(const std::string& s);

// ---- keys -------------------------------------------------------------------

// Latent-domain scheme: fixed concentric rings in the centered spectrum of
// the recovered latent carry per-ring complex constants.
struct RingKey {
  std::vector<int> radii{4, 6, 8, 10, 12, 14, 16, 18};
  double ring_width = 0.35;   // half-width of each annulus
  double value_scale = 1.0;   // std of each message component
};

// Spread-spectrum residing in the level-2 detail bands of the Haar DWT.
struct DwtSsKey {
  int n_bits = 32;
  int slots_per_bit = 16;
  double alpha = 0.8;          // strength in quantization units
  double quant_unit = 0.125;   // one quantization unit in coefficient scale
  std::vector<int> slot_perm;  // seeded permutation of the 512 band slots
  std::vector<double> carriers;  // per-slot signs (+1/-1)
};

// Quantization of the leading singular value of 4x4 blocks of the level-1
// approximation band, one bit per scheduled block.
struct DwtSvdKey {
  int n_bits = 32;
  double delta = 0.4;            // lattice step
  std::vector<int> schedule;     // scheduled block indices (seeded)
  std::vector<double> dither;    // per scheduled block, in [0, 2*delta)
};

// Trained encoder/decoder pair; the stamp pattern is the key.
struct StampNets {
  // Encoder: the message is broadcast over a seeded cell grid into one signed
  // code plane, which enters the first stage as a parallel convolution branch
  // (e1 reads the image, e1m the code plane).  The encoder shapes how the
  // code is laid under the content; the raw grid never ships as-is.
  nn::Conv2d e1, e1m, e2, e3;
  // Decoder: four conv layers; the global pooling that produces the logits
  // is masked per output channel by the same seeded cell grid, so channel i
  // pools exactly where bit i lives.
  nn::Conv2d d1, d2, d3, d4;
  std::vector<int> cell_of_bit;   // seeded bit -> grid-cell routing (key material)
  std::vector<double> bit_sign;   // seeded per-bit polarity, +1/-1 (key material)
  int n_bits = 40;
  double amp = 0.08;  // stamp amplitude bound (through tanh)

  void init(int n_bits, uint64_t seed);
  std::vector<Tensor*> params();

  // grid geometry shared by encoder code plane and decoder pooling masks
  int grid_rows() const;
  int grid_cols() const;
  // [1,1,H,W] plane holding sign(bit) at each bit's cell
  Tensor code_plane(const std::vector<uint8_t>& bits, int H, int W) const;
  // [1,n,Hf,Wf] per-channel pooling masks, scaled so that a global average
  // pool of the masked map equals the per-cell mean
  Tensor pool_masks(int Hf, int Wf, int H, int W) const;

  // Inference paths.  [H,W] image in, [H,W] stamped image / [n] logits out;
  // *clamped counts pixels clipped into [0,1].
  Tensor stamp(const Tensor& image, const std::vector<uint8_t>& bits, int* clamped = nullptr) const;
  Tensor decode_logits(const Tensor& image) const;

  // Tape path for training/attacks; x is [1,1,H,W], code is the code plane.
  // field_graph returns the bounded stamp field tanh(delta) in [-1,1];
  // stamp_graph applies it at amplitude `amp` and clamps to the pixel box.
  ad::Var field_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x, ad::Var code) const;
  ad::Var stamp_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x, ad::Var code) const;
  ad::Var decode_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x) const;
};

struct StampKey {
  StampNets nets;
  double train_ber = 0.0;  // measured after key training
};

struct WatermarkKey {
  SchemeKind kind = SchemeKind::RingLatent;
  uint64_t seed = 0;
  GeneratorConfig gen;  // generator binding (used by the latent-domain scheme)
  std::variant<RingKey, DwtSsKey, DwtSvdKey, StampKey> payload;

  int message_bits() const;  // 0 for the Fourier-domain message
};

// ---- messages -----------------------------------------------------------------

struct BitMessage {
  std::vector<uint8_t> bits;
};

// One complex constant per ring.
struct RingMessage {
  std::vector<double> re, im;
};

using Message = std::variant<BitMessage, RingMessage>;

// ---- results --------------------------------------------------------------------

struct EmbedResult {
  Tensor image;
  double clamp_fraction = 0.0;  // pixels clipped into [0,1] by embedding
};

struct VerifyOptions {
  double threshold = 0.01;
  bool double_tail = false;  // also accept the bit-flipped message
};

struct VerifyResult {
  double p = 1.0;
  bool detected = false;
  double distance = 0.0;  // bit error rate, or the normalized spectral distance
  int matches = -1;       // matching bits (multi-bit schemes)
  int n_bits = 0;
  bool invert_clamped = false;  // latent recovery had to clamp pixels
};

// ---- ring mask helpers (shared with the surrogate path) --------------------------

struct MaskCoord {
  int u, v;   // centered spectrum indices of the canonical half-plane rep
  int ring;   // owning ring index
};

// Canonical half-plane coordinates covered by the key's rings.
std::vector<MaskCoord> ring_mask(const RingKey& rk, int size);

struct RingStats {
  double eta = 0.0;
  double lambda = 0.0;
  int dof = 0;
  double sigma2 = 0.0;
};

// eta/lambda/dof/sigma^2 of a recovered latent against a ring message.
RingStats ring_statistics(const Tensor& latent, const RingKey& rk, const RingMessage& msg);

// ---- scheme API -------------------------------------------------------------------

WatermarkKey keygen(SchemeKind kind, const Generator& gen, uint64_t seed);
Message sample_message(const WatermarkKey& key, uint64_t seed);
EmbedResult embed(const Generator& gen, const WatermarkKey& key, const Message& msg,
                  const Tensor& latent);
VerifyResult verify(const Tensor& image, const WatermarkKey& key, const Message& msg,
                    const VerifyOptions& opts = {});

// Multi-bit extraction (throws for the Fourier-domain scheme).
std::vector<uint8_t> extract_bits(const Tensor& image, const WatermarkKey& key);

// Coefficient-grid position of spread-spectrum slot `slot` (the two level-2
// detail bands, row-major each).  Shared with the surrogate extractor.
void ss_slot_pos(int size, int slot, int* r, int* c);

// Thrown when key training cannot reach its quality bar.
struct KeygenError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training step budget for the stamp scheme (tests may shrink it).
struct StampTrainOverride {
  int steps = 2000;
  int batch = 8;
};
WatermarkKey keygen_with_budget(SchemeKind kind, const Generator& gen, uint64_t seed,
                                const StampTrainOverride& budget);

}  // namespace markbench::wm

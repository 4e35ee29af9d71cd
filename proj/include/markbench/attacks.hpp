#pragma once

#include <cstdint>
#include <vector>

#include "markbench/nn.hpp"
#include "markbench/surrogate.hpp"
#include "markbench/tensor.hpp"

namespace markbench::attacks {

// ---- non-adaptive baselines --------------------------------------------------
// All take and return [H,W] images in [0,1].

Tensor blur(const Tensor& x, double sigma);              // Gaussian, reflect padding
Tensor jpeg_like(const Tensor& x, int quality);          // 8x8 DCT quantization
Tensor crop_repad(const Tensor& x, double keep);         // central crop, 0.5 re-pad
Tensor gauss_noise(const Tensor& x, double sigma, uint64_t seed);
Tensor jitter(const Tensor& x, int dx, int dy);          // integer translate, 0.5 fill
Tensor quantize(const Tensor& x, int levels);
Tensor rotate_deg(const Tensor& x, double degrees);      // bilinear, 0.5 fill

// ---- perceptual distance -------------------------------------------------------
// Mean squared distance of fixed random conv features plus a small pixel
// term; used both as the compression attack's fidelity loss and as the
// reported attack cost.

struct PerceptualMetric {
  nn::Conv2d f1, f2, f3;

  PerceptualMetric();  // fixed weights, identical in every process

  double distance(const Tensor& a, const Tensor& b) const;
  // a, b are [1,1,H,W]; parameters are bound through `frozen`.
  ad::Var distance_graph(ad::Tape& t, nn::ParamBinder& frozen, ad::Var a, ad::Var b) const;
};

// ---- adversarial noising --------------------------------------------------------
// Gradient ascent on a bounded perturbation that pushes the surrogate
// extractor's read-out away from its value on the input image.

struct NoisingConfig {
  double epsilon = 2.0 / 255.0;  // L-inf budget
  int steps = 200;
  double lr = 0.01;
};

struct NoisingResult {
  Tensor image;
  double objective = 0.0;            // final best message distance
  std::vector<double> trace;         // best-so-far objective per step
};

NoisingResult adversarial_noising(const Tensor& image, const surrogate::SurrogateKey& sk,
                                  const NoisingConfig& cfg);

// ---- learned compression ---------------------------------------------------------
// Small convolutional autoencoder.  Pretrained for fidelity only; optionally
// fine-tuned to destroy a surrogate key's read-out while staying perceptually
// close.

struct Compressor {
  nn::Conv2d ec1, ec2, ec3;   // 64 -> 32 -> 16, bottleneck 8x16x16
  nn::ConvT2d dc1, dc2;       // 16 -> 32 -> 64
  nn::Conv2d dc3;             // sigmoid head

  void init(uint64_t seed);
  std::vector<Tensor*> params();

  Tensor compress(const Tensor& image) const;  // [H,W] -> [H,W]
  ad::Var compress_graph(ad::Tape& t, nn::ParamBinder& pb, ad::Var x) const;
};

Tensor apply_compressor(const Compressor& c, const Tensor& image, int repetitions);

struct CompressorTrainConfig {
  int steps = 800;
  int batch = 8;
  double lr = 1e-3;
};

// Fidelity-only pretraining on clean generator output.
Compressor train_compressor(const GeneratorConfig& gen, uint64_t seed,
                            const CompressorTrainConfig& cfg = {});

// Mean PSNR of the compressor on fresh clean images.
double compressor_psnr(const Compressor& c, const GeneratorConfig& gen, uint64_t seed, int n = 50);

struct CompressFinetuneConfig {
  double alpha = 1.0;  // weight of the message-destruction term
  int steps = 2000;
  int batch = 8;
  double lr = 1e-3;
};

// Fine-tunes a copy of `base` so compression pushes the surrogate read-out
// away from the embedded message while the perceptual cost stays low.
Compressor finetune_compressor(const Compressor& base, const surrogate::SurrogateKey& sk,
                               uint64_t seed, const CompressFinetuneConfig& cfg);

}  // namespace markbench::attacks

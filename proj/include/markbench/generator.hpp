#pragma once

#include <cstdint>
#include <vector>

#include "markbench/tensor.hpp"

namespace markbench {

// Configuration of the toy image generator.  `gap` in [0,1] morphs the
// mixing basis and texture away from the gap=0 generator with the same seed;
// gap=0 reproduces it exactly.  This models an attacker holding an imperfect
// reimplementation of a provider's generator.
struct GeneratorConfig {
  uint64_t seed = 1;
  double gap = 0.0;
  int size = 64;
  double tone_slope = 0.08;   // logistic squashing slope
  double texture_amp = 1.0;   // fixed background texture amplitude
  int mix_levels = 3;         // Haar synthesis depth inside the mixing basis
};

// image = tone(B * latent + texture) with B orthonormal, so the map from
// latent to image is exactly invertible.
class Generator {
 public:
  explicit Generator(const GeneratorConfig& cfg);

  const GeneratorConfig& config() const { return cfg_; }

  // Standard-normal latent grid for a given draw seed.
  Tensor sample_latent(uint64_t seed) const;

  Tensor generate(const Tensor& latent) const;

  struct InvertResult {
    Tensor latent;
    bool clamped = false;  // input pixels at/beyond 0 or 1 were pulled inside
  };
  InvertResult invert(const Tensor& image) const;

  // Orthonormal mixing basis B and its inverse (transpose).
  Tensor mix(const Tensor& z) const;
  Tensor unmix(const Tensor& v) const;

  const Tensor& texture() const { return tex_; }

  // Pointwise logistic squashing and its exact inverse.
  double tone(double v) const;
  double tone_inverse(double y) const;
  Tensor tone(const Tensor& v) const;
  // Pixels clamped into [delta, 1-delta] before inverting; *clamped set if
  // any pixel needed it.
  Tensor tone_inverse(const Tensor& y, bool* clamped) const;

  static constexpr double kClampDelta = 1e-6;

 private:
  struct Givens {
    int i, j;
    double c, s;
  };

  GeneratorConfig cfg_;
  Tensor ql_, qr_;             // seeded orthonormal size x size factors
  std::vector<Givens> gap_rot_;  // extra in-place rotations scaled by gap
  Tensor tex_;

  void apply_gap(Tensor& u, bool inverse) const;
};

// Seeded orthonormal matrix via Householder QR of a Gaussian matrix.
Tensor orthonormal_matrix(int n, uint64_t seed);

}  // namespace markbench

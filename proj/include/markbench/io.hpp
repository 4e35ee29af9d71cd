#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "markbench/surrogate.hpp"
#include "markbench/tensor.hpp"
#include "markbench/watermark.hpp"

namespace markbench::io {

// ---- images (binary PGM, 8-bit) ---------------------------------------------

void write_pgm(const std::string& path, const Tensor& image);
Tensor read_pgm(const std::string& path);

// ---- tensors (raw little-endian float64 + JSON sidecar) ----------------------
// `base` may be given with or without the .bin suffix; the sidecar lives at
// base.json and records {shape, dtype, seed}.

void write_tensor(const std::string& base, const Tensor& t, uint64_t seed = 0);
Tensor read_tensor(const std::string& base, uint64_t* seed = nullptr);

// ---- keys ---------------------------------------------------------------------
// A key file is a one-line JSON envelope {format, version, kind, scheme, seed}
// followed by a binary payload.  The envelope can be inspected without
// touching the payload, and tools must only ever display the envelope.

struct KeyEnvelope {
  std::string format;
  int version = 0;
  std::string kind;  // "scheme" or "surrogate"
  std::string scheme;
  uint64_t seed = 0;
};

KeyEnvelope read_envelope(const std::string& path);

void write_key(const std::string& path, const wm::WatermarkKey& key);
wm::WatermarkKey read_key(const std::string& path);

void write_surrogate_key(const std::string& path, const surrogate::SurrogateKey& sk);
surrogate::SurrogateKey read_surrogate_key(const std::string& path);

// ---- messages -------------------------------------------------------------------

void write_message(const std::string& path, const wm::Message& msg);
wm::Message read_message(const std::string& path);

// ---- tables and plots --------------------------------------------------------------

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
// Parses a CSV written by write_csv (no quoting or embedded commas).
std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               std::vector<std::string>* header = nullptr);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  int series = 0;
  std::string label;
};

// Deterministic scatter plot (no timestamps or environment-dependent text).
void write_svg_scatter(const std::string& path, const std::string& title,
                       const std::string& x_label, const std::string& y_label,
                       const std::vector<std::string>& series_names,
                       const std::vector<ScatterPoint>& points);

}  // namespace markbench::io

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "markbench/attacks.hpp"
#include "markbench/generator.hpp"
#include "markbench/metrics.hpp"
#include "markbench/surrogate.hpp"
#include "markbench/watermark.hpp"

namespace markbench::bench {

struct NoisingGrid {
  std::vector<double> epsilons_255{1.0, 2.0, 6.0, 10.0};
  int steps = 120;
  double lr = 0.01;
  int keys = 1;     // leading key seeds the (expensive) attack is evaluated on
  int images = 16;  // images per cell
};

struct CompressionGrid {
  double alpha = 1.0;
  int steps = 1200;
  int batch = 8;
  double lr = 1e-3;
  int pretrain_steps = 800;
  std::vector<int> repetitions{1, 2, 3};
  bool include_untrained = true;  // fidelity-only compressor as an ablation
  int images = 32;
};

struct ExperimentConfig {
  std::string out_dir = "results";
  uint64_t base_seed = 1;
  GeneratorConfig generator;
  double surrogate_gap = 0.0;  // attacker's generator mismatch
  std::vector<wm::SchemeKind> schemes{wm::SchemeKind::RingLatent, wm::SchemeKind::DwtSs,
                                      wm::SchemeKind::DwtSvd, wm::SchemeKind::LearnedStamp};
  std::vector<uint64_t> key_seeds{101, 102, 103};
  int clean_images = 200;
  int images_per_cell = 32;
  bool include_baselines = true;
  NoisingGrid noising;
  CompressionGrid compression;
  wm::StampTrainOverride stamp_train;
  surrogate::SurrogateTrainOverride surrogate_train;
  int threads = 1;
  bool emit_timings = false;  // wall-clock column; off keeps reruns byte-identical

  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
};

struct RunOutputs {
  std::string results_csv;
  std::string summary_csv;
  std::vector<std::string> pareto_csv;
  std::vector<std::string> pareto_svg;
};

// Runs the full grid and writes results.csv, summary.csv and per-scheme
// trade-off outputs under cfg.out_dir.  `log` receives progress lines.
RunOutputs run_benchmark(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Attack trade-off points for one scheme, aggregated over key seeds, from
// results.csv rows (attack rows only; the unattacked row is skipped).
std::vector<metrics::AttackPoint> attack_points_from_rows(
    const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
    const std::string& scheme);

// Writes pareto_<scheme>.csv/.svg from a results table; returns written paths.
RunOutputs write_pareto_outputs(const std::string& out_dir,
                                const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows);

}  // namespace markbench::bench

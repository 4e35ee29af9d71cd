// Command-line harness for the watermark test bench.
//
// Exit codes: 0 success (and "detected" for verify), 1 usage error,
// 2 verification did not detect, 3 internal error.
//
// Key files hold secrets.  Every command that touches a key prints only its
// envelope (format/kind/scheme/seed/version), never the payload.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "markbench/attacks.hpp"
#include "markbench/benchmark.hpp"
#include "markbench/generator.hpp"
#include "markbench/io.hpp"
#include "markbench/metrics.hpp"
#include "markbench/rng.hpp"
#include "markbench/surrogate.hpp"
#include "markbench/tensor.hpp"
#include "markbench/watermark.hpp"

namespace mb = markbench;
namespace wm = markbench::wm;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

mb::Tensor load_image(const std::string& path) {
  if (ends_with(path, ".pgm")) return mb::io::read_pgm(path);
  return mb::io::read_tensor(path);
}

void save_image(const std::string& path, const mb::Tensor& img) {
  if (ends_with(path, ".pgm"))
    mb::io::write_pgm(path, img);
  else
    mb::io::write_tensor(path, img);
}

void print_envelope(const std::string& path) {
  const mb::io::KeyEnvelope env = mb::io::read_envelope(path);
  std::cout << "key=" << path << " format=" << env.format << " version=" << env.version
            << " kind=" << env.kind << " scheme=" << env.scheme << " seed=" << env.seed
            << " (payload not shown)\n";
}

void add_generator_options(CLI::App* sub, mb::GeneratorConfig* g) {
  sub->add_option("--gen-seed", g->seed, "generator parameter seed");
  sub->add_option("--gap", g->gap, "generator mixing-angle offset");
  sub->add_option("--size", g->size, "image side length");
  sub->add_option("--tone-slope", g->tone_slope, "tone curve slope");
  sub->add_option("--texture-amp", g->texture_amp, "texture field amplitude");
  sub->add_option("--mix-levels", g->mix_levels, "wavelet mixing depth");
}

std::string fmtd(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

void print_table(const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> w(header.size());
  for (size_t c = 0; c < header.size(); ++c) w[c] = header[c].size();
  for (const auto& r : rows)
    for (size_t c = 0; c < r.size() && c < w.size(); ++c) w[c] = std::max(w[c], r[c].size());
  auto line = [&](const std::vector<std::string>& r) {
    for (size_t c = 0; c < w.size(); ++c) {
      const std::string& cell = c < r.size() ? r[c] : std::string();
      std::cout << cell << std::string(w[c] - cell.size() + 2, ' ');
    }
    std::cout << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
}

struct KeygenArgs {
  std::string scheme;
  uint64_t seed = 1;
  std::string out;
  mb::GeneratorConfig gen;
  wm::StampTrainOverride budget;
};

int run_keygen(const KeygenArgs& a) {
  const auto kind = wm::scheme_from_name(a.scheme);
  if (!kind) throw CLI::ValidationError("--scheme", "unknown scheme " + a.scheme);
  const mb::Generator gen(a.gen);
  const wm::WatermarkKey key = wm::keygen_with_budget(*kind, gen, a.seed, a.budget);
  mb::io::write_key(a.out, key);
  print_envelope(a.out);
  return 0;
}

struct GkeygenArgs {
  std::string scheme;
  uint64_t seed = 1;
  std::string out;
  std::string train_log;
  mb::GeneratorConfig gen;  // the attacker's generator belief (including --gap)
  mb::surrogate::SurrogateTrainOverride budget;
  wm::StampTrainOverride stamp_budget;
};

int run_gkeygen(const GkeygenArgs& a) {
  const auto kind = wm::scheme_from_name(a.scheme);
  if (!kind) throw CLI::ValidationError("--scheme", "unknown scheme " + a.scheme);
  const mb::surrogate::SurrogateKey sk =
      mb::surrogate::gkeygen_with_budget(*kind, a.gen, a.seed, a.budget, a.stamp_budget);
  mb::io::write_surrogate_key(a.out, sk);
  if (!a.train_log.empty()) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(sk.log.size());
    for (const auto& r : sk.log)
      rows.push_back({std::to_string(r.step), fmtd(r.loss, "%.6f"), fmtd(r.bit_error, "%.6f")});
    mb::io::write_csv(a.train_log, {"step", "loss", "bit_error"}, rows);
  }
  print_envelope(a.out);
  std::cout << "trained_ok=" << (sk.trained_ok ? "yes" : "no")
            << " heldout_acc=" << fmtd(sk.heldout_acc, "%.4f") << "\n";
  if (!sk.trained_ok)
    std::cout << "warning: decoder training did not converge; attacks with this key may still partially work\n";
  return 0;
}

struct EmbedArgs {
  std::string key_path;
  std::string out;
  uint64_t latent_seed = 1;
  std::string latent_path;
  uint64_t message_seed = 1;
  std::string message_path;
  std::string save_message;
  std::string save_clean;
  std::string save_latent;
};

int run_embed(const EmbedArgs& a) {
  const wm::WatermarkKey key = mb::io::read_key(a.key_path);
  const mb::Generator gen(key.gen);
  const mb::Tensor latent = a.latent_path.empty() ? gen.sample_latent(a.latent_seed)
                                                  : mb::io::read_tensor(a.latent_path);
  const wm::Message msg = a.message_path.empty() ? wm::sample_message(key, a.message_seed)
                                                 : mb::io::read_message(a.message_path);
  const wm::EmbedResult er = wm::embed(gen, key, msg, latent);
  save_image(a.out, er.image);
  if (!a.save_message.empty()) mb::io::write_message(a.save_message, msg);
  if (!a.save_latent.empty()) mb::io::write_tensor(a.save_latent, latent);
  const mb::Tensor clean = gen.generate(latent);
  if (!a.save_clean.empty()) save_image(a.save_clean, clean);
  std::cout << "embedded=" << a.out << " clamp_fraction=" << fmtd(er.clamp_fraction, "%.5f")
            << " mean_abs=" << fmtd(mb::mean_abs_diff(er.image, clean))
            << " psnr=" << fmtd(mb::psnr(er.image, clean), "%.2f") << "\n";
  return 0;
}

struct VerifyArgs {
  std::string key_path;
  std::string image_path;
  std::string message_path;
  double threshold = 0.01;
  bool double_tail = false;
};

int run_verify(const VerifyArgs& a) {
  const wm::WatermarkKey key = mb::io::read_key(a.key_path);
  const mb::Tensor img = load_image(a.image_path);
  const wm::Message msg = mb::io::read_message(a.message_path);
  wm::VerifyOptions opts;
  opts.threshold = a.threshold;
  opts.double_tail = a.double_tail;
  const wm::VerifyResult vr = wm::verify(img, key, msg, opts);
  std::cout << "p=" << fmtd(vr.p, "%.6g") << " detected=" << (vr.detected ? "yes" : "no")
            << " distance=" << fmtd(vr.distance, "%.4f");
  if (vr.matches >= 0) std::cout << " matches=" << vr.matches << "/" << vr.n_bits;
  if (vr.invert_clamped) std::cout << " invert_clamped=yes";
  std::cout << "\n";
  return vr.detected ? 0 : 2;
}

struct AttackArgs {
  std::string kind;
  std::string in_path;
  std::string out;
  double sigma = 1.0;
  int quality = 70;
  double keep = 0.5;
  double sigma255 = 2.0;
  int dx = 1, dy = 1;
  int levels = 32;
  double degrees = 1.0;
  uint64_t seed = 7;
  // surrogate-guided attacks
  std::string surrogate_path;
  double epsilon255 = 2.0;
  int steps = 0;  // 0 = per-attack default
  double lr = 0.0;
  double alpha = 1.0;
  int pretrain_steps = 800;
  int batch = 8;
  int repetitions = 1;
  bool untrained = false;
};

int run_attack(const AttackArgs& a) {
  const mb::Tensor x = load_image(a.in_path);
  mb::Tensor y;
  if (a.kind == "blur") {
    y = mb::attacks::blur(x, a.sigma);
  } else if (a.kind == "jpeg") {
    y = mb::attacks::jpeg_like(x, a.quality);
  } else if (a.kind == "noise") {
    y = mb::attacks::gauss_noise(x, a.sigma255 / 255.0, a.seed);
  } else if (a.kind == "crop") {
    y = mb::attacks::crop_repad(x, a.keep);
  } else if (a.kind == "jitter") {
    y = mb::attacks::jitter(x, a.dx, a.dy);
  } else if (a.kind == "quantize") {
    y = mb::attacks::quantize(x, a.levels);
  } else if (a.kind == "rotate") {
    y = mb::attacks::rotate_deg(x, a.degrees);
  } else if (a.kind == "adv-noise") {
    if (a.surrogate_path.empty())
      throw CLI::ValidationError("--surrogate", "adv-noise needs a surrogate key");
    const auto sk = mb::io::read_surrogate_key(a.surrogate_path);
    mb::attacks::NoisingConfig nc;
    nc.epsilon = a.epsilon255 / 255.0;
    if (a.steps > 0) nc.steps = a.steps;
    if (a.lr > 0) nc.lr = a.lr;
    const auto nr = mb::attacks::adversarial_noising(x, sk, nc);
    y = nr.image;
    std::cout << "objective=" << fmtd(nr.objective) << "\n";
  } else if (a.kind == "adv-compress") {
    if (a.surrogate_path.empty())
      throw CLI::ValidationError("--surrogate", "adv-compress needs a surrogate key");
    const auto sk = mb::io::read_surrogate_key(a.surrogate_path);
    mb::attacks::CompressorTrainConfig pre;
    pre.steps = a.pretrain_steps;
    pre.batch = a.batch;
    std::cout << "pretraining compressor (" << pre.steps << " steps)\n";
    mb::attacks::Compressor comp =
        mb::attacks::train_compressor(sk.gen, mb::derive_seed(a.seed, 1), pre);
    if (!a.untrained) {
      mb::attacks::CompressFinetuneConfig fin;
      fin.alpha = a.alpha;
      if (a.steps > 0) fin.steps = a.steps;
      fin.batch = a.batch;
      if (a.lr > 0) fin.lr = a.lr;
      std::cout << "fine-tuning compressor (" << fin.steps << " steps)\n";
      comp = mb::attacks::finetune_compressor(comp, sk, mb::derive_seed(a.seed, 2), fin);
    }
    y = mb::attacks::apply_compressor(comp, x, a.repetitions);
    std::cout << "compressor_psnr="
              << fmtd(mb::attacks::compressor_psnr(comp, sk.gen, mb::derive_seed(a.seed, 3)), "%.2f")
              << "\n";
  } else {
    throw CLI::ValidationError("--kind", "unknown attack " + a.kind);
  }
  save_image(a.out, y);
  std::cout << "attacked=" << a.out << " psnr_vs_input=" << fmtd(mb::psnr(y, x), "%.2f") << "\n";
  return 0;
}

struct BenchmarkArgs {
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  bool emit_timings = false;
  bool quiet = false;
};

int run_bench(const BenchmarkArgs& a) {
  mb::bench::ExperimentConfig cfg = mb::bench::ExperimentConfig::from_json_file(a.config_path);
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (a.threads > 0) cfg.threads = a.threads;
  if (a.emit_timings) cfg.emit_timings = true;
  const auto out = mb::bench::run_benchmark(cfg, a.quiet ? nullptr : &std::cout);
  std::cout << "results=" << out.results_csv << "\n";
  std::cout << "summary=" << out.summary_csv << "\n";
  for (const auto& p : out.pareto_csv) std::cout << "pareto=" << p << "\n";
  for (const auto& p : out.pareto_svg) std::cout << "plot=" << p << "\n";
  return 0;
}

struct ParetoArgs {
  std::string results_path;
  std::string out_dir = ".";
};

int run_pareto(const ParetoArgs& a) {
  std::vector<std::string> header;
  const auto rows = mb::io::read_csv(a.results_path, &header);
  const auto out = mb::bench::write_pareto_outputs(a.out_dir, header, rows);
  for (const auto& p : out.pareto_csv) std::cout << "pareto=" << p << "\n";
  for (const auto& p : out.pareto_svg) std::cout << "plot=" << p << "\n";
  return 0;
}

struct ReportArgs {
  std::string results_path;
  std::string summary_path;
};

int run_report(const ReportArgs& a) {
  if (!a.summary_path.empty()) {
    std::vector<std::string> header;
    const auto rows = mb::io::read_csv(a.summary_path, &header);
    std::cout << "== per-key summary ==\n";
    print_table(header, rows);
    std::cout << "\n";
  }
  std::vector<std::string> header;
  const auto rows = mb::io::read_csv(a.results_path, &header);
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("results table: missing column " + name);
  };
  const size_t c_scheme = static_cast<size_t>(col("scheme"));
  std::vector<std::string> schemes;
  for (const auto& r : rows) {
    bool seen = false;
    for (const auto& s : schemes) seen = seen || s == r[c_scheme];
    if (!seen) schemes.push_back(r[c_scheme]);
  }
  for (const auto& scheme : schemes) {
    std::cout << "== " << scheme << " ==\n";
    std::vector<std::vector<std::string>> sub;
    for (const auto& r : rows)
      if (r[c_scheme] == scheme) sub.push_back(r);
    print_table(header, sub);
    const auto pts = mb::bench::attack_points_from_rows(header, rows, scheme);
    const auto best = mb::metrics::best_attack(pts);
    if (best)
      std::cout << "cheapest break: " << best->attack << " (accuracy "
                << fmtd(best->accuracy, "%.4f") << ", distance " << fmtd(best->distance) << ")\n";
    else
      std::cout << "cheapest break: none reached the break threshold\n";
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"watermark test bench"};
  app.require_subcommand(1);

  KeygenArgs kg;
  CLI::App* s_keygen = app.add_subcommand("keygen", "generate a watermark key");
  s_keygen->add_option("--scheme", kg.scheme, "ring-latent|dwt-ss|dwt-svd|learned-stamp")
      ->required();
  s_keygen->add_option("--seed", kg.seed, "key seed");
  s_keygen->add_option("--out", kg.out, "output key file")->required();
  add_generator_options(s_keygen, &kg.gen);
  s_keygen->add_option("--train-steps", kg.budget.steps, "stamp training steps");
  s_keygen->add_option("--train-batch", kg.budget.batch, "stamp training batch");

  GkeygenArgs gk;
  CLI::App* s_gkeygen =
      app.add_subcommand("gkeygen", "generate an attacker-side surrogate key (no provider secrets)");
  s_gkeygen->add_option("--scheme", gk.scheme, "ring-latent|dwt-ss|dwt-svd|learned-stamp")
      ->required();
  s_gkeygen->add_option("--seed", gk.seed, "surrogate seed");
  s_gkeygen->add_option("--out", gk.out, "output key file")->required();
  s_gkeygen->add_option("--train-log", gk.train_log, "write decoder training curve CSV (step,loss,bit_error)");
  add_generator_options(s_gkeygen, &gk.gen);
  s_gkeygen->add_option("--surrogate-steps", gk.budget.steps, "decoder training steps");
  s_gkeygen->add_option("--surrogate-batch", gk.budget.batch, "decoder training batch");
  s_gkeygen->add_option("--train-steps", gk.stamp_budget.steps, "stamp training steps");
  s_gkeygen->add_option("--train-batch", gk.stamp_budget.batch, "stamp training batch");

  EmbedArgs em;
  CLI::App* s_embed = app.add_subcommand("embed", "watermark a generated image");
  s_embed->add_option("--key", em.key_path, "key file")->required();
  s_embed->add_option("--out", em.out, "output image (.pgm or tensor)")->required();
  s_embed->add_option("--latent-seed", em.latent_seed, "latent sampling seed");
  s_embed->add_option("--latent", em.latent_path, "latent tensor file (overrides --latent-seed)");
  s_embed->add_option("--message-seed", em.message_seed, "message sampling seed");
  s_embed->add_option("--message", em.message_path, "message file (overrides --message-seed)");
  s_embed->add_option("--save-message", em.save_message, "write the embedded message here");
  s_embed->add_option("--save-clean", em.save_clean, "write the unmarked render here");
  s_embed->add_option("--save-latent", em.save_latent, "write the latent here");

  VerifyArgs vf;
  CLI::App* s_verify = app.add_subcommand("verify", "test an image for a watermark");
  s_verify->add_option("--key", vf.key_path, "key file")->required();
  s_verify->add_option("--image", vf.image_path, "image file")->required();
  s_verify->add_option("--message", vf.message_path, "message file")->required();
  s_verify->add_option("--threshold", vf.threshold, "p-value threshold");
  s_verify->add_flag("--double-tail", vf.double_tail, "also flag anti-correlated read-outs");

  AttackArgs at;
  CLI::App* s_attack = app.add_subcommand("attack", "apply an attack to an image");
  s_attack
      ->add_option("--kind", at.kind,
                   "blur|jpeg|noise|crop|jitter|quantize|rotate|adv-noise|adv-compress")
      ->required();
  s_attack->add_option("--in", at.in_path, "input image")->required();
  s_attack->add_option("--out", at.out, "output image")->required();
  s_attack->add_option("--sigma", at.sigma, "blur sigma");
  s_attack->add_option("--quality", at.quality, "jpeg quality");
  s_attack->add_option("--sigma255", at.sigma255, "noise sigma in 8-bit steps");
  s_attack->add_option("--keep", at.keep, "crop keep fraction");
  s_attack->add_option("--dx", at.dx, "jitter columns");
  s_attack->add_option("--dy", at.dy, "jitter rows");
  s_attack->add_option("--levels", at.levels, "quantizer levels");
  s_attack->add_option("--degrees", at.degrees, "rotation angle");
  s_attack->add_option("--seed", at.seed, "attack seed");
  s_attack->add_option("--surrogate", at.surrogate_path, "surrogate key file");
  s_attack->add_option("--epsilon255", at.epsilon255, "noising L-inf budget in 8-bit steps");
  s_attack->add_option("--steps", at.steps, "optimization steps");
  s_attack->add_option("--lr", at.lr, "optimization learning rate");
  s_attack->add_option("--alpha", at.alpha, "compression message-destruction weight");
  s_attack->add_option("--pretrain-steps", at.pretrain_steps, "compressor pretraining steps");
  s_attack->add_option("--batch", at.batch, "training batch");
  s_attack->add_option("--repetitions", at.repetitions, "compressor passes");
  s_attack->add_flag("--untrained", at.untrained, "skip the message-destruction fine-tune");

  BenchmarkArgs bm;
  CLI::App* s_bench = app.add_subcommand("benchmark", "run an experiment grid from a JSON config");
  s_bench->add_option("--config", bm.config_path, "experiment config (JSON)")->required();
  s_bench->add_option("--out", bm.out_dir, "override the output directory");
  s_bench->add_option("--threads", bm.threads, "override the worker count");
  s_bench->add_flag("--emit-timings", bm.emit_timings, "fill the seconds column (breaks rerun identity)");
  s_bench->add_flag("--quiet", bm.quiet, "suppress progress lines");

  ParetoArgs pa;
  CLI::App* s_pareto = app.add_subcommand("pareto", "recompute attack trade-off fronts from results");
  s_pareto->add_option("--results", pa.results_path, "results.csv from a benchmark run")->required();
  s_pareto->add_option("--out", pa.out_dir, "output directory");

  ReportArgs rp;
  CLI::App* s_report = app.add_subcommand("report", "print a text report from benchmark outputs");
  s_report->add_option("--results", rp.results_path, "results.csv")->required();
  s_report->add_option("--summary", rp.summary_path, "summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (s_keygen->parsed()) return run_keygen(kg);
    if (s_gkeygen->parsed()) return run_gkeygen(gk);
    if (s_embed->parsed()) return run_embed(em);
    if (s_verify->parsed()) return run_verify(vf);
    if (s_attack->parsed()) return run_attack(at);
    if (s_bench->parsed()) return run_bench(bm);
    if (s_pareto->parsed()) return run_pareto(pa);
    if (s_report->parsed()) return run_report(rp);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

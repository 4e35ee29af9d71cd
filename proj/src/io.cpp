#include "markbench/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; serialization assumes a little-endian host");

namespace markbench::io {

using nlohmann::json;

// ---- images ---------------------------------------------------------------------

void write_pgm(const std::string& path, const Tensor& image) {
  if (image.ndim() != 2) throw std::invalid_argument("write_pgm: need a 2-D image");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
  f << "P5\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(image.dim(1)));
  for (int r = 0; r < image.dim(0); ++r) {
    for (int c = 0; c < image.dim(1); ++c) {
      double v = image.at(r, c);
      v = std::min(1.0, std::max(0.0, v));
      row[static_cast<size_t>(c)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

namespace {
int pgm_next_int(std::istream& s) {
  // Skips whitespace and '#' comment lines, per the PGM grammar.
  for (;;) {
    int ch = s.peek();
    if (ch == '#') {
      std::string line;
      std::getline(s, line);
    } else if (std::isspace(ch)) {
      s.get();
    } else {
      break;
    }
  }
  int v;
  if (!(s >> v)) throw std::runtime_error("read_pgm: malformed header");
  return v;
}
}  // namespace

Tensor read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw std::runtime_error("read_pgm: not a binary PGM: " + path);
  const int w = pgm_next_int(f);
  const int h = pgm_next_int(f);
  const int maxval = pgm_next_int(f);
  if (maxval <= 0 || maxval > 255) throw std::runtime_error("read_pgm: unsupported maxval");
  f.get();  // single whitespace after maxval
  std::vector<unsigned char> data(static_cast<size_t>(w) * h);
  f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!f) throw std::runtime_error("read_pgm: truncated pixel data in " + path);
  Tensor img({h, w});
  for (size_t i = 0; i < data.size(); ++i)
    img[static_cast<int64_t>(i)] = static_cast<double>(data[i]) / maxval;
  return img;
}

// ---- tensors --------------------------------------------------------------------

namespace {
std::string strip_suffix(const std::string& s, const std::string& suf) {
  if (s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0)
    return s.substr(0, s.size() - suf.size());
  return s;
}
}  // namespace

void write_tensor(const std::string& base, const Tensor& t, uint64_t seed) {
  const std::string stem = strip_suffix(strip_suffix(base, ".bin"), ".json");
  {
    std::ofstream f(stem + ".bin", std::ios::binary);
    if (!f) throw std::runtime_error("write_tensor: cannot open " + stem + ".bin");
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * static_cast<int64_t>(sizeof(double))));
    if (!f) throw std::runtime_error("write_tensor: write failed for " + stem + ".bin");
  }
  json side;
  side["shape"] = t.shape();
  side["dtype"] = "float64";
  side["seed"] = seed;
  std::ofstream f(stem + ".json");
  if (!f) throw std::runtime_error("write_tensor: cannot open " + stem + ".json");
  f << side.dump(2) << "\n";
}

Tensor read_tensor(const std::string& base, uint64_t* seed) {
  const std::string stem = strip_suffix(strip_suffix(base, ".bin"), ".json");
  std::ifstream sf(stem + ".json");
  if (!sf) throw std::runtime_error("read_tensor: cannot open " + stem + ".json");
  json side = json::parse(sf);
  if (side.at("dtype").get<std::string>() != "float64")
    throw std::runtime_error("read_tensor: unsupported dtype");
  const std::vector<int> shape = side.at("shape").get<std::vector<int>>();
  if (seed) *seed = side.value("seed", 0ull);
  Tensor t(shape);
  std::ifstream f(stem + ".bin", std::ios::binary);
  if (!f) throw std::runtime_error("read_tensor: cannot open " + stem + ".bin");
  f.read(reinterpret_cast<char*>(t.data()),
         static_cast<std::streamsize>(t.size() * static_cast<int64_t>(sizeof(double))));
  if (!f || f.gcount() != t.size() * static_cast<int64_t>(sizeof(double)))
    throw std::runtime_error("read_tensor: size mismatch in " + stem + ".bin");
  return t;
}

// ---- payload serialization ---------------------------------------------------------

namespace {

json tensor_to_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape();
  std::vector<std::uint8_t> bytes(static_cast<size_t>(t.size()) * sizeof(double));
  std::memcpy(bytes.data(), t.data(), bytes.size());
  j["data"] = json::binary(std::move(bytes));
  return j;
}

Tensor tensor_from_json(const json& j) {
  const std::vector<int> shape = j.at("shape").get<std::vector<int>>();
  const auto& bytes = j.at("data").get_binary();
  if (shape.empty() && bytes.empty()) return Tensor();  // default-constructed placeholder
  Tensor t(shape);
  if (bytes.size() != static_cast<size_t>(t.size()) * sizeof(double))
    throw std::runtime_error("key payload: tensor byte-size mismatch");
  std::memcpy(t.data(), bytes.data(), bytes.size());
  return t;
}

json conv_to_json(const nn::Conv2d& c) {
  return {{"w", tensor_to_json(c.w)}, {"b", tensor_to_json(c.b)}, {"stride", c.stride}, {"pad", c.pad}};
}

nn::Conv2d conv_from_json(const json& j) {
  nn::Conv2d c;
  c.w = tensor_from_json(j.at("w"));
  c.b = tensor_from_json(j.at("b"));
  c.stride = j.at("stride").get<int>();
  c.pad = j.at("pad").get<int>();
  return c;
}

json linear_to_json(const nn::Linear& l) {
  return {{"w", tensor_to_json(l.w)}, {"b", tensor_to_json(l.b)}};
}

nn::Linear linear_from_json(const json& j) {
  nn::Linear l;
  l.w = tensor_from_json(j.at("w"));
  l.b = tensor_from_json(j.at("b"));
  return l;
}

json gen_to_json(const GeneratorConfig& g) {
  return {{"seed", g.seed},         {"gap", g.gap},
          {"size", g.size},         {"tone_slope", g.tone_slope},
          {"texture_amp", g.texture_amp}, {"mix_levels", g.mix_levels}};
}

GeneratorConfig gen_from_json(const json& j) {
  GeneratorConfig g;
  g.seed = j.at("seed").get<uint64_t>();
  g.gap = j.at("gap").get<double>();
  g.size = j.at("size").get<int>();
  g.tone_slope = j.at("tone_slope").get<double>();
  g.texture_amp = j.at("texture_amp").get<double>();
  g.mix_levels = j.at("mix_levels").get<int>();
  return g;
}

json stamp_nets_to_json(const wm::StampNets& n) {
  json j;
  j["n_bits"] = n.n_bits;
  j["amp"] = n.amp;
  j["e1"] = conv_to_json(n.e1);
  j["e1m"] = conv_to_json(n.e1m);
  j["e2"] = conv_to_json(n.e2);
  j["e3"] = conv_to_json(n.e3);
  j["cell_of_bit"] = n.cell_of_bit;
  j["bit_sign"] = n.bit_sign;
  j["d1"] = conv_to_json(n.d1);
  j["d2"] = conv_to_json(n.d2);
  j["d3"] = conv_to_json(n.d3);
  j["d4"] = conv_to_json(n.d4);
  return j;
}

wm::StampNets stamp_nets_from_json(const json& j) {
  wm::StampNets n;
  n.n_bits = j.at("n_bits").get<int>();
  n.amp = j.at("amp").get<double>();
  n.e1 = conv_from_json(j.at("e1"));
  n.e1m = conv_from_json(j.at("e1m"));
  n.e2 = conv_from_json(j.at("e2"));
  n.e3 = conv_from_json(j.at("e3"));
  n.cell_of_bit = j.at("cell_of_bit").get<std::vector<int>>();
  n.bit_sign = j.at("bit_sign").get<std::vector<double>>();
  n.d1 = conv_from_json(j.at("d1"));
  n.d2 = conv_from_json(j.at("d2"));
  n.d3 = conv_from_json(j.at("d3"));
  n.d4 = conv_from_json(j.at("d4"));
  return n;
}

json key_payload_to_json(const wm::WatermarkKey& key) {
  json j;
  j["gen"] = gen_to_json(key.gen);
  switch (key.kind) {
    case wm::SchemeKind::RingLatent: {
      const auto& k = std::get<wm::RingKey>(key.payload);
      j["ring"] = {{"radii", k.radii}, {"ring_width", k.ring_width}, {"value_scale", k.value_scale}};
      break;
    }
    case wm::SchemeKind::DwtSs: {
      const auto& k = std::get<wm::DwtSsKey>(key.payload);
      j["ss"] = {{"n_bits", k.n_bits},       {"slots_per_bit", k.slots_per_bit},
                 {"alpha", k.alpha},         {"quant_unit", k.quant_unit},
                 {"slot_perm", k.slot_perm}, {"carriers", k.carriers}};
      break;
    }
    case wm::SchemeKind::DwtSvd: {
      const auto& k = std::get<wm::DwtSvdKey>(key.payload);
      j["svd"] = {{"n_bits", k.n_bits}, {"delta", k.delta}, {"schedule", k.schedule}, {"dither", k.dither}};
      break;
    }
    case wm::SchemeKind::LearnedStamp: {
      const auto& k = std::get<wm::StampKey>(key.payload);
      j["stamp"] = {{"train_ber", k.train_ber}, {"nets", stamp_nets_to_json(k.nets)}};
      break;
    }
  }
  return j;
}

void key_payload_from_json(const json& j, wm::WatermarkKey& key) {
  key.gen = gen_from_json(j.at("gen"));
  switch (key.kind) {
    case wm::SchemeKind::RingLatent: {
      wm::RingKey k;
      const json& r = j.at("ring");
      k.radii = r.at("radii").get<std::vector<int>>();
      k.ring_width = r.at("ring_width").get<double>();
      k.value_scale = r.at("value_scale").get<double>();
      key.payload = std::move(k);
      break;
    }
    case wm::SchemeKind::DwtSs: {
      wm::DwtSsKey k;
      const json& r = j.at("ss");
      k.n_bits = r.at("n_bits").get<int>();
      k.slots_per_bit = r.at("slots_per_bit").get<int>();
      k.alpha = r.at("alpha").get<double>();
      k.quant_unit = r.at("quant_unit").get<double>();
      k.slot_perm = r.at("slot_perm").get<std::vector<int>>();
      k.carriers = r.at("carriers").get<std::vector<double>>();
      key.payload = std::move(k);
      break;
    }
    case wm::SchemeKind::DwtSvd: {
      wm::DwtSvdKey k;
      const json& r = j.at("svd");
      k.n_bits = r.at("n_bits").get<int>();
      k.delta = r.at("delta").get<double>();
      k.schedule = r.at("schedule").get<std::vector<int>>();
      k.dither = r.at("dither").get<std::vector<double>>();
      key.payload = std::move(k);
      break;
    }
    case wm::SchemeKind::LearnedStamp: {
      wm::StampKey k;
      const json& r = j.at("stamp");
      k.train_ber = r.at("train_ber").get<double>();
      k.nets = stamp_nets_from_json(r.at("nets"));
      key.payload = std::move(k);
      break;
    }
  }
}

void write_key_file(const std::string& path, const std::string& kind, const std::string& scheme,
                    uint64_t seed, const json& payload) {
  json env;
  env["format"] = "markbench-key";
  env["version"] = 1;
  env["kind"] = kind;
  env["scheme"] = scheme;
  env["seed"] = seed;
  const std::vector<std::uint8_t> blob = json::to_cbor(payload);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write key: cannot open " + path);
  f << env.dump() << "\n";
  f.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!f) throw std::runtime_error("write key: write failed for " + path);
}

json read_key_file(const std::string& path, KeyEnvelope* env_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read key: cannot open " + path);
  std::string line;
  std::getline(f, line);
  json env = json::parse(line);
  if (env.value("format", "") != "markbench-key")
    throw std::runtime_error("read key: not a key file: " + path);
  if (env_out) {
    env_out->format = env.at("format").get<std::string>();
    env_out->version = env.at("version").get<int>();
    env_out->kind = env.at("kind").get<std::string>();
    env_out->scheme = env.at("scheme").get<std::string>();
    env_out->seed = env.at("seed").get<uint64_t>();
  }
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return json::from_cbor(blob);
}

}  // namespace

KeyEnvelope read_envelope(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read key: cannot open " + path);
  std::string line;
  std::getline(f, line);
  json env = json::parse(line);
  if (env.value("format", "") != "markbench-key")
    throw std::runtime_error("read key: not a key file: " + path);
  KeyEnvelope out;
  out.format = env.at("format").get<std::string>();
  out.version = env.at("version").get<int>();
  out.kind = env.at("kind").get<std::string>();
  out.scheme = env.at("scheme").get<std::string>();
  out.seed = env.at("seed").get<uint64_t>();
  return out;
}

void write_key(const std::string& path, const wm::WatermarkKey& key) {
  write_key_file(path, "scheme", wm::scheme_name(key.kind), key.seed, key_payload_to_json(key));
}

wm::WatermarkKey read_key(const std::string& path) {
  KeyEnvelope env;
  const json payload = read_key_file(path, &env);
  if (env.kind != "scheme") throw std::runtime_error("read_key: " + path + " is not a scheme key");
  wm::WatermarkKey key;
  const auto kind = wm::scheme_from_name(env.scheme);
  if (!kind) throw std::runtime_error("read_key: unknown scheme " + env.scheme);
  key.kind = *kind;
  key.seed = env.seed;
  key_payload_from_json(payload, key);
  return key;
}

void write_surrogate_key(const std::string& path, const surrogate::SurrogateKey& sk) {
  json j;
  j["gen"] = gen_to_json(sk.gen);
  j["tau"] = key_payload_to_json(sk.tau);
  j["lin_rows"] = tensor_to_json(sk.lin_rows);
  j["lin_bias"] = tensor_to_json(sk.lin_bias);
  j["trained_ok"] = sk.trained_ok;
  j["heldout_acc"] = sk.heldout_acc;
  j["train_ber"] = sk.train_ber;
  j["messages_sampled"] = sk.messages_sampled;
  if (sk.kind == wm::SchemeKind::DwtSs || sk.kind == wm::SchemeKind::DwtSvd) {
    j["dec"] = {{"n_bits", sk.dec.n_bits},     {"c1", conv_to_json(sk.dec.c1)},
                {"c2", conv_to_json(sk.dec.c2)}, {"c3", conv_to_json(sk.dec.c3)},
                {"c4", conv_to_json(sk.dec.c4)}, {"head", linear_to_json(sk.dec.head)},
                {"route", tensor_to_json(sk.dec.route)},
                {"link_phase", tensor_to_json(sk.dec.link_phase)},
                {"link_freq", sk.dec.link_freq},
                {"link_gain", sk.dec.link_gain}};
  }
  if (!sk.log.empty()) {
    json rows = json::array();
    for (const auto& r : sk.log) rows.push_back({r.step, r.loss, r.bit_error});
    j["train_log"] = std::move(rows);
  }
  write_key_file(path, "surrogate", wm::scheme_name(sk.kind), sk.seed, j);
}

surrogate::SurrogateKey read_surrogate_key(const std::string& path) {
  KeyEnvelope env;
  const json j = read_key_file(path, &env);
  if (env.kind != "surrogate")
    throw std::runtime_error("read_surrogate_key: " + path + " is not a surrogate key");
  surrogate::SurrogateKey sk;
  const auto kind = wm::scheme_from_name(env.scheme);
  if (!kind) throw std::runtime_error("read_surrogate_key: unknown scheme " + env.scheme);
  sk.kind = *kind;
  sk.seed = env.seed;
  sk.gen = gen_from_json(j.at("gen"));
  sk.tau.kind = sk.kind;
  sk.tau.seed = env.seed;
  key_payload_from_json(j.at("tau"), sk.tau);
  sk.lin_rows = tensor_from_json(j.at("lin_rows"));
  sk.lin_bias = tensor_from_json(j.at("lin_bias"));
  sk.trained_ok = j.at("trained_ok").get<bool>();
  sk.heldout_acc = j.at("heldout_acc").get<double>();
  sk.train_ber = j.at("train_ber").get<double>();
  sk.messages_sampled = j.value("messages_sampled", int64_t{0});
  if (j.contains("dec")) {
    const json& d = j.at("dec");
    sk.dec.n_bits = d.at("n_bits").get<int>();
    sk.dec.c1 = conv_from_json(d.at("c1"));
    sk.dec.c2 = conv_from_json(d.at("c2"));
    sk.dec.c3 = conv_from_json(d.at("c3"));
    sk.dec.c4 = conv_from_json(d.at("c4"));
    sk.dec.head = linear_from_json(d.at("head"));
    sk.dec.route = tensor_from_json(d.at("route"));
    sk.dec.link_phase = tensor_from_json(d.at("link_phase"));
    sk.dec.link_freq = d.at("link_freq").get<double>();
    sk.dec.link_gain = d.at("link_gain").get<double>();
  }
  if (j.contains("train_log"))
    for (const auto& r : j.at("train_log"))
      sk.log.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>()});
  return sk;
}

// ---- messages -------------------------------------------------------------------

void write_message(const std::string& path, const wm::Message& msg) {
  json j;
  if (std::holds_alternative<wm::BitMessage>(msg)) {
    j["type"] = "bits";
    j["bits"] = std::get<wm::BitMessage>(msg).bits;
  } else {
    const auto& r = std::get<wm::RingMessage>(msg);
    j["type"] = "ring";
    j["re"] = r.re;
    j["im"] = r.im;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_message: cannot open " + path);
  f << j.dump(2) << "\n";
}

wm::Message read_message(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_message: cannot open " + path);
  json j = json::parse(f);
  const std::string type = j.at("type").get<std::string>();
  if (type == "bits") {
    wm::BitMessage m;
    m.bits = j.at("bits").get<std::vector<uint8_t>>();
    return m;
  }
  if (type == "ring") {
    wm::RingMessage m;
    m.re = j.at("re").get<std::vector<double>>();
    m.im = j.at("im").get<std::vector<double>>();
    return m;
  }
  throw std::runtime_error("read_message: unknown message type " + type);
}

// ---- tables and plots --------------------------------------------------------------

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
  f << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
    f << "\n";
  }
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               std::vector<std::string>* header) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_csv: cannot open " + path);
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  std::string line;
  if (!std::getline(f, line)) return {};
  if (header) *header = split(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(f, line))
    if (!line.empty()) rows.push_back(split(line));
  return rows;
}

namespace {
std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}
}  // namespace

void write_svg_scatter(const std::string& path, const std::string& title,
                       const std::string& x_label, const std::string& y_label,
                       const std::vector<std::string>& series_names,
                       const std::vector<ScatterPoint>& points) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  constexpr int kColors = 8;
  const int W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points[0].x;
    ymin = ymax = points[0].y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto sy = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_svg_scatter: cannot open " + path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  f << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  f << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" << title
    << "</text>\n";
  // axes
  f << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
    << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
    << "\" stroke=\"black\"/>\n";
  f << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << x_label << "</text>\n";
  f << "<text x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (mt + H - mb) / 2 << ")\">" << y_label << "</text>\n";
  // min/max tick labels
  f << "<text x=\"" << ml << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\">" << fmt_num(xmin)
    << "</text>\n";
  f << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"end\">" << fmt_num(xmax)
    << "</text>\n";
  f << "<text x=\"" << ml - 6 << "\" y=\"" << H - mb << "\" text-anchor=\"end\">" << fmt_num(ymin)
    << "</text>\n";
  f << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4 << "\" text-anchor=\"end\">" << fmt_num(ymax)
    << "</text>\n";
  // legend
  for (size_t s = 0; s < series_names.size(); ++s) {
    const int lx = W - mr - 150, ly = mt + 10 + 16 * static_cast<int>(s);
    f << "<circle cx=\"" << lx << "\" cy=\"" << ly << "\" r=\"4\" fill=\""
      << kPalette[s % kColors] << "\"/>\n";
    f << "<text x=\"" << lx + 8 << "\" y=\"" << ly + 4 << "\">" << series_names[s] << "</text>\n";
  }
  // points
  for (const auto& p : points) {
    f << "<circle cx=\"" << fmt_num(sx(p.x)) << "\" cy=\"" << fmt_num(sy(p.y))
      << "\" r=\"4\" fill=\"" << kPalette[p.series % kColors] << "\" fill-opacity=\"0.8\">";
    if (!p.label.empty()) f << "<title>" << p.label << "</title>";
    f << "</circle>\n";
  }
  f << "</svg>\n";
}

}  // namespace markbench::io

#include "hbdr/config.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hbdr {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void line_fail(std::size_t line, const std::string& msg) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + msg);
}

std::uint64_t parse_u64(const std::string& v, std::size_t line) {
  std::size_t pos = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    line_fail(line, "expected unsigned integer, got '" + v + "'");
  }
  if (pos != v.size() || v[0] == '-')
    line_fail(line, "expected unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v, std::size_t line) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    line_fail(line, "expected number, got '" + v + "'");
  }
  if (pos != v.size()) line_fail(line, "expected number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, std::size_t line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  line_fail(line, "expected true/false, got '" + v + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& v, std::size_t line,
                          Parse parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) line_fail(line, "empty list element in '" + v + "'");
    out.push_back(parse(item, line));
  }
  if (out.empty()) line_fail(line, "empty list");
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string format_list(const std::vector<T>& v,
                        const std::function<std::string(T)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v[i]);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&, std::size_t)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_KEY(key, field)                                             \
  Key {                                                                  \
    key,                                                                 \
        [](RunConfig& c, const std::string& v, std::size_t l) {          \
          c.field = static_cast<std::size_t>(parse_u64(v, l));           \
        },                                                               \
        [](const RunConfig& c) { return std::to_string(c.field); }       \
  }
#define DOUBLE_KEY(key, field)                                           \
  Key {                                                                  \
    key,                                                                 \
        [](RunConfig& c, const std::string& v, std::size_t l) {          \
          c.field = parse_double(v, l);                                  \
        },                                                               \
        [](const RunConfig& c) { return format_double(c.field); }        \
  }
#define BOOL_KEY(key, field)                                             \
  Key {                                                                  \
    key,                                                                 \
        [](RunConfig& c, const std::string& v, std::size_t l) {          \
          c.field = parse_bool(v, l);                                    \
        },                                                               \
        [](const RunConfig& c) { return c.field ? "true" : "false"; }    \
  }
#define STRING_KEY(key, field)                                           \
  Key {                                                                  \
    key,                                                                 \
        [](RunConfig& c, const std::string& v, std::size_t) {            \
          c.field = v;                                                   \
        },                                                               \
        [](const RunConfig& c) { return c.field; }                       \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      STRING_KEY("variant", variant),
      SIZE_KEY("epochs", epochs),
      SIZE_KEY("batch_size", batch_size),
      DOUBLE_KEY("lr", lr),
      Key{"seed",
          [](RunConfig& c, const std::string& v, std::size_t l) {
            c.seed = parse_u64(v, l);
          },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
      SIZE_KEY("threads", threads),
      SIZE_KEY("train_per_class", train_per_class),
      SIZE_KEY("test_per_class", test_per_class),
      DOUBLE_KEY("keep_prob", keep_prob),
      BOOL_KEY("freeze_c1", freeze_c1),
      DOUBLE_KEY("binarize", binarize),
      STRING_KEY("loss", loss),
      STRING_KEY("data", data),
      STRING_KEY("out", out),
      BOOL_KEY("save_best", save_best),
      SIZE_KEY("input_size", input_size),
      SIZE_KEY("c1_maps", c1_maps),
      SIZE_KEY("c1_kernel", c1_kernel),
      SIZE_KEY("s1_window", s1_window),
      SIZE_KEY("c2_maps", c2_maps),
      SIZE_KEY("c2_kernel", c2_kernel),
      SIZE_KEY("s2_window", s2_window),
      SIZE_KEY("f1_units", f1_units),
      SIZE_KEY("n_classes", n_classes),
      DOUBLE_KEY("gaussian_std", gaussian_std),
      SIZE_KEY("gabor_orientations", gabor_orientations),
      Key{"gabor_wavelengths",
          [](RunConfig& c, const std::string& v, std::size_t l) {
            c.gabor_wavelengths = parse_list<double>(v, l, parse_double);
          },
          [](const RunConfig& c) {
            return format_list<double>(c.gabor_wavelengths, format_double);
          }},
      DOUBLE_KEY("gabor_phase", gabor_phase),
      DOUBLE_KEY("gabor_aspect", gabor_aspect),
      Key{"dbn_layers",
          [](RunConfig& c, const std::string& v, std::size_t l) {
            c.dbn_layers = parse_list<std::size_t>(
                v, l, [](const std::string& s, std::size_t ln) {
                  return static_cast<std::size_t>(parse_u64(s, ln));
                });
          },
          [](const RunConfig& c) {
            return format_list<std::size_t>(c.dbn_layers, [](std::size_t s) {
              return std::to_string(s);
            });
          }},
      SIZE_KEY("pretrain_epochs", pretrain_epochs),
      SIZE_KEY("rbm_k", rbm_k),
      DOUBLE_KEY("rbm_lr", rbm_lr),
      DOUBLE_KEY("rbm_momentum", rbm_momentum),
      DOUBLE_KEY("rbm_penalty", rbm_penalty),
      SIZE_KEY("rbm_batch_size", rbm_batch_size),
  };
  return k;
}

#undef SIZE_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY
#undef STRING_KEY

}  // namespace

NetworkConfig RunConfig::network() const {
  NetworkConfig n;
  n.variant = parse_variant(variant);
  n.arch.input_size = input_size;
  n.arch.c1_maps = c1_maps;
  n.arch.c1_kernel = c1_kernel;
  n.arch.s1_window = s1_window;
  n.arch.c2_maps = c2_maps;
  n.arch.c2_kernel = c2_kernel;
  n.arch.s2_window = s2_window;
  n.arch.f1_units = f1_units;
  n.arch.n_classes = n_classes;
  n.loss = parse_loss(loss);
  n.keep_prob = keep_prob;
  n.freeze_c1 = freeze_c1;
  n.gaussian_std = gaussian_std;
  n.gabor.size = c1_kernel;
  n.gabor.orientations = gabor_orientations;
  n.gabor.wavelengths = gabor_wavelengths;
  n.gabor.phase = gabor_phase;
  n.gabor.aspect = gabor_aspect;
  n.dbn_layers = dbn_layers;
  return n;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.lr = lr;
  t.threads = threads;
  t.seed = seed;
  return t;
}

DbnConfig RunConfig::dbn() const {
  DbnConfig d;
  d.layer_sizes = dbn_layers;
  d.pretrain.k = rbm_k;
  d.pretrain.learning_rate = rbm_lr;
  d.pretrain.momentum = rbm_momentum;
  d.pretrain.weight_penalty = rbm_penalty;
  d.pretrain.batch_size = rbm_batch_size;
  d.pretrain_epochs = pretrain_epochs;
  d.finetune = train();
  d.n_classes = n_classes;
  d.loss = parse_loss(loss);
  return d;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::stringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      line_fail(line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) line_fail(line_no, "missing key before '='");
    bool found = false;
    for (const Key& k : keys()) {
      if (key == k.name) {
        k.set(base, value, line_no);
        found = true;
        break;
      }
    }
    if (!found) line_fail(line_no, "unknown key '" + key + "'");
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const Key& k : keys()) {
    out += k.name;
    out += " = ";
    out += k.get(cfg);
    out += "\n";
  }
  return out;
}

}  // namespace hbdr

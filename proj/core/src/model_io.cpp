#include "hbdr/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hbdr {
namespace {

static_assert(sizeof(float) == 4, "f32 storage assumed");

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::runtime_error(path + ": " + msg);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  std::ifstream in;
  std::string path;

  void bytes(void* dst, std::size_t n, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      fail(path, std::string("truncated ") + what);
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t b;
    bytes(&b, 1, what);
    return b;
  }
  std::uint16_t u16(const char* what) {
    std::uint8_t b[2];
    bytes(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    std::uint8_t b[4];
    bytes(b, 4, what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  }
};

void append_f32_le(std::string& out, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(data), n * 4);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, &data[i], 4);
      put_u32(out, bits);
    }
  }
}

void read_f32_le(Reader& r, float* data, std::size_t n) {
  r.bytes(data, n * 4, "tensor payload");
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, &data[i], 4);
      bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) |
             ((bits >> 8) & 0xff00u) | (bits >> 24);
      std::memcpy(&data[i], &bits, 4);
    }
  }
}

}  // namespace

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::cnn: return "cnn";
    case ModelKind::dbn: return "dbn";
    case ModelKind::rbm_stack: return "rbm-stack";
  }
  return "?";
}

const Tensor<float>& ModelFile::tensor(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return t.value;
  throw std::runtime_error("model file: missing tensor '" + name + "'");
}

void save_model(const ModelFile& m, const std::string& path) {
  std::string out;
  out += "HBDR";
  put_u32(out, kModelVersion);
  out.push_back(static_cast<char>(m.kind));
  if (m.config_text.size() > (1u << 20))
    fail(path, "config echo too large");
  put_u32(out, static_cast<std::uint32_t>(m.config_text.size()));
  out += m.config_text;
  for (const NamedTensor& t : m.tensors) {
    if (t.name.empty() || t.name.size() > 255)
      fail(path, "tensor name length must be 1..255");
    put_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    out.push_back(static_cast<char>(t.value.rank()));
    for (std::size_t d = 0; d < t.value.rank(); ++d)
      put_u32(out, static_cast<std::uint32_t>(t.value.dim(d)));
    append_f32_le(out, t.value.data(), t.value.size());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(path, "write failed");
}

ModelFile load_model(const std::string& path) {
  Reader r{std::ifstream(path, std::ios::binary), path};
  if (!r.in) fail(path, "cannot open");
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, "HBDR", 4) != 0) fail(path, "bad magic");
  const std::uint32_t version = r.u32("version");
  if (version != kModelVersion)
    fail(path, "unsupported format version " + std::to_string(version));
  const std::uint8_t kind = r.u8("kind");
  if (kind < 1 || kind > 3)
    fail(path, "unknown model kind " + std::to_string(kind));
  ModelFile m;
  m.kind = static_cast<ModelKind>(kind);
  const std::uint32_t cfg_len = r.u32("config length");
  if (cfg_len > (1u << 20)) fail(path, "config echo too large");
  m.config_text.resize(cfg_len);
  if (cfg_len) r.bytes(m.config_text.data(), cfg_len, "config echo");

  while (true) {
    int peek = r.in.peek();
    if (peek == EOF) break;
    NamedTensor t;
    const std::uint16_t name_len = r.u16("tensor name length");
    if (name_len == 0 || name_len > 255)
      fail(path, "tensor name length must be 1..255");
    t.name.resize(name_len);
    r.bytes(t.name.data(), name_len, "tensor name");
    const std::uint8_t rank = r.u8("tensor rank");
    if (rank < 1 || rank > 4)
      fail(path, "tensor '" + t.name + "' has unsupported rank " +
                     std::to_string(rank));
    std::vector<std::size_t> dims(rank);
    std::size_t total = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint32_t v = r.u32("tensor dim");
      if (v == 0) fail(path, "tensor '" + t.name + "' has zero dim");
      dims[d] = v;
      if (total > (1u << 31) / v)
        fail(path, "tensor '" + t.name + "' too large");
      total *= v;
    }
    t.value = Tensor<float>(dims);
    read_f32_le(r, t.value.data(), total);
    m.tensors.push_back(std::move(t));
  }
  return m;
}

// ---- conversions ----

ModelFile to_model_file(const Cnn<float>& net,
                        const std::string& config_text) {
  ModelFile m;
  m.kind = ModelKind::cnn;
  m.config_text = config_text;
  for (const auto& [name, tensor] : param_views(net))
    m.tensors.push_back({name, *tensor});
  return m;
}

ModelFile to_model_file(const Mlp<float>& net,
                        const std::string& config_text) {
  ModelFile m;
  m.kind = ModelKind::dbn;
  m.config_text = config_text;
  for (const auto& [name, tensor] : param_views(net))
    m.tensors.push_back({name, *tensor});
  return m;
}

ModelFile to_model_file(const std::vector<RbmParams<float>>& stack,
                        const std::string& config_text) {
  ModelFile m;
  m.kind = ModelKind::rbm_stack;
  m.config_text = config_text;
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const std::string base = "rbm" + std::to_string(l);
    m.tensors.push_back({base + ".w", stack[l].w});
    m.tensors.push_back({base + ".a", stack[l].a});
    m.tensors.push_back({base + ".b", stack[l].b});
  }
  return m;
}

namespace {

void assign_checked(Tensor<float>& dst, const ModelFile& m,
                    const std::string& name) {
  const Tensor<float>& src = m.tensor(name);
  if (!src.same_shape(dst))
    throw std::runtime_error("model file: tensor '" + name +
                             "' has unexpected shape");
  dst = src;
}

}  // namespace

Cnn<float> cnn_from_model(const ModelFile& m) {
  if (m.kind != ModelKind::cnn)
    throw std::runtime_error("model file: expected a cnn model, found " +
                             std::string(model_kind_name(m.kind)));
  const RunConfig cfg = parse_config(m.config_text);
  const NetworkConfig net_cfg = cfg.network();
  Cnn<float> net(net_cfg.arch, net_cfg.loss);
  net.keep_prob =
      variant_has_dropout(net_cfg.variant) ? net_cfg.keep_prob : 1.0;
  net.freeze_c1 = net_cfg.freeze_c1;
  for (const ParamRef<float>& r : param_refs(net))
    assign_checked(*r.tensor, m, r.name);
  return net;
}

Mlp<float> mlp_from_model(const ModelFile& m) {
  if (m.kind != ModelKind::dbn)
    throw std::runtime_error("model file: expected a dbn model, found " +
                             std::string(model_kind_name(m.kind)));
  const RunConfig cfg = parse_config(m.config_text);
  Mlp<float> net;
  net.loss = parse_loss(cfg.loss);
  for (std::size_t l = 0;; ++l) {
    const std::string base = "h" + std::to_string(l);
    bool present = false;
    for (const NamedTensor& t : m.tensors)
      if (t.name == base + ".weights") present = true;
    if (!present) break;
    const Tensor<float>& w = m.tensor(base + ".weights");
    if (w.rank() != 2)
      throw std::runtime_error("model file: bad rank for " + base);
    FcLayer<float> fc(w.dim(0), w.dim(1), 1);
    fc.weights = w;
    assign_checked(fc.bias, m, base + ".bias");
    net.hidden.push_back(std::move(fc));
  }
  const Tensor<float>& hw = m.tensor("head.weights");
  if (hw.rank() != 2)
    throw std::runtime_error("model file: bad rank for head");
  net.head = FcLayer<float>(hw.dim(0), hw.dim(1), 1);
  net.head.weights = hw;
  assign_checked(net.head.bias, m, "head.bias");
  if (net.in_dim() == 0)
    throw std::runtime_error("model file: empty dbn model");
  return net;
}

std::vector<RbmParams<float>> stack_from_model(const ModelFile& m) {
  if (m.kind != ModelKind::rbm_stack)
    throw std::runtime_error("model file: expected an rbm-stack, found " +
                             std::string(model_kind_name(m.kind)));
  std::vector<RbmParams<float>> stack;
  for (std::size_t l = 0;; ++l) {
    const std::string base = "rbm" + std::to_string(l);
    bool present = false;
    for (const NamedTensor& t : m.tensors)
      if (t.name == base + ".w") present = true;
    if (!present) break;
    const Tensor<float>& w = m.tensor(base + ".w");
    if (w.rank() != 2)
      throw std::runtime_error("model file: bad rank for " + base);
    RbmParams<float> p(w.dim(0), w.dim(1));
    p.w = w;
    assign_checked(p.a, m, base + ".a");
    assign_checked(p.b, m, base + ".b");
    stack.push_back(std::move(p));
  }
  if (stack.empty()) throw std::runtime_error("model file: empty rbm stack");
  return stack;
}

}  // namespace hbdr

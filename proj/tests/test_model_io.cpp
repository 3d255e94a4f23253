#include <doctest.h>

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <hbdr/config.hpp>
#include <hbdr/model_io.hpp>
#include <hbdr/network.hpp>
#include <hbdr/rng.hpp>
#include <hbdr/tensor.hpp>
#include <hbdr/training.hpp>

using namespace hbdr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("hbdr_model_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& rel) const { return (path / rel).string(); }
};

// Matches the network the tiny RunConfig below describes, so the
// config echo really can rebuild the architecture.
RunConfig tiny_run_config() {
  RunConfig c;
  c.variant = "cnn-gaussian-dropout";
  c.keep_prob = 0.35;
  c.freeze_c1 = true;
  c.loss = "mse";
  c.input_size = 8;
  c.c1_maps = 2;
  c.c1_kernel = 3;
  c.s1_window = 2;
  c.c2_maps = 4;
  c.c2_kernel = 3;
  c.s2_window = 1;
  c.f1_units = 5;
  c.n_classes = 3;
  return c;
}

template <typename Model>
bool params_equal(Model& a, Model& b) {
  auto ra = param_refs(a);
  auto rb = param_refs(b);
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].name != rb[i].name) return false;
    const Tensor<float>& ta = *ra[i].tensor;
    const Tensor<float>& tb = *rb[i].tensor;
    if (ta.shape() != tb.shape()) return false;
    for (std::size_t k = 0; k < ta.size(); ++k)
      if (ta[k] != tb[k]) return false;
  }
  return true;
}

bool rbm_equal(const RbmParams<float>& a, const RbmParams<float>& b) {
  if (a.w.shape() != b.w.shape()) return false;
  for (std::size_t i = 0; i < a.w.size(); ++i)
    if (a.w[i] != b.w[i]) return false;
  for (std::size_t i = 0; i < a.a.size(); ++i)
    if (a.a[i] != b.a[i]) return false;
  for (std::size_t i = 0; i < a.b.size(); ++i)
    if (a.b[i] != b.b[i]) return false;
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// magic + version + kind + empty config echo.
std::string header_bytes(std::uint32_t version, std::uint8_t kind) {
  std::string h = "HBDR";
  put_u32(h, version);
  h.push_back(static_cast<char>(kind));
  put_u32(h, 0);
  return h;
}

}  // namespace

TEST_SUITE_BEGIN("model_io");

TEST_CASE("cnn model files round-trip bit-exactly") {
  TempDir tmp;
  const RunConfig rc = tiny_run_config();
  Cnn<float> net = build_cnn<float>(rc.network(), Rng(5));

  const std::string echo = render_config(rc);
  const std::string path = tmp.file("model.hbdr");
  save_model(to_model_file(net, echo), path);

  ModelFile m = load_model(path);
  CHECK(m.kind == ModelKind::cnn);
  CHECK(m.config_text == echo);
  REQUIRE(m.tensors.size() == 8);
  CHECK(m.tensors[0].name == "c1.kernels");
  CHECK(m.tensors[7].name == "f2.bias");

  Cnn<float> back = cnn_from_model(m);
  CHECK(params_equal(net, back));
  CHECK(back.keep_prob == 0.35);
  CHECK(back.freeze_c1);
  CHECK(back.loss == Loss::mean_squared_error);

  // Saving the rebuilt model reproduces the file byte for byte.
  const std::string path2 = tmp.file("model2.hbdr");
  save_model(to_model_file(back, m.config_text), path2);
  CHECK(slurp(path2) == slurp(path));
}

TEST_CASE("mlp model files round-trip bit-exactly") {
  TempDir tmp;
  RunConfig rc;
  rc.loss = "mse";
  NetworkConfig nc = rc.network();
  nc.dbn_layers = {16, 6, 5};
  Mlp<float> net = build_mlp<float>(nc, Rng(11), 4);

  const std::string path = tmp.file("dbn.hbdr");
  save_model(to_model_file(net, render_config(rc)), path);

  ModelFile m = load_model(path);
  CHECK(m.kind == ModelKind::dbn);
  Mlp<float> back = mlp_from_model(m);
  REQUIRE(back.hidden.size() == 2);
  CHECK(back.hidden[0].in_dim() == 16);
  CHECK(back.hidden[1].out_dim() == 5);
  CHECK(back.head.out_dim() == 4);
  CHECK(back.loss == Loss::mean_squared_error);
  CHECK(params_equal(net, back));
}

TEST_CASE("rbm stacks round-trip, config echo kept verbatim") {
  TempDir tmp;
  auto stack = build_rbm_stack<float>({12, 7, 3}, Rng(21));
  const std::string path = tmp.file("stack.hbdr");

  // The echo is stored, not interpreted, for stacks.
  const std::string echo = "free-form\nnotes";
  save_model(to_model_file(stack, echo), path);

  ModelFile m = load_model(path);
  CHECK(m.kind == ModelKind::rbm_stack);
  CHECK(m.config_text == echo);
  CHECK(std::string(model_kind_name(m.kind)) == "rbm-stack");

  auto back = stack_from_model(m);
  REQUIRE(back.size() == 2);
  CHECK(rbm_equal(back[0], stack[0]));
  CHECK(rbm_equal(back[1], stack[1]));
}

TEST_CASE("tensor accessor and kind guards") {
  auto stack = build_rbm_stack<float>({6, 4}, Rng(2));
  ModelFile m = to_model_file(stack, "");
  CHECK_THROWS_WITH_AS(m.tensor("nope"),
                       doctest::Contains("missing tensor 'nope'"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(cnn_from_model(m),
                       doctest::Contains("expected a cnn model"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(mlp_from_model(m),
                       doctest::Contains("expected a dbn model"),
                       std::runtime_error);

  const RunConfig rc = tiny_run_config();
  Cnn<float> net = build_cnn<float>(rc.network(), Rng(5));
  ModelFile cm = to_model_file(net, render_config(rc));
  CHECK_THROWS_WITH_AS(stack_from_model(cm),
                       doctest::Contains("expected an rbm-stack"),
                       std::runtime_error);
}

TEST_CASE("bad magic, version, and kind are rejected before payload") {
  TempDir tmp;
  const std::string path = tmp.file("junk.hbdr");

  spit(path, "XBDR" + header_bytes(1, 1).substr(4));
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("bad magic"),
                       std::runtime_error);

  spit(path, header_bytes(999, 1));
  CHECK_THROWS_WITH_AS(load_model(path),
                       doctest::Contains("unsupported format version 999"),
                       std::runtime_error);

  spit(path, header_bytes(1, 9));
  CHECK_THROWS_WITH_AS(load_model(path),
                       doctest::Contains("unknown model kind 9"),
                       std::runtime_error);

  CHECK_THROWS_WITH_AS(load_model(tmp.file("absent.hbdr")),
                       doctest::Contains("cannot open"), std::runtime_error);
}

TEST_CASE("truncated files fail loudly at any cut") {
  TempDir tmp;
  auto stack = build_rbm_stack<float>({5, 3}, Rng(7));
  const std::string good_path = tmp.file("good.hbdr");
  save_model(to_model_file(stack, "x = y"), good_path);
  const std::string bytes = slurp(good_path);

  // Cuts inside the magic, version, kind, config, and first tensor
  // record. Cutting at a record boundary would be a valid (shorter)
  // file, so stay strictly inside fields.
  const std::string cut_path = tmp.file("cut.hbdr");
  for (std::size_t len : {std::size_t(2), std::size_t(6), std::size_t(8),
                          std::size_t(10), std::size_t(15),
                          std::size_t(20), bytes.size() - 3}) {
    REQUIRE(len < bytes.size());
    spit(cut_path, bytes.substr(0, len));
    CHECK_THROWS_WITH_AS(load_model(cut_path), doctest::Contains("truncated"),
                         std::runtime_error);
  }
}

TEST_CASE("malformed tensor records are rejected") {
  TempDir tmp;
  const std::string path = tmp.file("bad.hbdr");

  {  // zero-length tensor name
    std::string b = header_bytes(1, 3);
    put_u16(b, 0);
    spit(path, b);
    CHECK_THROWS_WITH_AS(load_model(path),
                         doctest::Contains("tensor name length"),
                         std::runtime_error);
  }
  {  // unsupported rank
    std::string b = header_bytes(1, 3);
    put_u16(b, 1);
    b += "w";
    b.push_back(5);
    spit(path, b);
    CHECK_THROWS_WITH_AS(load_model(path),
                         doctest::Contains("unsupported rank 5"),
                         std::runtime_error);
  }
  {  // zero dimension
    std::string b = header_bytes(1, 3);
    put_u16(b, 1);
    b += "w";
    b.push_back(2);
    put_u32(b, 4);
    put_u32(b, 0);
    spit(path, b);
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("zero dim"),
                         std::runtime_error);
  }
}

TEST_CASE("model reconstruction checks shapes and completeness") {
  const RunConfig rc = tiny_run_config();
  Cnn<float> net = build_cnn<float>(rc.network(), Rng(5));
  ModelFile m = to_model_file(net, render_config(rc));

  ModelFile wrong_shape = m;
  wrong_shape.tensors[2].value = Tensor<float>({1, 1, 2, 2});
  CHECK_THROWS_WITH_AS(cnn_from_model(wrong_shape),
                       doctest::Contains("unexpected shape"),
                       std::runtime_error);

  ModelFile missing = m;
  missing.tensors.erase(missing.tensors.begin() + 5);
  CHECK_THROWS_WITH_AS(cnn_from_model(missing),
                       doctest::Contains("missing tensor"),
                       std::runtime_error);

  ModelFile empty_stack;
  empty_stack.kind = ModelKind::rbm_stack;
  CHECK_THROWS_WITH_AS(stack_from_model(empty_stack),
                       doctest::Contains("empty rbm stack"),
                       std::runtime_error);
}

TEST_SUITE_END();

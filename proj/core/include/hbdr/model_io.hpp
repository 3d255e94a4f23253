#ifndef HBDR_MODEL_IO_HPP
#define HBDR_MODEL_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hbdr/config.hpp"
#include "hbdr/network.hpp"
#include "hbdr/rbm.hpp"
#include "hbdr/tensor.hpp"

namespace hbdr {

// Binary model container: magic "HBDR", u32 LE format version, u8 kind
// tag, u32 LE config length + UTF-8 config echo, then named tensors
// (u16 LE name length, name, u8 rank, u32 LE dims, f32 LE payload)
// until EOF. Everything little-endian regardless of host.
inline constexpr std::uint32_t kModelVersion = 1;

enum class ModelKind : std::uint8_t { cnn = 1, dbn = 2, rbm_stack = 3 };

const char* model_kind_name(ModelKind k);

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

struct ModelFile {
  ModelKind kind = ModelKind::cnn;
  std::string config_text;
  std::vector<NamedTensor> tensors;

  const Tensor<float>& tensor(const std::string& name) const;
};

void save_model(const ModelFile& m, const std::string& path);

// Rejects bad magic or unsupported version before reading any payload.
ModelFile load_model(const std::string& path);

// ---- Model <-> container conversions ----

ModelFile to_model_file(const Cnn<float>& net, const std::string& config_text);
ModelFile to_model_file(const Mlp<float>& net, const std::string& config_text);
ModelFile to_model_file(const std::vector<RbmParams<float>>& stack,
                        const std::string& config_text);

// Rebuilds a CNN from its tensors; arch, loss, keep_prob, and
// freeze_c1 come from the config echo.
Cnn<float> cnn_from_model(const ModelFile& m);

// Layer sizes are inferred from the stored tensor shapes.
Mlp<float> mlp_from_model(const ModelFile& m);
std::vector<RbmParams<float>> stack_from_model(const ModelFile& m);

}  // namespace hbdr

#endif  // HBDR_MODEL_IO_HPP

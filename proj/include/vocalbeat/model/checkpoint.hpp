#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "vocalbeat/binary_io.hpp"
#include "vocalbeat/error.hpp"
#include "vocalbeat/model/params.hpp"

namespace vocalbeat {

namespace vbtm {

inline constexpr char kMagic[4] = {'V', 'B', 'T', 'M'};
inline constexpr std::uint32_t kVersion = 1;

}  // namespace vbtm

// VBTM layout (little-endian):
//   "VBTM", u32 version,
//   config: u32 input_dim, model_dim, heads, head_dim, ffn_dim, input_layers; u64 seed,
//   u32 tensor_count, then per tensor: u32 rows, u32 cols, f32[rows*cols] (row-major),
// in ModelParams declaration order.
inline void save_checkpoint(const std::string& path, const ModelParams<float>& p) {
  binary::Writer out(path);
  out.bytes(vbtm::kMagic, 4);
  out.put<std::uint32_t>(vbtm::kVersion);
  const auto& c = p.config;
  for (int v : {c.input_dim, c.model_dim, c.heads, c.head_dim, c.ffn_dim, c.input_layers})
    out.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  out.put<std::uint64_t>(c.seed);
  const auto tensors = p.tensors();
  out.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto* t : tensors) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(t->rows()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(t->cols()));
    out.put_array<float>(std::span<const float>(t->data(), static_cast<std::size_t>(t->size())));
  }
  out.close();
}

inline ModelParams<float> load_checkpoint(const std::string& path) {
  binary::Reader in(path);
  char magic[4];
  try {
    in.bytes(magic, 4);
  } catch (const TruncatedFile&) {
    throw TruncatedFile("checkpoint header truncated: " + path);
  }
  if (std::memcmp(magic, vbtm::kMagic, 4) != 0) throw BadMagic("not a VBTM checkpoint (bad magic): " + path);

  ModelConfig cfg;
  try {
    const auto version = in.get<std::uint32_t>();
    if (version != vbtm::kVersion)
      throw VersionMismatch("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    for (int* field : {&cfg.input_dim, &cfg.model_dim, &cfg.heads, &cfg.head_dim, &cfg.ffn_dim, &cfg.input_layers})
      *field = static_cast<int>(in.get<std::uint32_t>());
    cfg.seed = in.get<std::uint64_t>();
  } catch (const TruncatedFile&) {
    throw TruncatedFile("checkpoint header truncated: " + path);
  }
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint has an invalid model config: ") + e.what());
  }

  auto p = ModelParams<float>::zeros(cfg);
  auto tensors = p.tensors();
  try {
    const auto count = in.get<std::uint32_t>();
    if (count != tensors.size())
      throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                        std::to_string(tensors.size()) + ": " + path);
    for (auto* t : tensors) {
      const auto rows = in.get<std::uint32_t>();
      const auto cols = in.get<std::uint32_t>();
      if (rows != t->rows() || cols != t->cols()) throw FormatError("checkpoint tensor shape mismatch: " + path);
      in.get_array<float>(std::span<float>(t->data(), static_cast<std::size_t>(t->size())));
    }
  } catch (const TruncatedFile&) {
    throw TruncatedFile("checkpoint payload truncated: " + path);
  }
  if (!in.at_eof()) throw FormatError("checkpoint has trailing bytes: " + path);
  return p;
}

}  // namespace vocalbeat

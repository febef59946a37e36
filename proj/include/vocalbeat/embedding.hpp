#pragma once

#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vocalbeat/binary_io.hpp"
#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

// Stacked hidden states: layers[0] is the convolutional front output,
// layers[1..L] the encoder layers. Every layer is N x D.
struct EmbeddingTensor {
  std::vector<FeatureMatrix> layers;
  double fps = 0.0;

  std::size_t n_layers() const noexcept { return layers.size(); }
  Eigen::Index n_frames() const noexcept { return layers.empty() ? 0 : layers.front().rows(); }
  Eigen::Index dim() const noexcept { return layers.empty() ? 0 : layers.front().cols(); }

  void validate() const {
    if (layers.empty()) throw InvalidArgument("embedding tensor has no layers");
    if (!(fps > 0.0)) throw InvalidArgument("embedding fps must be positive");
    for (const auto& l : layers) {
      if (l.rows() != n_frames() || l.cols() != dim())
        throw InvalidArgument("embedding layers must share frame count and dimension");
      if (!l.allFinite()) throw DataError("embedding tensor contains non-finite values");
    }
  }

  static EmbeddingTensor from_features(const FeatureSequence& f) { return EmbeddingTensor{{f.frames}, f.fps}; }
};

// Unconstrained learnable per-layer weights (no softmax).
using LayerWeights = std::vector<double>;

namespace sslb {

inline constexpr char kMagic[4] = {'S', 'S', 'L', 'B'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

}  // namespace sslb

// SSLB layout (little-endian): "SSLB", u32 version, u32 n_layers,
// u32 n_frames, u32 dim, f32 fps, then f32 payload [layer][frame][dim].
inline void write_embeddings(const std::string& path, const EmbeddingTensor& e) {
  e.validate();
  binary::Writer out(path);
  out.bytes(sslb::kMagic, 4);
  out.put<std::uint32_t>(sslb::kVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(e.n_layers()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(e.n_frames()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(e.dim()));
  out.put<float>(static_cast<float>(e.fps));
  for (const auto& layer : e.layers)
    out.put_array<float>(std::span<const float>(layer.data(), static_cast<std::size_t>(layer.size())));
  out.close();
}

inline EmbeddingTensor read_embeddings(const std::string& path) {
  binary::Reader in(path);
  char magic[4];
  try {
    in.bytes(magic, 4);
  } catch (const TruncatedFile&) {
    throw TruncatedFile("SSLB header truncated: " + path);
  }
  if (std::memcmp(magic, sslb::kMagic, 4) != 0) throw BadMagic("not an SSLB file (bad magic): " + path);
  std::uint32_t version, n_layers, n_frames, dim;
  float fps;
  try {
    version = in.get<std::uint32_t>();
    if (version != sslb::kVersion)
      throw VersionMismatch("unsupported SSLB version " + std::to_string(version) + ": " + path);
    n_layers = in.get<std::uint32_t>();
    n_frames = in.get<std::uint32_t>();
    dim = in.get<std::uint32_t>();
    fps = in.get<float>();
  } catch (const TruncatedFile&) {
    throw TruncatedFile("SSLB header truncated: " + path);
  }
  if (n_layers == 0 || n_frames == 0 || dim == 0 || !(fps > 0.0f))
    throw FormatError("SSLB header has empty shape or invalid fps: " + path);

  EmbeddingTensor e;
  e.fps = fps;
  e.layers.reserve(n_layers);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    FeatureMatrix m(n_frames, dim);
    try {
      in.get_array<float>(std::span<float>(m.data(), static_cast<std::size_t>(m.size())));
    } catch (const TruncatedFile&) {
      throw TruncatedFile("SSLB payload truncated: " + path);
    }
    e.layers.push_back(std::move(m));
  }
  if (!in.at_eof()) throw FormatError("SSLB file has trailing bytes: " + path);
  return e;
}

// out[n, d] = sum_l w[l] * e[l, n, d]
inline FeatureSequence layer_combine(const EmbeddingTensor& e, const LayerWeights& w) {
  if (w.size() != e.n_layers())
    throw InvalidArgument("layer_combine: " + std::to_string(w.size()) + " weights for " +
                          std::to_string(e.n_layers()) + " layers");
  if (e.layers.empty()) throw InvalidArgument("layer_combine: empty tensor");
  FeatureSequence out;
  out.fps = e.fps;
  out.frames = FeatureMatrix::Zero(e.n_frames(), e.dim());
  for (std::size_t l = 0; l < w.size(); ++l) out.frames += static_cast<float>(w[l]) * e.layers[l];
  return out;
}

// (layer, weight) pairs in ascending layer order.
inline nlohmann::json layer_weight_report(const LayerWeights& w) {
  nlohmann::json layers = nlohmann::json::array();
  std::size_t argmax = 0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    layers.push_back({{"layer", l}, {"weight", w[l]}});
    if (w[l] > w[argmax]) argmax = l;
  }
  nlohmann::json report{{"layers", layers}};
  if (!w.empty()) report["max_layer"] = argmax;
  return report;
}

inline std::string layer_weight_text(const LayerWeights& w) {
  std::ostringstream os;
  os << "layer\tweight\n";
  os.precision(6);
  os << std::fixed;
  for (std::size_t l = 0; l < w.size(); ++l) os << l << '\t' << w[l] << '\n';
  return os.str();
}

}  // namespace vocalbeat

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

struct ModelConfig {
  int input_dim = 480;   // 480 for the spectral front end, 768 for SSL embeddings
  int model_dim = 768;
  int heads = 4;
  int head_dim = 192;
  int ffn_dim = 1024;
  int input_layers = 0;  // > 0: learnable weighted sum over this many stacked input layers
  std::uint64_t seed = 0;

  void validate() const {
    if (input_dim <= 0 || model_dim <= 0 || heads <= 0 || head_dim <= 0 || ffn_dim <= 0)
      throw InvalidArgument("model dimensions must be positive");
    if (heads * head_dim != model_dim)
      throw InvalidArgument("heads * head_dim (" + std::to_string(heads * head_dim) + ") must equal model_dim (" +
                            std::to_string(model_dim) + ")");
    if (input_layers < 0) throw InvalidArgument("input_layers must be non-negative");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Every trainable tensor of the beat-activation network. Vectors are kept
// as 1 x n row matrices so one visitor covers all tensors. Gradients and
// optimizer moments reuse this layout.
template <typename Scalar>
struct ModelParams {
  using Matrix = RowMatrix<Scalar>;

  ModelConfig config;
  Matrix layer_weights;  // 1 x input_layers, empty on the plain-feature path
  Matrix w_in, b_in;
  Matrix ln1_gain, ln1_bias;
  Matrix w_q, b_q, w_k, b_k, w_v, b_v;  // head h owns columns [h*head_dim, (h+1)*head_dim)
  Matrix w_o, b_o;
  Matrix ln2_gain, ln2_bias;
  Matrix w_ff1, b_ff1, w_ff2, b_ff2;
  Matrix ln_out_gain, ln_out_bias;
  Matrix w_out, b_out;

  // Visits (name, tensor) in declaration order; this order is also the
  // checkpoint order.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  static ModelParams zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const int d = cfg.model_dim, f = cfg.ffn_dim;
    p.layer_weights = Matrix::Zero(1, cfg.input_layers);
    p.w_in = Matrix::Zero(cfg.input_dim, d);
    p.b_in = Matrix::Zero(1, d);
    p.ln1_gain = Matrix::Zero(1, d);
    p.ln1_bias = Matrix::Zero(1, d);
    for (Matrix* m : {&p.w_q, &p.w_k, &p.w_v, &p.w_o}) *m = Matrix::Zero(d, d);
    for (Matrix* m : {&p.b_q, &p.b_k, &p.b_v, &p.b_o}) *m = Matrix::Zero(1, d);
    p.ln2_gain = Matrix::Zero(1, d);
    p.ln2_bias = Matrix::Zero(1, d);
    p.w_ff1 = Matrix::Zero(d, f);
    p.b_ff1 = Matrix::Zero(1, f);
    p.w_ff2 = Matrix::Zero(f, d);
    p.b_ff2 = Matrix::Zero(1, d);
    p.ln_out_gain = Matrix::Zero(1, d);
    p.ln_out_bias = Matrix::Zero(1, d);
    p.w_out = Matrix::Zero(d, 1);
    p.b_out = Matrix::Zero(1, 1);
    return p;
  }

  void set_zero() {
    for_each([](std::string_view, Matrix& m) { m.setZero(); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](std::string_view, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out = ModelParams<Other>::zeros(config);
    const auto src = std::as_const(*this).tensors();
    std::size_t i = 0;
    out.for_each([&](std::string_view, RowMatrix<Other>& m) { m = src[i++]->template cast<Other>(); });
    return out;
  }

  std::vector<const Matrix*> tensors() const {
    std::vector<const Matrix*> out;
    for_each([&](std::string_view, const Matrix& m) { out.push_back(&m); });
    return out;
  }

  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    for_each([&](std::string_view, Matrix& m) { out.push_back(&m); });
    return out;
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& s, F& f) {
    f("layer_weights", s.layer_weights);
    f("w_in", s.w_in);
    f("b_in", s.b_in);
    f("ln1_gain", s.ln1_gain);
    f("ln1_bias", s.ln1_bias);
    f("w_q", s.w_q);
    f("b_q", s.b_q);
    f("w_k", s.w_k);
    f("b_k", s.b_k);
    f("w_v", s.w_v);
    f("b_v", s.b_v);
    f("w_o", s.w_o);
    f("b_o", s.b_o);
    f("ln2_gain", s.ln2_gain);
    f("ln2_bias", s.ln2_bias);
    f("w_ff1", s.w_ff1);
    f("b_ff1", s.b_ff1);
    f("w_ff2", s.w_ff2);
    f("b_ff2", s.b_ff2);
    f("ln_out_gain", s.ln_out_gain);
    f("ln_out_bias", s.ln_out_bias);
    f("w_out", s.w_out);
    f("b_out", s.b_out);
  }
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases,
// unit layer-norm gains and layer weights of one. Deterministic in
// cfg.seed.
template <typename Scalar = float>
ModelParams<Scalar> init_model(const ModelConfig& cfg) {
  auto p = ModelParams<Scalar>::zeros(cfg);
  std::mt19937_64 rng(cfg.seed);
  auto glorot = [&](RowMatrix<Scalar>& m) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  };
  p.layer_weights.setOnes();
  glorot(p.w_in);
  p.ln1_gain.setOnes();
  glorot(p.w_q);
  glorot(p.w_k);
  glorot(p.w_v);
  glorot(p.w_o);
  p.ln2_gain.setOnes();
  glorot(p.w_ff1);
  glorot(p.w_ff2);
  p.ln_out_gain.setOnes();
  glorot(p.w_out);
  return p;
}

}  // namespace vocalbeat

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "vocalbeat/embedding.hpp"
#include "vocalbeat/error.hpp"
#include "vocalbeat/model/attention.hpp"
#include "vocalbeat/model/params.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kLayerNormEpsilon = 1e-5;

// pe[n, 2i] = sin(n / 10000^(2i/D)), pe[n, 2i+1] = cos(n / 10000^(2i/D))
template <typename Scalar>
void add_positional_encoding(RowMatrix<Scalar>& x) {
  const Eigen::Index dim = x.cols();
  std::vector<double> inv_freq(static_cast<std::size_t>((dim + 1) / 2));
  for (std::size_t i = 0; i < inv_freq.size(); ++i)
    inv_freq[i] = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      const double angle = static_cast<double>(n) * inv_freq[static_cast<std::size_t>(c / 2)];
      x(n, c) += static_cast<Scalar>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
}

template <typename Scalar>
struct LayerNormCache {
  RowMatrix<Scalar> normalized;  // (x - mean) / std
  ColVector<Scalar> inv_std;
};

template <typename Scalar>
RowMatrix<Scalar> layer_norm(const RowMatrix<Scalar>& x, const RowMatrix<Scalar>& gain, const RowMatrix<Scalar>& bias,
                             LayerNormCache<Scalar>* cache = nullptr) {
  const Scalar inv_dim = Scalar(1) / static_cast<Scalar>(x.cols());
  const ColVector<Scalar> mean = x.rowwise().sum() * inv_dim;
  RowMatrix<Scalar> y = x.colwise() - mean;
  const ColVector<Scalar> inv_std =
      ((y.rowwise().squaredNorm() * inv_dim).array() + static_cast<Scalar>(kLayerNormEpsilon)).rsqrt().matrix();
  y.array().colwise() *= inv_std.array();
  if (cache) {
    cache->normalized = y;
    cache->inv_std = inv_std;
  }
  y.array().rowwise() *= gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

// Returns dL/dx; accumulates gain/bias gradients.
template <typename Scalar>
RowMatrix<Scalar> layer_norm_backward(const LayerNormCache<Scalar>& cache, const RowMatrix<Scalar>& gain,
                                      const RowMatrix<Scalar>& dy, RowMatrix<Scalar>& dgain, RowMatrix<Scalar>& dbias) {
  dgain += dy.cwiseProduct(cache.normalized).colwise().sum();
  dbias += dy.colwise().sum();
  const Scalar inv_dim = Scalar(1) / static_cast<Scalar>(dy.cols());
  RowMatrix<Scalar> dxhat = dy;
  dxhat.array().rowwise() *= gain.row(0).array();
  const ColVector<Scalar> mean_dxhat = dxhat.rowwise().sum() * inv_dim;
  const ColVector<Scalar> mean_dxhat_xhat = dxhat.cwiseProduct(cache.normalized).rowwise().sum() * inv_dim;
  RowMatrix<Scalar> dx = dxhat;
  dx.colwise() -= mean_dxhat;
  dx -= cache.normalized.cwiseProduct(mean_dxhat_xhat.replicate(1, dy.cols()));
  dx.array().colwise() *= cache.inv_std.array();
  return dx;
}

// Intermediates recorded by a training forward pass.
template <typename Scalar>
struct ForwardTape {
  Eigen::Index valid = 0;
  RowMatrix<Scalar> input;  // combined network input, N x input_dim
  RowMatrix<Scalar> h1;     // LN1 output
  std::vector<RowMatrix<Scalar>> q, k, v;
  RowMatrix<Scalar> attn;  // concatenated head outputs
  RowMatrix<Scalar> h2;    // LN2 output
  RowMatrix<Scalar> ffn_pre, ffn_act;
  RowMatrix<Scalar> h_out;  // final LN output
  LayerNormCache<Scalar> ln1, ln2, ln_out;
};

namespace network_detail {

template <typename Scalar>
void check_input(const ModelParams<Scalar>& p, std::span<const FeatureMatrix> layers) {
  const auto& cfg = p.config;
  if (layers.empty()) throw InvalidArgument("forward: no input layers");
  const std::size_t expected = cfg.input_layers > 0 ? static_cast<std::size_t>(cfg.input_layers) : 1;
  if (layers.size() != expected)
    throw InvalidArgument("forward: model expects " + std::to_string(expected) + " input layer(s), got " +
                          std::to_string(layers.size()));
  for (const auto& l : layers) {
    if (l.cols() != cfg.input_dim)
      throw InvalidArgument("forward: input dimension " + std::to_string(l.cols()) + " != model input_dim " +
                            std::to_string(cfg.input_dim));
    if (l.rows() != layers.front().rows()) throw InvalidArgument("forward: input layers differ in length");
  }
  if (layers.front().rows() < 1) throw InvalidArgument("forward: empty sequence");
}

template <typename Scalar>
RowMatrix<Scalar> combine_input(const ModelParams<Scalar>& p, std::span<const FeatureMatrix> layers) {
  if (p.config.input_layers == 0) return layers.front().template cast<Scalar>();
  RowMatrix<Scalar> x = RowMatrix<Scalar>::Zero(layers.front().rows(), layers.front().cols());
  for (std::size_t l = 0; l < layers.size(); ++l)
    x += p.layer_weights(0, static_cast<Eigen::Index>(l)) * layers[l].template cast<Scalar>();
  return x;
}

}  // namespace network_detail

// Beat logits for every frame. Pipeline: [layer combination] -> input
// projection + sinusoidal positions -> pre-LN linear multi-head attention
// block -> pre-LN ReLU feed-forward block -> final LN -> linear.
// Frames at index >= valid are padding and never influence other frames.
// With a tape, intermediates needed by backward() are recorded.
template <typename Scalar>
ColVector<Scalar> forward_layers(const ModelParams<Scalar>& p, std::span<const FeatureMatrix> layers,
                                 Eigen::Index valid = -1, ForwardTape<Scalar>* tape = nullptr) {
  network_detail::check_input(p, layers);
  const auto& cfg = p.config;
  const Eigen::Index n = layers.front().rows();
  if (valid < 0) valid = n;
  if (valid > n) throw InvalidArgument("forward: valid exceeds sequence length");

  RowMatrix<Scalar> x;
  {
    RowMatrix<Scalar> input = network_detail::combine_input(p, layers);
    x.noalias() = input * p.w_in;
    if (tape) tape->input = std::move(input);
  }
  x.rowwise() += p.b_in.row(0);
  add_positional_encoding(x);

  {
    RowMatrix<Scalar> h1 = layer_norm(x, p.ln1_gain, p.ln1_bias, tape ? &tape->ln1 : nullptr);
    RowMatrix<Scalar> attn(n, cfg.model_dim);
    if (tape) {
      tape->q.assign(static_cast<std::size_t>(cfg.heads), {});
      tape->k.assign(static_cast<std::size_t>(cfg.heads), {});
      tape->v.assign(static_cast<std::size_t>(cfg.heads), {});
    }
    for (int h = 0; h < cfg.heads; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * cfg.head_dim;
      RowMatrix<Scalar> q, k, v;
      q.noalias() = h1 * p.w_q.middleCols(c0, cfg.head_dim);
      q.rowwise() += p.b_q.row(0).segment(c0, cfg.head_dim);
      k.noalias() = h1 * p.w_k.middleCols(c0, cfg.head_dim);
      k.rowwise() += p.b_k.row(0).segment(c0, cfg.head_dim);
      v.noalias() = h1 * p.w_v.middleCols(c0, cfg.head_dim);
      v.rowwise() += p.b_v.row(0).segment(c0, cfg.head_dim);
      attn.middleCols(c0, cfg.head_dim) = linear_attention(q, k, v, valid);
      if (tape) {
        tape->q[h] = std::move(q);
        tape->k[h] = std::move(k);
        tape->v[h] = std::move(v);
      }
    }
    if (tape) tape->h1 = std::move(h1);
    else h1.resize(0, 0);
    x.noalias() += attn * p.w_o;
    x.rowwise() += p.b_o.row(0);
    if (tape) tape->attn = std::move(attn);
  }

  {
    RowMatrix<Scalar> h2 = layer_norm(x, p.ln2_gain, p.ln2_bias, tape ? &tape->ln2 : nullptr);
    RowMatrix<Scalar> hidden;
    hidden.noalias() = h2 * p.w_ff1;
    hidden.rowwise() += p.b_ff1.row(0);
    if (tape) {
      tape->ffn_pre = hidden;
      tape->h2 = std::move(h2);
    } else {
      h2.resize(0, 0);
    }
    hidden = hidden.cwiseMax(Scalar(0));
    x.noalias() += hidden * p.w_ff2;
    x.rowwise() += p.b_ff2.row(0);
    if (tape) tape->ffn_act = std::move(hidden);
  }

  RowMatrix<Scalar> h_out = layer_norm(x, p.ln_out_gain, p.ln_out_bias, tape ? &tape->ln_out : nullptr);
  x.resize(0, 0);
  ColVector<Scalar> logits = h_out * p.w_out.col(0);
  logits.array() += p.b_out(0, 0);
  if (tape) {
    tape->h_out = std::move(h_out);
    tape->valid = valid;
  }
  return logits;
}

template <typename Scalar>
ColVector<Scalar> forward_logits(const ModelParams<Scalar>& p, const EmbeddingTensor& e, Eigen::Index valid = -1) {
  return forward_layers(p, std::span<const FeatureMatrix>(e.layers), valid);
}

template <typename Scalar>
ColVector<Scalar> forward_logits(const ModelParams<Scalar>& p, const FeatureSequence& f, Eigen::Index valid = -1) {
  return forward_layers(p, std::span<const FeatureMatrix>(&f.frames, 1), valid);
}

template <typename Scalar>
ColVector<Scalar> sigmoid(const ColVector<Scalar>& logits) {
  return logits.unaryExpr([](Scalar z) {
    return z >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-z)) : std::exp(z) / (Scalar(1) + std::exp(z));
  });
}

struct Activations {
  std::vector<double> logits;
  std::vector<double> salience;  // sigmoid(logits), the per-frame beat activation
};

// Inference entry point: logits and their sigmoid.
template <typename Scalar, typename Input>
Activations forward(const ModelParams<Scalar>& p, const Input& input) {
  const ColVector<Scalar> z = forward_logits(p, input);
  const ColVector<Scalar> s = sigmoid(z);
  Activations a;
  a.logits.assign(z.data(), z.data() + z.size());
  a.salience.assign(s.data(), s.data() + s.size());
  return a;
}

// Accumulates into `grads` the gradient of sum_i dlogits_i * logit_i with
// respect to every parameter, given the tape of the matching forward pass.
// `layers` must be the same input that was passed to forward.
template <typename Scalar>
void backward(const ModelParams<Scalar>& p, std::span<const FeatureMatrix> layers, const ForwardTape<Scalar>& tape,
              const ColVector<Scalar>& dlogits, ModelParams<Scalar>& grads) {
  const auto& cfg = p.config;
  const Eigen::Index valid = tape.valid;

  grads.b_out(0, 0) += dlogits.sum();
  grads.w_out.col(0).noalias() += tape.h_out.transpose() * dlogits;
  RowMatrix<Scalar> dh_out = dlogits * p.w_out.col(0).transpose();
  RowMatrix<Scalar> dx = layer_norm_backward(tape.ln_out, p.ln_out_gain, dh_out, grads.ln_out_gain, grads.ln_out_bias);
  dh_out.resize(0, 0);

  // feed-forward block
  {
    grads.w_ff2.noalias() += tape.ffn_act.transpose() * dx;
    grads.b_ff2 += dx.colwise().sum();
    RowMatrix<Scalar> dhidden;
    dhidden.noalias() = dx * p.w_ff2.transpose();
    dhidden.array() *= (tape.ffn_pre.array() > Scalar(0)).template cast<Scalar>();
    grads.w_ff1.noalias() += tape.h2.transpose() * dhidden;
    grads.b_ff1 += dhidden.colwise().sum();
    RowMatrix<Scalar> dh2;
    dh2.noalias() = dhidden * p.w_ff1.transpose();
    dx += layer_norm_backward(tape.ln2, p.ln2_gain, dh2, grads.ln2_gain, grads.ln2_bias);
  }

  // attention block
  {
    grads.w_o.noalias() += tape.attn.transpose() * dx;
    grads.b_o += dx.colwise().sum();
    RowMatrix<Scalar> dattn;
    dattn.noalias() = dx * p.w_o.transpose();
    RowMatrix<Scalar> dh1 = RowMatrix<Scalar>::Zero(dx.rows(), dx.cols());
    for (int h = 0; h < cfg.heads; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * cfg.head_dim;
      const RowMatrix<Scalar> dout = dattn.middleCols(c0, cfg.head_dim);
      const auto g = linear_attention_backward(tape.q[h], tape.k[h], tape.v[h], dout, valid);
      grads.w_q.middleCols(c0, cfg.head_dim).noalias() += tape.h1.transpose() * g.dq;
      grads.w_k.middleCols(c0, cfg.head_dim).noalias() += tape.h1.transpose() * g.dk;
      grads.w_v.middleCols(c0, cfg.head_dim).noalias() += tape.h1.transpose() * g.dv;
      grads.b_q.row(0).segment(c0, cfg.head_dim) += g.dq.colwise().sum();
      grads.b_k.row(0).segment(c0, cfg.head_dim) += g.dk.colwise().sum();
      grads.b_v.row(0).segment(c0, cfg.head_dim) += g.dv.colwise().sum();
      dh1.noalias() += g.dq * p.w_q.middleCols(c0, cfg.head_dim).transpose();
      dh1.noalias() += g.dk * p.w_k.middleCols(c0, cfg.head_dim).transpose();
      dh1.noalias() += g.dv * p.w_v.middleCols(c0, cfg.head_dim).transpose();
    }
    dx += layer_norm_backward(tape.ln1, p.ln1_gain, dh1, grads.ln1_gain, grads.ln1_bias);
  }

  // input projection (positional encoding has no parameters)
  grads.w_in.noalias() += tape.input.transpose() * dx;
  grads.b_in += dx.colwise().sum();
  if (cfg.input_layers > 0) {
    RowMatrix<Scalar> dinput;
    dinput.noalias() = dx * p.w_in.transpose();
    for (std::size_t l = 0; l < layers.size(); ++l)
      grads.layer_weights(0, static_cast<Eigen::Index>(l)) +=
          dinput.cwiseProduct(layers[l].template cast<Scalar>()).sum();
  }
}

}  // namespace vocalbeat

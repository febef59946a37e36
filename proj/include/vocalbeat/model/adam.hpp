#pragma once

#include <cmath>
#include <cstdint>

#include "vocalbeat/model/params.hpp"

namespace vocalbeat {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  ModelParams<Scalar> m, v;
  std::int64_t step = 0;

  static AdamState zeros(const ModelConfig& cfg) {
    return AdamState{ModelParams<Scalar>::zeros(cfg), ModelParams<Scalar>::zeros(cfg), 0};
  }
};

// One bias-corrected Adam update, applied elementwise in storage order.
template <typename Scalar>
void adam_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, AdamState<Scalar>& state,
               const AdamConfig& cfg = {}) {
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar one_minus_b1 = static_cast<Scalar>(1.0 - cfg.beta1);
  const Scalar one_minus_b2 = static_cast<Scalar>(1.0 - cfg.beta2);
  const Scalar correction1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const Scalar correction2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const Scalar lr = static_cast<Scalar>(cfg.lr);
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);

  const auto g_tensors = grads.tensors();
  const auto m_tensors = state.m.tensors();
  const auto v_tensors = state.v.tensors();
  const auto p_tensors = params.tensors();
  for (std::size_t t = 0; t < p_tensors.size(); ++t) {
    const Scalar* g = g_tensors[t]->data();
    Scalar* m = m_tensors[t]->data();
    Scalar* v = v_tensors[t]->data();
    Scalar* w = p_tensors[t]->data();
    for (Eigen::Index i = 0; i < p_tensors[t]->size(); ++i) {
      m[i] = b1 * m[i] + one_minus_b1 * g[i];
      v[i] = b2 * v[i] + one_minus_b2 * g[i] * g[i];
      const Scalar m_hat = m[i] / correction1;
      const Scalar v_hat = v[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace vocalbeat

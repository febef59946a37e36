#pragma once

#include <cmath>

#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

// phi(x) = elu(x) + 1, strictly positive.
template <typename Derived>
auto elu_feature_map(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return v > Scalar(0) ? v + Scalar(1) : std::exp(v); });
}

template <typename Derived>
auto elu_feature_map_derivative(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : std::exp(v); });
}

// Non-causal linear attention
//
//   out_i = phi(q_i)^T S / phi(q_i)^T z,  S = sum_j phi(k_j) v_j^T,  z = sum_j phi(k_j)
//
// evaluated right-to-left, so the cost is O(N d^2) and no N x N matrix
// exists. Only the first `valid` keys/values contribute (the rest are
// padding); every query row still gets an output.
template <typename Scalar>
RowMatrix<Scalar> linear_attention(const RowMatrix<Scalar>& q, const RowMatrix<Scalar>& k,
                                   const RowMatrix<Scalar>& v, Eigen::Index valid = -1) {
  if (q.cols() != k.cols() || k.rows() != v.rows() || q.rows() != k.rows())
    throw InvalidArgument("linear_attention: shape mismatch");
  if (valid < 0) valid = k.rows();
  if (valid > k.rows()) throw InvalidArgument("linear_attention: valid exceeds sequence length");

  RowMatrix<Scalar> out(q.rows(), v.cols());
  if (valid == 0) {
    out.setZero();
    return out;
  }
  RowMatrix<Scalar> kf = elu_feature_map(k.topRows(valid));
  RowMatrix<Scalar> kv;
  kv.noalias() = kf.transpose() * v.topRows(valid);
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> z = kf.colwise().sum();
  kf.resize(0, 0);

  RowMatrix<Scalar> qf = elu_feature_map(q);
  out.noalias() = qf * kv;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> den = qf * z.transpose();
  out.array().colwise() /= den.array();
  return out;
}

template <typename Scalar>
struct AttentionGrads {
  RowMatrix<Scalar> dq, dk, dv;
};

// Vector-Jacobian product of linear_attention for upstream gradient dout.
template <typename Scalar>
AttentionGrads<Scalar> linear_attention_backward(const RowMatrix<Scalar>& q, const RowMatrix<Scalar>& k,
                                                 const RowMatrix<Scalar>& v, const RowMatrix<Scalar>& dout,
                                                 Eigen::Index valid = -1) {
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using Col = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (valid < 0) valid = k.rows();
  AttentionGrads<Scalar> g;
  g.dq = RowMatrix<Scalar>::Zero(q.rows(), q.cols());
  g.dk = RowMatrix<Scalar>::Zero(k.rows(), k.cols());
  g.dv = RowMatrix<Scalar>::Zero(v.rows(), v.cols());
  if (valid == 0) return g;

  const RowMatrix<Scalar> kf = elu_feature_map(k.topRows(valid));
  const RowMatrix<Scalar> qf = elu_feature_map(q);
  RowMatrix<Scalar> kv;
  kv.noalias() = kf.transpose() * v.topRows(valid);
  const Row z = kf.colwise().sum();
  const Col den = qf * z.transpose();

  RowMatrix<Scalar> num;
  num.noalias() = qf * kv;
  // d(num_i / den_i): dnum_i = g_i / den_i, dden_i = -g_i . out_i / den_i
  RowMatrix<Scalar> dnum = dout;
  dnum.array().colwise() /= den.array();
  const Col dden = -(dnum.cwiseProduct(num).rowwise().sum().array() / den.array()).matrix();

  RowMatrix<Scalar> dqf;
  dqf.noalias() = dnum * kv.transpose();
  dqf.noalias() += dden * z;
  RowMatrix<Scalar> dkv;
  dkv.noalias() = qf.transpose() * dnum;
  const Row dz = dden.transpose() * qf;

  RowMatrix<Scalar> dkf;
  dkf.noalias() = v.topRows(valid) * dkv.transpose();
  dkf.rowwise() += dz;
  g.dv.topRows(valid).noalias() = kf * dkv;

  g.dq = dqf.cwiseProduct(elu_feature_map_derivative(q));
  g.dk.topRows(valid) = dkf.cwiseProduct(elu_feature_map_derivative(k.topRows(valid)));
  return g;
}

}  // namespace vocalbeat

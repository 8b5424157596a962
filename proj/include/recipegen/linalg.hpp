#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace recipegen {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
}

template <typename Scalar>
VectorX<Scalar> log_softmax(const VectorX<Scalar>& logits) {
  const Scalar top = logits.maxCoeff();
  const Scalar lse = top + std::log((logits.array() - top).exp().sum());
  return (logits.array() - lse).matrix();
}

template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& logits) {
  return log_softmax(logits).array().exp().matrix();
}

/// Cosine similarity with an epsilon guard for zero vectors.
template <typename Scalar>
Scalar cosine(const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  const Scalar denom = a.norm() * b.norm();
  if (denom <= Scalar(1e-12)) return Scalar(0);
  return a.dot(b) / denom;
}

/// Gradient of cosine(a, b) with respect to a.
template <typename Scalar>
VectorX<Scalar> cosine_grad(const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na * nb <= Scalar(1e-12)) return VectorX<Scalar>::Zero(a.size());
  const Scalar c = a.dot(b) / (na * nb);
  return b / (na * nb) - c * a / (na * na);
}

template <typename Derived, typename Rng>
void fill_uniform(Eigen::MatrixBase<Derived>& m, typename Derived::Scalar bound, Rng& rng) {
  using Scalar = typename Derived::Scalar;
  std::uniform_real_distribution<double> dist(-double(bound), double(bound));
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = Scalar(dist(rng));
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace recipegen

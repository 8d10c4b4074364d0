#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace hcx {

// Dense types used throughout. Row-major so that one sample is one contiguous row.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using Vector = VectorX<double>;

/// Row-wise log-sum-exp, shifted by the row maximum.
template <typename Derived>
VectorX<typename Derived::Scalar> logsumexp_rows(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar m = z.row(i).maxCoeff();
    out(i) = m + std::log((z.row(i).array() - m).exp().sum());
  }
  return out;
}

/// Row-wise softmax in the max-shifted form.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar m = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

/// Per-sample logits of the instance-local linear classifier.
///
/// `weights` holds one flattened K x (D+1) matrix per row: entry k*(D+1) is
/// the bias of class k, entries k*(D+1)+1+d the weights.
template <typename DerivedW, typename DerivedX>
MatrixX<typename DerivedX::Scalar> local_logits(const Eigen::MatrixBase<DerivedW>& weights,
                                                const Eigen::MatrixBase<DerivedX>& x) {
  using Scalar = typename DerivedX::Scalar;
  const Eigen::Index d = x.cols();
  const Eigen::Index k = weights.cols() / (d + 1);
  MatrixX<Scalar> z(x.rows(), k);
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    for (Eigen::Index c = 0; c < k; ++c) {
      z(b, c) = weights(b, c * (d + 1)) +
                weights.row(b).segment(c * (d + 1) + 1, d).dot(x.row(b));
    }
  }
  return z;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace hcx

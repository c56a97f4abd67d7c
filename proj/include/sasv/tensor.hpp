// Copyright 2026  sasv-backend authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Dense value types and the pure numeric kernels shared by the gradient tape
// and the inference path.

#ifndef SASV_TENSOR_HPP_
#define SASV_TENSOR_HPP_

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "sasv/error.hpp"

namespace sasv {

template <typename Scalar>
using MatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

/// Boolean flag per entry. Which value means "excluded" is documented at each
/// use site.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline std::string shape_string(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

/// Plain matrix product with a shape check.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(a) + " x " +
                     shape_string(b));
  }
  MatrixX<typename DerivedA::Scalar> out = a * b;
  return out;
}

/// Logistic function, evaluated on the branch that never overflows exp().
template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Softmax over a vector where entries with excluded(i) == true receive an
/// additive -inf logit, hence exactly zero weight. The unexcluded entries sum
/// to one. Throws DegenerateMaskError if every entry is excluded.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax_masked(
    const Eigen::MatrixBase<Derived>& logits, const Mask& excluded) {
  using Scalar = typename Derived::Scalar;
  const Index n = logits.size();
  if (excluded.size() != n) {
    throw ShapeError("softmax_masked: logits " + shape_string(logits) +
                     " vs mask of length " + std::to_string(excluded.size()));
  }
  if (n == 0 || excluded.all()) {
    throw DegenerateMaskError("softmax_masked: every entry is masked");
  }
  const Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
  VectorX<Scalar> shifted(n);
  Scalar max_logit = neg_inf;
  for (Index i = 0; i < n; ++i) {
    shifted(i) = logits(i) + (excluded(i) ? neg_inf : Scalar(0));
    if (shifted(i) > max_logit) max_logit = shifted(i);
  }
  Scalar total = 0;
  for (Index i = 0; i < n; ++i) {
    shifted(i) = std::exp(shifted(i) - max_logit);
    total += shifted(i);
  }
  return shifted / total;
}

/// Cosine similarity. Throws NormError when either vector has zero norm.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine: " + shape_string(a) + " vs " + shape_string(b));
  }
  const auto na = a.norm();
  const auto nb = b.norm();
  if (na == 0 || nb == 0) throw NormError("cosine: zero-norm vector");
  return a.dot(b) / (na * nb);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace sasv

#endif  // SASV_TENSOR_HPP_

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

#ifndef SASV_TAPE_HPP_
#define SASV_TAPE_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sasv/tensor.hpp"

namespace sasv {

class GradTape;

/// Handle to a node on a GradTape. Cheap to copy; only valid while the tape
/// that produced it is alive.
class Var {
 public:
  Var() = default;

  GradTape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Convenience for 1x1 nodes.
  double scalar() const;

 private:
  friend class GradTape;
  Var(GradTape* tape, std::size_t id) : tape_(tape), id_(id) {}

  GradTape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/**
   Reverse-mode gradient tape over dense row-major matrices.

   Every operation appends a node holding its value. A node is "tracked" when
   it depends on at least one registered parameter; only tracked nodes carry a
   backward rule. backward() clears all adjoints, seeds the loss with 1 and
   walks the nodes in reverse execution order, so repeated calls over the same
   forward computation give bitwise-identical gradients.

   Single-threaded: one tape per forward/backward.
*/
class GradTape {
 public:
  using BackwardFn = std::function<void(GradTape&, std::size_t)>;

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Var constant(Matrix value);
  Var parameter(std::string name, Matrix value);

  /// Appends an op result. `backward` is dropped unless some input is tracked.
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  const Matrix& value(Var v) const;
  bool tracked(Var v) const;

  void backward(Var loss);

  /// Adjoint of any node after backward(); zeros of the node's shape when no
  /// gradient reached it.
  Matrix grad(Var v) const;

  /// Registered parameters in registration order.
  const std::vector<Var>& parameters() const { return parameters_; }
  const std::string& parameter_name(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // Used by backward rules.
  const Matrix& adjoint(std::size_t id) const { return nodes_[id].grad; }
  const Matrix& value_at(std::size_t id) const { return nodes_[id].value; }
  template <typename Derived>
  void accumulate(Var target, const Eigen::MatrixBase<Derived>& delta) {
    Node& node = nodes_[target.id()];
    if (!node.tracked) return;
    if (node.grad.size() == 0) {
      node.grad = delta;
    } else {
      node.grad += delta;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool tracked = false;
    BackwardFn backward;
    std::string name;
  };

  void check_owned(Var v, const char* what) const;

  std::vector<Node> nodes_;
  std::vector<Var> parameters_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All inputs must live on the same tape.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(double k, Var a);
/// Elementwise product of equal shapes.
Var cwise_product(Var a, Var b);

/// s * x for a 1x1 node s.
Var scale_by(Var s, Var x);
/// x + s for a 1x1 node s, broadcast over every entry.
Var shift_by(Var x, Var s);
/// Adds a bias with x.cols() entries to every row of x.
Var add_rowwise(Var x, Var bias);

Var tanh(Var x);
Var sigmoid(Var x);

/// softmax_masked applied to every row; `excluded` has one entry per column.
Var softmax_rows_masked(Var logits, const Mask& excluded);
/// softmax_masked over all entries of a row or column vector.
Var softmax_vector_masked(Var logits, const Mask& excluded);

/// Rows of x at the given indices, in order.
Var gather_rows(Var x, std::span<const Index> rows);
/// Zeroes rows where keep(i) is false.
Var mask_rows(Var x, const Mask& keep);
/// Vertical concatenation of equally wide row blocks.
Var stack_rows(std::span<const Var> parts);

/// Row-wise cosine of two equally shaped matrices -> (rows x 1).
/// Throws NormError if any row has zero norm.
Var row_cosine(Var a, Var b);

/// Per-entry binary cross-entropy on probabilities. positive(i) selects
/// -log p versus -log(1 - p); p is clamped to [1e-12, 1 - 1e-12].
Var binary_cross_entropy(Var p, const Mask& positive);

Var sum(Var x);
Var mean(Var x);

}  // namespace sasv

#endif  // SASV_TAPE_HPP_

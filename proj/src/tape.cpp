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

#include "sasv/tape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace sasv {

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw TrackingError("Var: handle is not attached");
  return tape_->value(*this);
}

double Var::scalar() const {
  const Matrix& m = value();
  if (m.size() != 1) {
    throw ShapeError("Var::scalar: node has shape " + shape_string(m));
  }
  return m(0, 0);
}

Var GradTape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var GradTape::parameter(std::string name, Matrix value) {
  Node node;
  node.value = std::move(value);
  node.tracked = true;
  node.name = std::move(name);
  nodes_.push_back(std::move(node));
  Var v(this, nodes_.size() - 1);
  parameters_.push_back(v);
  return v;
}

Var GradTape::record(Matrix value, std::span<const Var> inputs,
                     BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    check_owned(in, "record");
    if (nodes_[in.id()].tracked) node.tracked = true;
  }
  if (node.tracked) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void GradTape::check_owned(Var v, const char* what) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw TrackingError(std::string(what) + ": variable is not on this tape");
  }
}

const Matrix& GradTape::value(Var v) const {
  check_owned(v, "value");
  return nodes_[v.id()].value;
}

bool GradTape::tracked(Var v) const {
  check_owned(v, "tracked");
  return nodes_[v.id()].tracked;
}

const std::string& GradTape::parameter_name(Var v) const {
  check_owned(v, "parameter_name");
  return nodes_[v.id()].name;
}

void GradTape::backward(Var loss) {
  check_owned(loss, "backward");
  Node& root = nodes_[loss.id()];
  if (!root.tracked) {
    throw TrackingError("backward: loss does not depend on any parameter");
  }
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " +
                     shape_string(root.value));
  }
  for (Node& node : nodes_) node.grad.resize(0, 0);
  root.grad = Matrix::Ones(1, 1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.backward || node.grad.size() == 0) continue;
    node.backward(*this, id);
  }
  backward_done_ = true;
}

Matrix GradTape::grad(Var v) const {
  check_owned(v, "grad");
  const Node& node = nodes_[v.id()];
  if (!backward_done_ || node.grad.size() == 0) {
    return Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

// ---------------------------------------------------------------------------

namespace {

GradTape& common_tape(std::initializer_list<Var> vars, const char* op) {
  GradTape* tape = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw TrackingError(std::string(op) + ": detached Var");
    if (tape == nullptr) tape = v.tape();
    if (v.tape() != tape) {
      throw TrackingError(std::string(op) + ": operands on different tapes");
    }
  }
  return *tape;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_string(a) +
                     " and " + shape_string(b) + " differ");
  }
}

void require_scalar(const Matrix& s, const char* op) {
  if (s.size() != 1) {
    throw ShapeError(std::string(op) + ": expected 1x1, got " +
                     shape_string(s));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  GradTape& t = common_tape({a, b}, "matmul");
  Matrix out = matmul(a.value(), b.value());
  const std::array inputs{a, b};
  return t.record(std::move(out), inputs, [a, b](GradTape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    t.accumulate(a, g * b.value().transpose());
    t.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  GradTape& t = common_tape({a}, "transpose");
  Matrix out = a.value().transpose();
  const std::array inputs{a};
  return t.record(std::move(out), inputs, [a](GradTape& t, std::size_t self) {
    t.accumulate(a, t.adjoint(self).transpose());
  });
}

Var operator+(Var a, Var b) {
  GradTape& t = common_tape({a, b}, "add");
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value() + b.value();
  const std::array inputs{a, b};
  return t.record(std::move(out), inputs, [a, b](GradTape& t, std::size_t self) {
    t.accumulate(a, t.adjoint(self));
    t.accumulate(b, t.adjoint(self));
  });
}

Var operator-(Var a, Var b) {
  GradTape& t = common_tape({a, b}, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value() - b.value();
  const std::array inputs{a, b};
  return t.record(std::move(out), inputs, [a, b](GradTape& t, std::size_t self) {
    t.accumulate(a, t.adjoint(self));
    t.accumulate(b, -t.adjoint(self));
  });
}

Var operator*(double k, Var a) {
  GradTape& t = common_tape({a}, "scale");
  Matrix out = k * a.value();
  const std::array inputs{a};
  return t.record(std::move(out), inputs, [k, a](GradTape& t, std::size_t self) {
    t.accumulate(a, k * t.adjoint(self));
  });
}

Var cwise_product(Var a, Var b) {
  GradTape& t = common_tape({a, b}, "cwise_product");
  require_same_shape(a.value(), b.value(), "cwise_product");
  Matrix out = a.value().cwiseProduct(b.value());
  const std::array inputs{a, b};
  return t.record(std::move(out), inputs, [a, b](GradTape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale_by(Var s, Var x) {
  GradTape& t = common_tape({s, x}, "scale_by");
  require_scalar(s.value(), "scale_by");
  Matrix out = s.value()(0, 0) * x.value();
  const std::array inputs{s, x};
  return t.record(std::move(out), inputs, [s, x](GradTape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(x.value()).sum()));
    t.accumulate(x, s.value()(0, 0) * g);
  });
}

Var shift_by(Var x, Var s) {
  GradTape& t = common_tape({x, s}, "shift_by");
  require_scalar(s.value(), "shift_by");
  Matrix out = x.value().array() + s.value()(0, 0);
  const std::array inputs{x, s};
  return t.record(std::move(out), inputs, [x, s](GradTape& t, std::size_t self) {
    const Matrix& g = t.adjoint(self);
    t.accumulate(x, g);
    t.accumulate(s, Matrix::Constant(1, 1, g.sum()));
  });
}

Var add_rowwise(Var x, Var bias) {
  GradTape& t = common_tape({x, bias}, "add_rowwise");
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  if (bv.size() != xv.cols()) {
    throw ShapeError("add_rowwise: bias " + shape_string(bv) +
                     " does not match " + shape_string(xv));
  }
  Matrix out = xv;
  const Eigen::Map<const Eigen::RowVectorXd> b(bv.data(), bv.size());
  out.rowwise() += b;
  const Index br = bv.rows();
  const Index bc = bv.cols();
  const std::array inputs{x, bias};
  return t.record(std::move(out), inputs,
                  [x, bias, br, bc](GradTape& t, std::size_t self) {
                    const Matrix& g = t.adjoint(self);
                    t.accumulate(x, g);
                    Eigen::RowVectorXd col_sums = g.colwise().sum();
                    t.accumulate(bias, Eigen::Map<const Matrix>(
                                           col_sums.data(), br, bc));
                  });
}

Var tanh(Var x) {
  GradTape& t = common_tape({x}, "tanh");
  Matrix out = x.value().array().tanh();
  const std::array inputs{x};
  return t.record(std::move(out), inputs, [x](GradTape& t, std::size_t self) {
    const Matrix& y = t.value_at(self);
    t.accumulate(x, t.adjoint(self).cwiseProduct(
                        (1.0 - y.array().square()).matrix()));
  });
}

Var sigmoid(Var x) {
  GradTape& t = common_tape({x}, "sigmoid");
  Matrix out = x.value().unaryExpr([](double v) { return sigmoid(v); });
  const std::array inputs{x};
  return t.record(std::move(out), inputs, [x](GradTape& t, std::size_t self) {
    const Matrix& y = t.value_at(self);
    t.accumulate(x, t.adjoint(self).cwiseProduct(
                        (y.array() * (1.0 - y.array())).matrix()));
  });
}

namespace {

// Jacobian-vector product of softmax: dx = y * (g - <y, g>).
template <typename DerivedY, typename DerivedG>
Eigen::RowVectorXd softmax_backward(const Eigen::MatrixBase<DerivedY>& y,
                                    const Eigen::MatrixBase<DerivedG>& g) {
  const double inner = y.cwiseProduct(g).sum();
  return y.cwiseProduct((g.array() - inner).matrix());
}

}  // namespace

Var softmax_rows_masked(Var logits, const Mask& excluded) {
  GradTape& t = common_tape({logits}, "softmax_rows_masked");
  const Matrix& z = logits.value();
  if (excluded.size() != z.cols()) {
    throw ShapeError("softmax_rows_masked: mask of length " +
                     std::to_string(excluded.size()) + " for logits " +
                     shape_string(z));
  }
  Matrix out(z.rows(), z.cols());
  for (Index r = 0; r < z.rows(); ++r) {
    out.row(r) = softmax_masked(z.row(r), excluded).transpose();
  }
  const std::array inputs{logits};
  return t.record(std::move(out), inputs,
                  [logits](GradTape& t, std::size_t self) {
                    const Matrix& y = t.value_at(self);
                    const Matrix& g = t.adjoint(self);
                    Matrix dz(y.rows(), y.cols());
                    for (Index r = 0; r < y.rows(); ++r) {
                      dz.row(r) = softmax_backward(y.row(r), g.row(r));
                    }
                    t.accumulate(logits, dz);
                  });
}

Var softmax_vector_masked(Var logits, const Mask& excluded) {
  GradTape& t = common_tape({logits}, "softmax_vector_masked");
  const Matrix& z = logits.value();
  if (z.rows() != 1 && z.cols() != 1) {
    throw ShapeError("softmax_vector_masked: expected a vector, got " +
                     shape_string(z));
  }
  const Eigen::Map<const Eigen::RowVectorXd> flat(z.data(), z.size());
  Vector y = softmax_masked(flat, excluded);
  Matrix out = Eigen::Map<const Matrix>(y.data(), z.rows(), z.cols());
  const std::array inputs{logits};
  return t.record(std::move(out), inputs,
                  [logits](GradTape& t, std::size_t self) {
                    const Matrix& y = t.value_at(self);
                    const Matrix& g = t.adjoint(self);
                    const Eigen::Map<const Eigen::RowVectorXd> yf(y.data(),
                                                                  y.size());
                    const Eigen::Map<const Eigen::RowVectorXd> gf(g.data(),
                                                                  g.size());
                    Eigen::RowVectorXd dz = softmax_backward(yf, gf);
                    t.accumulate(logits, Eigen::Map<const Matrix>(
                                             dz.data(), y.rows(), y.cols()));
                  });
}

Var gather_rows(Var x, std::span<const Index> rows) {
  GradTape& t = common_tape({x}, "gather_rows");
  const Matrix& xv = x.value();
  std::vector<Index> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Index>(idx.size()), xv.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= xv.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(idx[i]) +
                       " out of range for " + shape_string(xv));
    }
    out.row(static_cast<Index>(i)) = xv.row(idx[i]);
  }
  const std::array inputs{x};
  return t.record(std::move(out), inputs,
                  [x, idx = std::move(idx)](GradTape& t, std::size_t self) {
                    const Matrix& g = t.adjoint(self);
                    Matrix dx = Matrix::Zero(x.rows(), x.cols());
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      dx.row(idx[i]) += g.row(static_cast<Index>(i));
                    }
                    t.accumulate(x, dx);
                  });
}

Var mask_rows(Var x, const Mask& keep) {
  GradTape& t = common_tape({x}, "mask_rows");
  const Matrix& xv = x.value();
  if (keep.size() != xv.rows()) {
    throw ShapeError("mask_rows: mask of length " +
                     std::to_string(keep.size()) + " for " + shape_string(xv));
  }
  Matrix out = xv;
  for (Index r = 0; r < out.rows(); ++r) {
    if (!keep(r)) out.row(r).setZero();
  }
  const std::array inputs{x};
  return t.record(std::move(out), inputs,
                  [x, keep](GradTape& t, std::size_t self) {
                    Matrix dx = t.adjoint(self);
                    for (Index r = 0; r < dx.rows(); ++r) {
                      if (!keep(r)) dx.row(r).setZero();
                    }
                    t.accumulate(x, dx);
                  });
}

Var stack_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("stack_rows: nothing to stack");
  GradTape* tape = parts.front().tape();
  if (tape == nullptr) throw TrackingError("stack_rows: detached Var");
  Index total = 0;
  const Index cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.tape() != tape) {
      throw TrackingError("stack_rows: operands on different tapes");
    }
    if (p.cols() != cols) {
      throw ShapeError("stack_rows: block " + shape_string(p.value()) +
                       " does not have " + std::to_string(cols) + " columns");
    }
    total += p.rows();
  }
  Matrix out(total, cols);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  std::vector<Var> blocks(parts.begin(), parts.end());
  return tape->record(std::move(out), parts,
                      [blocks](GradTape& t, std::size_t self) {
                        const Matrix& g = t.adjoint(self);
                        Index offset = 0;
                        for (const Var& p : blocks) {
                          t.accumulate(p, g.middleRows(offset, p.rows()));
                          offset += p.rows();
                        }
                      });
}

Var row_cosine(Var a, Var b) {
  GradTape& t = common_tape({a, b}, "row_cosine");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(av, bv, "row_cosine");
  const Index n = av.rows();
  Vector na(n), nb(n);
  Matrix out(n, 1);
  for (Index r = 0; r < n; ++r) {
    na(r) = av.row(r).norm();
    nb(r) = bv.row(r).norm();
    if (na(r) == 0.0 || nb(r) == 0.0) {
      throw NormError("row_cosine: zero-norm row " + std::to_string(r));
    }
    out(r, 0) = av.row(r).dot(bv.row(r)) / (na(r) * nb(r));
  }
  const std::array inputs{a, b};
  return t.record(
      std::move(out), inputs,
      [a, b, na = std::move(na), nb = std::move(nb)](GradTape& t,
                                                      std::size_t self) {
        const Matrix& g = t.adjoint(self);
        const Matrix& c = t.value_at(self);
        const Matrix& av = a.value();
        const Matrix& bv = b.value();
        // d cos / d a = b / (|a||b|) - cos * a / |a|^2, symmetric for b.
        Matrix da(av.rows(), av.cols());
        Matrix db(bv.rows(), bv.cols());
        for (Index r = 0; r < av.rows(); ++r) {
          const double inv = 1.0 / (na(r) * nb(r));
          da.row(r) = g(r, 0) * (bv.row(r) * inv -
                                 c(r, 0) * av.row(r) / (na(r) * na(r)));
          db.row(r) = g(r, 0) * (av.row(r) * inv -
                                 c(r, 0) * bv.row(r) / (nb(r) * nb(r)));
        }
        t.accumulate(a, da);
        t.accumulate(b, db);
      });
}

Var binary_cross_entropy(Var p, const Mask& positive) {
  GradTape& t = common_tape({p}, "binary_cross_entropy");
  const Matrix& pv = p.value();
  if (positive.size() != pv.size()) {
    throw ShapeError("binary_cross_entropy: " +
                     std::to_string(positive.size()) + " labels for " +
                     shape_string(pv));
  }
  constexpr double kLo = 1e-12;
  constexpr double kHi = 1.0 - 1e-12;
  Matrix out(pv.rows(), pv.cols());
  const Index n = pv.size();
  for (Index i = 0; i < n; ++i) {
    const double q = std::clamp(pv.data()[i], kLo, kHi);
    out.data()[i] = positive(i) ? -std::log(q) : -std::log(1.0 - q);
  }
  const std::array inputs{p};
  return t.record(std::move(out), inputs,
                  [p, positive](GradTape& t, std::size_t self) {
                    const Matrix& g = t.adjoint(self);
                    const Matrix& pv = p.value();
                    Matrix dp(pv.rows(), pv.cols());
                    for (Index i = 0; i < pv.size(); ++i) {
                      const double q = pv.data()[i];
                      double d = 0.0;
                      // Zero slope where the clamp is active.
                      if (q > kLo && q < kHi) {
                        d = positive(i) ? -1.0 / q : 1.0 / (1.0 - q);
                      }
                      dp.data()[i] = g.data()[i] * d;
                    }
                    t.accumulate(p, dp);
                  });
}

Var sum(Var x) {
  GradTape& t = common_tape({x}, "sum");
  Matrix out = Matrix::Constant(1, 1, x.value().sum());
  const std::array inputs{x};
  return t.record(std::move(out), inputs, [x](GradTape& t, std::size_t self) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), t.adjoint(self)(0, 0)));
  });
}

Var mean(Var x) {
  const Index n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty input");
  return (1.0 / static_cast<double>(n)) * sum(x);
}

}  // namespace sasv

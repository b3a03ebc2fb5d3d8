// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Matrix-valued reverse-mode tape with first-class forward-mode tangents.
//
// Every node holds an Eigen matrix. Forward-mode derivatives with respect to
// a seeded input are carried by `Dual`, whose tangent is itself an ordinary
// tape node; a reverse sweep through the tape therefore differentiates
// losses that contain input derivatives (forward-over-reverse nesting).
//
// Elementwise binary ops broadcast a 1x1, r x 1 or 1 x c operand against an
// r x c operand.

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "epiforge/errors.hpp"

namespace epiforge::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class RegistryError : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  NonFiniteGradient(const std::string& what, int node) : Error(what), node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

class AmbiguousSeed : public Error {
 public:
  using Error::Error;
};

/// Trainable storage living outside any tape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {}
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Value plus forward-mode tangent. An invalid tangent means "identically 0".
struct Dual {
  Var value;
  Var tangent;

  Dual() = default;
  explicit Dual(Var v) : value(v) {}
  Dual(Var v, Var t) : value(v), tangent(t) {}
  bool has_tangent() const noexcept { return tangent.valid(); }
};

enum class Op : std::uint8_t {
  Constant,
  Param,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,
  AddScalar,
  MatMul,
  Transpose,
  Tanh,
  Sigmoid,
  Sin,
  Cos,
  Relu,
  Exp,
  Log,
  Square,
  Pow,
  Clamp,
  Sum,
  Mean,
  RowSums,
  ColSums,
  Rows,
  Cols,
  ConcatRows,
  ConcatCols,
  Custom,
};

const char* op_name(Op op);

class Tape {
 public:
  /// Backward rule of a custom node: receives the node's adjoint and one
  /// pre-sized, zero-initialized accumulator per input.
  using BackwardFn = std::function<void(const Matrix& adjoint, std::span<Matrix* const> input_adjoints)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  Var zeros(Eigen::Index rows, Eigen::Index cols);

  /// Registers `p` on this tape (once) and returns its node.
  Var param(Parameter& p);
  bool has_param(const Parameter& p) const;

  /// Marks `x` as the differentiation input and gives it a unit tangent.
  Dual seed(const Var& x);
  const std::vector<int>& seeds() const noexcept { return seeds_; }

  Var custom(std::vector<Var> inputs, Matrix value, BackwardFn backward, std::string label);

  /// Reverse sweep from a 1x1 node. Throws NonFiniteGradient at the first
  /// node (in sweep order) whose adjoint is not finite.
  void backward(const Var& loss);

  /// Adjoint of a registered parameter after `backward`. Parameters with no
  /// path to the loss get exact zeros.
  Matrix gradient(const Parameter& p) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  // Node construction; used by the op functions.
  Var push(Op op, Matrix value, int a = -1, int b = -1, double c0 = 0.0, double c1 = 0.0);
  Var push_nary(Op op, Matrix value, std::vector<int> inputs);

 private:
  struct Node {
    Op op = Op::Constant;
    int a = -1;
    int b = -1;
    double c0 = 0.0;
    double c1 = 0.0;
    std::vector<int> inputs;
    Matrix value;
    Matrix adjoint;
    BackwardFn backward;
    std::string label;
  };

  Matrix& adjoint_for(int id);
  void propagate(int id);

  // A deque keeps references to node values valid while the tape grows.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> params_;
  std::vector<int> seeds_;
  bool swept_ = false;
};

// ---- elementwise arithmetic (broadcasting) --------------------------------

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);
Var operator/(double c, const Var& a);

Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var pow(const Var& a, double p);
Var clamp(const Var& a, double lo, double hi);

// ---- linear algebra, reductions, shape ------------------------------------

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
/// r x c -> r x 1.
Var row_sums(const Var& a);
/// r x c -> 1 x c.
Var col_sums(const Var& a);
Var rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
/// r x 1 -> r x n.
Var replicate_cols(const Var& a, Eigen::Index n);

// ---- forward-mode (Dual) ---------------------------------------------------

Dual operator+(const Dual& a, const Dual& b);
Dual operator-(const Dual& a, const Dual& b);
Dual operator*(const Dual& a, const Dual& b);
Dual operator*(const Dual& a, double c);
Dual operator+(const Dual& a, double c);
Dual operator-(double c, const Dual& a);
Dual operator-(const Dual& a);
/// `w` is treated as independent of the seed.
Dual matmul(const Var& w, const Dual& x);
/// Adds a term independent of the seed (e.g. a bias).
Dual operator+(const Dual& a, const Var& b);
Dual tanh(const Dual& a);
Dual sigmoid(const Dual& a);
Dual sin(const Dual& a);
Dual cos(const Dual& a);
Dual exp(const Dual& a);
Dual relu(const Dual& a);
Dual square(const Dual& a);
Dual rows(const Dual& a, Eigen::Index start, Eigen::Index count);
Dual concat_rows(const std::vector<Dual>& parts);

/// Tangent of `output` with respect to the single seeded `input`. The result
/// is a tape node and stays differentiable by `Tape::backward`.
Var directional_derivative(const Dual& output, const Var& input);

/// Jacobian of a column-batched map f at the column vector `x`. `f` must act
/// independently on each column. The result (rows(f) x rows(x)) is a node.
Var jacobian(const std::function<Dual(const Dual&)>& f, const Var& x);

/// Convenience: backward from `loss` and return the gradient of each param.
std::vector<Matrix> grad(const Var& loss, std::span<Parameter* const> params);

}  // namespace epiforge::ad

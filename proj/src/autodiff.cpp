// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace epiforge::ad {

namespace {

struct Shape {
  Eigen::Index rows;
  Eigen::Index cols;
};

Shape broadcast_shape(const Matrix& a, const Matrix& b, const char* what) {
  auto dim = [&](Eigen::Index x, Eigen::Index y) -> Eigen::Index {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    std::ostringstream msg;
    msg << what << ": incompatible shapes " << a.rows() << "x" << a.cols() << " and " << b.rows() << "x"
        << b.cols();
    throw DimensionError(msg.str());
  };
  return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

Matrix expand(const Matrix& m, Shape s) {
  if (m.rows() == s.rows && m.cols() == s.cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(s.rows, s.cols, m(0, 0));
  return m.replicate(s.rows / m.rows(), s.cols / m.cols());
}

// Sums a broadcast adjoint back down to the operand's shape.
Matrix reduce_to(const Matrix& g, const Matrix& operand) {
  if (g.rows() == operand.rows() && g.cols() == operand.cols()) return g;
  Matrix r = g;
  if (operand.rows() == 1 && r.rows() != 1) r = r.colwise().sum().eval();
  if (operand.cols() == 1 && r.cols() != 1) r = r.rowwise().sum().eval();
  return r;
}

Tape& common_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw ContractError("operation on an empty Var");
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
  return a.tape();
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw ContractError("operation on an empty Var");
  return a.tape();
}

Matrix binary_value(Op op, const Matrix& a, const Matrix& b) {
  Shape s = broadcast_shape(a, b, op_name(op));
  Matrix ea = expand(a, s);
  Matrix eb = expand(b, s);
  switch (op) {
    case Op::Add:
      return ea + eb;
    case Op::Sub:
      return ea - eb;
    case Op::Mul:
      return ea.cwiseProduct(eb);
    case Op::Div:
      return ea.cwiseQuotient(eb);
    default:
      throw ContractError("not a binary op");
  }
}

Var binary(Op op, const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  return t.push(op, binary_value(op, a.value(), b.value()), a.id(), b.id());
}

Var unary(Op op, const Var& a, Matrix value, double c0 = 0.0, double c1 = 0.0) {
  return tape_of(a).push(op, std::move(value), a.id(), -1, c0, c1);
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Param: return "param";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Relu: return "relu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Pow: return "pow";
    case Op::Clamp: return "clamp";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::RowSums: return "row_sums";
    case Op::ColSums: return "col_sums";
    case Op::Rows: return "rows";
    case Op::Cols: return "cols";
    case Op::ConcatRows: return "concat_rows";
    case Op::ConcatCols: return "concat_cols";
    case Op::Custom: return "custom";
  }
  return "?";
}

const Matrix& Var::value() const {
  if (!valid()) throw ContractError("value of an empty Var");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw DimensionError("scalar() on a non-1x1 node");
  return v(0, 0);
}

// ---- Tape ------------------------------------------------------------------

Var Tape::push(Op op, Matrix value, int a, int b, double c0, double c1) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c0 = c0;
  n.c1 = c1;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push_nary(Op op, Matrix value, std::vector<int> inputs) {
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return push(Op::Constant, std::move(value)); }

Var Tape::constant(double value) { return push(Op::Constant, Matrix::Constant(1, 1, value)); }

Var Tape::zeros(Eigen::Index rows, Eigen::Index cols) { return push(Op::Constant, Matrix::Zero(rows, cols)); }

Var Tape::param(Parameter& p) {
  auto it = params_.find(&p);
  if (it != params_.end()) return Var(this, it->second);
  Var v = push(Op::Param, p.value);
  nodes_.back().label = p.name;
  params_.emplace(&p, v.id());
  return v;
}

bool Tape::has_param(const Parameter& p) const { return params_.count(&p) != 0; }

Dual Tape::seed(const Var& x) {
  if (&x.tape() != this) throw ContractError("seed: Var belongs to another tape");
  seeds_.push_back(x.id());
  Var t = constant(Matrix::Ones(x.rows(), x.cols()));
  return Dual(x, t);
}

Var Tape::custom(std::vector<Var> inputs, Matrix value, BackwardFn backward, std::string label) {
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw ContractError("custom: input belongs to another tape");
    ids.push_back(v.id());
  }
  Var out = push_nary(Op::Custom, std::move(value), std::move(ids));
  nodes_.back().backward = std::move(backward);
  nodes_.back().label = std::move(label);
  return out;
}

Matrix& Tape::adjoint_for(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.adjoint.size() == 0) n.adjoint = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw DimensionError("backward: loss must be 1x1");
  if (swept_) {
    for (Node& n : nodes_) n.adjoint.resize(0, 0);
  }
  swept_ = true;
  adjoint_for(loss.id()).setOnes();
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.adjoint.size() == 0) continue;
    if (!n.adjoint.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite gradient at node " << id << " (" << op_name(n.op);
      if (!n.label.empty()) msg << " '" << n.label << "'";
      msg << ")";
      throw NonFiniteGradient(msg.str(), id);
    }
    propagate(id);
  }
}

void Tape::propagate(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Matrix& g = n.adjoint;
  auto A = [&]() -> Matrix& { return adjoint_for(n.a); };
  auto B = [&]() -> Matrix& { return adjoint_for(n.b); };
  auto va = [&]() -> const Matrix& { return nodes_[static_cast<std::size_t>(n.a)].value; };
  auto vb = [&]() -> const Matrix& { return nodes_[static_cast<std::size_t>(n.b)].value; };

  switch (n.op) {
    case Op::Constant:
    case Op::Param:
      break;
    case Op::Add:
      A() += reduce_to(g, va());
      B() += reduce_to(g, vb());
      break;
    case Op::Sub:
      A() += reduce_to(g, va());
      B() -= reduce_to(g, vb());
      break;
    case Op::Mul: {
      Shape s{g.rows(), g.cols()};
      A() += reduce_to(g.cwiseProduct(expand(vb(), s)), va());
      B() += reduce_to(g.cwiseProduct(expand(va(), s)), vb());
      break;
    }
    case Op::Div: {
      Shape s{g.rows(), g.cols()};
      Matrix eb = expand(vb(), s);
      A() += reduce_to(g.cwiseQuotient(eb), va());
      B() -= reduce_to(g.cwiseProduct(n.value).cwiseQuotient(eb), vb());
      break;
    }
    case Op::Neg:
      A() -= g;
      break;
    case Op::Scale:
      A() += n.c0 * g;
      break;
    case Op::AddScalar:
      A() += g;
      break;
    case Op::MatMul:
      A() += g * vb().transpose();
      B() += va().transpose() * g;
      break;
    case Op::Transpose:
      A() += g.transpose();
      break;
    case Op::Tanh:
      A().array() += g.array() * (1.0 - n.value.array().square());
      break;
    case Op::Sigmoid:
      A().array() += g.array() * n.value.array() * (1.0 - n.value.array());
      break;
    case Op::Sin:
      A().array() += g.array() * va().array().cos();
      break;
    case Op::Cos:
      A().array() -= g.array() * va().array().sin();
      break;
    case Op::Relu:
      A().array() += g.array() * (va().array() > 0.0).cast<double>();
      break;
    case Op::Exp:
      A().array() += g.array() * n.value.array();
      break;
    case Op::Log:
      A().array() += g.array() / va().array();
      break;
    case Op::Square:
      A().array() += 2.0 * g.array() * va().array();
      break;
    case Op::Pow:
      A().array() += g.array() * n.c0 * va().array().pow(n.c0 - 1.0);
      break;
    case Op::Clamp:
      A().array() += g.array() * ((va().array() >= n.c0) && (va().array() <= n.c1)).cast<double>();
      break;
    case Op::Sum:
      A().array() += g(0, 0);
      break;
    case Op::Mean:
      A().array() += g(0, 0) / static_cast<double>(va().size());
      break;
    case Op::RowSums:
      A() += g.replicate(1, va().cols());
      break;
    case Op::ColSums:
      A() += g.replicate(va().rows(), 1);
      break;
    case Op::Rows:
      A().middleRows(static_cast<Eigen::Index>(n.c0), g.rows()) += g;
      break;
    case Op::Cols:
      A().middleCols(static_cast<Eigen::Index>(n.c0), g.cols()) += g;
      break;
    case Op::ConcatRows: {
      Eigen::Index off = 0;
      for (int in : n.inputs) {
        Matrix& ga = adjoint_for(in);
        ga += g.middleRows(off, ga.rows());
        off += ga.rows();
      }
      break;
    }
    case Op::ConcatCols: {
      Eigen::Index off = 0;
      for (int in : n.inputs) {
        Matrix& ga = adjoint_for(in);
        ga += g.middleCols(off, ga.cols());
        off += ga.cols();
      }
      break;
    }
    case Op::Custom: {
      std::vector<Matrix> acc;
      acc.reserve(n.inputs.size());
      for (int in : n.inputs) {
        const Matrix& v = nodes_[static_cast<std::size_t>(in)].value;
        acc.emplace_back(Matrix::Zero(v.rows(), v.cols()));
      }
      std::vector<Matrix*> ptrs;
      for (Matrix& m : acc) ptrs.push_back(&m);
      n.backward(g, ptrs);
      for (std::size_t i = 0; i < acc.size(); ++i) adjoint_for(n.inputs[i]) += acc[i];
      break;
    }
  }
}

Matrix Tape::gradient(const Parameter& p) const {
  auto it = params_.find(&p);
  if (it == params_.end()) throw RegistryError("parameter '" + p.name + "' is not registered on this tape");
  const Node& n = nodes_[static_cast<std::size_t>(it->second)];
  if (n.adjoint.size() == 0) return Matrix::Zero(p.value.rows(), p.value.cols());
  return n.adjoint;
}

// ---- elementwise ------------------------------------------------------------

Var operator+(const Var& a, const Var& b) { return binary(Op::Add, a, b); }
Var operator-(const Var& a, const Var& b) { return binary(Op::Sub, a, b); }
Var operator*(const Var& a, const Var& b) { return binary(Op::Mul, a, b); }
Var operator/(const Var& a, const Var& b) { return binary(Op::Div, a, b); }
Var operator-(const Var& a) { return unary(Op::Neg, a, -a.value()); }
Var operator+(const Var& a, double c) { return unary(Op::AddScalar, a, (a.value().array() + c).matrix(), c); }
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a + (-c); }
Var operator-(double c, const Var& a) { return (-a) + c; }
Var operator*(const Var& a, double c) { return unary(Op::Scale, a, a.value() * c, c); }
Var operator*(double c, const Var& a) { return a * c; }
Var operator/(const Var& a, double c) { return a * (1.0 / c); }
Var operator/(double c, const Var& a) { return tape_of(a).constant(c) / a; }

Var tanh(const Var& a) { return unary(Op::Tanh, a, a.value().array().tanh().matrix()); }
Var sigmoid(const Var& a) {
  return unary(Op::Sigmoid, a, (1.0 / (1.0 + (-a.value().array()).exp())).matrix());
}
Var sin(const Var& a) { return unary(Op::Sin, a, a.value().array().sin().matrix()); }
Var cos(const Var& a) { return unary(Op::Cos, a, a.value().array().cos().matrix()); }
Var relu(const Var& a) { return unary(Op::Relu, a, a.value().cwiseMax(0.0)); }
Var exp(const Var& a) { return unary(Op::Exp, a, a.value().array().exp().matrix()); }
Var log(const Var& a) { return unary(Op::Log, a, a.value().array().log().matrix()); }
Var square(const Var& a) { return unary(Op::Square, a, a.value().array().square().matrix()); }
Var pow(const Var& a, double p) { return unary(Op::Pow, a, a.value().array().pow(p).matrix(), p); }
Var clamp(const Var& a, double lo, double hi) {
  return unary(Op::Clamp, a, a.value().cwiseMax(lo).cwiseMin(hi), lo, hi);
}

// ---- linear algebra / shape -------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  if (a.cols() != b.rows()) {
    std::ostringstream msg;
    msg << "matmul: " << a.rows() << "x" << a.cols() << " times " << b.rows() << "x" << b.cols();
    throw DimensionError(msg.str());
  }
  return t.push(Op::MatMul, a.value() * b.value(), a.id(), b.id());
}

Var transpose(const Var& a) { return unary(Op::Transpose, a, a.value().transpose()); }
Var sum(const Var& a) { return unary(Op::Sum, a, Matrix::Constant(1, 1, a.value().sum())); }
Var mean(const Var& a) { return unary(Op::Mean, a, Matrix::Constant(1, 1, a.value().mean())); }
Var row_sums(const Var& a) { return unary(Op::RowSums, a, a.value().rowwise().sum()); }
Var col_sums(const Var& a) { return unary(Op::ColSums, a, a.value().colwise().sum()); }

Var rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw DimensionError("rows: slice out of range");
  return unary(Op::Rows, a, a.value().middleRows(start, count), static_cast<double>(start));
}

Var cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw DimensionError("cols: slice out of range");
  return unary(Op::Cols, a, a.value().middleCols(start, count), static_cast<double>(start));
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  if (parts.size() == 1) return parts.front();
  Tape& t = tape_of(parts.front());
  Eigen::Index c = parts.front().cols();
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows: column mismatch");
    r += p.rows();
  }
  Matrix v(r, c);
  std::vector<int> ids;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
    ids.push_back(p.id());
  }
  return t.push_nary(Op::ConcatRows, std::move(v), std::move(ids));
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  if (parts.size() == 1) return parts.front();
  Tape& t = tape_of(parts.front());
  Eigen::Index r = parts.front().rows();
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) throw DimensionError("concat_cols: row mismatch");
    c += p.cols();
  }
  Matrix v(r, c);
  std::vector<int> ids;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    ids.push_back(p.id());
  }
  return t.push_nary(Op::ConcatCols, std::move(v), std::move(ids));
}

Var replicate_cols(const Var& a, Eigen::Index n) {
  if (a.cols() != 1) throw DimensionError("replicate_cols: expects a column vector");
  return a + tape_of(a).zeros(a.rows(), n);
}

// ---- Dual ---------------------------------------------------------------------

namespace {

Var add_tangents(const Var& a, const Var& b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  return a + b;
}

}  // namespace

Dual operator+(const Dual& a, const Dual& b) {
  return Dual(a.value + b.value, add_tangents(a.tangent, b.tangent));
}

Dual operator-(const Dual& a, const Dual& b) {
  Var t;
  if (a.has_tangent() && b.has_tangent()) {
    t = a.tangent - b.tangent;
  } else if (a.has_tangent()) {
    t = a.tangent;
  } else if (b.has_tangent()) {
    t = -b.tangent;
  }
  return Dual(a.value - b.value, t);
}

Dual operator*(const Dual& a, const Dual& b) {
  Var t;
  if (a.has_tangent()) t = a.tangent * b.value;
  if (b.has_tangent()) t = add_tangents(t, a.value * b.tangent);
  return Dual(a.value * b.value, t);
}

Dual operator*(const Dual& a, double c) {
  return Dual(a.value * c, a.has_tangent() ? a.tangent * c : Var());
}

Dual operator+(const Dual& a, double c) { return Dual(a.value + c, a.tangent); }

Dual operator-(double c, const Dual& a) {
  return Dual(c - a.value, a.has_tangent() ? -a.tangent : Var());
}

Dual operator-(const Dual& a) { return Dual(-a.value, a.has_tangent() ? -a.tangent : Var()); }

Dual matmul(const Var& w, const Dual& x) {
  return Dual(matmul(w, x.value), x.has_tangent() ? matmul(w, x.tangent) : Var());
}

Dual operator+(const Dual& a, const Var& b) { return Dual(a.value + b, a.tangent); }

Dual tanh(const Dual& a) {
  Var y = tanh(a.value);
  if (!a.has_tangent()) return Dual(y);
  return Dual(y, (1.0 - square(y)) * a.tangent);
}

Dual sigmoid(const Dual& a) {
  Var y = sigmoid(a.value);
  if (!a.has_tangent()) return Dual(y);
  return Dual(y, (y - square(y)) * a.tangent);
}

Dual sin(const Dual& a) {
  Var y = sin(a.value);
  if (!a.has_tangent()) return Dual(y);
  return Dual(y, cos(a.value) * a.tangent);
}

Dual cos(const Dual& a) {
  Var y = cos(a.value);
  if (!a.has_tangent()) return Dual(y);
  return Dual(y, -(sin(a.value) * a.tangent));
}

Dual exp(const Dual& a) {
  Var y = exp(a.value);
  if (!a.has_tangent()) return Dual(y);
  return Dual(y, y * a.tangent);
}

Dual relu(const Dual& a) {
  Var y = relu(a.value);
  if (!a.has_tangent()) return Dual(y);
  Matrix step = (a.value.value().array() > 0.0).cast<double>().matrix();
  return Dual(y, a.value.tape().constant(std::move(step)) * a.tangent);
}

Dual square(const Dual& a) {
  Var y = square(a.value);
  if (!a.has_tangent()) return Dual(y);
  return Dual(y, 2.0 * (a.value * a.tangent));
}

Dual rows(const Dual& a, Eigen::Index start, Eigen::Index count) {
  return Dual(rows(a.value, start, count), a.has_tangent() ? rows(a.tangent, start, count) : Var());
}

Dual concat_rows(const std::vector<Dual>& parts) {
  std::vector<Var> values;
  std::vector<Var> tangents;
  bool any = false;
  for (const Dual& p : parts) {
    values.push_back(p.value);
    any = any || p.has_tangent();
  }
  Var v = concat_rows(values);
  if (!any) return Dual(v);
  for (const Dual& p : parts) {
    tangents.push_back(p.has_tangent() ? p.tangent : v.tape().zeros(p.value.rows(), p.value.cols()));
  }
  return Dual(v, concat_rows(tangents));
}

Var directional_derivative(const Dual& output, const Var& input) {
  Tape& t = tape_of(input);
  const auto& seeds = t.seeds();
  if (seeds.size() > 1) throw AmbiguousSeed("directional_derivative: more than one input carries a tangent");
  if (seeds.empty() || seeds.front() != input.id()) {
    throw AmbiguousSeed("directional_derivative: input is not the seeded variable");
  }
  if (!output.has_tangent()) return t.zeros(output.value.rows(), output.value.cols());
  return output.tangent;
}

Var jacobian(const std::function<Dual(const Dual&)>& f, const Var& x) {
  if (x.cols() != 1) throw DimensionError("jacobian: input must be a column vector");
  Tape& t = tape_of(x);
  const Eigen::Index d = x.rows();
  Dual batched(replicate_cols(x, d), t.constant(Matrix::Identity(d, d)));
  Dual y = f(batched);
  if (y.value.cols() != d) throw DimensionError("jacobian: map must preserve the column batch");
  if (!y.has_tangent()) return t.zeros(y.value.rows(), d);
  return y.tangent;
}

std::vector<Matrix> grad(const Var& loss, std::span<Parameter* const> params) {
  Tape& t = tape_of(loss);
  for (const Parameter* p : params) {
    if (!t.has_param(*p)) throw RegistryError("parameter '" + p->name + "' is not registered on this tape");
  }
  t.backward(loss);
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(t.gradient(*p));
  return out;
}

}  // namespace epiforge::ad

#include "pns/autodiff.hpp"

#include <cmath>

#include "pns/errors.hpp"
#include "pns/params.hpp"

namespace pns::nn {

namespace {

constexpr double kMaskedLogit = -1e9;

void check(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

}  // namespace

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const ParamStore& store, int index) {
  if (store_ != &store) {
    store_ = &store;
    param_nodes_.assign(store.size(), -1);
  }
  if (param_nodes_[index] >= 0) return {this, param_nodes_[index]};
  Node n;
  n.external = &store[index].value;
  n.requires_grad = true;
  n.param_index = index;
  nodes_.push_back(std::move(n));
  param_nodes_[index] = static_cast<int>(nodes_.size()) - 1;
  return {this, param_nodes_[index]};
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Pullback pullback) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) n.requires_grad = n.requires_grad || requires_grad(v.id());
  if (n.requires_grad) n.pullback = std::move(pullback);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Matrix value, const std::vector<Var>& inputs, Pullback pullback) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) n.requires_grad = n.requires_grad || requires_grad(v.id());
  if (n.requires_grad) n.pullback = std::move(pullback);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    const Matrix& v = value(id);
    n.grad.setZero(v.rows(), v.cols());
    n.has_grad = true;
  }
  return n.grad;
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) throw Error("node has no gradient");
  return n.grad;
}

void Tape::backward(Var root) {
  check(root.rows() == 1 && root.cols() == 1, "backward root must be a scalar");
  grad(root.id())(0, 0) += 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.pullback) n.pullback(*this, id);
  }
}

void Tape::accumulate(GradBuffer& out) const {
  for (const Node& n : nodes_) {
    if (n.param_index >= 0 && n.has_grad) out[n.param_index] += n.grad;
  }
}

Var matmul(Var a, Var b) {
  check(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tape& t = a.tape();
  return t.push(a.value() * b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()).noalias() += g * b.value().transpose();
    if (t.requires_grad(b.id())) t.grad(b.id()).noalias() += a.value().transpose() * g;
  });
}

Var linear(Var x, Var w, Var b) {
  check(x.cols() == w.rows(), "linear: input width differs from weight rows");
  check(b.rows() == 1 && b.cols() == w.cols(), "linear: bias shape");
  Matrix y = x.value() * w.value();
  y.rowwise() += b.value().row(0);
  Tape& t = x.tape();
  return t.push(std::move(y), {x, w, b}, [x, w, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(x.id())) t.grad(x.id()).noalias() += g * w.value().transpose();
    if (t.requires_grad(w.id())) t.grad(w.id()).noalias() += x.value().transpose() * g;
    if (t.requires_grad(b.id())) t.grad(b.id()) += g.colwise().sum();
  });
}

Var add(Var a, Var b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add: shapes differ");
  Tape& t = a.tape();
  return t.push(a.value() + b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()) += g;
    if (t.requires_grad(b.id())) t.grad(b.id()) += g;
  });
}

Var sub(Var a, Var b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shapes differ");
  Tape& t = a.tape();
  return t.push(a.value() - b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()) += g;
    if (t.requires_grad(b.id())) t.grad(b.id()) -= g;
  });
}

Var mul(Var a, Var b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shapes differ");
  Tape& t = a.tape();
  return t.push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()) += g.cwiseProduct(b.value());
    if (t.requires_grad(b.id())) t.grad(b.id()) += g.cwiseProduct(a.value());
  });
}

Var scale(Var a, double s) {
  Tape& t = a.tape();
  return t.push(a.value() * s, {a}, [a, s](Tape& t, int self) {
    t.grad(a.id()) += s * t.grad(self);
  });
}

Var add_row(Var a, Var row) {
  check(row.rows() == 1 && row.cols() == a.cols(), "add_row: row shape");
  Matrix y = a.value();
  y.rowwise() += row.value().row(0);
  Tape& t = a.tape();
  return t.push(std::move(y), {a, row}, [a, row](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()) += g;
    if (t.requires_grad(row.id())) t.grad(row.id()) += g.colwise().sum();
  });
}

void Tape::note_branch(std::uint64_t value) {
  // splitmix64-style mixing keeps the signature order sensitive.
  std::uint64_t z = branch_hash_ ^ (value + 0x9e3779b97f4a7c15ULL + (branch_hash_ << 6));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  branch_hash_ = z ^ (z >> 31);
}

void Tape::note_signs(const Matrix& m) {
  std::uint64_t word = 0;
  int bits = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    word = (word << 2) | (v > 0.0 ? 1u : (v < 0.0 ? 2u : 0u));
    if (++bits == 32) {
      note_branch(word);
      word = 0;
      bits = 0;
    }
  }
  note_branch(word ^ static_cast<std::uint64_t>(m.size()));
}

Var relu(Var a) {
  Tape& t = a.tape();
  t.note_signs(a.value());
  return t.push(a.value().cwiseMax(0.0), {a}, [a](Tape& t, int self) {
    t.grad(a.id()) += (a.value().array() > 0.0).cast<double>().matrix().cwiseProduct(t.grad(self));
  });
}

Var sigmoid(Var a) {
  Tape& t = a.tape();
  Matrix y = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  return t.push(std::move(y), {a}, [a](Tape& t, int self) {
    const auto y = t.value(self).array();
    t.grad(a.id()).array() += t.grad(self).array() * y * (1.0 - y);
  });
}

Var tanh(Var a) {
  Tape& t = a.tape();
  return t.push(a.value().array().tanh().matrix(), {a}, [a](Tape& t, int self) {
    const auto y = t.value(self).array();
    t.grad(a.id()).array() += t.grad(self).array() * (1.0 - y * y);
  });
}

Var elu_plus_one(Var a, double eps) {
  Tape& t = a.tape();
  const auto x = a.value().array();
  Matrix y = ((x > 0.0).select(x, x.exp() - 1.0) + 1.0 + eps).matrix();
  return t.push(std::move(y), {a}, [a](Tape& t, int self) {
    const auto x = a.value().array();
    t.grad(a.id()).array() += t.grad(self).array() * (x > 0.0).select(1.0, x.exp());
  });
}

Var sum(Var a) {
  Tape& t = a.tape();
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return t.push(std::move(y), {a}, [a](Tape& t, int self) {
    t.grad(a.id()).array() += t.grad(self)(0, 0);
  });
}

Var transpose(Var a) {
  Tape& t = a.tape();
  return t.push(a.value().transpose(), {a}, [a](Tape& t, int self) {
    t.grad(a.id()) += t.grad(self).transpose();
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols: no parts");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  Tape& t = parts.front().tape();
  for (const Var& p : parts) {
    check(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    y.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.push(std::move(y), parts, [parts](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index c = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p.id())) t.grad(p.id()) += g.middleCols(c, p.cols());
      c += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_rows: no parts");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  Tape& t = parts.front().tape();
  for (const Var& p : parts) {
    check(p.cols() == cols, "concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix y(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.push(std::move(y), parts, [parts](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index r = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p.id())) t.grad(p.id()) += g.middleRows(r, p.rows());
      r += p.rows();
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  check(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: out of range");
  Tape& t = a.tape();
  return t.push(a.value().middleRows(start, count), {a}, [a, start, count](Tape& t, int self) {
    t.grad(a.id()).middleRows(start, count) += t.grad(self);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  check(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  Tape& t = a.tape();
  return t.push(a.value().middleCols(start, count), {a}, [a, start, count](Tape& t, int self) {
    t.grad(a.id()).middleCols(start, count) += t.grad(self);
  });
}

Var gather_rows(Var a, const std::vector<int>& index) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0) continue;
    check(index[i] < a.rows(), "gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  Tape& t = a.tape();
  return t.push(std::move(y), {a}, [a, index](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id());
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] >= 0) ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var repeat_rows(Var row, Eigen::Index count) {
  check(row.rows() == 1, "repeat_rows: expects a single row");
  Tape& t = row.tape();
  return t.push(row.value().replicate(count, 1), {row}, [row](Tape& t, int self) {
    t.grad(row.id()) += t.grad(self).colwise().sum();
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  check(rows * cols == a.value().size(), "reshape: element count differs");
  Tape& t = a.tape();
  Matrix y = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return t.push(std::move(y), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.grad(a.id()) += Eigen::Map<const Matrix>(g.data(), a.rows(), a.cols());
  });
}

Var mask_rows(Var a, const Mask& mask) {
  check(static_cast<Eigen::Index>(mask.size()) == a.rows(), "mask_rows: mask length");
  Eigen::VectorXd m(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) m(i) = mask[i] ? 1.0 : 0.0;
  Tape& t = a.tape();
  return t.push(m.asDiagonal() * a.value(), {a}, [a, m](Tape& t, int self) {
    t.grad(a.id()) += m.asDiagonal() * t.grad(self);
  });
}

namespace {

// Row-wise softmax with a row-major (rows x cols) mask; fully masked rows
// become zero.
Matrix masked_softmax_values(const Matrix& logits, const Mask& mask) {
  Matrix y = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    bool any = false;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const bool on = mask.empty() || mask[r * logits.cols() + c];
      const double v = on ? logits(r, c) : logits(r, c) + kMaskedLogit;
      any = any || on;
      mx = std::max(mx, v);
    }
    if (!any) continue;
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const bool on = mask.empty() || mask[r * logits.cols() + c];
      const double v = on ? logits(r, c) : logits(r, c) + kMaskedLogit;
      y(r, c) = std::exp(v - mx);
      z += y(r, c);
    }
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const bool on = mask.empty() || mask[r * logits.cols() + c];
      y(r, c) = on ? y(r, c) / z : 0.0;
    }
  }
  return y;
}

Var softmax_node(Var logits, Matrix y) {
  Tape& t = logits.tape();
  return t.push(std::move(y), {logits}, [logits](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const Eigen::VectorXd dot = (g.cwiseProduct(y)).rowwise().sum();
    Matrix d = y.cwiseProduct(g);
    d -= dot.asDiagonal() * y;
    t.grad(logits.id()) += d;
  });
}

}  // namespace

Var softmax_rows(Var logits, const Mask& column_mask) {
  const Eigen::Index rows = logits.rows(), cols = logits.cols();
  Mask full;
  if (!column_mask.empty()) {
    check(static_cast<Eigen::Index>(column_mask.size()) == cols, "softmax_rows: mask length");
    bool any = false;
    for (auto m : column_mask) any = any || m;
    if (!any) throw AllMasked("softmax: every entry is masked");
    full.resize(static_cast<std::size_t>(rows * cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) full[r * cols + c] = column_mask[c];
    }
  } else if (cols == 0) {
    throw AllMasked("softmax: no entries");
  }
  return softmax_node(logits, masked_softmax_values(logits.value(), full));
}

Var softmax_rows_masked(Var logits, const Mask& mask) {
  check(static_cast<Eigen::Index>(mask.size()) == logits.rows() * logits.cols(),
        "softmax_rows_masked: mask size");
  return softmax_node(logits, masked_softmax_values(logits.value(), mask));
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits, const Mask& mask) {
  if (!mask.empty()) check(mask.size() == static_cast<std::size_t>(logits.size()), "softmax: mask length");
  bool any = mask.empty() ? logits.size() > 0 : false;
  for (auto m : mask) any = any || m;
  if (!any) throw AllMasked("softmax: every entry is masked");
  Matrix row = logits.transpose();
  return masked_softmax_values(row, mask).transpose();
}

}  // namespace pns::nn

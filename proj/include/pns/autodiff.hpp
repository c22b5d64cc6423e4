#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pns::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Mask = std::vector<std::uint8_t>;

class Tape;
class ParamStore;
class GradBuffer;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  int id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode recorder. Nodes are appended in evaluation order; backward()
// walks them in reverse, calling each node's pullback once its gradient has
// been fully accumulated.
class Tape {
 public:
  using Pullback = std::function<void(Tape&, int self)>;

  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // A differentiable input that is not a parameter (gradient checks, tests).
  Var leaf(Matrix value);
  // Parameter node referencing the store's storage; created once per tape.
  Var param(const ParamStore& store, int index);

  // Appends an op node. requires_grad is inferred from the listed inputs.
  Var push(Matrix value, std::initializer_list<Var> inputs, Pullback pullback);
  Var push(Matrix value, const std::vector<Var>& inputs, Pullback pullback);

  const Matrix& value(int id) const {
    const auto& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient accumulator of a node, zero-initialized on first access.
  Matrix& grad(int id);
  const Matrix& grad(Var v) const;
  bool has_grad(int id) const { return nodes_[id].has_grad; }

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(Var root);

  // Adds the parameter gradients gathered by backward() into out.
  void accumulate(GradBuffer& out) const;

  std::size_t size() const { return nodes_.size(); }

  // Running hash of the branch taken at every non-smooth point (ReLU signs,
  // absolute values, clamps, discrete selections). Two evaluations with the
  // same signature lie on the same smooth piece of the function.
  void note_branch(std::uint64_t value);
  void note_signs(const Matrix& m);
  std::uint64_t branch_signature() const { return branch_hash_; }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    int param_index = -1;
    Pullback pullback;
  };
  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;
  const ParamStore* store_ = nullptr;
  std::uint64_t branch_hash_ = 0x9e3779b97f4a7c15ULL;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

// ---- primitive ops -------------------------------------------------------

Var matmul(Var a, Var b);
// x * W + b with b broadcast over rows.
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// Adds a 1 x cols row to every row of a.
Var add_row(Var a, Var row);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
// ELU(a) + 1 + eps; strictly greater than eps everywhere.
Var elu_plus_one(Var a, double eps);
Var sum(Var a);
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
// Row i of the result is row index[i] of a, or zeros when index[i] < 0.
Var gather_rows(Var a, const std::vector<int>& index);
// Stacks count copies of a 1 x cols row.
Var repeat_rows(Var row, Eigen::Index count);
// Column-major reshape (Eigen storage order).
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
// Multiplies row i by mask[i] (0 or 1).
Var mask_rows(Var a, const Mask& mask);

// Row-wise softmax. mask has one entry per column (shared by all rows) or is
// empty. Masked logits receive an additive -1e9 and their probabilities are
// then set to exactly 0. Throws AllMasked when no column survives.
Var softmax_rows(Var logits, const Mask& column_mask = {});
// Same, with an independent mask per row, laid out row-major (rows x cols).
// A fully masked row yields an all-zero row instead of throwing.
Var softmax_rows_masked(Var logits, const Mask& mask);

// Value-level masked softmax of a single vector; throws AllMasked.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits, const Mask& mask = {});

}  // namespace pns::nn

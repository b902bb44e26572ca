#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "mtl/tensor.hpp"

namespace mtl {

using ParamId = int;

enum class Op {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,
  kAddBias,
  kMatMul,
  kLeakyRelu,
  kClampMin,
  kTanh,
  kLog,
  kExp,
  kAbs,
  kSum,
  kMean,
  kSoftmaxCrossEntropy,
  kL1Loss,
  kDetach,
};

const char* op_name(Op op);

class Tape;

/// Handle to a node recorded on a tape. Cheap to copy; only valid while its
/// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  const Tensor& value() const;
  double item() const { return value().item(); }
  const Shape& shape() const { return value().shape(); }
  std::size_t index() const { return index_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

/// Gradients of a scalar loss with respect to every parameter leaf on a tape.
class Gradients {
 public:
  const Tensor& operator[](ParamId id) const;
  bool contains(ParamId id) const { return grads_.count(id) != 0; }
  std::size_t size() const { return grads_.size(); }
  const std::map<ParamId, Tensor>& all() const { return grads_; }

 private:
  friend class Tape;
  std::map<ParamId, Tensor> grads_;
};

/// Append-only record of a computation for reverse-mode differentiation.
///
/// Nodes are stored in creation order, so every parent index is smaller than
/// the index of its child and a single reverse sweep is a valid topological
/// traversal. A tape is single-threaded; distinct tapes share no state.
class Tape {
 public:
  struct Node {
    Op op = Op::kLeaf;
    std::array<std::ptrdiff_t, 2> parents{-1, -1};
    Tensor value;
    double attr = 0.0;         // slope, scale factor or clamp bound
    Matrix cache;              // softmax probabilities for cross entropy
    std::vector<int> labels;   // class indices for cross entropy
    ParamId param = -1;        // >= 0 for parameter leaves
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a trainable leaf. Each id may be registered once per tape.
  Var parameter(ParamId id, Tensor value);
  /// Records a leaf that receives no gradient.
  Var constant(Tensor value);

  /// Reverse sweep from a scalar loss. Parameters the loss does not reach get
  /// zero gradients of matching shape.
  Gradients backward(Var loss) const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::span<const std::size_t> parameter_nodes() const { return param_nodes_; }

  // Used by the operator free functions.
  Var record(Node node);
  void check_owned(Var v, const char* op) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::size_t> param_nodes_;
  std::map<ParamId, std::size_t> param_index_;
};

// Elementwise binary ops require identical element layout.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
/// x [n, k] plus a bias row [1, k] or [k] added to every row.
Var add_bias(Var x, Var bias);
Var matmul(Var a, Var b);
/// Subgradient at 0 is taken from the positive side (1).
Var leaky_relu(Var x, double slope);
/// max(x, lower); gradient 1 where x >= lower, 0 below.
Var clamp_min(Var x, double lower);
Var tanh(Var x);
Var log(Var x);
Var exp(Var x);
/// Subgradient at 0 is taken from the positive side (+1).
Var abs(Var x);
Var sum(Var x);
Var mean(Var x);
/// Cross entropy of softmax(logits) against a class index. logits has shape
/// [C] or [1, C].
Var softmax_cross_entropy(Var logits, int class_index);
/// Mean over rows of the per-row cross entropy for logits [n, C].
Var softmax_cross_entropy(Var logits, std::span<const int> class_indices);
/// Mean absolute error.
Var l1_loss(Var pred, Var target);
/// Value pass-through that blocks gradient flow (stop-gradient).
Var detach(Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }

}  // namespace mtl

#include "mtl/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtl {

namespace {

using Node = Tape::Node;

Tape* common_tape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
  a.tape()->check_owned(a, op);
  a.tape()->check_owned(b, op);
  return a.tape();
}

Tape* tape_of(Var a, const char* op) {
  if (a.tape() == nullptr) throw std::invalid_argument(std::string(op) + ": operand is not on a tape");
  a.tape()->check_owned(a, op);
  return a.tape();
}

void require_same_layout(Var a, Var b, const char* op) {
  if (!same_shape(a.value(), b.value())) throw ShapeError(op, a.shape(), b.shape());
}

Node make_node(Op op, Var a, Tensor value) {
  Node n;
  n.op = op;
  n.parents = {static_cast<std::ptrdiff_t>(a.index()), -1};
  n.value = std::move(value);
  return n;
}

Node make_node(Op op, Var a, Var b, Tensor value) {
  Node n = make_node(op, a, std::move(value));
  n.parents[1] = static_cast<std::ptrdiff_t>(b.index());
  return n;
}

// Elementwise map keeping the operand's shape.
template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.shape());
  out.matrix() = x.matrix().unaryExpr(f);
  return out;
}

// Left-to-right accumulation, independent of vectorisation choices.
double ordered_sum(const Matrix& m) {
  double s = 0.0;
  const double* p = m.data();
  for (Index i = 0; i < m.size(); ++i) s += p[i];
  return s;
}

Var unary(Op op, Var x, Tensor value, double attr = 0.0) {
  Tape* tape = tape_of(x, op_name(op));
  Node n = make_node(op, x, std::move(value));
  n.attr = attr;
  return tape->record(std::move(n));
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kScale: return "scale";
    case Op::kAddBias: return "add_bias";
    case Op::kMatMul: return "matmul";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kClampMin: return "clamp_min";
    case Op::kTanh: return "tanh";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kAbs: return "abs";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case Op::kL1Loss: return "l1_loss";
    case Op::kDetach: return "detach";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("Var is not attached to a tape");
  return tape_->node(index_).value;
}

const Tensor& Gradients::operator[](ParamId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw std::out_of_range("no gradient for parameter id " + std::to_string(id));
  return it->second;
}

Var Tape::record(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v, const char* op) const {
  if (v.tape() != this || v.index() >= nodes_.size()) {
    throw std::invalid_argument(std::string(op) + ": variable does not belong to this tape");
  }
}

Var Tape::parameter(ParamId id, Tensor value) {
  if (id < 0) throw std::invalid_argument("parameter ids must be non-negative");
  if (param_index_.count(id)) {
    throw std::invalid_argument("parameter id " + std::to_string(id) + " already registered on this tape");
  }
  Node n;
  n.value = std::move(value);
  n.param = id;
  Var v = record(std::move(n));
  param_nodes_.push_back(v.index());
  param_index_[id] = v.index();
  return v;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return record(std::move(n));
}

Gradients Tape::backward(Var loss) const {
  check_owned(loss, "backward");
  if (!loss.value().is_scalar()) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  }

  const std::size_t root = loss.index();
  std::vector<Matrix> adj(root + 1);
  std::vector<bool> reached(root + 1, false);
  adj[root] = Matrix::Ones(1, 1);
  reached[root] = true;

  auto accumulate = [&](std::ptrdiff_t parent, const Matrix& contribution) {
    auto p = static_cast<std::size_t>(parent);
    if (!reached[p]) {
      adj[p] = contribution;
      reached[p] = true;
    } else {
      adj[p] += contribution;
    }
  };

  for (std::size_t k = root + 1; k-- > 0;) {
    if (!reached[k]) continue;
    const Node& n = nodes_[k];
    const Matrix& g = adj[k];
    const auto p0 = n.parents[0];
    const auto p1 = n.parents[1];
    const Matrix* x0 = p0 >= 0 ? &nodes_[p0].value.matrix() : nullptr;
    const Matrix* x1 = p1 >= 0 ? &nodes_[p1].value.matrix() : nullptr;
    const Matrix& y = n.value.matrix();

    switch (n.op) {
      case Op::kLeaf:
      case Op::kDetach:
        break;
      case Op::kAdd:
        accumulate(p0, g);
        accumulate(p1, g);
        break;
      case Op::kSub:
        accumulate(p0, g);
        accumulate(p1, -g);
        break;
      case Op::kMul:
        accumulate(p0, g.cwiseProduct(*x1));
        accumulate(p1, g.cwiseProduct(*x0));
        break;
      case Op::kDiv:
        accumulate(p0, g.cwiseQuotient(*x1));
        accumulate(p1, -g.cwiseProduct(*x0).cwiseQuotient(x1->cwiseProduct(*x1)));
        break;
      case Op::kNeg:
        accumulate(p0, -g);
        break;
      case Op::kScale:
        accumulate(p0, n.attr * g);
        break;
      case Op::kAddBias: {
        accumulate(p0, g);
        Matrix db(1, g.cols());
        for (Index c = 0; c < g.cols(); ++c) {
          double s = 0.0;
          for (Index r = 0; r < g.rows(); ++r) s += g(r, c);
          db(0, c) = s;
        }
        accumulate(p1, db);
        break;
      }
      case Op::kMatMul:
        accumulate(p0, g * x1->transpose());
        accumulate(p1, x0->transpose() * g);
        break;
      case Op::kLeakyRelu: {
        const double slope = n.attr;
        accumulate(p0, g.binaryExpr(*x0, [slope](double gi, double xi) { return xi >= 0.0 ? gi : slope * gi; }));
        break;
      }
      case Op::kClampMin: {
        const double lower = n.attr;
        accumulate(p0, g.binaryExpr(*x0, [lower](double gi, double xi) { return xi >= lower ? gi : 0.0; }));
        break;
      }
      case Op::kTanh:
        accumulate(p0, g.binaryExpr(y, [](double gi, double yi) { return gi * (1.0 - yi * yi); }));
        break;
      case Op::kLog:
        accumulate(p0, g.cwiseQuotient(*x0));
        break;
      case Op::kExp:
        accumulate(p0, g.cwiseProduct(y));
        break;
      case Op::kAbs:
        accumulate(p0, g.binaryExpr(*x0, [](double gi, double xi) { return xi >= 0.0 ? gi : -gi; }));
        break;
      case Op::kSum:
        accumulate(p0, Matrix::Constant(x0->rows(), x0->cols(), g(0, 0)));
        break;
      case Op::kMean:
        accumulate(p0, Matrix::Constant(x0->rows(), x0->cols(), g(0, 0) / static_cast<double>(x0->size())));
        break;
      case Op::kSoftmaxCrossEntropy: {
        Matrix d = n.cache;
        for (Index r = 0; r < d.rows(); ++r) d(r, n.labels[r]) -= 1.0;
        accumulate(p0, d * (g(0, 0) / static_cast<double>(d.rows())));
        break;
      }
      case Op::kL1Loss: {
        const double w = g(0, 0) / static_cast<double>(x0->size());
        Matrix s = x0->binaryExpr(*x1, [w](double p, double t) { return p - t >= 0.0 ? w : -w; });
        accumulate(p1, -s);
        accumulate(p0, s);
        break;
      }
    }
  }

  Gradients out;
  for (std::size_t idx : param_nodes_) {
    const Node& n = nodes_[idx];
    Tensor grad = Tensor::zeros_like(n.value);
    if (idx <= root && reached[idx]) grad.matrix() = adj[idx];
    out.grads_.emplace(n.param, std::move(grad));
  }
  return out;
}

Var add(Var a, Var b) {
  Tape* t = common_tape(a, b, "add");
  require_same_layout(a, b, "add");
  Tensor v(a.shape());
  v.matrix() = a.value().matrix() + b.value().matrix();
  return t->record(make_node(Op::kAdd, a, b, std::move(v)));
}

Var sub(Var a, Var b) {
  Tape* t = common_tape(a, b, "sub");
  require_same_layout(a, b, "sub");
  Tensor v(a.shape());
  v.matrix() = a.value().matrix() - b.value().matrix();
  return t->record(make_node(Op::kSub, a, b, std::move(v)));
}

Var mul(Var a, Var b) {
  Tape* t = common_tape(a, b, "mul");
  require_same_layout(a, b, "mul");
  Tensor v(a.shape());
  v.matrix() = a.value().matrix().cwiseProduct(b.value().matrix());
  return t->record(make_node(Op::kMul, a, b, std::move(v)));
}

Var div(Var a, Var b) {
  Tape* t = common_tape(a, b, "div");
  require_same_layout(a, b, "div");
  Tensor v(a.shape());
  v.matrix() = a.value().matrix().cwiseQuotient(b.value().matrix());
  return t->record(make_node(Op::kDiv, a, b, std::move(v)));
}

Var neg(Var a) { return unary(Op::kNeg, a, map_values(a.value(), [](double x) { return -x; })); }

Var scale(Var a, double factor) {
  return unary(Op::kScale, a, map_values(a.value(), [factor](double x) { return factor * x; }), factor);
}

Var add_bias(Var x, Var bias) {
  Tape* t = common_tape(x, bias, "add_bias");
  const Matrix& xm = x.value().matrix();
  const Matrix& bm = bias.value().matrix();
  if (bm.rows() != 1 || bm.cols() != xm.cols()) throw ShapeError("add_bias", x.shape(), bias.shape());
  Tensor v(x.shape());
  v.matrix() = xm.rowwise() + bm.row(0);
  return t->record(make_node(Op::kAddBias, x, bias, std::move(v)));
}

Var matmul(Var a, Var b) {
  Tape* t = common_tape(a, b, "matmul");
  const Matrix& am = a.value().matrix();
  const Matrix& bm = b.value().matrix();
  if (am.cols() != bm.rows()) throw ShapeError("matmul", a.shape(), b.shape());
  return t->record(make_node(Op::kMatMul, a, b, Tensor(Matrix(am * bm))));
}

Var leaky_relu(Var x, double slope) {
  return unary(Op::kLeakyRelu, x, map_values(x.value(), [slope](double v) { return v >= 0.0 ? v : slope * v; }), slope);
}

Var clamp_min(Var x, double lower) {
  return unary(Op::kClampMin, x, map_values(x.value(), [lower](double v) { return v >= lower ? v : lower; }), lower);
}

Var tanh(Var x) { return unary(Op::kTanh, x, map_values(x.value(), [](double v) { return std::tanh(v); })); }
Var log(Var x) { return unary(Op::kLog, x, map_values(x.value(), [](double v) { return std::log(v); })); }
Var exp(Var x) { return unary(Op::kExp, x, map_values(x.value(), [](double v) { return std::exp(v); })); }
Var abs(Var x) { return unary(Op::kAbs, x, map_values(x.value(), [](double v) { return std::fabs(v); })); }

Var sum(Var x) { return unary(Op::kSum, x, Tensor::scalar(ordered_sum(x.value().matrix()))); }

Var mean(Var x) {
  const Matrix& m = x.value().matrix();
  return unary(Op::kMean, x, Tensor::scalar(ordered_sum(m) / static_cast<double>(m.size())));
}

Var softmax_cross_entropy(Var logits, int class_index) {
  const int labels[] = {class_index};
  return softmax_cross_entropy(logits, std::span<const int>(labels));
}

Var softmax_cross_entropy(Var logits, std::span<const int> class_indices) {
  Tape* t = tape_of(logits, "softmax_cross_entropy");
  const Matrix& z = logits.value().matrix();
  if (static_cast<Index>(class_indices.size()) != z.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(class_indices.size()) + " labels for logits of shape " +
                     shape_string(logits.shape()));
  }
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const int label = class_indices[r];
    if (label < 0 || label >= z.cols()) {
      throw std::out_of_range("softmax_cross_entropy: class index " + std::to_string(label) + " outside [0, " +
                              std::to_string(z.cols()) + ")");
    }
    const double zmax = z.row(r).maxCoeff();
    double denom = 0.0;
    for (Index c = 0; c < z.cols(); ++c) {
      probs(r, c) = std::exp(z(r, c) - zmax);
      denom += probs(r, c);
    }
    probs.row(r) /= denom;
    total += std::log(denom) + zmax - z(r, label);
  }
  Node n = make_node(Op::kSoftmaxCrossEntropy, logits, Tensor::scalar(total / static_cast<double>(z.rows())));
  n.cache = std::move(probs);
  n.labels.assign(class_indices.begin(), class_indices.end());
  return t->record(std::move(n));
}

Var l1_loss(Var pred, Var target) {
  Tape* t = common_tape(pred, target, "l1_loss");
  require_same_layout(pred, target, "l1_loss");
  const Matrix diff = (pred.value().matrix() - target.value().matrix()).cwiseAbs();
  return t->record(
      make_node(Op::kL1Loss, pred, target, Tensor::scalar(ordered_sum(diff) / static_cast<double>(diff.size()))));
}

Var detach(Var x) { return unary(Op::kDetach, x, x.value()); }

}  // namespace mtl

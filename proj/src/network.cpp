#include "mtl/network.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mtl/random.hpp"

namespace mtl {

namespace {

Matrix leaky(const Matrix& x, double slope) {
  return x.unaryExpr([slope](double v) { return v >= 0.0 ? v : slope * v; });
}

void check_widths(const std::vector<Index>& widths, const char* what) {
  if (widths.size() < 2) throw std::invalid_argument(std::string(what) + " needs at least an input and an output width");
  for (Index w : widths) {
    if (w < 1) throw std::invalid_argument(std::string(what) + " widths must be >= 1");
  }
}

}  // namespace

HydraNet HydraNet::build(const HydraSpec& spec, std::uint64_t seed) {
  check_widths(spec.backbone, "backbone");
  if (spec.heads.empty()) throw std::invalid_argument("a hydra network needs at least one head");

  HydraNet net;
  net.spec_ = spec;
  Rng rng(seed);

  auto add_layer = [&](Index in, Index out, Partition p) {
    DenseLayer layer;
    const double a = std::sqrt(1.0 / static_cast<double>(in));
    layer.weight.resize(in, out);
    layer.bias.resize(1, out);
    for (Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = rng.uniform(-a, a);
    for (Index i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = rng.uniform(-a, a);
    net.layer_offset_.push_back(net.total_params_);
    net.total_params_ += layer.parameter_count();
    net.layers_.push_back(std::move(layer));
    net.layer_partition_.push_back(p);
    return net.layers_.size() - 1;
  };

  for (std::size_t l = 0; l + 1 < spec.backbone.size(); ++l) {
    net.backbone_layers_.push_back(add_layer(spec.backbone[l], spec.backbone[l + 1], Partition::backbone()));
  }
  for (std::size_t t = 0; t < spec.heads.size(); ++t) {
    const auto& widths = spec.heads[t];
    check_widths(widths, "head");
    if (widths.front() != spec.backbone.back()) {
      throw ShapeError("head " + std::to_string(t + 1) + " input width " + std::to_string(widths.front()) +
                       " does not match backbone output width " + std::to_string(spec.backbone.back()));
    }
    std::vector<std::size_t> ids;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      ids.push_back(add_layer(widths[l], widths[l + 1], Partition::head(static_cast<int>(t))));
    }
    net.head_layers_.push_back(std::move(ids));
  }
  return net;
}

Segment HydraNet::segment(Partition p) const {
  const std::vector<std::size_t>* ids = nullptr;
  if (p.is_backbone()) {
    ids = &backbone_layers_;
  } else {
    if (p.task < 0 || p.task >= num_tasks()) throw std::out_of_range("invalid task index " + std::to_string(p.task));
    ids = &head_layers_[static_cast<std::size_t>(p.task)];
  }
  Segment s;
  s.offset = layer_offset_[ids->front()];
  for (std::size_t l : *ids) s.length += layers_[l].parameter_count();
  return s;
}

Vector HydraNet::flat() const {
  Vector out(total_params_);
  Index k = 0;
  for (const DenseLayer& layer : layers_) {
    out.segment(k, layer.weight.size()) = Eigen::Map<const Vector>(layer.weight.data(), layer.weight.size());
    k += layer.weight.size();
    out.segment(k, layer.bias.size()) = Eigen::Map<const Vector>(layer.bias.data(), layer.bias.size());
    k += layer.bias.size();
  }
  return out;
}

void HydraNet::set_flat(const Vector& values) {
  if (values.size() != total_params_) {
    throw ShapeError("set_flat: expected " + std::to_string(total_params_) + " values, got " +
                     std::to_string(values.size()));
  }
  Index k = 0;
  for (DenseLayer& layer : layers_) {
    Eigen::Map<Vector>(layer.weight.data(), layer.weight.size()) = values.segment(k, layer.weight.size());
    k += layer.weight.size();
    Eigen::Map<Vector>(layer.bias.data(), layer.bias.size()) = values.segment(k, layer.bias.size());
    k += layer.bias.size();
  }
}

Vector HydraNet::flatten(const Gradients& grads) const {
  Vector out(total_params_);
  Index k = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto wid = static_cast<ParamId>(2 * l);
    const Matrix& gw = grads[wid].matrix();
    const Matrix& gb = grads[wid + 1].matrix();
    out.segment(k, gw.size()) = Eigen::Map<const Vector>(gw.data(), gw.size());
    k += gw.size();
    out.segment(k, gb.size()) = Eigen::Map<const Vector>(gb.data(), gb.size());
    k += gb.size();
  }
  return out;
}

Matrix HydraNet::features(const Matrix& x) const {
  if (x.cols() != input_width()) {
    throw ShapeError("forward", Shape{x.rows(), x.cols()}, Shape{x.rows(), input_width()});
  }
  Matrix h = x;
  for (std::size_t l : backbone_layers_) {
    const DenseLayer& layer = layers_[l];
    h = leaky((h * layer.weight).rowwise() + layer.bias.row(0), spec_.slope);
  }
  return h;
}

std::vector<Matrix> HydraNet::predict(const Matrix& x) const {
  const Matrix h = features(x);
  std::vector<Matrix> outputs;
  outputs.reserve(head_layers_.size());
  for (const auto& ids : head_layers_) {
    Matrix z = h;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const DenseLayer& layer = layers_[ids[k]];
      z = (z * layer.weight).rowwise() + layer.bias.row(0);
      if (k + 1 < ids.size()) z = leaky(z, spec_.slope);
    }
    outputs.push_back(std::move(z));
  }
  return outputs;
}

HydraNet::Bound HydraNet::bind(Tape& tape) const {
  Bound b;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    b.weights.push_back(tape.parameter(static_cast<ParamId>(2 * l), Tensor(layers_[l].weight)));
    b.biases.push_back(tape.parameter(static_cast<ParamId>(2 * l + 1), Tensor(layers_[l].bias)));
  }
  return b;
}

Var HydraNet::features(const Bound& bound, Var x) const {
  if (x.value().cols() != input_width()) {
    throw ShapeError("forward", x.shape(), Shape{x.value().rows(), input_width()});
  }
  Var h = x;
  for (std::size_t l : backbone_layers_) {
    h = leaky_relu(add_bias(matmul(h, bound.weights[l]), bound.biases[l]), spec_.slope);
  }
  return h;
}

std::vector<Var> HydraNet::forward(const Bound& bound, Var x) const {
  const Var h = features(bound, x);
  std::vector<Var> outputs;
  for (const auto& ids : head_layers_) {
    Var z = h;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      z = add_bias(matmul(z, bound.weights[ids[k]]), bound.biases[ids[k]]);
      if (k + 1 < ids.size()) z = leaky_relu(z, spec_.slope);
    }
    outputs.push_back(z);
  }
  return outputs;
}

std::uint64_t HydraNet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const Vector v = flat();
  for (Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

Var task_loss(const TaskDef& task, Var output, const Vector& targets) {
  const Index n = output.value().rows();
  if (targets.size() != n) throw ShapeError("task_loss", output.shape(), Shape{targets.size()});
  if (task.kind == TaskKind::kRegressionL1) {
    if (output.value().cols() != 1) throw ShapeError("task_loss: regression head", output.shape(), Shape{n, 1});
    Tensor t(Shape{n, 1});
    t.matrix().col(0) = targets;
    const Var loss = l1_loss(output, output.tape()->constant(std::move(t)));
    return task.loss_scale == 1.0 ? loss : scale(loss, task.loss_scale);
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(targets[i]);
  const Var loss = softmax_cross_entropy(output, labels);
  return task.loss_scale == 1.0 ? loss : scale(loss, task.loss_scale);
}

double task_metric(const TaskDef& task, const Matrix& output, const Vector& targets) {
  const Index n = output.rows();
  if (targets.size() != n || n == 0) throw ShapeError("task_metric", Shape{output.rows(), output.cols()}, Shape{targets.size()});
  double acc = 0.0;
  if (task.kind == TaskKind::kRegressionL1) {
    for (Index i = 0; i < n; ++i) acc += std::fabs(output(i, 0) - targets[i]);
  } else {
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      output.row(i).maxCoeff(&best);
      if (best == static_cast<Index>(targets[i])) acc += 1.0;
    }
  }
  return acc / static_cast<double>(n);
}

bool higher_is_better(const TaskDef& task) { return task.kind == TaskKind::kClassificationCE; }

std::vector<TaskGradient> task_gradients(const HydraNet& net, const Dataset& batch, std::span<const TaskDef> tasks,
                                         GradientMode mode, std::optional<Index> index) {
  if (batch.size() == 0) throw std::invalid_argument("task_gradients: empty batch");
  if (static_cast<int>(tasks.size()) != net.num_tasks() || batch.num_tasks() != net.num_tasks()) {
    throw std::invalid_argument("task_gradients: task definitions do not match the network's heads");
  }
  const Segment bb = net.segment(Partition::backbone());

  auto extract = [&](const Vector& full, int task, Index sample) {
    const Segment hs = net.segment(Partition::head(task));
    TaskGradient g;
    g.backbone = {full.segment(bb.offset, bb.length), Partition::backbone(), task};
    g.head = {full.segment(hs.offset, hs.length), Partition::head(task), task};
    g.task = task;
    g.sample = sample;
    return g;
  };

  std::vector<TaskGradient> out;
  if (mode == GradientMode::kPerTask) {
    Dataset rows = batch;
    Index sample = -1;
    if (index) {
      if (*index < 0 || *index >= batch.size()) throw std::out_of_range("task_gradients: invalid sample index");
      sample = *index;
      rows = batch.row(sample);
    }
    Tape tape;
    const auto bound = net.bind(tape);
    const auto outputs = net.forward(bound, tape.constant(Tensor(rows.inputs)));
    for (int t = 0; t < net.num_tasks(); ++t) {
      const Var loss = task_loss(tasks[t], outputs[t], rows.targets.col(t));
      out.push_back(extract(net.flatten(tape.backward(loss)), t, sample));
    }
    return out;
  }

  if (!index || *index < 0 || *index >= net.num_tasks()) {
    throw std::out_of_range("task_gradients: per-sample mode needs a valid task index");
  }
  const int t = static_cast<int>(*index);
  for (Index i = 0; i < batch.size(); ++i) {
    const Dataset row = batch.row(i);
    Tape tape;
    const auto bound = net.bind(tape);
    const auto outputs = net.forward(bound, tape.constant(Tensor(row.inputs)));
    const Var loss = task_loss(tasks[t], outputs[t], row.targets.col(t));
    out.push_back(extract(net.flatten(tape.backward(loss)), t, i));
  }
  return out;
}

}  // namespace mtl

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mtl/autodiff.hpp"
#include "mtl/data.hpp"
#include "mtl/flat_grad.hpp"

namespace mtl {

/// Fully connected layer y = x W + b with W of shape [in, out].
struct DenseLayer {
  Matrix weight;
  Matrix bias;  // [1, out]

  Index in() const { return weight.rows(); }
  Index out() const { return weight.cols(); }
  Index parameter_count() const { return weight.size() + bias.size(); }
};

/// Layer widths including the input width, e.g. backbone {1, 20, 20} and a
/// head {20, 20, 1}. Every head's first width must equal the backbone's last.
struct HydraSpec {
  std::vector<Index> backbone;
  std::vector<std::vector<Index>> heads;
  double slope = 0.01;
};

struct Segment {
  Index offset = 0;
  Index length = 0;
};

/// Shared MLP backbone with one MLP head per task.
///
/// Backbone layers apply leaky-ReLU after every layer; heads apply it between
/// layers and keep the output linear. All layers carry biases. Parameters are
/// laid out flat as [backbone | head-1 | ... | head-T], each layer contributing
/// its weight (row-major) followed by its bias.
class HydraNet {
 public:
  /// Uniform(-a, a) initialisation with a = sqrt(1 / fan_in), deterministic in
  /// the seed.
  static HydraNet build(const HydraSpec& spec, std::uint64_t seed);

  int num_tasks() const { return static_cast<int>(head_layers_.size()); }
  Index input_width() const { return spec_.backbone.front(); }
  Index feature_width() const { return spec_.backbone.back(); }
  const HydraSpec& spec() const { return spec_; }
  double slope() const { return spec_.slope; }

  std::span<const DenseLayer> layers() const { return layers_; }
  std::span<DenseLayer> layers() { return layers_; }
  Partition partition_of_layer(std::size_t layer) const { return layer_partition_[layer]; }
  Partition partition_of(ParamId id) const { return layer_partition_[static_cast<std::size_t>(id / 2)]; }

  Index parameter_count() const { return total_params_; }
  Segment segment(Partition p) const;

  Vector flat() const;
  void set_flat(const Vector& values);
  Vector flat(Partition p) const { const Segment s = segment(p); return flat().segment(s.offset, s.length); }

  /// Gradients from a tape, in the flat layout.
  Vector flatten(const Gradients& grads) const;

  /// Plain evaluation without recording.
  Matrix features(const Matrix& x) const;
  std::vector<Matrix> predict(const Matrix& x) const;

  struct Bound {
    std::vector<Var> weights;
    std::vector<Var> biases;
  };
  /// Registers every parameter on the tape; weight of layer l has id 2l and
  /// its bias 2l + 1.
  Bound bind(Tape& tape) const;
  Var features(const Bound& bound, Var x) const;
  std::vector<Var> forward(const Bound& bound, Var x) const;

  /// Order-sensitive hash of every parameter's bit pattern.
  std::uint64_t checksum() const;

 private:
  HydraSpec spec_;
  std::vector<DenseLayer> layers_;
  std::vector<Partition> layer_partition_;
  std::vector<std::size_t> backbone_layers_;
  std::vector<std::vector<std::size_t>> head_layers_;
  std::vector<Index> layer_offset_;
  Index total_params_ = 0;
};

/// Scalar task loss on one head's output: mean L1 for regression, mean
/// softmax cross entropy for classification.
Var task_loss(const TaskDef& task, Var output, const Vector& targets);

/// Mean absolute error (regression) or accuracy (classification).
double task_metric(const TaskDef& task, const Matrix& output, const Vector& targets);
bool higher_is_better(const TaskDef& task);

enum class GradientMode { kPerTask, kPerSample };

struct TaskGradient {
  FlatGrad backbone;
  FlatGrad head;
  int task = -1;
  Index sample = -1;  // -1 when taken over the batch mean
};

/// Backbone and head gradients for the inter-task or inter-sample
/// comparisons.
///
/// kPerTask: one entry per task at the sample `index` (or over the batch mean
/// loss when `index` is empty).
/// kPerSample: one entry per batch row for task `index`.
std::vector<TaskGradient> task_gradients(const HydraNet& net, const Dataset& batch, std::span<const TaskDef> tasks,
                                         GradientMode mode, std::optional<Index> index);

}  // namespace mtl

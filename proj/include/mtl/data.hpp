#pragma once

#include <span>
#include <string>
#include <vector>

#include "mtl/tensor.hpp"

namespace mtl {

enum class TaskKind { kRegressionL1, kClassificationCE };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

/// Output width and loss of one task head.
struct TaskDef {
  TaskKind kind = TaskKind::kRegressionL1;
  int classes = 1;  // output width; 1 for regression
  double loss_scale = 1.0;  // multiplies the training loss; metrics stay in data units

  Index output_width() const { return kind == TaskKind::kRegressionL1 ? 1 : classes; }
};

/// Samples in rows. Column t of `targets` holds task t's regression target or
/// class index (stored as a double).
struct Dataset {
  Matrix inputs;
  Matrix targets;

  Index size() const { return inputs.rows(); }
  Index input_width() const { return inputs.cols(); }
  Index num_tasks() const { return targets.cols(); }

  Dataset rows(std::span<const Index> indices) const;
  Dataset row(Index i) const;
  Dataset slice(Index begin, Index end) const;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

}  // namespace mtl

#include "mtl/optimizers.hpp"

namespace mtl {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kGd: return "gd";
    case OptimizerKind::kSgdMomentum: return "sgd";
    case OptimizerKind::kSignSgdMomentum: return "signsgd";
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kPerTaskAdam: return "per-task-adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "gd") return OptimizerKind::kGd;
  if (name == "sgd" || name == "sgd+mom" || name == "sgd-momentum") return OptimizerKind::kSgdMomentum;
  if (name == "signsgd" || name == "signsgd+mom" || name == "signsgd-momentum") return OptimizerKind::kSignSgdMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "per-task-adam" || name == "pertask-adam" || name == "adam-per-task") return OptimizerKind::kPerTaskAdam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerKind kind, OptimizerHyper hp, Index num_params, int num_tasks) : kind_(kind), hp_(hp) {
  const int copies = kind == OptimizerKind::kPerTaskAdam ? num_tasks : 1;
  if (copies < 1) throw std::invalid_argument("optimizer needs at least one task");
  states_.assign(static_cast<std::size_t>(copies), OptimizerState(num_params));
}

Vector Optimizer::step(Eigen::Ref<Vector> params, const Vector& grad) {
  switch (kind_) {
    case OptimizerKind::kGd: return gd_step<double>(params, grad, hp_.lr);
    case OptimizerKind::kSgdMomentum: return sgd_momentum_step<double>(params, grad, states_[0], hp_);
    case OptimizerKind::kSignSgdMomentum: return signsgd_momentum_step<double>(params, grad, states_[0], hp_);
    case OptimizerKind::kAdam: return adam_step<double>(params, grad, states_[0], hp_);
    case OptimizerKind::kPerTaskAdam:
      if (states_.size() != 1) throw std::invalid_argument("per-task Adam needs per-task gradients");
      return adam_step<double>(params, grad, states_[0], hp_);
  }
  return {};
}

Vector Optimizer::step(Eigen::Ref<Vector> params, std::span<const Vector> task_grads) {
  if (kind_ == OptimizerKind::kPerTaskAdam) {
    return per_task_adam_step<double>(params, task_grads, states_, hp_);
  }
  if (task_grads.empty()) throw std::invalid_argument("optimizer step needs at least one gradient");
  Vector total = task_grads[0];
  for (std::size_t t = 1; t < task_grads.size(); ++t) total += task_grads[t];
  return step(params, total);
}

}  // namespace mtl

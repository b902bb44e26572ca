#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtl/tensor.hpp"

namespace mtl {

struct OptimizerHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;
};

/// Per-parameter accumulators of one optimizer instance. `v` is only used by
/// Adam. `step` counts completed updates.
template <typename Scalar>
struct OptimizerStateT {
  VectorT<Scalar> m;
  VectorT<Scalar> v;
  long step = 0;

  explicit OptimizerStateT(Index n = 0) : m(VectorT<Scalar>::Zero(n)), v(VectorT<Scalar>::Zero(n)) {}
  Index size() const { return m.size(); }
};

using OptimizerState = OptimizerStateT<double>;

namespace detail {

template <typename P, typename G>
void check_sizes(const P& params, const G& grads, const char* op) {
  if (params.size() != grads.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradient entries");
  }
}

template <typename Scalar, typename P>
void check_state(const P& params, OptimizerStateT<Scalar>& state, const char* op) {
  if (state.step == 0 && state.m.size() == 0) state = OptimizerStateT<Scalar>(params.size());
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError(std::string(op) + ": optimizer state size " + std::to_string(state.m.size()) +
                     " does not match " + std::to_string(params.size()) + " parameters");
  }
}

template <typename Scalar>
Scalar sign(Scalar x) {
  return x > Scalar(0) ? Scalar(1) : (x < Scalar(0) ? Scalar(-1) : Scalar(0));
}

}  // namespace detail

// Every step function updates `params` in place and returns the applied
// update (new minus old, as computed before rounding into params).

/// theta <- theta - lr * g
template <typename Scalar>
VectorT<Scalar> gd_step(Eigen::Ref<VectorT<Scalar>> params, const Eigen::Ref<const VectorT<Scalar>>& grads,
                        Scalar lr) {
  detail::check_sizes(params, grads, "gd_step");
  VectorT<Scalar> update = -lr * grads;
  params += update;
  return update;
}

/// Heavy-ball momentum: m <- mu m + g; theta <- theta - lr m.
template <typename Scalar>
VectorT<Scalar> sgd_momentum_step(Eigen::Ref<VectorT<Scalar>> params, const Eigen::Ref<const VectorT<Scalar>>& grads,
                                  OptimizerStateT<Scalar>& state, const OptimizerHyper& hp) {
  detail::check_sizes(params, grads, "sgd_momentum_step");
  detail::check_state(params, state, "sgd_momentum_step");
  state.m = Scalar(hp.momentum) * state.m + grads;
  ++state.step;
  VectorT<Scalar> update = -Scalar(hp.lr) * state.m;
  params += update;
  return update;
}

/// m <- mu m + (1 - mu) g; theta <- theta - lr sign(m), with sign(0) = 0.
template <typename Scalar>
VectorT<Scalar> signsgd_momentum_step(Eigen::Ref<VectorT<Scalar>> params,
                                      const Eigen::Ref<const VectorT<Scalar>>& grads, OptimizerStateT<Scalar>& state,
                                      const OptimizerHyper& hp) {
  detail::check_sizes(params, grads, "signsgd_momentum_step");
  detail::check_state(params, state, "signsgd_momentum_step");
  const Scalar mu(hp.momentum);
  state.m = mu * state.m + (Scalar(1) - mu) * grads;
  ++state.step;
  VectorT<Scalar> update = -Scalar(hp.lr) * state.m.unaryExpr([](Scalar x) { return detail::sign(x); });
  params += update;
  return update;
}

/// Adam update direction for one state without touching parameters. The step
/// counter is incremented before bias correction.
template <typename Scalar>
VectorT<Scalar> adam_update(const Eigen::Ref<const VectorT<Scalar>>& grads, OptimizerStateT<Scalar>& state,
                            const OptimizerHyper& hp) {
  const Scalar b1(hp.beta1);
  const Scalar b2(hp.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * grads;
  state.v = b2 * state.v + (Scalar(1) - b2) * grads.cwiseAbs2();
  ++state.step;
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.step));
  const Scalar lr(hp.lr);
  const Scalar eps(hp.eps);
  VectorT<Scalar> update(grads.size());
  for (Index i = 0; i < grads.size(); ++i) {
    const Scalar m_hat = state.m[i] / c1;
    const Scalar v_hat = state.v[i] / c2;
    const Scalar denom = std::sqrt(v_hat) + eps;
    // With eps = 0 a coordinate that has never seen a gradient takes the
    // eps -> 0+ limit, a zero step.
    update[i] = denom == Scalar(0) ? Scalar(0) : -lr * (m_hat / denom);
  }
  return update;
}

/// theta <- theta - lr m_hat / (sqrt(v_hat) + eps).
template <typename Scalar>
VectorT<Scalar> adam_step(Eigen::Ref<VectorT<Scalar>> params, const Eigen::Ref<const VectorT<Scalar>>& grads,
                          OptimizerStateT<Scalar>& state, const OptimizerHyper& hp) {
  detail::check_sizes(params, grads, "adam_step");
  detail::check_state(params, state, "adam_step");
  VectorT<Scalar> update = adam_update<Scalar>(grads, state, hp);
  params += update;
  return update;
}

/// One Adam state per task. Task t's moments accumulate only g_t; the applied
/// update is the sum of the T preconditioned updates, so shared parameters
/// get every task's contribution and a head (where other tasks' gradients are
/// zero) only its own task's.
template <typename Scalar>
VectorT<Scalar> per_task_adam_step(Eigen::Ref<VectorT<Scalar>> params, std::span<const VectorT<Scalar>> task_grads,
                                   std::span<OptimizerStateT<Scalar>> states, const OptimizerHyper& hp) {
  if (task_grads.size() != states.size() || task_grads.empty()) {
    throw std::invalid_argument("per_task_adam_step: " + std::to_string(task_grads.size()) + " task gradients for " +
                                std::to_string(states.size()) + " optimizer states");
  }
  VectorT<Scalar> update = VectorT<Scalar>::Zero(params.size());
  for (std::size_t t = 0; t < task_grads.size(); ++t) {
    detail::check_sizes(params, task_grads[t], "per_task_adam_step");
    detail::check_state(params, states[t], "per_task_adam_step");
    update += adam_update<Scalar>(task_grads[t], states[t], hp);
  }
  params += update;
  return update;
}

enum class OptimizerKind { kGd, kSgdMomentum, kSignSgdMomentum, kAdam, kPerTaskAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

/// Runtime-selected optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, OptimizerHyper hp, Index num_params, int num_tasks);

  OptimizerKind kind() const { return kind_; }
  const OptimizerHyper& hyper() const { return hp_; }
  bool needs_task_gradients() const { return kind_ == OptimizerKind::kPerTaskAdam; }

  /// Applies one step from the combined gradient.
  Vector step(Eigen::Ref<Vector> params, const Vector& grad);
  /// Applies one step from per-task gradients. Non-per-task optimizers use
  /// their sum in task order.
  Vector step(Eigen::Ref<Vector> params, std::span<const Vector> task_grads);

  std::span<const OptimizerState> states() const { return states_; }

 private:
  OptimizerKind kind_;
  OptimizerHyper hp_;
  std::vector<OptimizerState> states_;
};

}  // namespace mtl

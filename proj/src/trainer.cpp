#include "mtl/trainer.hpp"

#include <numeric>
#include <stdexcept>

namespace mtl {

namespace {

Index trainable_count(const HydraNet& net, const TrainerConfig& c) {
  return net.parameter_count() + (c.weighting == WeightingMethod::kUncertainty ? net.num_tasks() : 0);
}

}  // namespace

Trainer::Trainer(HydraNet net, std::vector<TaskDef> tasks, TrainerConfig config, std::uint64_t seed)
    : net_(std::move(net)),
      tasks_(std::move(tasks)),
      config_(std::move(config)),
      rng_(seed),
      optimizer_(config_.optimizer, config_.hyper, trainable_count(net_, config_), net_.num_tasks()) {
  const auto num_tasks = static_cast<std::size_t>(net_.num_tasks());
  if (tasks_.size() != num_tasks) {
    throw std::invalid_argument("trainer: " + std::to_string(tasks_.size()) + " task definitions for " +
                                std::to_string(num_tasks) + " heads");
  }
  if (!config_.loss_scales.empty() && config_.loss_scales.size() != num_tasks) {
    throw std::invalid_argument("trainer: loss_scales must have one entry per task");
  }
  if (!config_.fixed_weights.empty() && config_.fixed_weights.size() != num_tasks) {
    throw std::invalid_argument("trainer: fixed_weights must have one entry per task");
  }
  if (config_.batch_size < 1) throw std::invalid_argument("trainer: batch_size must be >= 1");
  if (config_.aggregation.method != AggregationMethod::kEqual && num_tasks < 2) {
    throw std::invalid_argument("trainer: " + to_string(config_.aggregation.method) + " needs at least two tasks");
  }
  if (config_.weighting == WeightingMethod::kUncertainty) log_sigma_ = Vector::Zero(net_.num_tasks());
}

StepTrace Trainer::step(const Dataset& batch) {
  if (batch.size() == 0) throw std::invalid_argument("trainer: empty batch");
  const int num_tasks = net_.num_tasks();
  const auto nt = static_cast<std::size_t>(num_tasks);
  const Index net_params = net_.parameter_count();
  const ParamId sigma_base = static_cast<ParamId>(2 * net_.layers().size());

  Tape tape;
  const auto bound = net_.bind(tape);
  const auto outputs = net_.forward(bound, tape.constant(Tensor(batch.inputs)));

  std::vector<Var> losses;
  for (int t = 0; t < num_tasks; ++t) {
    Var l = task_loss(tasks_[static_cast<std::size_t>(t)], outputs[static_cast<std::size_t>(t)], batch.targets.col(t));
    if (!config_.loss_scales.empty()) l = scale(l, config_.loss_scales[static_cast<std::size_t>(t)]);
    losses.push_back(l);
  }
  check_finite(losses);

  StepTrace trace;
  trace.step = ++steps_;
  for (const Var& l : losses) trace.losses.push_back(l.item());

  // Weighted per-task terms; their sum is the training objective.
  std::vector<Var> terms;
  switch (config_.weighting) {
    case WeightingMethod::kEqual:
      terms = losses;
      trace.weights.assign(nt, 1.0);
      break;
    case WeightingMethod::kUncertainty:
      for (int t = 0; t < num_tasks; ++t) {
        const Var s = tape.parameter(sigma_base + t, Tensor::scalar(log_sigma_[t]));
        terms.push_back(uncertainty_weighting(std::span<const Var>(&losses[static_cast<std::size_t>(t)], 1),
                                              std::span<const Var>(&s, 1)));
        trace.weights.push_back(std::exp(-log_sigma_[t]));
      }
      break;
    case WeightingMethod::kOptimalUncertainty:
      for (std::size_t t = 0; t < nt; ++t) {
        terms.push_back(optimal_uncertainty_weighting(std::span<const Var>(&losses[t], 1), &warnings_));
        trace.weights.push_back(1.0 / std::max(losses[t].item(), kUwoFloor));
      }
      break;
    case WeightingMethod::kRandom:
      trace.weights = config_.fixed_weights.empty() ? sample_random_weights(nt, rng_) : config_.fixed_weights;
      for (std::size_t t = 0; t < nt; ++t) terms.push_back(scale(losses[t], trace.weights[t]));
      break;
  }

  auto full_gradient = [&](Var objective) {
    const Gradients g = tape.backward(objective);
    Vector out(trainable_count(net_, config_));
    out.head(net_params) = net_.flatten(g);
    if (log_sigma_.size() > 0) {
      for (int t = 0; t < num_tasks; ++t) out[net_params + t] = g[sigma_base + t].item();
    }
    return out;
  };

  const bool per_task = optimizer_.needs_task_gradients() || config_.aggregation.method != AggregationMethod::kEqual;
  // Detached weights scale each task's gradient after backprop rather than
  // seeding it, so a coordinate that cancels to zero stays exactly zero and
  // every coordinate keeps the sign it has under equal weighting.
  const bool scale_after = config_.weighting == WeightingMethod::kOptimalUncertainty ||
                           config_.weighting == WeightingMethod::kRandom;
  Vector grad;
  std::vector<Vector> task_grads;
  Var objective = equal_weighting(terms);
  trace.objective = objective.item();
  if (!std::isfinite(trace.objective)) throw NonFiniteLoss(-1, trace.objective);
  if (scale_after) {
    for (std::size_t t = 0; t < nt; ++t) task_grads.push_back(trace.weights[t] * full_gradient(losses[t]));
    if (!per_task) {
      grad = Vector::Zero(trainable_count(net_, config_));
      for (const Vector& g : task_grads) grad += g;
      task_grads.clear();
    }
  } else if (per_task) {
    for (const Var& term : terms) task_grads.push_back(full_gradient(term));
  } else {
    grad = full_gradient(objective);
  }

  const Segment bb = net_.segment(Partition::backbone());
  if (config_.aggregation.method != AggregationMethod::kEqual) {
    // Surgery on the shared parameters; heads and log-sigma see only their own
    // task's gradient, so summing passes them through unchanged.
    std::vector<FlatGrad> shared;
    for (int t = 0; t < num_tasks; ++t) {
      shared.push_back({task_grads[static_cast<std::size_t>(t)].segment(bb.offset, bb.length), Partition::backbone(), t});
    }
    grad = Vector::Zero(trainable_count(net_, config_));
    for (const Vector& g : task_grads) grad += g;
    grad.segment(bb.offset, bb.length) = aggregate(config_.aggregation, shared, {}, rng_, &warnings_).values;
    task_grads.clear();
  }

  if (config_.freeze_backbone) {
    if (grad.size() > 0) grad.segment(bb.offset, bb.length).setZero();
    for (Vector& g : task_grads) g.segment(bb.offset, bb.length).setZero();
  }

  Vector params(trainable_count(net_, config_));
  params.head(net_params) = net_.flat();
  if (log_sigma_.size() > 0) params.tail(num_tasks) = log_sigma_;
  const Vector frozen = params.segment(bb.offset, bb.length);

  Vector update;
  if (!task_grads.empty()) {
    update = optimizer_.step(params, std::span<const Vector>(task_grads));
    grad = Vector::Zero(params.size());
    for (const Vector& g : task_grads) grad += g;
  } else {
    update = optimizer_.step(params, grad);
  }
  if (config_.freeze_backbone) params.segment(bb.offset, bb.length) = frozen;
  if (!params.allFinite()) throw std::domain_error("trainer: parameters became non-finite at step " + std::to_string(steps_));

  net_.set_flat(params.head(net_params));
  if (log_sigma_.size() > 0) log_sigma_ = params.tail(num_tasks);

  auto record = [&](Partition p) {
    const Segment s = net_.segment(p);
    trace.norms.push_back({p.name(), grad.segment(s.offset, s.length).norm(), update.segment(s.offset, s.length).norm()});
  };
  record(Partition::backbone());
  for (int t = 0; t < num_tasks; ++t) record(Partition::head(t));
  return trace;
}

std::vector<StepTrace> Trainer::epoch(const Dataset& train) {
  std::vector<Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Index{0});
  if (config_.shuffle) rng_.shuffle(std::span<Index>(order));
  std::vector<StepTrace> traces;
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config_.batch_size)) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config_.batch_size));
    traces.push_back(step(train.rows(std::span<const Index>(order.data() + begin, end - begin))));
  }
  return traces;
}

std::vector<double> Trainer::evaluate(const Dataset& data) const { return mtl::evaluate(net_, tasks_, data); }

std::vector<double> evaluate(const HydraNet& net, std::span<const TaskDef> tasks, const Dataset& data) {
  const auto outputs = net.predict(data.inputs);
  std::vector<double> out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    out.push_back(task_metric(tasks[t], outputs[t], data.targets.col(static_cast<Index>(t))));
  }
  return out;
}

}  // namespace mtl

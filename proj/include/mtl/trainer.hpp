#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtl/data.hpp"
#include "mtl/grad_aggregation.hpp"
#include "mtl/loss_weighting.hpp"
#include "mtl/network.hpp"
#include "mtl/optimizers.hpp"
#include "mtl/random.hpp"

namespace mtl {

struct TrainerConfig {
  WeightingMethod weighting = WeightingMethod::kEqual;
  /// kEqual trains on the weighted loss sum; pcgrad/cagrad combine per-task
  /// backbone gradients of the weighted task terms.
  AggregationOptions aggregation;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  OptimizerHyper hyper;
  /// Constant multipliers applied to the raw task losses (empty: all 1).
  std::vector<double> loss_scales;
  /// Constant task weights replacing the sampled ones of random weighting.
  std::vector<double> fixed_weights;
  bool freeze_backbone = false;
  Index batch_size = 32;
  bool shuffle = true;
};

/// Norms of the applied gradient and update per partition for one step.
struct PartitionNorms {
  std::string partition;
  double grad_norm = 0.0;
  double update_norm = 0.0;
};

struct StepTrace {
  long step = 0;
  std::vector<double> losses;  // scaled task losses before weighting
  double objective = 0.0;      // weighted total
  std::vector<PartitionNorms> norms;  // backbone, head-1, ..., head-T
  std::vector<double> weights;        // effective task weights
};

/// Runs optimisation steps on a hydra network. Uncertainty weighting appends
/// one log-sigma parameter per task after the network parameters; they are
/// updated by the same optimizer.
class Trainer {
 public:
  Trainer(HydraNet net, std::vector<TaskDef> tasks, TrainerConfig config, std::uint64_t seed);

  StepTrace step(const Dataset& batch);
  /// One pass over `train` in (shuffled) minibatches.
  std::vector<StepTrace> epoch(const Dataset& train);

  const HydraNet& net() const { return net_; }
  HydraNet& net() { return net_; }
  const TrainerConfig& config() const { return config_; }
  std::span<const TaskDef> tasks() const { return tasks_; }
  const Vector& log_sigma() const { return log_sigma_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  Rng& rng() { return rng_; }

  /// Per-task evaluation metric on `data` (MAE or accuracy).
  std::vector<double> evaluate(const Dataset& data) const;

 private:
  HydraNet net_;
  std::vector<TaskDef> tasks_;
  TrainerConfig config_;
  Rng rng_;
  Optimizer optimizer_;
  Vector log_sigma_;
  long steps_ = 0;
  std::vector<std::string> warnings_;
};

/// Per-task metrics of a network on `data`.
std::vector<double> evaluate(const HydraNet& net, std::span<const TaskDef> tasks, const Dataset& data);

}  // namespace mtl

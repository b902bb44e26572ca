#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtl/autodiff.hpp"
#include "mtl/random.hpp"

namespace mtl {

/// A task loss was NaN or infinite.
class NonFiniteLoss : public std::domain_error {
 public:
  NonFiniteLoss(int task, double value);
  int task() const { return task_; }

 private:
  int task_;
};

enum class WeightingMethod { kEqual, kUncertainty, kOptimalUncertainty, kRandom };

std::string to_string(WeightingMethod m);
WeightingMethod parse_weighting(const std::string& name);

/// Per-task loss weights alpha_t >= 0 with where they came from.
struct TaskWeights {
  enum class Provenance { kFixed, kLearned, kSampled, kAnalytic };

  std::vector<double> alpha;
  std::vector<double> log_sigma;  // uncertainty weighting only
  Provenance provenance = Provenance::kFixed;
};

/// Lowest loss value optimal uncertainty weighting divides by.
inline constexpr double kUwoFloor = 1e-12;

/// sum_t L_t.
Var equal_weighting(std::span<const Var> losses);

/// sum_t alpha_t L_t with constant weights.
Var weighted_sum(std::span<const Var> losses, std::span<const double> weights);

/// Laplace-form uncertainty weighting, sum_t (L_t / sigma_t + log sigma_t),
/// with sigma_t = exp(log_sigma_t) so the log-sigma leaves stay unconstrained.
Var uncertainty_weighting(std::span<const Var> losses, std::span<const Var> log_sigma);

/// sum_t L_t / sg[L_t]. The value is exactly T and the gradient is
/// sum_t grad(L_t) / L_t. The constant log term of the closed form carries no
/// gradient and is not included in the value.
///
/// Non-positive losses throw. Positive losses below kUwoFloor are divided by
/// the floor instead and a message is appended to `warnings` when given.
Var optimal_uncertainty_weighting(std::span<const Var> losses, std::vector<std::string>* warnings = nullptr);

/// Softmax of T standard normal draws; sums to 1.
std::vector<double> sample_random_weights(std::size_t num_tasks, Rng& rng);

/// sum_t alpha_t L_t with freshly sampled weights (returned through `sampled`
/// when given).
Var random_loss_weighting(std::span<const Var> losses, Rng& rng, std::vector<double>* sampled = nullptr);

/// Effective weights alpha_t = 1 / sg[L_t] of optimal uncertainty weighting.
std::vector<double> optimal_uncertainty_weights(std::span<const double> losses);

/// Throws NonFiniteLoss naming the first offending task.
void check_finite(std::span<const Var> losses);

}  // namespace mtl

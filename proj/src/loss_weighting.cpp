#include "mtl/loss_weighting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mtl {

namespace {

void require_tasks(std::span<const Var> losses, const char* op) {
  if (losses.empty()) throw std::invalid_argument(std::string(op) + ": needs at least one task loss");
  for (const Var& l : losses) {
    if (!l.value().is_scalar()) throw ShapeError(std::string(op) + ": task losses must be scalar, got " + shape_string(l.shape()));
  }
  check_finite(losses);
}

Var constant_like(Var v, double c) { return v.tape()->constant(Tensor::scalar(c)); }

}  // namespace

NonFiniteLoss::NonFiniteLoss(int task, double value)
    : std::domain_error("loss of task " + std::to_string(task + 1) + " is not finite (" + std::to_string(value) + ")"),
      task_(task) {}

std::string to_string(WeightingMethod m) {
  switch (m) {
    case WeightingMethod::kEqual: return "ew";
    case WeightingMethod::kUncertainty: return "uw";
    case WeightingMethod::kOptimalUncertainty: return "uwo";
    case WeightingMethod::kRandom: return "rlw";
  }
  return "unknown";
}

WeightingMethod parse_weighting(const std::string& name) {
  if (name == "ew") return WeightingMethod::kEqual;
  if (name == "uw") return WeightingMethod::kUncertainty;
  if (name == "uwo" || name == "uw-o") return WeightingMethod::kOptimalUncertainty;
  if (name == "rlw") return WeightingMethod::kRandom;
  throw std::invalid_argument("unknown loss weighting '" + name + "'");
}

void check_finite(std::span<const Var> losses) {
  for (std::size_t t = 0; t < losses.size(); ++t) {
    const double v = losses[t].value().matrix()(0, 0);
    if (!std::isfinite(v)) throw NonFiniteLoss(static_cast<int>(t), v);
  }
}

Var equal_weighting(std::span<const Var> losses) {
  require_tasks(losses, "equal_weighting");
  Var total = losses[0];
  for (std::size_t t = 1; t < losses.size(); ++t) total = total + losses[t];
  return total;
}

Var weighted_sum(std::span<const Var> losses, std::span<const double> weights) {
  require_tasks(losses, "weighted_sum");
  if (weights.size() != losses.size()) {
    throw std::invalid_argument("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                                std::to_string(losses.size()) + " losses");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("task weights must be finite and >= 0");
  }
  Var total = scale(losses[0], weights[0]);
  for (std::size_t t = 1; t < losses.size(); ++t) total = total + scale(losses[t], weights[t]);
  return total;
}

Var uncertainty_weighting(std::span<const Var> losses, std::span<const Var> log_sigma) {
  require_tasks(losses, "uncertainty_weighting");
  if (log_sigma.size() != losses.size()) {
    throw std::invalid_argument("uncertainty_weighting: " + std::to_string(log_sigma.size()) +
                                " log-sigma parameters for " + std::to_string(losses.size()) + " losses");
  }
  auto term = [&](std::size_t t) { return losses[t] * exp(neg(log_sigma[t])) + log_sigma[t]; };
  Var total = term(0);
  for (std::size_t t = 1; t < losses.size(); ++t) total = total + term(t);
  return total;
}

std::vector<double> optimal_uncertainty_weights(std::span<const double> losses) {
  std::vector<double> w;
  w.reserve(losses.size());
  for (std::size_t t = 0; t < losses.size(); ++t) {
    const double l = losses[t];
    if (!std::isfinite(l)) throw NonFiniteLoss(static_cast<int>(t), l);
    if (l <= 0.0) {
      throw std::domain_error("optimal uncertainty weighting needs positive losses; task " + std::to_string(t + 1) +
                              " has " + std::to_string(l));
    }
    w.push_back(1.0 / std::max(l, kUwoFloor));
  }
  return w;
}

Var optimal_uncertainty_weighting(std::span<const Var> losses, std::vector<std::string>* warnings) {
  require_tasks(losses, "optimal_uncertainty_weighting");
  auto term = [&](std::size_t t) {
    const double l = losses[t].item();
    if (l <= 0.0) {
      throw std::domain_error("optimal uncertainty weighting needs positive losses; task " + std::to_string(t + 1) +
                              " has " + std::to_string(l));
    }
    if (l < kUwoFloor) {
      if (warnings) {
        std::ostringstream os;
        os << "uwo: loss of task " << t + 1 << " (" << l << ") clamped to " << kUwoFloor;
        warnings->push_back(os.str());
      }
      return losses[t] / constant_like(losses[t], kUwoFloor);
    }
    return losses[t] / detach(losses[t]);
  };
  Var total = term(0);
  for (std::size_t t = 1; t < losses.size(); ++t) total = total + term(t);
  return total;
}

std::vector<double> sample_random_weights(std::size_t num_tasks, Rng& rng) {
  if (num_tasks == 0) throw std::invalid_argument("random loss weighting needs at least one task");
  std::vector<double> z(num_tasks);
  for (double& v : z) v = rng.normal();
  const double zmax = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    denom += v;
  }
  for (double& v : z) v /= denom;
  return z;
}

Var random_loss_weighting(std::span<const Var> losses, Rng& rng, std::vector<double>* sampled) {
  require_tasks(losses, "random_loss_weighting");
  std::vector<double> w = sample_random_weights(losses.size(), rng);
  Var total = weighted_sum(losses, w);
  if (sampled) *sampled = std::move(w);
  return total;
}

}  // namespace mtl

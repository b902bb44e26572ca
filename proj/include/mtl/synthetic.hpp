#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtl/data.hpp"

namespace mtl {

/// One generated task. Regression targets are
/// scale (w . x + tanh(v . x)) + noise with noise ~ N(0, noise^2); class labels
/// are the argmax of a random linear map (label noise replaces a label by a
/// uniform draw with probability `noise`).
struct SyntheticTask {
  TaskDef def;
  double scale = 1.0;
  double noise = 0.0;
};

struct SyntheticTaskSpec {
  Index input_dim = 8;
  std::vector<SyntheticTask> tasks;
  Index train_size = 256;
  Index val_size = 64;
  Index test_size = 64;

  std::vector<TaskDef> task_defs() const;
  void validate() const;
};

/// Seeded random maps of one task, exposed so tests can recompute targets.
struct TaskMaps {
  Vector w;  // regression: linear part
  Vector v;  // regression: nonlinear part
  Matrix a;  // classification: [input_dim, classes]
};

std::vector<TaskMaps> task_maps(const SyntheticTaskSpec& spec, std::uint64_t seed);

/// Noise-free target of task t for input row x.
double clean_target(const SyntheticTask& task, const TaskMaps& maps, const Vector& x);

/// Inputs uniform on (-1, 1)^d, drawn once and split into disjoint
/// train/val/test blocks.
DatasetSplits generate(const SyntheticTaskSpec& spec, std::uint64_t seed);

enum class Corruption { kGaussianNoise, kInputDropout, kBlur1d };

std::string to_string(Corruption c);
Corruption parse_corruption(const std::string& name);
inline constexpr Corruption kAllCorruptions[] = {Corruption::kGaussianNoise, Corruption::kInputDropout,
                                                 Corruption::kBlur1d};

/// Perturbs inputs only; severity s in 1..5.
///   gaussian_noise: adds N(0, (0.05 s)^2) per coordinate.
///   input_dropout:  zeroes each coordinate with probability 0.1 s.
///   blur_1d:        x <- (1 - s/5) x + (s/5) (x_{k-1} + x_k + x_{k+1}) / 3
///                   along the feature axis, edges replicated.
Dataset corrupt(const Dataset& data, Corruption mode, int severity, std::uint64_t seed);

/// One row per sample: inputs then per-task targets, values at 17 significant
/// digits, with a header x0..x{d-1},y0..y{T-1}.
void write_csv(const Dataset& data, const std::string& path);
Dataset read_csv(const std::string& path, Index input_dim);

}  // namespace mtl

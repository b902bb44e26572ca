#include "mtl/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mtl/random.hpp"

namespace mtl {

namespace {

constexpr std::uint64_t kMapStream = 0;
constexpr std::uint64_t kInputStream = 1000;
constexpr std::uint64_t kNoiseStream = 2000;

}  // namespace

std::vector<TaskDef> SyntheticTaskSpec::task_defs() const {
  std::vector<TaskDef> defs;
  for (const auto& t : tasks) defs.push_back(t.def);
  return defs;
}

void SyntheticTaskSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("synthetic data: input_dim must be >= 1");
  if (tasks.empty()) throw std::invalid_argument("synthetic data: at least one task is required");
  if (train_size < 1 || val_size < 1 || test_size < 1) {
    throw std::invalid_argument("synthetic data: split sizes must be >= 1");
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const std::string name = "synthetic task " + std::to_string(t + 1);
    if (!(task.scale > 0.0) || !std::isfinite(task.scale)) throw std::invalid_argument(name + ": scale must be > 0");
    if (!(task.noise >= 0.0)) throw std::invalid_argument(name + ": noise must be >= 0");
    if (!(task.def.loss_scale > 0.0) || !std::isfinite(task.def.loss_scale)) {
      throw std::invalid_argument(name + ": loss scale must be > 0");
    }
    if (task.def.kind == TaskKind::kClassificationCE) {
      if (task.def.classes < 2) throw std::invalid_argument(name + ": classification needs >= 2 classes");
      if (task.noise > 1.0) throw std::invalid_argument(name + ": label noise is a probability");
    }
  }
}

std::vector<TaskMaps> task_maps(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  const double sd = 1.0 / std::sqrt(static_cast<double>(spec.input_dim));
  std::vector<TaskMaps> maps;
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    Rng rng(mix_seed(seed, kMapStream + t));
    TaskMaps m;
    if (spec.tasks[t].def.kind == TaskKind::kRegressionL1) {
      m.w.resize(spec.input_dim);
      m.v.resize(spec.input_dim);
      for (Index k = 0; k < spec.input_dim; ++k) m.w[k] = rng.normal(0.0, sd);
      for (Index k = 0; k < spec.input_dim; ++k) m.v[k] = rng.normal(0.0, 2.0 * sd);
    } else {
      m.a.resize(spec.input_dim, spec.tasks[t].def.classes);
      for (Index i = 0; i < m.a.rows(); ++i) {
        for (Index j = 0; j < m.a.cols(); ++j) m.a(i, j) = rng.normal(0.0, sd);
      }
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

double clean_target(const SyntheticTask& task, const TaskMaps& maps, const Vector& x) {
  if (task.def.kind == TaskKind::kRegressionL1) {
    return task.scale * (maps.w.dot(x) + std::tanh(maps.v.dot(x)));
  }
  const Eigen::RowVectorXd scores = x.transpose() * maps.a;
  Index best = 0;
  scores.maxCoeff(&best);
  return static_cast<double>(best);
}

DatasetSplits generate(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  const auto maps = task_maps(spec, seed);
  const Index n = spec.train_size + spec.val_size + spec.test_size;
  const Index num_tasks = static_cast<Index>(spec.tasks.size());

  Dataset all;
  all.inputs.resize(n, spec.input_dim);
  all.targets.resize(n, num_tasks);
  Rng inputs(mix_seed(seed, kInputStream));
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < spec.input_dim; ++k) all.inputs(i, k) = inputs.uniform(-1.0, 1.0);
  }
  for (Index t = 0; t < num_tasks; ++t) {
    const auto& task = spec.tasks[static_cast<std::size_t>(t)];
    Rng noise(mix_seed(seed, kNoiseStream + static_cast<std::uint64_t>(t)));
    for (Index i = 0; i < n; ++i) {
      const Vector x = all.inputs.row(i).transpose();
      double y = clean_target(task, maps[static_cast<std::size_t>(t)], x);
      if (task.noise > 0.0) {
        if (task.def.kind == TaskKind::kRegressionL1) {
          y += noise.normal(0.0, task.noise);
        } else if (noise.bernoulli(task.noise)) {
          y = static_cast<double>(noise.index(static_cast<std::uint64_t>(task.def.classes)));
        }
      }
      all.targets(i, t) = y;
    }
  }

  DatasetSplits out;
  out.train = all.slice(0, spec.train_size);
  out.val = all.slice(spec.train_size, spec.train_size + spec.val_size);
  out.test = all.slice(spec.train_size + spec.val_size, n);
  return out;
}

std::string to_string(Corruption c) {
  switch (c) {
    case Corruption::kGaussianNoise: return "gaussian_noise";
    case Corruption::kInputDropout: return "input_dropout";
    case Corruption::kBlur1d: return "blur_1d";
  }
  return "unknown";
}

Corruption parse_corruption(const std::string& name) {
  if (name == "gaussian_noise") return Corruption::kGaussianNoise;
  if (name == "input_dropout") return Corruption::kInputDropout;
  if (name == "blur_1d") return Corruption::kBlur1d;
  throw std::invalid_argument("unknown corruption mode '" + name + "'");
}

Dataset corrupt(const Dataset& data, Corruption mode, int severity, std::uint64_t seed) {
  if (severity < 1 || severity > 5) {
    throw std::invalid_argument("corruption severity must be in 1..5, got " + std::to_string(severity));
  }
  Dataset out = data;
  Rng rng(seed);
  const double s = static_cast<double>(severity);
  Matrix& x = out.inputs;
  switch (mode) {
    case Corruption::kGaussianNoise:
      for (Index i = 0; i < x.rows(); ++i) {
        for (Index k = 0; k < x.cols(); ++k) x(i, k) += rng.normal(0.0, 0.05 * s);
      }
      break;
    case Corruption::kInputDropout:
      for (Index i = 0; i < x.rows(); ++i) {
        for (Index k = 0; k < x.cols(); ++k) {
          if (rng.bernoulli(0.1 * s)) x(i, k) = 0.0;
        }
      }
      break;
    case Corruption::kBlur1d: {
      const double lambda = s / 5.0;
      const Index d = x.cols();
      for (Index i = 0; i < x.rows(); ++i) {
        const Eigen::RowVectorXd row = data.inputs.row(i);
        for (Index k = 0; k < d; ++k) {
          const double left = row[std::max<Index>(k - 1, 0)];
          const double right = row[std::min<Index>(k + 1, d - 1)];
          x(i, k) = (1.0 - lambda) * row[k] + lambda * (left + row[k] + right) / 3.0;
        }
      }
      break;
    }
  }
  return out;
}

void write_csv(const Dataset& data, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (Index k = 0; k < data.input_width(); ++k) std::fprintf(f, "%sx%ld", k ? "," : "", static_cast<long>(k));
  for (Index t = 0; t < data.num_tasks(); ++t) std::fprintf(f, ",y%ld", static_cast<long>(t));
  std::fputc('\n', f);
  for (Index i = 0; i < data.size(); ++i) {
    for (Index k = 0; k < data.input_width(); ++k) std::fprintf(f, "%s%.17g", k ? "," : "", data.inputs(i, k));
    for (Index t = 0; t < data.num_tasks(); ++t) std::fprintf(f, ",%.17g", data.targets(i, t));
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw std::runtime_error("error writing '" + path + "'");
}

Dataset read_csv(const std::string& path, Index input_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (rows.empty()) width = row.size();
    if (row.size() != width) {
      throw std::runtime_error("'" + path + "' line " + std::to_string(rows.size() + 2) + ": expected " +
                               std::to_string(width) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (static_cast<Index>(width) <= input_dim) throw std::runtime_error("'" + path + "' has no target columns");
  Dataset out;
  out.inputs.resize(static_cast<Index>(rows.size()), input_dim);
  out.targets.resize(static_cast<Index>(rows.size()), static_cast<Index>(width) - input_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < width; ++k) {
      const auto r = static_cast<Index>(i), c = static_cast<Index>(k);
      if (c < input_dim) {
        out.inputs(r, c) = rows[i][k];
      } else {
        out.targets(r, c - input_dim) = rows[i][k];
      }
    }
  }
  return out;
}

}  // namespace mtl

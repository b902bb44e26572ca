#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtl/network.hpp"
#include "mtl/optimizers.hpp"
#include "mtl/synthetic.hpp"

namespace mtl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text; `#` starts a comment, list values are comma
/// separated. Keys are unique.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "<config>");
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<long> get_ints(const std::string& key, const std::vector<long>& fallback) const;

  /// Keys never read through a getter.
  std::vector<std::string> unused_keys() const;
  /// Sorted `key = value` lines.
  std::string canonical() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  const std::string* find(const std::string& key) const;

  std::string origin_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

/// One training recipe: a loss weighting or gradient aggregation method and an
/// optimizer.
struct MethodSpec {
  std::string method = "ew";  // ew | uw | uwo | rlw | pcgrad | cagrad
  std::string optimizer = "adam";
};

struct ExperimentConfig {
  std::string suite;
  std::vector<std::string> methods{"ew"};
  std::vector<std::string> optimizers{"adam"};
  OptimizerHyper hyper;
  double cagrad_c = 0.4;
  std::vector<double> lrs{1e-3};
  long budget = 10;  // epochs, or iterations for the landscape suite
  Index batch_size = 32;
  std::vector<std::uint64_t> seeds{0};
  std::vector<Index> backbone{8, 32, 32};
  std::vector<Index> head_hidden{};
  double slope = 0.01;
  SyntheticTaskSpec data;
  std::string out_dir = "out";

  // landscape
  double tolerance = 1e-2;
  long trajectory_stride = 100;
  // invariance
  std::vector<std::string> invariance_cases{"ew-sgd", "ew-adam", "uwo-sgd", "ew-per-task-adam"};
  std::vector<std::string> backbone_modes{"frozen", "free"};
  std::vector<double> scales{10.0, 0.1};
  std::vector<double> rlw_weights;  // fixed weights for random weighting cases
  // gradsim
  long probe_every = 5;
  std::size_t max_items = 8;
  bool batch_mean = false;
  // sweep / ood
  std::string stl_optimizer = "adam";
  double stl_lr = 1e-3;
  std::vector<std::string> corruptions{"gaussian_noise", "input_dropout", "blur_1d"};
  std::vector<int> severities{1, 2, 3, 4, 5};
  long finetune_epochs = 5;

  ConfigFile source;

  /// Network for the configured tasks.
  HydraSpec network() const;
  HydraSpec single_task_network(int task) const;
  void validate() const;
};

/// Reads every known key; unknown keys are a ConfigError.
ExperimentConfig load_experiment(const ConfigFile& file);

}  // namespace mtl

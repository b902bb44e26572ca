#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mtl/config.hpp"
#include "mtl/metrics.hpp"
#include "mtl/toy_landscape.hpp"
#include "mtl/trainer.hpp"

namespace mtl {

/// Output files of one suite run, name -> content.
using SuiteFiles = std::map<std::string, std::string>;

/// Maps a method name (ew | uw | uwo | rlw | pcgrad | cagrad) and optimizer
/// name onto a trainer configuration.
TrainerConfig make_trainer_config(const std::string& method, const std::string& optimizer, double lr,
                                  const ExperimentConfig& cfg);

/// Index of the smallest score; ties go to the earliest, NaN never wins.
std::size_t select_best_epoch(std::span<const double> scores);

// ---- landscape race ----

struct LandscapeRun {
  std::string method;
  std::string optimizer;
  double lr = 0.0;
  std::uint64_t seed = 0;
  int start = 0;
  bool converged = false;
  long iterations = -1;  // first iteration within tolerance
  bool failed = false;
  std::string failure;
  ToyLandscape::Point final_point = ToyLandscape::Point::Zero();
  double distance = 0.0;
  std::vector<std::pair<long, ToyLandscape::Point>> trajectory;
};

struct LandscapeOptions {
  std::string method = "ew";  // ew | rlw | pcgrad | cagrad
  std::string optimizer = "gd";
  OptimizerHyper hyper;
  double cagrad_c = 0.4;
  long max_iterations = 100000;
  double tolerance = 1e-2;
  long trajectory_stride = 100;
  std::uint64_t seed = 0;
};

LandscapeRun landscape_run(const LandscapeOptions& opts, const ToyLandscape::Point& start, int start_index = 0);
std::vector<LandscapeRun> run_landscape(const ExperimentConfig& cfg);
SuiteFiles landscape_files(const std::vector<LandscapeRun>& runs);

// ---- invariance audit ----

struct InvarianceCase {
  std::string name;
  WeightingMethod weighting = WeightingMethod::kEqual;
  OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
};

/// "<weighting>-<optimizer>", e.g. "ew-sgd", "uwo-adam", "ew-per-task-adam".
InvarianceCase parse_invariance_case(const std::string& name);

struct InvarianceTrace {
  std::string case_name;
  bool frozen = false;
  bool scaled = false;
  std::vector<long> epoch_of_step;
  std::vector<StepTrace> steps;
  bool failed = false;
  std::string failure;
};

/// Two regression tasks sharing one target, a linear scaling of the first
/// input coordinate.
Dataset invariance_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

/// One configuration. `weights` fixes the random-weighting draws when given.
InvarianceTrace invariance_run(const InvarianceCase& c, const ExperimentConfig& cfg, bool frozen, bool scaled,
                               std::uint64_t seed, const std::vector<double>& weights = {});
std::vector<InvarianceTrace> run_invariance(const ExperimentConfig& cfg);
SuiteFiles invariance_files(const std::vector<InvarianceTrace>& traces);

/// Largest relative difference |a - b| / max(|a|, |b|) between two traces'
/// update (or gradient) norms over the given partitions; 0/0 counts as 0.
double max_relative_difference(const InvarianceTrace& a, const InvarianceTrace& b, const std::vector<std::string>& parts,
                               bool updates = true);

// ---- gradient similarity profile ----

struct GradsimEpoch {
  long epoch = 0;
  std::uint64_t seed = 0;
  std::vector<SimilarityStats> stats;

  const SimilarityStats& find(Measure m, ComparisonMode mode) const;
};

std::vector<GradsimEpoch> run_gradsim(const ExperimentConfig& cfg, std::uint64_t seed);
SuiteFiles gradsim_files(const std::vector<GradsimEpoch>& epochs);

// ---- learning-rate sweep with early stopping ----

struct TrainOutcome {
  RunRecord record;
  HydraNet best_net;
};

/// Trains for `epochs` epochs, scoring the validation metrics after each epoch
/// with `score` (lower is better) and keeping the best epoch's network.
/// Training failures are recorded, not thrown.
TrainOutcome train_with_early_stopping(const HydraSpec& spec, std::vector<TaskDef> tasks, const DatasetSplits& data,
                                       const TrainerConfig& tc, long epochs, std::uint64_t seed,
                                       const std::function<double(const std::vector<double>&)>& score);

/// Single-task baselines of one seed, one per task: test and best-epoch
/// validation metrics.
struct BaselineSet {
  std::vector<TrainOutcome> per_task;
  std::vector<double> val_metrics() const;
  std::vector<double> test_metrics() const;
};

DatasetSplits single_task_splits(const DatasetSplits& data, int task);
BaselineSet train_baselines(const ExperimentConfig& cfg, const DatasetSplits& data, std::uint64_t seed);

struct PoCount {
  std::string group;
  std::string versus;  // another group, or "all" for the full front
  std::size_t not_dominated = 0;
  std::size_t total = 0;
};

struct SweepResult {
  std::vector<RunRecord> baselines;
  std::vector<RunRecord> runs;
  std::vector<std::size_t> front;  // indices into runs
  std::vector<PoCount> po;
};

SweepResult run_sweep(const ExperimentConfig& cfg);
/// Records of `group` (keyed by optimizer) not dominated by records of each
/// other group, plus their count on the front of all records.
std::vector<PoCount> pareto_counts(const std::vector<RunRecord>& runs);
SuiteFiles sweep_files(const SweepResult& r);

// ---- corruption robustness ----

/// Metric of every (corruption, severity) cell (row-major) and task after
/// fine-tuning the heads of a copy of `pretrained` on corrupted training data.
std::vector<std::vector<double>> corruption_metrics(const HydraNet& pretrained, std::span<const TaskDef> tasks,
                                                    const DatasetSplits& data, const ExperimentConfig& cfg,
                                                    std::uint64_t seed);

struct OodTaskResult {
  std::uint64_t seed = 0;
  int task = 0;
  OodTaskMetrics metrics;
  double delta = 0.0;
};

std::vector<OodTaskResult> run_ood(const ExperimentConfig& cfg);
SuiteFiles ood_files(const std::vector<OodTaskResult>& results, const ExperimentConfig& cfg);

/// Runs the configured suite and returns its CSV files plus the JSON sidecar
/// (config and content hashes).
SuiteFiles run_suite(const ExperimentConfig& cfg);

/// Writes `files` below `dir`, creating it.
void write_suite(const SuiteFiles& files, const std::string& dir);

}  // namespace mtl

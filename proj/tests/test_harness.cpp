#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mtl/harness.hpp"
#include "mtl/io.hpp"
#include "oracles.hpp"

using namespace mtl;

namespace {

ExperimentConfig small(const std::string& suite, const std::string& extra = "") {
  const std::string text = "suite = " + suite +
                           "\n"
                           "net.backbone = 4, 8\n"
                           "data.input_dim = 4\n"
                           "data.train = 48\n"
                           "data.val = 16\n"
                           "data.test = 16\n"
                           "data.tasks = regression, classification\n"
                           "data.classes = 0, 3\n"
                           "batch_size = 16\n"
                           "budget = 3\n"
                           "lr = 0.01\n"
                           "stl.lr = 0.01\n" +
                           extra;
  return load_experiment(ConfigFile::parse(text));
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mtl_harness_" + name);
  std::filesystem::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MTL_LAB_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesValuesListsAndComments) {
  const ConfigFile f = ConfigFile::parse("a = 1 # one\n# whole line\nb = x, y ,z\nflag = true\n\n");
  EXPECT_EQ(f.get_int("a", 0), 1);
  EXPECT_EQ(f.get_list("b", {}), (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_TRUE(f.get_bool("flag", false));
  EXPECT_EQ(f.get_double("missing", 2.5), 2.5);
  EXPECT_EQ(f.canonical(), "a = 1\nb = x, y ,z\nflag = true\n");
}

TEST(Config, Errors) {
  EXPECT_THROW(ConfigFile::parse("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(ConfigFile::parse("no equals sign\n"), ConfigError);
  EXPECT_THROW(ConfigFile::parse("a = x\n").get_double("a", 0), ConfigError);
  EXPECT_THROW(ConfigFile::parse("a = 1.5\n").get_int("a", 0), ConfigError);
  EXPECT_THROW(load_experiment(ConfigFile::parse("suite = gradsim\nlearning_rate = 1\n")), ConfigError);
  EXPECT_THROW(load_experiment(ConfigFile::parse("suite = nope\n")), ConfigError);
  EXPECT_THROW(ConfigFile::load("/nonexistent/file.cfg"), ConfigError);
}

TEST(Config, ExperimentDefaultsAndNetwork) {
  const ExperimentConfig cfg = small("synth-mtl");
  EXPECT_EQ(cfg.data.tasks.size(), 2u);
  const HydraSpec spec = cfg.network();
  EXPECT_EQ(spec.backbone, (std::vector<Index>{4, 8}));
  EXPECT_EQ(spec.heads[1].back(), 3);
  EXPECT_EQ(cfg.single_task_network(1).heads.size(), 1u);
}

TEST(Harness, BestEpochPrefersEarliestAndSkipsNan) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> a{3.0, 1.0, 1.0, 2.0};
  EXPECT_EQ(select_best_epoch(a), 1u);
  const std::vector<double> b{nan, 5.0, nan, 4.0};
  EXPECT_EQ(select_best_epoch(b), 3u);
}

TEST(Harness, RunRecordJsonRoundTrip) {
  RunRecord r;
  r.config_hash = "abc";
  r.seed = 18446744073709551615ull;
  r.method = "cagrad";
  r.optimizer = "adam";
  r.lr = 0.1;
  r.metric_names = {"l1", "acc"};
  r.higher_is_better = {false, true};
  r.val_metrics = {{0.3, 0.5}, {1.0 / 3.0, std::numeric_limits<double>::quiet_NaN()}};
  r.val_delta_m = {1e-300, -2.5};
  r.best_epoch = 1;
  r.test_metrics = {0.2, 0.7};
  r.test_delta_m = std::numeric_limits<double>::infinity();
  const std::vector<RunRecord> back = run_records_from_json(to_json(std::vector<RunRecord>{r}));
  ASSERT_EQ(back.size(), 1u);
  // NaN never compares equal, so check it separately.
  EXPECT_TRUE(std::isnan(back[0].val_metrics[1][1]));
  RunRecord a = r, b = back[0];
  a.val_metrics[1][1] = b.val_metrics[1][1] = 0.0;
  EXPECT_EQ(a, b);
}

TEST(Harness, GitBlobHash) {
  // Same value `git hash-object` prints for a file holding "hello\n".
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Harness, LandscapeStartAtMinimumConvergesImmediately) {
  LandscapeOptions opts;
  opts.tolerance = 0.0;
  opts.max_iterations = 10;
  const LandscapeRun r = landscape_run(opts, ToyLandscape::global_minimum());
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Harness, LandscapeRunIsDeterministic) {
  LandscapeOptions opts;
  opts.method = "pcgrad";
  opts.optimizer = "adam";
  opts.hyper.lr = 0.1;
  opts.max_iterations = 500;
  const auto a = landscape_run(opts, ToyLandscape::starting_points()[1], 1);
  const auto b = landscape_run(opts, ToyLandscape::starting_points()[1], 1);
  EXPECT_EQ(a.final_point, b.final_point);
  EXPECT_EQ(a.trajectory.size(), b.trajectory.size());
}

TEST(Harness, GradsimNeedsTwoTasks) {
  ExperimentConfig cfg = small("gradsim", "");
  cfg.data.tasks.resize(1);
  EXPECT_THROW(run_gradsim(cfg, 0), ConfigError);
}

TEST(Harness, GradsimReportsEveryEpochAndMode) {
  const ExperimentConfig cfg = small("gradsim", "gradsim.probe_every = 1\n");
  const auto epochs = run_gradsim(cfg, 0);
  ASSERT_EQ(epochs.size(), 3u);
  for (const auto& e : epochs) {
    EXPECT_EQ(e.find(Measure::kMag, ComparisonMode::kInterTask).n_pairs, 3u);
    EXPECT_EQ(e.find(Measure::kMag, ComparisonMode::kInterSample).n_pairs +
                  e.find(Measure::kMag, ComparisonMode::kInterSample).n_excluded,
              3u * 28u);
  }
}

TEST(Harness, InvarianceCaseNames) {
  const auto c = parse_invariance_case("ew-per-task-adam");
  EXPECT_EQ(c.weighting, WeightingMethod::kEqual);
  EXPECT_EQ(c.optimizer, OptimizerKind::kPerTaskAdam);
  EXPECT_EQ(parse_invariance_case("uwo-sgd").weighting, WeightingMethod::kOptimalUncertainty);
  EXPECT_THROW(parse_invariance_case("adam"), ConfigError);
}

TEST(Harness, SweepIsDeterministic) {
  const ExperimentConfig cfg = small("synth-mtl", "methods = ew, pcgrad\noptimizers = adam, sgd\n");
  const SuiteFiles a = sweep_files(run_sweep(cfg));
  const SuiteFiles b = sweep_files(run_sweep(cfg));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.count("sweep_runs.csv"), 1u);
}

TEST(Harness, SweepRecordsBestEpochAndDeltaM) {
  const ExperimentConfig cfg = small("synth-mtl");
  const SweepResult r = run_sweep(cfg);
  ASSERT_EQ(r.runs.size(), 1u);
  const RunRecord& run = r.runs[0];
  ASSERT_FALSE(run.failed) << run.failure;
  EXPECT_EQ(run.val_metrics.size(), 3u);
  EXPECT_GE(run.best_epoch, 1);
  EXPECT_LE(run.best_epoch, 3);
  // The chosen epoch has the lowest validation delta-m.
  for (double d : run.val_delta_m) EXPECT_GE(d, run.val_delta_m[static_cast<std::size_t>(run.best_epoch - 1)]);
}

TEST(Harness, ParetoCountsMatchBruteForce) {
  Rng rng(21);
  std::vector<RunRecord> runs;
  for (int i = 0; i < 50; ++i) {
    RunRecord r;
    r.optimizer = i % 3 == 0 ? "adam" : (i % 3 == 1 ? "sgd" : "gd");
    r.metric_names = {"l1", "acc"};
    r.higher_is_better = {false, true};
    r.test_metrics = {std::round(rng.uniform(0, 10)), std::round(rng.uniform(0, 10))};
    runs.push_back(r);
  }
  std::vector<std::vector<double>> pts;
  for (const auto& r : runs) pts.push_back(r.test_metrics);
  const auto front = oracle::brute_force_front(pts, {false, true});
  for (const PoCount& c : pareto_counts(runs)) {
    if (c.versus != "all") continue;
    std::size_t expected = 0;
    for (std::size_t i : front) expected += runs[i].optimizer == c.group ? 1 : 0;
    EXPECT_EQ(c.not_dominated, expected) << c.group;
  }
}

TEST(Harness, OodOfModelAgainstItselfIsZero) {
  const ExperimentConfig cfg = small("ood", "ood.severities = 1, 3\nood.finetune_epochs = 1\n");
  const DatasetSplits data = generate(cfg.data, 0);
  const HydraNet net = HydraNet::build(cfg.network(), 0);
  const auto tasks = cfg.data.task_defs();
  const auto a = corruption_metrics(net, tasks, data, cfg, 5);
  const auto b = corruption_metrics(net, tasks, data, cfg, 5);
  EXPECT_EQ(a, b);
  const auto clean = evaluate(net, tasks, data.test);
  OodTaskMetrics m{clean[0], clean[0], false, cfg.corruptions.size(), cfg.severities.size(), {}};
  for (const auto& cell : a) m.cells.push_back(CorruptionCell{cell[0], cell[0]});
  EXPECT_EQ(delta_t(m), 0.0);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  std::filesystem::create_directories(dir);
  const auto cfg = dir / "run.cfg";
  write_text(cfg.string(),
             "suite = landscape\nmethods = ew\noptimizers = adam\nlr = 0.1\nbudget = 200\nseeds = 0\n");
  EXPECT_EQ(run_cli("landscape --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "landscape.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "landscape.json"));
  EXPECT_NE(run_cli("gradsim --config " + cfg.string()), 0);
  EXPECT_NE(run_cli("landscape --config " + (dir / "missing.cfg").string()), 0);
  EXPECT_NE(run_cli("landscape"), 0);
  std::filesystem::remove_all(dir);
}

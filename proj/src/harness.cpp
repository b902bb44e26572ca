#include "mtl/harness.hpp"

#include <filesystem>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "mtl/io.hpp"
#include "mtl/synthetic.hpp"

namespace mtl {

namespace {

// Child seed streams.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kProbeStream = 3;
constexpr std::uint64_t kDataStream = 4;
constexpr std::uint64_t kBaselineStream = 16;
constexpr std::uint64_t kCorruptStream = 1024;
constexpr std::uint64_t kFinetuneStream = 4096;

std::string config_hash(const ExperimentConfig& cfg) { return git_blob_hash(cfg.source.canonical()); }

std::vector<std::string> metric_names(std::span<const TaskDef> tasks) {
  std::vector<std::string> names;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    names.push_back((tasks[t].kind == TaskKind::kRegressionL1 ? "mae_" : "acc_") + std::to_string(t + 1));
  }
  return names;
}

std::vector<bool> orientations(std::span<const TaskDef> tasks) {
  std::vector<bool> out;
  for (const auto& t : tasks) out.push_back(higher_is_better(t));
  return out;
}

}  // namespace

TrainerConfig make_trainer_config(const std::string& method, const std::string& optimizer, double lr,
                                  const ExperimentConfig& cfg) {
  TrainerConfig tc;
  if (is_aggregation_method(method)) {
    tc.aggregation.method = parse_aggregation(method);
    tc.aggregation.cagrad_c = cfg.cagrad_c;
  } else {
    tc.weighting = parse_weighting(method);
  }
  tc.optimizer = parse_optimizer(optimizer);
  tc.hyper = cfg.hyper;
  tc.hyper.lr = lr;
  tc.batch_size = cfg.batch_size;
  return tc;
}

std::size_t select_best_epoch(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("select_best_epoch: no epochs");
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (std::isnan(scores[e])) continue;
    if (!found || scores[e] < best_score) {
      best = e;
      best_score = scores[e];
      found = true;
    }
  }
  return best;
}

// ---- landscape race ----

LandscapeRun landscape_run(const LandscapeOptions& opts, const ToyLandscape::Point& start, int start_index) {
  LandscapeRun run;
  run.method = opts.method;
  run.optimizer = opts.optimizer;
  run.lr = opts.hyper.lr;
  run.seed = opts.seed;
  run.start = start_index;

  if (opts.method != "ew" && opts.method != "rlw" && opts.method != "pcgrad" && opts.method != "cagrad") {
    throw ConfigError("landscape suite supports methods ew, rlw, pcgrad and cagrad, got '" + opts.method + "'");
  }
  OptimizerHyper hp = opts.hyper;
  Optimizer opt(parse_optimizer(opts.optimizer), hp, 2, 2);
  Rng rng(mix_seed(opts.seed, kTrainStream + static_cast<std::uint64_t>(start_index)));
  const ToyLandscape::Point target = ToyLandscape::global_minimum();
  Vector x = start;

  for (long it = 0;; ++it) {
    const double dist = (x - target).norm();
    if (it % opts.trajectory_stride == 0) run.trajectory.emplace_back(it, x);
    if (dist <= opts.tolerance) {
      run.converged = true;
      run.iterations = it;
      break;
    }
    if (it >= opts.max_iterations) break;

    const auto e = ToyLandscape::evaluate(x);
    if (!std::isfinite(e.loss1) || !std::isfinite(e.loss2) || !e.grad1.allFinite() || !e.grad2.allFinite()) {
      run.failed = true;
      run.failure = "non-finite loss at iteration " + std::to_string(it);
      break;
    }
    std::vector<Vector> grads{e.grad1, e.grad2};
    Vector update;
    if (opt.needs_task_gradients()) {
      if (opts.method != "ew") throw ConfigError("per-task-adam runs on the landscape need method ew");
      update = opt.step(x, std::span<const Vector>(grads));
    } else {
      Vector g;
      if (opts.method == "ew") {
        g = grads[0] + grads[1];
      } else if (opts.method == "rlw") {
        const auto w = sample_random_weights(2, rng);
        g = w[0] * grads[0] + w[1] * grads[1];
      } else if (opts.method == "pcgrad") {
        g = pcgrad<double>(grads, rng);
      } else {
        g = cagrad<double>(grads, opts.cagrad_c);
      }
      update = opt.step(x, g);
    }
    if (!x.allFinite()) {
      run.failed = true;
      run.failure = "non-finite iterate at iteration " + std::to_string(it + 1);
      break;
    }
  }
  if (run.trajectory.empty() || run.trajectory.back().second != ToyLandscape::Point(x)) {
    const long last = run.converged ? run.iterations : opts.max_iterations;
    run.trajectory.emplace_back(run.failed ? -1 : last, x);
  }
  run.final_point = x;
  run.distance = (x - target).norm();
  return run;
}

std::vector<LandscapeRun> run_landscape(const ExperimentConfig& cfg) {
  std::vector<LandscapeRun> runs;
  const auto starts = ToyLandscape::starting_points();
  for (const auto& method : cfg.methods) {
    for (const auto& optimizer : cfg.optimizers) {
      for (double lr : cfg.lrs) {
        for (std::uint64_t seed : cfg.seeds) {
          for (std::size_t s = 0; s < starts.size(); ++s) {
            LandscapeOptions o;
            o.method = method;
            o.optimizer = optimizer;
            o.hyper = cfg.hyper;
            o.hyper.lr = lr;
            o.cagrad_c = cfg.cagrad_c;
            o.max_iterations = cfg.budget;
            o.tolerance = cfg.tolerance;
            o.trajectory_stride = cfg.trajectory_stride;
            o.seed = seed;
            runs.push_back(landscape_run(o, starts[s], static_cast<int>(s)));
          }
        }
      }
    }
  }
  return runs;
}

SuiteFiles landscape_files(const std::vector<LandscapeRun>& runs) {
  CsvTable table({"method", "optimizer", "lr", "seed", "start", "converged", "iterations", "failed", "x1", "x2",
                  "distance", "failure"});
  CsvTable traj({"method", "optimizer", "lr", "seed", "start", "iteration", "x1", "x2"});
  // Max iterations over all starts and seeds per (method, optimizer, lr); "-"
  // when any run misses the minimum.
  std::vector<std::tuple<std::string, std::string, double>> keys;
  std::map<std::tuple<std::string, std::string, double>, long> worst;
  for (const auto& r : runs) {
    table.row().add(r.method).add(r.optimizer).add(r.lr).add(r.seed).add(r.start).add(r.converged ? 1 : 0)
        .add(r.iterations).add(r.failed ? 1 : 0).add(r.final_point[0]).add(r.final_point[1]).add(r.distance)
        .add(r.failure);
    for (const auto& [it, p] : r.trajectory) {
      traj.row().add(r.method).add(r.optimizer).add(r.lr).add(r.seed).add(r.start).add(it).add(p[0]).add(p[1]);
    }
    const auto key = std::make_tuple(r.method, r.optimizer, r.lr);
    if (!worst.count(key)) {
      keys.push_back(key);
      worst[key] = 0;
    }
    long& w = worst[key];
    w = (w < 0 || !r.converged) ? -1 : std::max(w, r.iterations);
  }
  CsvTable summary({"method", "optimizer", "lr", "max_iterations"});
  for (const auto& key : keys) {
    const long w = worst[key];
    summary.row().add(std::get<0>(key)).add(std::get<1>(key)).add(std::get<2>(key)).add(w < 0 ? "-" : std::to_string(w));
  }
  return {{"landscape.csv", table.str()}, {"landscape_summary.csv", summary.str()},
          {"landscape_trajectories.csv", traj.str()}};
}

// ---- invariance audit ----

InvarianceCase parse_invariance_case(const std::string& name) {
  const auto dash = name.find('-');
  if (dash == std::string::npos) throw ConfigError("invariance case '" + name + "' is not '<weighting>-<optimizer>'");
  InvarianceCase c;
  c.name = name;
  c.weighting = parse_weighting(name.substr(0, dash));
  c.optimizer = parse_optimizer(name.substr(dash + 1));
  return c;
}

Dataset invariance_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  // Scalar inputs, both targets the same linear scaling of the input.
  const double gain = cfg.data.tasks.empty() ? 1.0 : cfg.data.tasks[0].scale;
  const double noise = cfg.data.tasks.empty() ? 0.0 : cfg.data.tasks[0].noise;
  Rng rng(mix_seed(seed, kDataStream));
  Dataset d;
  d.inputs = Matrix(cfg.data.train_size, cfg.data.input_dim);
  d.targets = Matrix(cfg.data.train_size, 2);
  for (Index r = 0; r < d.size(); ++r) {
    for (Index k = 0; k < d.inputs.cols(); ++k) d.inputs(r, k) = rng.uniform(-1.0, 1.0);
    const double y = gain * d.inputs(r, 0) + (noise > 0.0 ? rng.normal(0.0, noise) : 0.0);
    d.targets(r, 0) = y;
    d.targets(r, 1) = y;
  }
  return d;
}

InvarianceTrace invariance_run(const InvarianceCase& c, const ExperimentConfig& cfg, bool frozen, bool scaled,
                               std::uint64_t seed, const std::vector<double>& weights) {
  InvarianceTrace trace;
  trace.case_name = c.name;
  trace.frozen = frozen;
  trace.scaled = scaled;
  if (cfg.scales.size() != 2) throw ConfigError("invariance.scales needs two entries");
  if (cfg.data.tasks.size() != 2) throw ConfigError("the invariance suite needs exactly two tasks");

  const Dataset data = invariance_dataset(cfg, seed);
  TrainerConfig tc;
  tc.weighting = c.weighting;
  tc.optimizer = c.optimizer;
  tc.hyper = cfg.hyper;
  tc.hyper.lr = cfg.lrs.front();
  tc.freeze_backbone = frozen;
  tc.batch_size = cfg.batch_size;
  tc.fixed_weights = weights;
  if (scaled) tc.loss_scales = cfg.scales;
  const std::vector<TaskDef> tasks(2, TaskDef{});
  Trainer trainer(HydraNet::build(cfg.network(), mix_seed(seed, kInitStream)), tasks, tc, mix_seed(seed, kTrainStream));
  try {
    for (long e = 1; e <= cfg.budget; ++e) {
      for (auto& s : trainer.epoch(data)) {
        trace.steps.push_back(std::move(s));
        trace.epoch_of_step.push_back(e);
      }
    }
  } catch (const std::domain_error& err) {
    trace.failed = true;
    trace.failure = err.what();
  }
  return trace;
}

std::vector<InvarianceTrace> run_invariance(const ExperimentConfig& cfg) {
  std::vector<InvarianceTrace> out;
  for (std::uint64_t seed : cfg.seeds) {
    for (const auto& name : cfg.invariance_cases) {
      const auto c = parse_invariance_case(name);
      for (const auto& mode : cfg.backbone_modes) {
        if (mode != "frozen" && mode != "free") throw ConfigError("invariance.backbone entries are frozen or free");
        for (bool scaled : {false, true}) {
          out.push_back(invariance_run(c, cfg, mode == "frozen", scaled, seed, cfg.rlw_weights));
        }
      }
    }
  }
  return out;
}

SuiteFiles invariance_files(const std::vector<InvarianceTrace>& traces) {
  CsvTable table({"case", "backbone", "scaled", "epoch", "step", "loss_1", "loss_2", "grad_backbone", "grad_head_1",
                  "grad_head_2", "update_backbone", "update_head_1", "update_head_2", "status"});
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& s = t.steps[i];
      table.row().add(t.case_name).add(t.frozen ? "frozen" : "free").add(t.scaled ? 1 : 0).add(t.epoch_of_step[i])
          .add(s.step).add(s.losses[0]).add(s.losses[1]);
      for (const auto& n : s.norms) table.add(n.grad_norm);
      for (const auto& n : s.norms) table.add(n.update_norm);
      table.add("ok");
    }
    if (t.failed) {
      table.row().add(t.case_name).add(t.frozen ? "frozen" : "free").add(t.scaled ? 1 : 0);
      for (int k = 0; k < 10; ++k) table.add("");
      table.add("failed: " + t.failure);
    }
  }
  return {{"invariance.csv", table.str()}};
}

double max_relative_difference(const InvarianceTrace& a, const InvarianceTrace& b, const std::vector<std::string>& parts,
                               bool updates) {
  if (a.steps.size() != b.steps.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    for (std::size_t k = 0; k < a.steps[i].norms.size(); ++k) {
      const auto& na = a.steps[i].norms[k];
      const auto& nb = b.steps[i].norms[k];
      if (std::find(parts.begin(), parts.end(), na.partition) == parts.end()) continue;
      const double x = updates ? na.update_norm : na.grad_norm;
      const double y = updates ? nb.update_norm : nb.grad_norm;
      const double denom = std::max(std::fabs(x), std::fabs(y));
      if (denom > 0.0) worst = std::max(worst, std::fabs(x - y) / denom);
    }
  }
  return worst;
}

// ---- gradient similarity profile ----

const SimilarityStats& GradsimEpoch::find(Measure m, ComparisonMode mode) const {
  for (const auto& s : stats) {
    if (s.measure == m && s.mode == mode) return s;
  }
  throw std::out_of_range("no statistics for " + to_string(m) + "/" + to_string(mode));
}

std::vector<GradsimEpoch> run_gradsim(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.data.tasks.size() < 2) {
    throw ConfigError("gradsim: inter_task comparison needs at least two tasks, config has " +
                      std::to_string(cfg.data.tasks.size()));
  }
  const DatasetSplits data = generate(cfg.data, mix_seed(seed, kDataStream));
  const auto tasks = cfg.data.task_defs();
  TrainerConfig tc = make_trainer_config("ew", cfg.optimizers.front(), cfg.lrs.front(), cfg);
  Trainer trainer(HydraNet::build(cfg.network(), mix_seed(seed, kInitStream)), tasks, tc, mix_seed(seed, kTrainStream));
  Rng order_rng(mix_seed(seed, kTrainStream + 100));
  Rng probe_rng(mix_seed(seed, kProbeStream));

  std::vector<GradsimEpoch> out;
  long step = 0;
  for (long e = 1; e <= cfg.budget; ++e) {
    SimilarityAccumulator acc;
    std::vector<Index> order(static_cast<std::size_t>(data.train.size()));
    std::iota(order.begin(), order.end(), Index{0});
    order_rng.shuffle(std::span<Index>(order));
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      const Dataset batch = data.train.rows(std::span<const Index>(order.data() + b, end - b));
      if (step % cfg.probe_every == 0) {
        ProtocolOptions po;
        po.max_items = cfg.max_items;
        po.batch_mean = cfg.batch_mean;
        po.mode = ComparisonMode::kInterTask;
        similarity_protocol(trainer.net(), batch, tasks, po, probe_rng, acc);
        if (batch.size() >= 2) {
          po.mode = ComparisonMode::kInterSample;
          similarity_protocol(trainer.net(), batch, tasks, po, probe_rng, acc);
        }
      }
      trainer.step(batch);
      ++step;
    }
    out.push_back({e, seed, acc.summarize_all()});
  }
  return out;
}

SuiteFiles gradsim_files(const std::vector<GradsimEpoch>& epochs) {
  CsvTable table({"seed", "epoch", "measure", "mode", "mean", "std", "p2.5", "p97.5", "n_pairs", "n_excluded"});
  for (const auto& e : epochs) {
    for (const auto& s : e.stats) {
      table.row().add(e.seed).add(e.epoch).add(to_string(s.measure)).add(to_string(s.mode)).add(s.mean).add(s.stddev)
          .add(s.p025).add(s.p975).add(static_cast<long>(s.n_pairs)).add(static_cast<long>(s.n_excluded));
    }
  }
  return {{"gradsim.csv", table.str()}};
}

// ---- learning-rate sweep ----

TrainOutcome train_with_early_stopping(const HydraSpec& spec, std::vector<TaskDef> tasks, const DatasetSplits& data,
                                       const TrainerConfig& tc, long epochs, std::uint64_t seed,
                                       const std::function<double(const std::vector<double>&)>& score) {
  const auto names = metric_names(tasks);
  const auto orient = orientations(tasks);
  Trainer trainer(HydraNet::build(spec, mix_seed(seed, kInitStream)), tasks, tc, mix_seed(seed, kTrainStream));
  TrainOutcome out{RunRecord{}, trainer.net()};
  RunRecord& r = out.record;
  r.metric_names = names;
  r.higher_is_better = orient;
  r.lr = tc.hyper.lr;
  r.optimizer = to_string(tc.optimizer);
  r.seed = seed;
  std::vector<double> scores;
  try {
    for (long e = 1; e <= epochs; ++e) {
      trainer.epoch(data.train);
      auto val = trainer.evaluate(data.val);
      const double s = score(val);
      r.val_metrics.push_back(std::move(val));
      r.val_delta_m.push_back(s);
      // Strict improvement keeps the earliest of tied epochs.
      if (scores.empty() || s < scores[select_best_epoch(scores)] || std::isnan(scores[select_best_epoch(scores)])) {
        out.best_net = trainer.net();
      }
      scores.push_back(s);
    }
  } catch (const std::domain_error& err) {
    r.failed = true;
    r.failure = err.what();
  }
  if (!scores.empty()) {
    r.best_epoch = static_cast<int>(select_best_epoch(scores)) + 1;
    r.test_metrics = evaluate(out.best_net, tasks, data.test);
  } else {
    r.test_metrics = evaluate(out.best_net, tasks, data.test);
  }
  return out;
}

std::vector<double> BaselineSet::val_metrics() const {
  std::vector<double> out;
  for (const auto& b : per_task) {
    if (b.record.best_epoch < 1) throw std::runtime_error("single-task baseline has no validation epoch");
    out.push_back(b.record.val_metrics[static_cast<std::size_t>(b.record.best_epoch - 1)][0]);
  }
  return out;
}

std::vector<double> BaselineSet::test_metrics() const {
  std::vector<double> out;
  for (const auto& b : per_task) out.push_back(b.record.test_metrics.at(0));
  return out;
}

DatasetSplits single_task_splits(const DatasetSplits& data, int task) {
  auto pick = [&](const Dataset& d) { return Dataset{d.inputs, d.targets.col(task)}; };
  return {pick(data.train), pick(data.val), pick(data.test)};
}

BaselineSet train_baselines(const ExperimentConfig& cfg, const DatasetSplits& data, std::uint64_t seed) {
  BaselineSet set;
  const auto tasks = cfg.data.task_defs();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const bool hib = higher_is_better(tasks[t]);
    TrainerConfig tc = make_trainer_config("ew", cfg.stl_optimizer, cfg.stl_lr, cfg);
    auto outcome = train_with_early_stopping(cfg.single_task_network(static_cast<int>(t)), {tasks[t]},
                                             single_task_splits(data, static_cast<int>(t)), tc, cfg.budget,
                                             mix_seed(seed, kBaselineStream + t),
                                             [hib](const std::vector<double>& v) { return hib ? -v[0] : v[0]; });
    if (outcome.record.failed) {
      throw std::runtime_error("single-task baseline for task " + std::to_string(t + 1) + " failed: " +
                               outcome.record.failure);
    }
    outcome.record.method = "stl-" + std::to_string(t + 1);
    outcome.record.seed = seed;  // the run seed; the baseline stream is derived from it
    outcome.record.config_hash = config_hash(cfg);
    outcome.record.val_delta_m.clear();
    set.per_task.push_back(std::move(outcome));
  }
  return set;
}

std::vector<PoCount> pareto_counts(const std::vector<RunRecord>& runs) {
  std::vector<PoCount> out;
  std::vector<std::string> groups;
  std::map<std::string, std::vector<std::vector<double>>> points;
  std::vector<std::vector<double>> all;
  std::vector<std::string> group_of;
  std::vector<bool> orient;
  for (const auto& r : runs) {
    if (r.failed) continue;
    if (orient.empty()) orient = r.higher_is_better;
    if (r.higher_is_better != orient) throw std::invalid_argument("pareto counts: records disagree on orientation");
    if (!points.count(r.optimizer)) groups.push_back(r.optimizer);
    points[r.optimizer].push_back(r.test_metrics);
    all.push_back(r.test_metrics);
    group_of.push_back(r.optimizer);
  }
  if (all.empty()) return out;
  const auto front = pareto_front(all, orient);
  for (const auto& g : groups) {
    PoCount full{g, "all", 0, points[g].size()};
    for (std::size_t i : front) full.not_dominated += group_of[i] == g ? 1 : 0;
    out.push_back(full);
    for (const auto& h : groups) {
      if (h == g) continue;
      out.push_back({g, h, count_not_dominated(points[g], points[h], orient), points[g].size()});
    }
  }
  return out;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  SweepResult result;
  const auto tasks = cfg.data.task_defs();
  const auto orient = orientations(tasks);
  const std::string hash = config_hash(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const DatasetSplits data = generate(cfg.data, mix_seed(seed, kDataStream));
    const BaselineSet baseline = train_baselines(cfg, data, seed);
    for (const auto& b : baseline.per_task) result.baselines.push_back(b.record);
    const auto base_val = baseline.val_metrics();
    const auto base_test = baseline.test_metrics();
    for (const auto& method : cfg.methods) {
      for (const auto& optimizer : cfg.optimizers) {
        for (double lr : cfg.lrs) {
          const TrainerConfig tc = make_trainer_config(method, optimizer, lr, cfg);
          auto outcome = train_with_early_stopping(
              cfg.network(), tasks, data, tc, cfg.budget, seed,
              [&](const std::vector<double>& v) { return delta_m(v, base_val, orient); });
          RunRecord& r = outcome.record;
          r.method = method;
          r.optimizer = optimizer;
          r.config_hash = hash;
          r.test_delta_m = r.test_metrics.empty() ? 0.0 : delta_m(r.test_metrics, base_test, orient);
          result.runs.push_back(std::move(r));
        }
      }
    }
  }
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    if (result.runs[i].failed) continue;
    points.push_back(result.runs[i].test_metrics);
    index.push_back(i);
  }
  if (!points.empty()) {
    for (std::size_t k : pareto_front(points, orient)) result.front.push_back(index[k]);
  }
  result.po = pareto_counts(result.runs);
  return result;
}

SuiteFiles sweep_files(const SweepResult& r) {
  std::vector<std::string> header{"seed", "method", "optimizer", "lr", "best_epoch", "val_delta_m", "test_delta_m",
                                  "failed"};
  const auto& names = !r.runs.empty() ? r.runs.front().metric_names : std::vector<std::string>{};
  for (const auto& n : names) header.push_back("test_" + n);
  CsvTable runs(header);
  for (const auto& rec : r.runs) {
    const double best_val = rec.best_epoch >= 1 ? rec.val_delta_m[static_cast<std::size_t>(rec.best_epoch - 1)]
                                                : std::numeric_limits<double>::quiet_NaN();
    runs.row().add(rec.seed).add(rec.method).add(rec.optimizer).add(rec.lr).add(rec.best_epoch).add(best_val)
        .add(rec.test_delta_m).add(rec.failed ? 1 : 0);
    for (std::size_t k = 0; k < names.size(); ++k) {
      runs.add(k < rec.test_metrics.size() ? rec.test_metrics[k] : std::numeric_limits<double>::quiet_NaN());
    }
  }

  std::vector<std::string> fh{"seed", "method", "optimizer", "lr"};
  for (const auto& n : names) fh.push_back("test_" + n);
  CsvTable front(fh);
  for (std::size_t i : r.front) {
    const auto& rec = r.runs[i];
    front.row().add(rec.seed).add(rec.method).add(rec.optimizer).add(rec.lr);
    for (double v : rec.test_metrics) front.add(v);
  }

  CsvTable po({"group", "versus", "not_dominated", "total"});
  for (const auto& c : r.po) po.row().add(c.group).add(c.versus).add(static_cast<long>(c.not_dominated)).add(static_cast<long>(c.total));

  // Best learning rate per (method, optimizer) by mean validation delta_m over
  // seeds, then the test delta_m at that rate.
  struct Acc {
    double val = 0.0, test = 0.0, test_sq = 0.0;
    int n = 0;
    bool failed = false;
  };
  std::vector<std::pair<std::string, std::string>> combos;
  std::map<std::pair<std::string, std::string>, std::map<double, Acc>> accs;
  for (const auto& rec : r.runs) {
    const auto key = std::make_pair(rec.method, rec.optimizer);
    if (!accs.count(key)) combos.push_back(key);
    Acc& a = accs[key][rec.lr];
    if (rec.failed || rec.best_epoch < 1) {
      a.failed = true;
      continue;
    }
    a.val += rec.val_delta_m[static_cast<std::size_t>(rec.best_epoch - 1)];
    a.test += rec.test_delta_m;
    a.test_sq += rec.test_delta_m * rec.test_delta_m;
    ++a.n;
  }
  CsvTable best({"method", "optimizer", "best_lr", "val_delta_m", "test_delta_m", "test_delta_m_std", "seeds"});
  for (const auto& key : combos) {
    const Acc* chosen = nullptr;
    double chosen_lr = 0.0;
    for (const auto& [lr, a] : accs[key]) {
      if (a.failed || a.n == 0) continue;
      if (!chosen || a.val / a.n < chosen->val / chosen->n) {
        chosen = &a;
        chosen_lr = lr;
      }
    }
    best.row().add(key.first).add(key.second);
    if (!chosen) {
      best.add("-").add("-").add("-").add("-").add(0L);
      continue;
    }
    const double mean = chosen->test / chosen->n;
    const double var = std::max(0.0, chosen->test_sq / chosen->n - mean * mean);
    best.add(chosen_lr).add(chosen->val / chosen->n).add(mean).add(std::sqrt(var)).add(static_cast<long>(chosen->n));
  }

  std::vector<RunRecord> all = r.baselines;
  all.insert(all.end(), r.runs.begin(), r.runs.end());
  return {{"sweep_runs.csv", runs.str()},
          {"sweep_pareto.csv", front.str()},
          {"sweep_po.csv", po.str()},
          {"sweep_best.csv", best.str()},
          {"sweep_records.json", to_json(all)}};
}

// ---- corruption robustness ----

std::vector<std::vector<double>> corruption_metrics(const HydraNet& pretrained, std::span<const TaskDef> tasks,
                                                    const DatasetSplits& data, const ExperimentConfig& cfg,
                                                    std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  std::uint64_t cell = 0;
  for (const auto& name : cfg.corruptions) {
    const Corruption mode = parse_corruption(name);
    for (int severity : cfg.severities) {
      const std::uint64_t cseed = mix_seed(seed, kCorruptStream + cell);
      const Dataset train = corrupt(data.train, mode, severity, cseed);
      const Dataset test = corrupt(data.test, mode, severity, mix_seed(cseed, 1));
      TrainerConfig tc = make_trainer_config("ew", cfg.stl_optimizer, cfg.stl_lr, cfg);
      tc.freeze_backbone = true;
      Trainer ft(pretrained, std::vector<TaskDef>(tasks.begin(), tasks.end()), tc, mix_seed(seed, kFinetuneStream + cell));
      for (long e = 0; e < cfg.finetune_epochs; ++e) ft.epoch(train);
      out.push_back(ft.evaluate(test));
      ++cell;
    }
  }
  return out;
}

std::vector<OodTaskResult> run_ood(const ExperimentConfig& cfg) {
  std::vector<OodTaskResult> out;
  const auto tasks = cfg.data.task_defs();
  const auto orient = orientations(tasks);
  for (std::uint64_t seed : cfg.seeds) {
    const DatasetSplits data = generate(cfg.data, mix_seed(seed, kDataStream));
    const BaselineSet baseline = train_baselines(cfg, data, seed);
    const auto base_val = baseline.val_metrics();
    const TrainerConfig tc = make_trainer_config(cfg.methods.front(), cfg.optimizers.front(), cfg.lrs.front(), cfg);
    const auto mtl = train_with_early_stopping(cfg.network(), tasks, data, tc, cfg.budget, seed,
                                               [&](const std::vector<double>& v) { return delta_m(v, base_val, orient); });
    if (mtl.record.failed) throw std::runtime_error("ood: pre-training the multi-task model failed: " + mtl.record.failure);

    const auto mtl_cells = corruption_metrics(mtl.best_net, tasks, data, cfg, seed);
    const auto mtl_clean = evaluate(mtl.best_net, tasks, data.test);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const auto st = single_task_splits(data, static_cast<int>(t));
      const HydraNet& stl_net = baseline.per_task[t].best_net;
      const auto stl_cells = corruption_metrics(stl_net, std::span<const TaskDef>(&tasks[t], 1), st, cfg, seed);
      OodTaskResult res;
      res.seed = seed;
      res.task = static_cast<int>(t);
      res.metrics.mtl_clean = mtl_clean[t];
      res.metrics.stl_clean = baseline.per_task[t].record.test_metrics.at(0);
      res.metrics.higher_is_better = orient[t];
      res.metrics.num_modes = cfg.corruptions.size();
      res.metrics.num_severities = cfg.severities.size();
      for (std::size_t c = 0; c < mtl_cells.size(); ++c) {
        res.metrics.cells.push_back(CorruptionCell{mtl_cells[c][t], stl_cells[c][0]});
      }
      res.delta = delta_t(res.metrics);
      out.push_back(std::move(res));
    }
  }
  return out;
}

SuiteFiles ood_files(const std::vector<OodTaskResult>& results, const ExperimentConfig& cfg) {
  CsvTable summary({"seed", "task", "higher_is_better", "mtl_clean", "stl_clean", "delta_t"});
  CsvTable cells({"seed", "task", "corruption", "severity", "mtl", "stl"});
  for (const auto& r : results) {
    summary.row().add(r.seed).add(r.task + 1).add(r.metrics.higher_is_better ? 1 : 0).add(r.metrics.mtl_clean)
        .add(r.metrics.stl_clean).add(r.delta);
    for (std::size_t c = 0; c < r.metrics.num_modes; ++c) {
      for (std::size_t s = 0; s < r.metrics.num_severities; ++s) {
        const auto& cell = r.metrics.cells[c * r.metrics.num_severities + s];
        cells.row().add(r.seed).add(r.task + 1).add(cfg.corruptions[c]).add(cfg.severities[s]).add(cell->mtl).add(cell->stl);
      }
    }
  }
  return {{"ood.csv", summary.str()}, {"ood_cells.csv", cells.str()}};
}

SuiteFiles run_suite(const ExperimentConfig& cfg) {
  cfg.validate();
  SuiteFiles files;
  if (cfg.suite == "landscape") {
    files = landscape_files(run_landscape(cfg));
  } else if (cfg.suite == "invariance") {
    files = invariance_files(run_invariance(cfg));
  } else if (cfg.suite == "gradsim") {
    std::vector<GradsimEpoch> all;
    for (std::uint64_t seed : cfg.seeds) {
      auto e = run_gradsim(cfg, seed);
      all.insert(all.end(), e.begin(), e.end());
    }
    files = gradsim_files(all);
  } else if (cfg.suite == "synth-mtl") {
    files = sweep_files(run_sweep(cfg));
  } else if (cfg.suite == "ood") {
    files = ood_files(run_ood(cfg), cfg);
  } else {
    throw ConfigError("unknown suite '" + cfg.suite + "' (landscape | invariance | gradsim | synth-mtl | ood)");
  }

  nlohmann::ordered_json sidecar;
  sidecar["suite"] = cfg.suite;
  sidecar["config"] = cfg.source.values();
  sidecar["config_hash"] = config_hash(cfg);
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  for (const auto& [name, content] : files) outputs[name] = git_blob_hash(content);
  sidecar["outputs"] = outputs;
  files[cfg.suite + ".json"] = sidecar.dump(2) + "\n";
  return files;
}

void write_suite(const SuiteFiles& files, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : files) write_text((std::filesystem::path(dir) / name).string(), content);
}

}  // namespace mtl

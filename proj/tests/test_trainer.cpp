#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mtl/harness.hpp"
#include "mtl/trainer.hpp"

using namespace mtl;

namespace {

Dataset regression_batch(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d{Matrix(n, 3), Matrix(n, 2)};
  for (Index r = 0; r < n; ++r) {
    for (Index k = 0; k < 3; ++k) d.inputs(r, k) = rng.uniform(-1, 1);
    d.targets(r, 0) = 5.0 * d.inputs(r, 0);
    d.targets(r, 1) = 0.2 * d.inputs(r, 1) - d.inputs(r, 2);
  }
  return d;
}

Trainer make(WeightingMethod w, const OptimizerHyper& hp, std::vector<double> fixed = {}) {
  TrainerConfig tc;
  tc.weighting = w;
  tc.optimizer = OptimizerKind::kAdam;
  tc.hyper = hp;
  tc.freeze_backbone = true;
  tc.batch_size = 8;
  tc.fixed_weights = std::move(fixed);
  return Trainer(HydraNet::build({{3, 8}, {{8, 4, 1}, {8, 4, 1}}, 0.01}, 6), std::vector<TaskDef>(2), tc, 7);
}

}  // namespace

TEST(Trainer, UwoHeadGradientIsTaskGradientOverLoss) {
  OptimizerHyper hp;
  const Dataset batch = regression_batch(8, 1);
  Trainer ew = make(WeightingMethod::kEqual, hp), uwo = make(WeightingMethod::kOptimalUncertainty, hp);
  const StepTrace a = ew.step(batch), b = uwo.step(batch);
  for (int t = 0; t < 2; ++t) {
    const double expected = a.norms[static_cast<std::size_t>(t) + 1].grad_norm / a.losses[static_cast<std::size_t>(t)];
    EXPECT_NEAR(b.norms[static_cast<std::size_t>(t) + 1].grad_norm, expected, 1e-14 * expected);
  }
}

TEST(Trainer, SignLikeAdamMakesWeightingIrrelevantForHeads) {
  OptimizerHyper hp;
  hp.lr = 1e-3;
  hp.beta1 = 0.0;
  hp.beta2 = 0.0;
  hp.eps = 0.0;
  const Dataset data = regression_batch(64, 2);
  Trainer ew = make(WeightingMethod::kEqual, hp);
  Trainer uwo = make(WeightingMethod::kOptimalUncertainty, hp);
  Trainer rlw = make(WeightingMethod::kRandom, hp, {0.3, 0.7});
  for (int e = 0; e < 10; ++e) {
    ew.epoch(data);
    uwo.epoch(data);
    rlw.epoch(data);
  }
  EXPECT_EQ(ew.net().flat(), uwo.net().flat());
  EXPECT_EQ(ew.net().flat(), rlw.net().flat());
}

TEST(Trainer, TaskLossScaleMultipliesLossButNotMetric) {
  const Dataset batch = regression_batch(8, 3);
  const HydraNet net = HydraNet::build({{3, 8}, {{8, 1}, {8, 1}}, 0.01}, 4);
  TaskDef plain, scaled;
  scaled.loss_scale = 100.0;
  Tape tape;
  const auto out = net.forward(net.bind(tape), tape.constant(Tensor(batch.inputs)));
  const double a = task_loss(plain, out[0], batch.targets.col(0)).item();
  const double b = task_loss(scaled, out[0], batch.targets.col(0)).item();
  EXPECT_DOUBLE_EQ(b, 100.0 * a);
  const auto m = net.predict(batch.inputs);
  EXPECT_EQ(task_metric(plain, m[0], batch.targets.col(0)), task_metric(scaled, m[0], batch.targets.col(0)));
}

TEST(Trainer, LossScalesComeFromConfig) {
  const auto cfg = load_experiment(ConfigFile::parse("suite = gradsim\ndata.loss_scales = 100, 1\n"));
  EXPECT_EQ(cfg.data.tasks[0].def.loss_scale, 100.0);
  EXPECT_EQ(cfg.data.tasks[1].def.loss_scale, 1.0);
  EXPECT_THROW(load_experiment(ConfigFile::parse("suite = gradsim\ndata.loss_scales = 1\n")), ConfigError);
  EXPECT_THROW(load_experiment(ConfigFile::parse("suite = gradsim\ndata.loss_scales = 0, 1\n")), ConfigError);
}

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mtl/metrics.hpp"
#include "mtl/network.hpp"
#include "oracles.hpp"

using namespace mtl;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector out(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

}  // namespace

TEST(Similarity, CosExample) {
  EXPECT_NEAR(*cos_similarity(v({1, 0}), v({1, 1})), std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(*cos_similarity(v({1, 2}), v({-1, -2})), -1.0);
}

TEST(Similarity, MagExample) {
  EXPECT_NEAR(*mag_similarity(v({1, 0}), v({0, 3})), 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(*mag_similarity(v({2, 0}), v({0, -2})), 1.0);
}

TEST(Similarity, ConflictRatioExample) {
  EXPECT_DOUBLE_EQ(*conflict_ratio(v({1, 1}), v({1, -1})), 0.5);
  EXPECT_DOUBLE_EQ(*conflict_ratio(v({1, 0, -2}), v({1, 0, -1})), 0.0);
}

TEST(Similarity, ZeroVectorsAreExcluded) {
  EXPECT_FALSE(cos_similarity(v({0, 0}), v({1, 1})).has_value());
  EXPECT_FALSE(mag_similarity(v({0, 0}), v({0, 0})).has_value());
  EXPECT_EQ(dot_similarity(v({0, 0}), v({1, 1})), 0.0);
  EXPECT_THROW(cos_similarity(v({1}), v({1, 1})), ShapeError);
}

TEST(Similarity, MeasuresAreSymmetric) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Vector a(6), b(6);
    for (Index k = 0; k < 6; ++k) {
      a[k] = rng.normal();
      b[k] = rng.normal();
    }
    EXPECT_EQ(*cos_similarity(a, b), *cos_similarity(b, a));
    EXPECT_EQ(*mag_similarity(a, b), *mag_similarity(b, a));
    EXPECT_EQ(*conflict_ratio(a, b), *conflict_ratio(b, a));
    EXPECT_LE(*mag_similarity(a, b), 1.0);
  }
}

TEST(Similarity, PercentileInterpolates) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(percentile({7}, 0.975), 7.0);
}

TEST(Similarity, AccumulatorStats) {
  SimilarityAccumulator acc;
  for (double x : {1.0, 2.0, 3.0, 4.0}) acc.add(Measure::kCos, ComparisonMode::kInterTask, x);
  acc.add(Measure::kCos, ComparisonMode::kInterTask, std::nullopt);
  const SimilarityStats s = acc.summarize(Measure::kCos, ComparisonMode::kInterTask);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.stddev, std::sqrt(1.25));
  EXPECT_EQ(s.n_pairs, 4u);
  EXPECT_EQ(s.n_excluded, 1u);
  EXPECT_DOUBLE_EQ(s.p025, 1.075);
  EXPECT_DOUBLE_EQ(s.p975, 3.925);
  EXPECT_EQ(acc.summarize_all().size(), 1u);
  acc.clear();
  EXPECT_TRUE(acc.empty());
}

TEST(Similarity, MeasureNames) {
  EXPECT_EQ(to_string(Measure::kConflictRatio), "conflict_ratio");
  EXPECT_EQ(to_string(ComparisonMode::kInterSample), "inter_sample");
}

class ProtocolTest : public ::testing::Test {
 protected:
  HydraNet net = HydraNet::build({{2, 8}, {{8, 1}, {8, 1}}, 0.01}, 3);
  std::vector<TaskDef> tasks = std::vector<TaskDef>(2);
  Dataset batch;

  void SetUp() override {
    Rng rng(5);
    batch.inputs = Matrix(32, 2);
    batch.targets = Matrix(32, 2);
    for (Index r = 0; r < 32; ++r) {
      for (Index k = 0; k < 2; ++k) {
        batch.inputs(r, k) = rng.uniform(-1, 1);
        batch.targets(r, k) = rng.uniform(-1, 1);
      }
    }
  }
};

TEST_F(ProtocolTest, InterTaskWithTwoTasksGivesOnePair) {
  Rng rng(0);
  SimilarityAccumulator acc;
  const auto pairs = similarity_protocol(net, batch, tasks, {ComparisonMode::kInterTask, 8, false}, rng, acc);
  EXPECT_EQ(pairs.size(), 1u);
  EXPECT_EQ(acc.summarize(Measure::kDot, ComparisonMode::kInterTask).n_pairs, 1u);
}

TEST_F(ProtocolTest, InterSampleDrawsEightRows) {
  Rng rng(0);
  SimilarityAccumulator acc;
  const auto pairs = similarity_protocol(net, batch, tasks, {ComparisonMode::kInterSample, 8, false}, rng, acc);
  EXPECT_EQ(pairs.size(), 28u);
  EXPECT_EQ(acc.summarize(Measure::kCos, ComparisonMode::kInterSample).n_pairs +
                acc.summarize(Measure::kCos, ComparisonMode::kInterSample).n_excluded,
            28u);
}

TEST_F(ProtocolTest, DuplicatedSamplesAreIdentical) {
  for (Index r = 1; r < batch.size(); ++r) batch.inputs.row(r) = batch.inputs.row(0);
  for (Index r = 1; r < batch.size(); ++r) batch.targets.row(r) = batch.targets.row(0);
  Rng rng(0);
  SimilarityAccumulator acc;
  for (const auto& p : similarity_protocol(net, batch, tasks, {ComparisonMode::kInterSample, 4, false}, rng, acc)) {
    if (!p.cos) continue;
    EXPECT_NEAR(*p.cos, 1.0, 1e-12);
    EXPECT_NEAR(*p.mag, 1.0, 1e-12);
    EXPECT_EQ(*p.conflict, 0.0);
  }
}

TEST_F(ProtocolTest, Preconditions) {
  Rng rng(0);
  SimilarityAccumulator acc;
  const std::vector<TaskDef> one(1);
  EXPECT_THROW(similarity_protocol(net, batch, one, {ComparisonMode::kInterTask, 8, false}, rng, acc),
               std::invalid_argument);
  const std::vector<Index> first{0};
  EXPECT_THROW(similarity_protocol(net, batch.rows(first), tasks, {ComparisonMode::kInterSample, 8, false}, rng, acc),
               std::invalid_argument);
}

TEST(DeltaM, TenPercentExample) {
  const std::vector<double> m{1.1}, b{1.0};
  EXPECT_NEAR(delta_m(m, b, {false}), 10.0, 1e-12);
  EXPECT_NEAR(delta_m(m, b, {true}), -10.0, 1e-12);
  const std::vector<double> m2{1.1, 0.9}, b2{1.0, 1.0};
  EXPECT_NEAR(delta_m(m2, b2, {false, false}), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(delta_m(b2, b2, {false, true}), 0.0);
  const std::vector<double> zero{0.0};
  EXPECT_THROW(delta_m(m, zero, {false}), std::domain_error);
}

TEST(DeltaT, Example) {
  // The multi-task model loses 20% on corruption, the single-task one 10%.
  OodTaskMetrics m;
  m.mtl_clean = 1.0;
  m.stl_clean = 2.0;
  m.higher_is_better = false;
  m.num_modes = 1;
  m.num_severities = 2;
  m.cells = {CorruptionCell{1.2, 2.2}, CorruptionCell{1.2, 2.2}};
  EXPECT_NEAR(delta_t(m), 0.1, 1e-12);
  m.higher_is_better = true;
  EXPECT_NEAR(delta_t(m), -0.1, 1e-12);
  m.cells[1].reset();
  EXPECT_THROW(delta_t(m), std::invalid_argument);
}

TEST(DeltaT, IdenticalModelsGiveZero) {
  OodTaskMetrics m{0.5, 0.5, true, 2, 2, {}};
  for (double x : {0.4, 0.3, 0.2, 0.1}) m.cells.push_back(CorruptionCell{x, x});
  EXPECT_EQ(delta_t(m), 0.0);
}

TEST(Pareto, Example) {
  const std::vector<std::vector<double>> pts{{1, 1}, {2, 0.5}, {0.5, 2}, {0.9, 0.9}};
  auto front = pareto_front(pts, {true, true});
  std::sort(front.begin(), front.end());
  EXPECT_EQ(front, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Pareto, DuplicatesAreAllKept) {
  const std::vector<std::vector<double>> pts{{1, 1}, {1, 1}, {0, 0}};
  auto front = pareto_front(pts, {true, true});
  std::sort(front.begin(), front.end());
  EXPECT_EQ(front, (std::vector<std::size_t>{0, 1}));
}

TEST(Pareto, MatchesBruteForce) {
  Rng rng(9);
  for (std::size_t n : {1u, 2u, 10u, 100u, 1000u}) {
    for (int dims = 1; dims <= 3; ++dims) {
      std::vector<std::vector<double>> pts(n);
      std::vector<bool> higher;
      for (int k = 0; k < dims; ++k) higher.push_back(rng.bernoulli(0.5));
      for (auto& p : pts) {
        for (int k = 0; k < dims; ++k) p.push_back(std::round(rng.uniform(0, 20)) / 2.0);
      }
      auto front = pareto_front(pts, higher);
      std::sort(front.begin(), front.end());
      EXPECT_EQ(front, oracle::brute_force_front(pts, higher)) << n << " points, " << dims << " dims";
    }
  }
}

TEST(Pareto, DominanceAndGroupCounts) {
  const std::vector<double> a{1, 1}, b{1, 0}, c{2, 0};
  EXPECT_TRUE(dominates(a, b, {true, true}));
  EXPECT_FALSE(dominates(a, a, {true, true}));
  EXPECT_FALSE(dominates(a, c, {true, true}));
  const std::vector<std::vector<double>> group{{1, 1}, {0, 0}}, others{{0.5, 0.5}};
  EXPECT_EQ(count_not_dominated(group, others, {true, true}), 1u);
  EXPECT_EQ(count_not_dominated(group, others, {false, false}), 1u);
}

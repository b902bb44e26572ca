#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtl/data.hpp"
#include "mtl/random.hpp"
#include "mtl/tensor.hpp"

namespace mtl {

class HydraNet;

namespace detail {

template <typename DA, typename DB>
void check_same_length(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": lengths differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

}  // namespace detail

// Similarity measures between two gradients. An empty optional marks a
// missing datum (undefined for zero vectors); callers exclude it from
// statistics and count it instead.

/// g . h / (|g| |h|), clamped to [-1, 1]. Missing if either vector is zero.
template <typename DA, typename DB>
std::optional<typename DA::Scalar> cos_similarity(const Eigen::MatrixBase<DA>& g, const Eigen::MatrixBase<DB>& h) {
  using Scalar = typename DA::Scalar;
  detail::check_same_length(g, h, "cos_similarity");
  const Scalar ng = g.norm();
  const Scalar nh = h.norm();
  if (ng == Scalar(0) || nh == Scalar(0)) return std::nullopt;
  const Scalar c = g.dot(h) / (ng * nh);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

/// 2 |g| |h| / (|g|^2 + |h|^2). Missing if both vectors are zero.
template <typename DA, typename DB>
std::optional<typename DA::Scalar> mag_similarity(const Eigen::MatrixBase<DA>& g, const Eigen::MatrixBase<DB>& h) {
  using Scalar = typename DA::Scalar;
  detail::check_same_length(g, h, "mag_similarity");
  const Scalar ng = g.norm();
  const Scalar nh = h.norm();
  const Scalar denom = ng * ng + nh * nh;
  if (denom == Scalar(0)) return std::nullopt;
  return std::min(Scalar(1), Scalar(2) * ng * nh / denom);
}

/// Fraction of coordinates k with g_k h_k < 0. Missing for empty vectors.
template <typename DA, typename DB>
std::optional<typename DA::Scalar> conflict_ratio(const Eigen::MatrixBase<DA>& g, const Eigen::MatrixBase<DB>& h) {
  using Scalar = typename DA::Scalar;
  detail::check_same_length(g, h, "conflict_ratio");
  if (g.size() == 0) return std::nullopt;
  Index conflicts = 0;
  for (Index k = 0; k < g.size(); ++k) {
    if (g[k] * h[k] < Scalar(0)) ++conflicts;
  }
  return static_cast<Scalar>(conflicts) / static_cast<Scalar>(g.size());
}

/// Plain scalar product g . h.
template <typename DA, typename DB>
typename DA::Scalar dot_similarity(const Eigen::MatrixBase<DA>& g, const Eigen::MatrixBase<DB>& h) {
  detail::check_same_length(g, h, "dot_similarity");
  return g.dot(h);
}

enum class Measure { kCos, kMag, kConflictRatio, kDot, kPairConflict };
enum class ComparisonMode { kInterTask, kInterSample };

inline constexpr Measure kAllMeasures[] = {Measure::kCos, Measure::kMag, Measure::kConflictRatio, Measure::kDot,
                                           Measure::kPairConflict};

std::string to_string(Measure m);
std::string to_string(ComparisonMode m);

/// Summary of one measure over one epoch.
struct SimilarityStats {
  Measure measure = Measure::kCos;
  ComparisonMode mode = ComparisonMode::kInterTask;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  double p025 = 0.0;
  double p975 = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_excluded = 0;
};

/// Percentile (q in [0, 1]) by linear interpolation between order statistics
/// at position q (n - 1).
double percentile(std::vector<double> values, double q);

/// Collects measure values within one epoch.
class SimilarityAccumulator {
 public:
  void add(Measure m, ComparisonMode mode, std::optional<double> value);
  SimilarityStats summarize(Measure m, ComparisonMode mode) const;
  std::vector<SimilarityStats> summarize_all() const;
  bool empty() const { return series_.empty(); }
  void clear() { series_.clear(); }

 private:
  struct Series {
    std::vector<double> values;
    std::size_t excluded = 0;
  };
  std::map<std::pair<Measure, ComparisonMode>, Series> series_;
};

/// All measures for one gradient pair.
struct PairMeasurement {
  std::size_t first = 0;
  std::size_t second = 0;
  std::optional<double> cos;
  std::optional<double> mag;
  std::optional<double> conflict;
  double dot = 0.0;
};

PairMeasurement measure_pair(const Vector& g, const Vector& h);

struct ProtocolOptions {
  ComparisonMode mode = ComparisonMode::kInterTask;
  std::size_t max_items = 8;
  /// Inter-task only: compare task gradients of the batch-mean loss instead of
  /// a single sample's.
  bool batch_mean = false;
};

/// One probe of the inter-task (fixed sample, all task pairs) or inter-sample
/// (fixed task, sample pairs) comparison on backbone gradients. At most
/// `max_items` tasks or samples are drawn at random; every unordered pair is
/// measured and appended to `acc`.
std::vector<PairMeasurement> similarity_protocol(const HydraNet& net, const Dataset& batch,
                                                 std::span<const TaskDef> tasks, const ProtocolOptions& opts, Rng& rng,
                                                 SimilarityAccumulator& acc);

/// One experiment run and its evaluation.
struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string method;
  std::string optimizer;
  double lr = 0.0;
  std::vector<std::string> metric_names;
  std::vector<bool> higher_is_better;
  std::vector<std::vector<double>> val_metrics;  // per epoch
  std::vector<double> val_delta_m;               // per epoch, percent
  int best_epoch = -1;
  std::vector<double> test_metrics;
  double test_delta_m = 0.0;
  bool failed = false;
  std::string failure;

  bool operator==(const RunRecord&) const = default;
};

/// Mean signed relative change against a baseline, in percent; lower is
/// better: (100 / T) sum_t (-1)^{l_t} (M_m,t - M_b,t) / M_b,t.
double delta_m(std::span<const double> method, std::span<const double> baseline, const std::vector<bool>& higher_is_better);
double delta_m(const RunRecord& method, const RunRecord& baseline);

struct CorruptionCell {
  double mtl = 0.0;  // metric of the multi-task model on corrupted data
  double stl = 0.0;  // metric of the single-task model on corrupted data
};

/// Per-task inputs of the corruption-robustness metric. `cells` is the
/// mode x severity grid in row-major order.
struct OodTaskMetrics {
  double mtl_clean = 0.0;
  double stl_clean = 0.0;
  bool higher_is_better = false;
  std::size_t num_modes = 0;
  std::size_t num_severities = 0;
  std::vector<std::optional<CorruptionCell>> cells;
};

/// (1 / |C||S|) sum_{c,s} (-1)^{p} (mtl_cs / mtl_clean - stl_cs / stl_clean).
/// Negative when the multi-task model degrades less.
double delta_t(const OodTaskMetrics& m);

/// Indices of the non-dominated points. Exactly equal points are all kept.
std::vector<std::size_t> pareto_front(std::span<const std::vector<double>> points,
                                      const std::vector<bool>& higher_is_better);

/// True if `a` is at least as good as `b` everywhere and strictly better
/// somewhere.
bool dominates(std::span<const double> a, std::span<const double> b, const std::vector<bool>& higher_is_better);

/// Number of points in `group` not dominated by any point of `others`.
std::size_t count_not_dominated(std::span<const std::vector<double>> group, std::span<const std::vector<double>> others,
                                const std::vector<bool>& higher_is_better);

}  // namespace mtl

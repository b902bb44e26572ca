#include "mtl/metrics.hpp"

#include <numeric>
#include <stdexcept>

#include "mtl/network.hpp"

namespace mtl {

std::string to_string(Measure m) {
  switch (m) {
    case Measure::kCos: return "cos";
    case Measure::kMag: return "mag";
    case Measure::kConflictRatio: return "conflict_ratio";
    case Measure::kDot: return "dot";
    case Measure::kPairConflict: return "pair_conflict";
  }
  return "unknown";
}

std::string to_string(ComparisonMode m) { return m == ComparisonMode::kInterTask ? "inter_task" : "inter_sample"; }

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

void SimilarityAccumulator::add(Measure m, ComparisonMode mode, std::optional<double> value) {
  Series& s = series_[{m, mode}];
  if (value && std::isfinite(*value)) {
    s.values.push_back(*value);
  } else {
    ++s.excluded;
  }
}

SimilarityStats SimilarityAccumulator::summarize(Measure m, ComparisonMode mode) const {
  SimilarityStats st;
  st.measure = m;
  st.mode = mode;
  const auto it = series_.find({m, mode});
  if (it == series_.end()) return st;
  const Series& s = it->second;
  st.n_pairs = s.values.size();
  st.n_excluded = s.excluded;
  if (s.values.empty()) return st;
  const double n = static_cast<double>(s.values.size());
  st.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s.values) ss += (v - st.mean) * (v - st.mean);
  st.stddev = std::sqrt(ss / n);
  st.p025 = percentile(s.values, 0.025);
  st.p975 = percentile(s.values, 0.975);
  return st;
}

std::vector<SimilarityStats> SimilarityAccumulator::summarize_all() const {
  std::vector<SimilarityStats> out;
  out.reserve(series_.size());
  for (const auto& [key, s] : series_) out.push_back(summarize(key.first, key.second));
  return out;
}

PairMeasurement measure_pair(const Vector& g, const Vector& h) {
  PairMeasurement p;
  p.cos = cos_similarity(g, h);
  p.mag = mag_similarity(g, h);
  p.conflict = conflict_ratio(g, h);
  p.dot = dot_similarity(g, h);
  return p;
}

namespace {

// k distinct indices out of n, in increasing order.
std::vector<std::size_t> draw_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k >= n) return idx;
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::vector<PairMeasurement> similarity_protocol(const HydraNet& net, const Dataset& batch,
                                                 std::span<const TaskDef> tasks, const ProtocolOptions& opts, Rng& rng,
                                                 SimilarityAccumulator& acc) {
  if (opts.max_items < 2) throw std::invalid_argument("similarity_protocol: max_items must be >= 2");
  std::vector<Vector> grads;
  if (opts.mode == ComparisonMode::kInterTask) {
    if (tasks.size() < 2) {
      throw std::invalid_argument("inter_task comparison needs at least two tasks, got " + std::to_string(tasks.size()));
    }
    if (batch.size() < 1) throw std::invalid_argument("inter_task comparison needs a nonempty batch");
    std::optional<Index> sample;
    if (!opts.batch_mean) sample = static_cast<Index>(rng.index(static_cast<std::uint64_t>(batch.size())));
    const auto chosen = draw_subset(tasks.size(), opts.max_items, rng);
    const auto all = task_gradients(net, batch, tasks, GradientMode::kPerTask, sample);
    for (std::size_t t : chosen) grads.push_back(all[t].backbone.values);
  } else {
    if (batch.size() < 2) {
      throw std::invalid_argument("inter_sample comparison needs a batch of at least two samples, got " +
                                  std::to_string(batch.size()));
    }
    if (tasks.empty()) throw std::invalid_argument("inter_sample comparison needs a task");
    const auto task = static_cast<Index>(rng.index(tasks.size()));
    const auto chosen = draw_subset(static_cast<std::size_t>(batch.size()), opts.max_items, rng);
    std::vector<Index> rows(chosen.begin(), chosen.end());
    const auto all = task_gradients(net, batch.rows(rows), tasks, GradientMode::kPerSample, task);
    for (const auto& g : all) grads.push_back(g.backbone.values);
  }

  std::vector<PairMeasurement> out;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t j = i + 1; j < grads.size(); ++j) {
      PairMeasurement p = measure_pair(grads[i], grads[j]);
      p.first = i;
      p.second = j;
      acc.add(Measure::kCos, opts.mode, p.cos);
      acc.add(Measure::kMag, opts.mode, p.mag);
      acc.add(Measure::kConflictRatio, opts.mode, p.conflict);
      acc.add(Measure::kDot, opts.mode, p.dot);
      acc.add(Measure::kPairConflict, opts.mode,
              p.cos ? std::optional<double>(*p.cos < 0.0 ? 1.0 : 0.0) : std::nullopt);
      out.push_back(p);
    }
  }
  return out;
}

double delta_m(std::span<const double> method, std::span<const double> baseline,
               const std::vector<bool>& higher_is_better) {
  if (method.size() != baseline.size() || method.size() != higher_is_better.size()) {
    throw std::invalid_argument("delta_m: metric counts differ (" + std::to_string(method.size()) + ", " +
                                std::to_string(baseline.size()) + ", " + std::to_string(higher_is_better.size()) +
                                " orientations)");
  }
  if (method.empty()) throw std::invalid_argument("delta_m: no metrics");
  double total = 0.0;
  for (std::size_t t = 0; t < method.size(); ++t) {
    if (baseline[t] == 0.0) throw std::domain_error("delta_m: baseline metric " + std::to_string(t) + " is zero");
    const double rel = (method[t] - baseline[t]) / baseline[t];
    total += higher_is_better[t] ? -rel : rel;
  }
  return 100.0 * total / static_cast<double>(method.size());
}

double delta_m(const RunRecord& method, const RunRecord& baseline) {
  if (method.higher_is_better != baseline.higher_is_better) {
    throw std::invalid_argument("delta_m: records disagree on metric orientation");
  }
  return delta_m(method.test_metrics, baseline.test_metrics, method.higher_is_better);
}

double delta_t(const OodTaskMetrics& m) {
  const std::size_t cells = m.num_modes * m.num_severities;
  if (cells == 0) throw std::invalid_argument("delta_t: empty corruption grid");
  if (m.cells.size() != cells) {
    throw std::invalid_argument("delta_t: grid of " + std::to_string(m.num_modes) + "x" +
                                std::to_string(m.num_severities) + " has " + std::to_string(m.cells.size()) + " cells");
  }
  if (m.mtl_clean == 0.0 || m.stl_clean == 0.0) throw std::domain_error("delta_t: clean metric is zero");
  double total = 0.0;
  for (std::size_t c = 0; c < m.num_modes; ++c) {
    for (std::size_t s = 0; s < m.num_severities; ++s) {
      const auto& cell = m.cells[c * m.num_severities + s];
      if (!cell) {
        throw std::invalid_argument("delta_t: missing cell (mode " + std::to_string(c) + ", severity " +
                                    std::to_string(s + 1) + ")");
      }
      const double d = cell->mtl / m.mtl_clean - cell->stl / m.stl_clean;
      total += m.higher_is_better ? -d : d;
    }
  }
  return total / static_cast<double>(cells);
}

bool dominates(std::span<const double> a, std::span<const double> b, const std::vector<bool>& higher_is_better) {
  if (a.size() != b.size() || a.size() != higher_is_better.size()) {
    throw std::invalid_argument("dominance: metric counts differ from orientations");
  }
  bool strict = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = higher_is_better[k] ? a[k] : -a[k];
    const double y = higher_is_better[k] ? b[k] : -b[k];
    if (x < y) return false;
    if (x > y) strict = true;
  }
  return strict;
}

std::vector<std::size_t> pareto_front(std::span<const std::vector<double>> points,
                                      const std::vector<bool>& higher_is_better) {
  if (points.empty()) throw std::invalid_argument("pareto_front: no records");
  for (const auto& p : points) {
    if (p.size() != higher_is_better.size()) {
      throw std::invalid_argument("pareto_front: record has " + std::to_string(p.size()) + " metrics, " +
                                  std::to_string(higher_is_better.size()) + " orientations given");
    }
  }
  // Visit points best-first in lexicographic order of the oriented values; a
  // dominator always precedes what it dominates, and by transitivity it is
  // enough to check candidates against the front found so far.
  auto oriented = [&](std::size_t i, std::size_t k) { return higher_is_better[k] ? points[i][k] : -points[i][k]; };
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t k = 0; k < higher_is_better.size(); ++k) {
      const double x = oriented(a, k), y = oriented(b, k);
      if (x != y) return x > y;
    }
    return false;
  });
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    bool dominated = false;
    for (std::size_t f : front) {
      if (dominates(points[f], points[i], higher_is_better)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end());
  return front;
}

std::size_t count_not_dominated(std::span<const std::vector<double>> group, std::span<const std::vector<double>> others,
                                const std::vector<bool>& higher_is_better) {
  std::size_t count = 0;
  for (const auto& a : group) {
    bool dominated = false;
    for (const auto& b : others) {
      if (dominates(b, a, higher_is_better)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) ++count;
  }
  return count;
}

}  // namespace mtl

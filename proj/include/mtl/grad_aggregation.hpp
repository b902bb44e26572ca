#pragma once

#include <algorithm>
#include <functional>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mtl/flat_grad.hpp"
#include "mtl/random.hpp"

namespace mtl {

namespace detail {

template <typename Scalar>
void check_grad_set(std::span<const VectorT<Scalar>> grads, const char* op) {
  if (grads.size() < 2) throw std::invalid_argument(std::string(op) + ": needs at least two task gradients");
  for (const auto& g : grads) {
    if (g.size() != grads[0].size()) {
      throw ShapeError(std::string(op) + ": gradient lengths differ (" + std::to_string(grads[0].size()) + " vs " +
                       std::to_string(g.size()) + ")");
    }
  }
}

}  // namespace detail

/// Projects each task gradient off every other task gradient it conflicts
/// with (negative dot product), visiting the others in an rng-shuffled order
/// and always projecting against their original values. Returns the sum of
/// the projected gradients. Zero gradients are skipped as projection targets.
template <typename Scalar>
VectorT<Scalar> pcgrad(std::span<const VectorT<Scalar>> grads, Rng& rng,
                       std::vector<VectorT<Scalar>>* projected = nullptr) {
  detail::check_grad_set(grads, "pcgrad");
  const std::size_t num_tasks = grads.size();
  VectorT<Scalar> total = VectorT<Scalar>::Zero(grads[0].size());
  if (projected) projected->clear();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < num_tasks; ++i) {
    order.clear();
    for (std::size_t j = 0; j < num_tasks; ++j) {
      if (j != i) order.push_back(j);
    }
    rng.shuffle(std::span<std::size_t>(order));
    VectorT<Scalar> gi = grads[i];
    for (std::size_t j : order) {
      const auto& gj = grads[j];
      const Scalar norm2 = gj.squaredNorm();
      if (norm2 == Scalar(0)) continue;
      const Scalar dot = gi.dot(gj);
      if (dot < Scalar(0)) gi -= (dot / norm2) * gj;
    }
    total += gi;
    if (projected) projected->push_back(std::move(gi));
  }
  return total;
}

/// Simplex weights w and inner objective value g_w . g_0 + c |g_0| |g_w|.
template <typename Scalar>
struct CagradSolution {
  VectorT<Scalar> weights;
  Scalar objective = Scalar(0);
};

/// Euclidean projection onto the probability simplex (sort-based).
template <typename Scalar>
VectorT<Scalar> project_to_simplex(const VectorT<Scalar>& y) {
  const Index n = y.size();
  std::vector<Scalar> u(y.data(), y.data() + n);
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar cumsum(0);
  Scalar theta(0);
  for (Index k = 0; k < n; ++k) {
    cumsum += u[static_cast<std::size_t>(k)];
    const Scalar t = (cumsum - Scalar(1)) / static_cast<Scalar>(k + 1);
    if (u[static_cast<std::size_t>(k)] - t > Scalar(0)) theta = t;
  }
  return (y.array() - theta).max(Scalar(0)).matrix();
}

/// Inner conflict-averse problem over the simplex, expressed through the Gram
/// matrix G of the task gradients:
///   F(w) = w^T G b + c |g_0| sqrt(w^T G w),  b = 1 / T.
/// T = 2 uses golden-section search on w_1 in [0, 1] down to a 1e-10 interval;
/// T > 2 runs 500 projected-gradient iterations with step 0.1 from the
/// uniform point and keeps the best iterate.
template <typename Scalar>
CagradSolution<Scalar> cagrad_inner(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& gram, Scalar c,
                                    Scalar g0_norm) {
  const Index num_tasks = gram.rows();
  const VectorT<Scalar> b = VectorT<Scalar>::Constant(num_tasks, Scalar(1) / static_cast<Scalar>(num_tasks));
  const VectorT<Scalar> gb = gram * b;
  const Scalar coef = c * g0_norm;
  auto objective = [&](const VectorT<Scalar>& w) {
    const Scalar quad = std::max(Scalar(0), w.dot(gram * w));
    return w.dot(gb) + coef * std::sqrt(quad);
  };

  CagradSolution<Scalar> best;
  if (num_tasks == 2) {
    auto f = [&](Scalar x) {
      VectorT<Scalar> w(2);
      w << x, Scalar(1) - x;
      return objective(w);
    };
    const Scalar inv_phi = Scalar(0.6180339887498949);
    Scalar lo(0), hi(1);
    Scalar a = hi - inv_phi * (hi - lo);
    Scalar bx = lo + inv_phi * (hi - lo);
    Scalar fa = f(a), fb = f(bx);
    while (hi - lo > Scalar(1e-10)) {
      if (fa < fb) {
        hi = bx;
        bx = a;
        fb = fa;
        a = hi - inv_phi * (hi - lo);
        fa = f(a);
      } else {
        lo = a;
        a = bx;
        fa = fb;
        bx = lo + inv_phi * (hi - lo);
        fb = f(bx);
      }
    }
    Scalar x = Scalar(0.5) * (lo + hi);
    // The optimum may sit on the boundary.
    for (Scalar edge : {Scalar(0), Scalar(1)}) {
      if (f(edge) < f(x)) x = edge;
    }
    best.weights.resize(2);
    best.weights << x, Scalar(1) - x;
    best.objective = f(x);
    return best;
  }

  VectorT<Scalar> w = b;
  best.weights = w;
  best.objective = objective(w);
  for (int it = 0; it < 500; ++it) {
    const VectorT<Scalar> gw = gram * w;
    const Scalar quad = std::max(Scalar(0), w.dot(gw));
    VectorT<Scalar> grad = gb;
    if (quad > Scalar(0)) grad += (coef / std::sqrt(quad)) * gw;
    w = project_to_simplex<Scalar>(w - Scalar(0.1) * grad);
    const Scalar value = objective(w);
    if (value < best.objective) {
      best.objective = value;
      best.weights = w;
    }
  }
  return best;
}

/// Conflict-averse direction d = g_0 + (c |g_0| / |g_w|) g_w where g_0 is the
/// mean gradient and w solves the inner problem. Falls back to d = g_0 when
/// g_w is numerically zero, appending a message to `warnings` when given.
template <typename Scalar>
VectorT<Scalar> cagrad(std::span<const VectorT<Scalar>> grads, Scalar c, std::vector<std::string>* warnings = nullptr,
                       CagradSolution<Scalar>* solution = nullptr) {
  detail::check_grad_set(grads, "cagrad");
  if (!(c >= Scalar(0))) throw std::invalid_argument("cagrad: c must be >= 0");
  const Index num_tasks = static_cast<Index>(grads.size());
  const Index n = grads[0].size();

  VectorT<Scalar> g0 = VectorT<Scalar>::Zero(n);
  for (const auto& g : grads) g0 += g;
  g0 /= static_cast<Scalar>(num_tasks);

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gram(num_tasks, num_tasks);
  for (Index i = 0; i < num_tasks; ++i) {
    for (Index j = i; j < num_tasks; ++j) {
      gram(i, j) = gram(j, i) = grads[static_cast<std::size_t>(i)].dot(grads[static_cast<std::size_t>(j)]);
    }
  }
  const Scalar g0_norm = g0.norm();
  CagradSolution<Scalar> sol = cagrad_inner<Scalar>(gram, c, g0_norm);
  if (solution) *solution = sol;
  if (c == Scalar(0) || g0_norm == Scalar(0)) return g0;

  VectorT<Scalar> gw = VectorT<Scalar>::Zero(n);
  for (Index t = 0; t < num_tasks; ++t) gw += sol.weights[t] * grads[static_cast<std::size_t>(t)];
  const Scalar gw_norm = gw.norm();
  if (!(gw_norm > Scalar(1e-12) * std::max(Scalar(1), g0_norm))) {
    if (warnings) warnings->push_back("cagrad: |g_w| is numerically zero, falling back to the mean gradient");
    return g0;
  }
  return g0 + (c * g0_norm / gw_norm) * gw;
}

enum class AggregationMethod { kEqual, kPcgrad, kCagrad };

std::string to_string(AggregationMethod m);
AggregationMethod parse_aggregation(const std::string& name);
bool is_aggregation_method(const std::string& name);

struct AggregationOptions {
  AggregationMethod method = AggregationMethod::kEqual;
  double cagrad_c = 0.4;
};

/// Combines per-task backbone gradients into one update gradient. `ew` is the
/// weighted sum; pcgrad and cagrad ignore `weights` (apply them to the task
/// losses instead). Head gradients are not handled here; they pass through
/// unmodified in the training loop.
FlatGrad aggregate(const AggregationOptions& opts, std::span<const FlatGrad> grads, std::span<const double> weights,
                   Rng& rng, std::vector<std::string>* warnings = nullptr);

}  // namespace mtl

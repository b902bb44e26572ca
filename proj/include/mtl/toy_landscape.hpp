#pragma once

#include <array>

#include <Eigen/Dense>

#include "mtl/autodiff.hpp"

namespace mtl {

/// Two-objective landscape over R^2 used to compare multi-task optimizers.
///
/// For x = (x1, x2), with t = tanh(-x2) and L = 5e-6:
///   upper part (weight c1 = max(tanh(x2 / 2), 0)):
///     u1 = log(max(|0.5 (-x1 - 7) - t|, L)) + 6
///     u2 = log(max(|0.5 (-x1 + 3) + t + 2|, L)) + 6
///   lower part (weight c2 = max(tanh(-x2 / 2), 0)):
///     q1 = ((-x1 + 7)^2 + 0.1 (-x2 - 8)^2) / 10 - 20
///     q2 = ((-x1 - 7)^2 + 0.1 (-x2 - 8)^2) / 10 - 20
///   L1 = c1 u1 + c2 q1,  L2 = c1 u2 + c2 q2.
///
/// The log terms carve a narrow valley per task in the upper half plane; the
/// average loss has its unique minimum at x1 = 0 in the lower half plane.
/// Below the clamp bound L the log terms have zero gradient.
struct ToyLandscape {
  using Point = Eigen::Vector2d;

  static constexpr double kLower = 5e-6;

  struct Eval {
    double loss1 = 0.0;
    double loss2 = 0.0;
    Point grad1 = Point::Zero();
    Point grad2 = Point::Zero();
  };

  /// Losses and their exact gradients (analytic route).
  static Eval evaluate(const Point& x);

  /// Both losses recorded on a tape from scalar leaves x1 and x2 (autodiff
  /// route, used to cross-check `evaluate`).
  static std::array<Var, 2> losses(Var x1, Var x2);

  /// Minimiser of L1 + L2: (0, x2*) with x2* found by golden-section search
  /// on [-12, -4] to 1e-12.
  static Point global_minimum();

  /// The three starting points of the reference experiment.
  static std::array<Point, 3> starting_points();
};

}  // namespace mtl

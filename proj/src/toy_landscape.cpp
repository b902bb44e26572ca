#include "mtl/toy_landscape.hpp"

#include <cmath>

namespace mtl {

namespace {

struct LogTerm {
  double value;
  double d_arg;  // derivative of the term w.r.t. its argument
};

LogTerm clamped_log(double arg) {
  const double a = std::fabs(arg);
  if (a < ToyLandscape::kLower) return {std::log(ToyLandscape::kLower) + 6.0, 0.0};
  return {std::log(a) + 6.0, (arg >= 0.0 ? 1.0 : -1.0) / a};
}

}  // namespace

ToyLandscape::Eval ToyLandscape::evaluate(const Point& x) {
  const double x1 = x[0];
  const double x2 = x[1];

  const double t = std::tanh(-x2);
  const double dt = -(1.0 - t * t);  // d tanh(-x2) / dx2

  const LogTerm u1 = clamped_log(0.5 * (-x1 - 7.0) - t);
  const LogTerm u2 = clamped_log(0.5 * (-x1 + 3.0) + t + 2.0);

  const double h = std::tanh(0.5 * x2);
  const double dh = 0.5 * (1.0 - h * h);
  const double c1 = h >= 0.0 ? h : 0.0;
  const double dc1 = h >= 0.0 ? dh : 0.0;
  const double c2 = -h >= 0.0 ? -h : 0.0;
  const double dc2 = -h >= 0.0 ? -dh : 0.0;

  const double q1 = ((-x1 + 7.0) * (-x1 + 7.0) + 0.1 * (-x2 - 8.0) * (-x2 - 8.0)) / 10.0 - 20.0;
  const double q2 = ((-x1 - 7.0) * (-x1 - 7.0) + 0.1 * (-x2 - 8.0) * (-x2 - 8.0)) / 10.0 - 20.0;
  const double dq_dx2 = 0.02 * (x2 + 8.0);

  Eval e;
  e.loss1 = c1 * u1.value + c2 * q1;
  e.loss2 = c1 * u2.value + c2 * q2;
  e.grad1[0] = c1 * u1.d_arg * -0.5 + c2 * 0.2 * (x1 - 7.0);
  e.grad1[1] = c1 * u1.d_arg * -dt + dc1 * u1.value + c2 * dq_dx2 + dc2 * q1;
  e.grad2[0] = c1 * u2.d_arg * -0.5 + c2 * 0.2 * (x1 + 7.0);
  e.grad2[1] = c1 * u2.d_arg * dt + dc1 * u2.value + c2 * dq_dx2 + dc2 * q2;
  return e;
}

std::array<Var, 2> ToyLandscape::losses(Var x1, Var x2) {
  Tape& tape = *x1.tape();
  auto c = [&](double v) { return tape.constant(Tensor::scalar(v)); };

  const Var t = tanh(neg(x2));
  const Var u1 = log(clamp_min(abs(scale(neg(x1) - c(7.0), 0.5) - t), kLower)) + c(6.0);
  const Var u2 = log(clamp_min(abs(scale(neg(x1) + c(3.0), 0.5) + t + c(2.0)), kLower)) + c(6.0);
  const Var c1 = clamp_min(tanh(scale(x2, 0.5)), 0.0);
  const Var c2 = clamp_min(tanh(scale(x2, -0.5)), 0.0);

  const Var a1 = neg(x1) + c(7.0);
  const Var a2 = neg(x1) - c(7.0);
  const Var b = neg(x2) - c(8.0);
  const Var q1 = scale(a1 * a1 + scale(b * b, 0.1), 0.1) - c(20.0);
  const Var q2 = scale(a2 * a2 + scale(b * b, 0.1), 0.1) - c(20.0);

  return {c1 * u1 + c2 * q1, c1 * u2 + c2 * q2};
}

ToyLandscape::Point ToyLandscape::global_minimum() {
  // The average is unimodal along x1 = 0 on this bracket, so bisect on the
  // sign of its x2 derivative.
  auto slope = [](double x2) {
    const Eval e = evaluate({0.0, x2});
    return e.grad1[1] + e.grad2[1];
  };
  double lo = -12.0;
  double hi = -4.0;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (slope(mid) > 0.0 ? hi : lo) = mid;
  }
  return {0.0, 0.5 * (lo + hi)};
}

std::array<ToyLandscape::Point, 3> ToyLandscape::starting_points() {
  return {Point(-8.5, 7.5), Point(-8.5, -5.0), Point(9.0, 9.0)};
}

}  // namespace mtl

#include <cmath>
#include <cstring>
#include <functional>

#include <gtest/gtest.h>

#include "mtl/autodiff.hpp"
#include "mtl/network.hpp"
#include "oracles.hpp"

using namespace mtl;

namespace {

Tensor row(std::initializer_list<double> v) { return Tensor::vector(v); }

// Central differences of a scalar function of one tensor leaf.
Matrix numeric_grad(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double keep = x.matrix()(i, j);
      x.matrix()(i, j) = keep + h;
      const double up = f(x);
      x.matrix()(i, j) = keep - h;
      const double down = f(x);
      x.matrix()(i, j) = keep;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

void expect_matches_fd(const std::function<Var(Var)>& build, const Tensor& at) {
  auto eval = [&](const Tensor& x) {
    Tape tape;
    return build(tape.parameter(0, x)).item();
  };
  Tape tape;
  const Var loss = build(tape.parameter(0, at));
  const Matrix analytic = tape.backward(loss)[0].matrix();
  const Matrix numeric = numeric_grad(eval, at);
  for (Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i], n = numeric.data()[i];
    EXPECT_LT(std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-6}), 1e-4) << "entry " << i;
  }
}

}  // namespace

TEST(Autodiff, L1LossExample) {
  Tape tape;
  const Var loss = l1_loss(tape.constant(row({2.0})), tape.constant(row({0.5})));
  EXPECT_DOUBLE_EQ(loss.item(), 1.5);
}

TEST(Autodiff, LeakyReluNegativeInput) {
  Tape tape;
  EXPECT_DOUBLE_EQ(leaky_relu(tape.constant(Tensor::scalar(-1.0)), 0.01).item(), -0.01);
}

TEST(Autodiff, SoftmaxCrossEntropyUniform) {
  Tape tape;
  const Var logits = tape.constant(Tensor(Shape{1, 2}, std::vector<double>{0.0, 0.0}));
  EXPECT_NEAR(softmax_cross_entropy(logits, 0).item(), std::log(2.0), 1e-15);
}

TEST(Autodiff, LinearAndSquareGradients) {
  Tape tape;
  const Var w = tape.parameter(0, Tensor::scalar(3.0));
  const Var x = tape.constant(Tensor::scalar(2.0));
  EXPECT_DOUBLE_EQ(tape.backward(w * x)[0].item(), 2.0);
  EXPECT_DOUBLE_EQ(tape.backward(w * w)[0].item(), 6.0);
}

TEST(Autodiff, NonScalarLossThrows) {
  Tape tape;
  const Var w = tape.parameter(0, row({1.0, 2.0}));
  EXPECT_THROW(tape.backward(w), ShapeError);
}

TEST(Autodiff, ShapeMismatchNamesBothShapes) {
  Tape tape;
  const Var a = tape.constant(Tensor(Shape{2, 3}));
  const Var b = tape.constant(Tensor(Shape{3, 2}));
  try {
    add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3, 2]"), std::string::npos) << msg;
  }
}

TEST(Autodiff, DuplicateParameterIdThrows) {
  Tape tape;
  tape.parameter(0, Tensor::scalar(1.0));
  EXPECT_THROW(tape.parameter(0, Tensor::scalar(2.0)), std::invalid_argument);
}

TEST(Autodiff, UnreachedParameterGetsZeroGradient) {
  Tape tape;
  const Var a = tape.parameter(0, Tensor::scalar(2.0));
  tape.parameter(1, row({1.0, 2.0}));
  const auto g = tape.backward(a * a);
  ASSERT_TRUE(g.contains(1));
  EXPECT_EQ(g[1].matrix(), Matrix::Zero(1, 2));
}

TEST(Autodiff, DetachBlocksGradient) {
  Tape tape;
  const Var w = tape.parameter(0, Tensor::scalar(3.0));
  EXPECT_DOUBLE_EQ(tape.backward(w * detach(w))[0].item(), 3.0);
}

TEST(Autodiff, ElementwiseOpsMatchFiniteDifferences) {
  const Tensor at(Shape{2, 3}, std::vector<double>{0.7, -1.3, 2.1, -0.4, 1.9, -2.2});
  expect_matches_fd([](Var x) { return sum(tanh(x)); }, at);
  expect_matches_fd([](Var x) { return sum(exp(scale(x, 0.5))); }, at);
  expect_matches_fd([](Var x) { return sum(log(abs(x))); }, at);
  expect_matches_fd([](Var x) { return mean(leaky_relu(x, 0.1)); }, at);
  expect_matches_fd([](Var x) { return sum(x * x - x / exp(x)); }, at);
  expect_matches_fd([](Var x) { return sum(neg(clamp_min(x, 0.5))); }, at);
  expect_matches_fd([](Var x) { return sum(sub(x, tanh(x)) * x); }, at);
}

TEST(Autodiff, MatmulBiasAndLossesMatchFiniteDifferences) {
  Rng rng(5);
  Tensor w(Shape{3, 4});
  for (Index i = 0; i < w.size(); ++i) w.matrix().data()[i] = rng.normal();
  const Tensor x(Shape{2, 3}, std::vector<double>{0.5, -1.0, 2.0, 1.5, 0.3, -0.7});
  const Tensor b(Shape{1, 4}, std::vector<double>{0.1, -0.2, 0.3, 0.05});
  const Tensor target(Shape{2, 4}, std::vector<double>{9, -9, 9, -9, 9, -9, 9, -9});
  expect_matches_fd(
      [&](Var wv) {
        Tape* t = wv.tape();
        return l1_loss(add_bias(matmul(t->constant(x), wv), t->constant(b)), t->constant(target));
      },
      w);
  expect_matches_fd(
      [&](Var bv) {
        Tape* t = bv.tape();
        const int labels[] = {1, 3};
        return softmax_cross_entropy(add_bias(matmul(t->constant(x), t->constant(w)), bv), labels);
      },
      b);
}

TEST(Autodiff, RandomMlpsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto p = oracle::random_problem(seed);
    const HydraNet net = HydraNet::build(p.spec, seed + 100);
    Tape tape;
    const auto bound = net.bind(tape);
    const auto outs = net.forward(bound, tape.constant(Tensor(p.data.inputs)));
    Var total = task_loss(p.tasks[0], outs[0], p.data.targets.col(0));
    for (std::size_t t = 1; t < p.tasks.size(); ++t) {
      total = total + task_loss(p.tasks[t], outs[t], p.data.targets.col(static_cast<Index>(t)));
    }
    EXPECT_NEAR(total.item(), oracle::summed_loss(p.spec, p.tasks, net.flat(), p.data), 1e-12);
    const Vector analytic = net.flatten(tape.backward(total));
    const Vector numeric = oracle::central_difference(p.spec, p.tasks, net.flat(), p.data);
    EXPECT_LT(oracle::max_relative_error(analytic, numeric), 1e-4) << "seed " << seed;
  }
}

TEST(Autodiff, BackwardIsDeterministic) {
  const auto p = oracle::random_problem(42);
  const HydraNet net = HydraNet::build(p.spec, 1);
  auto grad = [&] {
    Tape tape;
    const auto bound = net.bind(tape);
    const auto outs = net.forward(bound, tape.constant(Tensor(p.data.inputs)));
    return net.flatten(tape.backward(task_loss(p.tasks[0], outs[0], p.data.targets.col(0))));
  };
  const Vector a = grad(), b = grad();
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())));
}

TEST(Autodiff, GradientOfSumIsSumOfGradients) {
  Tape tape;
  const Var w = tape.parameter(0, row({0.3, -1.2, 2.5}));
  const Var l1 = sum(tanh(w));
  const Var l2 = mean(w * w);
  const Matrix g1 = tape.backward(l1)[0].matrix();
  const Matrix g2 = tape.backward(l2)[0].matrix();
  const Matrix g = tape.backward(l1 + l2)[0].matrix();
  EXPECT_EQ(g, g1 + g2);
}

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "gemr/gradcheck.hpp"
#include "gemr/ops.hpp"

using namespace gemr;

namespace {

using TD = Tensor<double>;
using TF = Tensor<float>;

TD random_tensor(Shape shape, Philox& rng, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return TD(std::move(shape), std::move(v), grad);
}

// Compares tape gradients of a scalar-valued graph against central
// differences for every input tensor.
double max_gradient_error(const std::function<const TD&(Tape<double>&)>& graph, std::vector<TD*> inputs) {
  for (auto* t : inputs) t->zero_grad();
  {
    Tape<double> tape;
    tape.backward(graph(tape));
  }
  auto f = [&] {
    Tape<double> tape(false);
    return graph(tape).item();
  };
  const auto numeric = finite_difference_gradient(f, std::span<TD* const>(inputs), 1e-5);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto g = inputs[k]->grad();
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, relative_error(g[i], numeric[k][i]));
  }
  return worst;
}

}  // namespace

TEST(Tensor, ShapeAndPayloadMustAgree) {
  EXPECT_THROW(TF({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  TF t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_FALSE(t.has_grad());
  EXPECT_EQ(t.grad().size(), 6u);
}

TEST(Ops, MatmulExample) {
  Tape<float> tape(false);
  TF a({2, 2}, {1, 2, 3, 4}), b({2, 1}, {1, 1});
  const auto& c = matmul(tape, a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c.values(), (std::vector<float>{3, 7}));
}

TEST(Ops, MatmulShapeMismatchNamesBothShapes) {
  Tape<float> tape(false);
  TF a({2, 3}), b({2, 2});
  try {
    matmul(tape, a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[2,3]"), std::string::npos) << what;
    EXPECT_NE(what.find("[2,2]"), std::string::npos) << what;
  }
}

TEST(Ops, ReluExample) {
  Tape<float> tape(false);
  TF x({3}, {-1, 0, 2});
  EXPECT_EQ(relu(tape, x).values(), (std::vector<float>{0, 0, 2}));
}

TEST(Ops, ConcatExample) {
  Tape<float> tape(false);
  TF a({2}, {1, 2}), b({1}, std::vector<float>{3});
  EXPECT_EQ(concat(tape, a, b).values(), (std::vector<float>{1, 2, 3}));
}

TEST(Ops, WeightedRowSumAndMean) {
  Tape<double> tape(false);
  TD w({2}, {0.25, 0.75}), rows({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(weighted_row_sum(tape, w, rows).values(), (std::vector<double>{2.5, 3.5}));
  EXPECT_EQ(mean_rows(tape, rows).values(), (std::vector<double>{2.0, 3.0}));
}

TEST(Softmax, Examples) {
  Tape<double> tape(false);
  TD a({2}, {0, 0}), b({2}, {1, 0}), c({2}, {1000, 1000});
  EXPECT_EQ(softmax(tape, a).values(), (std::vector<double>{0.5, 0.5}));
  const auto& sb = softmax(tape, b);
  // e / (e + 1) to 16 digits.
  EXPECT_NEAR(sb[0], 0.7310585786300049, 1e-12);
  EXPECT_NEAR(sb[1], 0.2689414213699951, 1e-12);
  const auto& sc = softmax(tape, c);
  EXPECT_DOUBLE_EQ(sc[0], 0.5);
  EXPECT_DOUBLE_EQ(sc[1], 0.5);
}

TEST(Softmax, EmptyRejected) {
  EXPECT_THROW(TD(Shape{0}), ShapeError);
}

TEST(Softmax, ShiftInvarianceAndNormalisation) {
  Philox rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tape<double> tape(false);
    auto x = random_tensor({7}, rng, false);
    for (auto& v : x.data()) v *= 20.0;
    auto shifted = x;
    const double c = rng.uniform(-500.0, 500.0);
    for (auto& v : shifted.data()) v += c;
    const auto& p = softmax(tape, x);
    const auto& q = softmax(tape, shifted);
    double total = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_GE(p[i], 0.0);
      EXPECT_NEAR(p[i], q[i], 1e-6);
      total += p[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(CrossEntropy, Examples) {
  Tape<double> tape(false);
  TD perfect({3}, {1, 0, 0}), uniform({3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}), wrong({3}, {0, 1, 0});
  EXPECT_DOUBLE_EQ(cross_entropy(tape, perfect, 0).item(), 0.0);
  EXPECT_NEAR(cross_entropy(tape, uniform, 2).item(), 1.09861, 1e-4);
  const double clamped = cross_entropy(tape, wrong, 0).item();
  EXPECT_TRUE(std::isfinite(clamped));
  EXPECT_NEAR(clamped, 27.631021115928547, 1e-9);
  EXPECT_THROW(cross_entropy(tape, uniform, 3), std::invalid_argument);
}

TEST(BatchNorm, TrainExample) {
  Tape<double> tape(false);
  BatchNormParams<double> bn(1);
  TD x({2, 1}, {1, 3});
  const auto& y = batch_norm(tape, x, bn, Mode::Train);
  EXPECT_NEAR(y[0], -1.0, 1e-4);
  EXPECT_NEAR(y[1], 1.0, 1e-4);
  // Running stats moved 10% toward mean 2 and variance 1.
  EXPECT_NEAR(bn.running_mean[0], 0.2, 1e-12);
  EXPECT_NEAR(bn.running_var[0], 1.0, 1e-12);
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
  Tape<double> tape(false);
  BatchNormParams<double> bn(2);
  bn.gamma.assign(std::vector<double>{0, 0});
  bn.beta.assign(std::vector<double>{0.5, -2});
  TD x({3, 2}, {1, 2, 3, 4, 5, 7});
  const auto& y = batch_norm(tape, x, bn, Mode::Train);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(y.at(i, 0), 0.5);
    EXPECT_EQ(y.at(i, 1), -2.0);
  }
}

TEST(BatchNorm, TrainOutputIsStandardised) {
  Philox rng(8);
  Tape<double> tape(false);
  BatchNormParams<double> bn(5);
  auto x = random_tensor({32, 5}, rng, false);
  for (auto& v : x.data()) v = 3.0 * v + 10.0;
  const auto& y = batch_norm(tape, x, bn, Mode::Train);
  for (std::size_t j = 0; j < 5; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 32; ++i) m += y.at(i, j);
    m /= 32.0;
    for (std::size_t i = 0; i < 32; ++i) v += (y.at(i, j) - m) * (y.at(i, j) - m);
    EXPECT_LT(std::abs(m), 1e-5);
    EXPECT_NEAR(v / 32.0, 1.0, 1e-3);
  }
}

TEST(BatchNorm, EvalIsDeterministicAndBatchOfOneRejectedInTrain) {
  BatchNormParams<float> bn(3);
  TF x({2, 3}, {1, 2, 3, 4, 5, 6});
  Tape<float> t1(false), t2(false);
  EXPECT_EQ(batch_norm(t1, x, bn, Mode::Eval).values(), batch_norm(t2, x, bn, Mode::Eval).values());
  TF one({1, 3}, {1, 2, 3});
  EXPECT_THROW(batch_norm(t1, one, bn, Mode::Train), std::invalid_argument);
  EXPECT_NO_THROW(batch_norm(t1, one, bn, Mode::Eval));
}

TEST(Dropout, IdentityCasesAndRejection) {
  Philox rng(1);
  Tape<float> tape(false);
  TF x({4}, {1, 2, 3, 4});
  EXPECT_EQ(dropout(tape, x, 0.0, Mode::Train, rng).values(), x.values());
  EXPECT_EQ(dropout(tape, x, 0.7, Mode::Eval, rng).values(), x.values());
  EXPECT_THROW(dropout(tape, x, 1.0, Mode::Train, rng), std::invalid_argument);
  EXPECT_THROW(dropout(tape, x, -0.1, Mode::Train, rng), std::invalid_argument);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  Philox rng(2);
  Tape<double> tape(false);
  TD ones({10000}, std::vector<double>(10000, 1.0));
  const auto& y = dropout(tape, ones, 0.5, Mode::Train, rng);
  double mean = 0.0;
  for (double v : y.values()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    mean += v;
  }
  mean /= 10000.0;
  EXPECT_GE(mean, 0.97);
  EXPECT_LE(mean, 1.03);
}

TEST(FiniteDifference, QuadraticAndConstant) {
  const std::vector<double> x = {3.0};
  const auto g = finite_difference_gradient([](std::span<const double> v) { return v[0] * v[0]; }, x, 1e-3);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
  const std::vector<double> y = {1.0, -2.0, 5.0};
  for (double v : finite_difference_gradient([](std::span<const double>) { return 4.0; }, y, 1e-3)) {
    EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(finite_difference_gradient([](std::span<const double>) { return 0.0; }, x, 0.0),
               std::invalid_argument);
}

TEST(FiniteDifference, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9), 1e-9 / 1e-8);
}

TEST(Backward, DotGradientIsOtherOperand) {
  TD x({3}, {1, 2, 3}, true), w({3}, {4, -5, 6}, false);
  Tape<double> tape;
  tape.backward(dot(tape, x, w));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), w.values());
}

TEST(Backward, NonScalarLossRejected) {
  TD x({3}, {1, 2, 3}, true);
  Tape<double> tape;
  const auto& y = relu(tape, x);
  EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Backward, SoftmaxCrossEntropyIdentity) {
  Philox rng(4);
  auto z = random_tensor({1, 3}, rng);
  const std::vector<std::size_t> label = {1};
  Tape<double> tape;
  tape.backward(softmax_cross_entropy(tape, z, label));
  Tape<double> plain(false);
  TD flat({3}, z.values());
  const auto& p = softmax(plain, flat);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(z.grad()[i], p[i] - (i == 1 ? 1.0 : 0.0), 1e-12);
}

TEST(Backward, FanOutAccumulates) {
  Philox rng(6);
  auto x = random_tensor({5}, rng);
  auto w = random_tensor({5}, rng, false);
  {
    Tape<double> tape;
    tape.backward(dot(tape, x, w));
  }
  const std::vector<double> once(x.grad().begin(), x.grad().end());
  x.zero_grad();
  Tape<double> tape;
  const auto& f = dot(tape, x, w);
  tape.backward(add(tape, f, f));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x.grad()[i], 2.0 * once[i], 1e-6);
}

TEST(Gradcheck, Primitives) {
  Philox rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(9), n = 1 + rng.below(9);
    auto a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    auto w = random_tensor({n, k}, rng), bias = random_tensor({n}, rng);
    auto v = random_tensor({k}, rng), u = random_tensor({k}, rng), r = random_tensor({m}, rng);
    auto probe = random_tensor({m, n}, rng, false);
    auto probe_rows = random_tensor({k}, rng, false);
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                const auto& c = matmul(t, a, b);
                return sum(t, weighted_row_sum(t, r, add(t, c, probe)));
              }, {&a, &b, &r}), 1e-4) << "matmul";
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                return sum(t, relu(t, linear(t, a, w, bias)));
              }, {&a, &w, &bias}), 1e-4) << "linear/relu";
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                const auto& s = softmax(t, matvec(t, a, v));
                return dot(t, s, r);
              }, {&a, &v, &r}), 1e-4) << "softmax/matvec";
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                const auto& c = concat(t, v, scale(t, u, 0.5));
                return dot(t, c, concat(t, u, probe_rows));
              }, {&v, &u}), 1e-4) << "concat/scale";
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                const auto& mr = mean_rows(t, a);
                const auto& sl = slice_rows(t, a, 0, 1);
                return add(t, dot(t, mr, v), sum(t, reshape(t, sl, Shape{k})));
              }, {&a, &v}), 1e-4) << "mean_rows/slice";
  }
}

TEST(Gradcheck, BatchNormAndLosses) {
  Philox rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t b = 3 + rng.below(6), d = 1 + rng.below(6);
    auto x = random_tensor({b, d}, rng), probe = random_tensor({b, d}, rng, false);
    BatchNormParams<double> bn(d);
    for (auto& g : bn.gamma.data()) g = rng.uniform(0.5, 1.5);
    for (auto& g : bn.beta.data()) g = rng.normal();
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                const auto& y = batch_norm(t, x, bn, Mode::Train);
                return dot(t, reshape(t, y, Shape{b * d}), reshape(t, probe, Shape{b * d}));
              }, {&x, &bn.gamma, &bn.beta}), 1e-4) << "batch_norm";
    auto logits = random_tensor({b, 3}, rng);
    std::vector<std::size_t> labels(b);
    for (auto& l : labels) l = rng.below(3);
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                return softmax_cross_entropy(t, logits, labels);
              }, {&logits}), 1e-4) << "softmax_cross_entropy";
    auto row0 = random_tensor({3}, rng);
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                return cross_entropy(t, softmax(t, row0), labels[0]);
              }, {&row0}), 1e-4) << "cross_entropy";
  }
}

TEST(Gradcheck, LargeMatmul) {
  Philox rng(14);
  auto a = random_tensor({64, 64}, rng), b = random_tensor({64, 64}, rng);
  auto probe = random_tensor({64, 64}, rng, false);
  TD flat_probe({4096}, probe.values());
  EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
              return dot(t, reshape(t, matmul(t, a, b), Shape{4096}), flat_probe);
            }, {&a, &b}), 1e-4);
}

TEST(Gradcheck, TwoLayerNetworkOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Philox rng(seed);
    auto x = random_tensor({4, 5}, rng, false);
    auto w1 = random_tensor({6, 5}, rng), b1 = random_tensor({6}, rng);
    auto w2 = random_tensor({3, 6}, rng), b2 = random_tensor({3}, rng);
    std::vector<std::size_t> labels = {0, 1, 2, 1};
    EXPECT_LT(max_gradient_error([&](Tape<double>& t) -> const TD& {
                const auto& h = relu(t, linear(t, x, w1, b1));
                return softmax_cross_entropy(t, linear(t, h, w2, b2), labels);
              }, {&w1, &b1, &w2, &b2}), 1e-4) << "seed " << seed;
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"

using namespace plb;
using namespace plb::testing;

namespace {

Image<double> pixels(std::initializer_list<double> v) {
  Image<double> img(static_cast<int>(v.size()), 1, 1);
  img.data.assign(v);
  return img;
}

const ParameterSpace kConstSpace = ParameterSpace::box({0.0}, {20.0}, {0.01});

// Independent oracle: lambda_P(delta) = M * delta^2 / theta for the constant model.
double constant_poisson_oracle(double theta, int m, int max_k, double step) {
  double best = 0.0;
  for (int k = -max_k; k <= max_k; ++k) {
    if (k == 0) continue;
    const double d = k * step;
    best = std::max(best, d * d / std::expm1(m * d * d / theta));
  }
  return best;
}

/// L(theta) = a + b theta0 + c theta1 + e theta0 theta1 per pixel, positive on [0,1]^2.
AnalyticForward random_bilinear(std::mt19937_64& gen, int m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(m), b(m), c(m), e(m);
  for (int i = 0; i < m; ++i) {
    a[i] = 2.5 + 5.0 * u(gen);
    b[i] = 2.0 * u(gen) - 1.0;
    c[i] = 2.0 * u(gen) - 1.0;
    e[i] = 0.5 * u(gen) - 0.25;
  }
  return {[=](std::span<const double> t) {
    Image<double> img(m, 1, 1);
    for (int i = 0; i < m; ++i) img.data[i] = a[i] + b[i] * t[0] + c[i] * t[1] + e[i] * t[0] * t[1];
    return img;
  }};
}

std::vector<Delta> square_grid(const ParameterSpace& sp, std::span<const double> theta, int r) {
  std::vector<Delta> g;
  for (int i = -r; i <= r; ++i)
    for (int k = -r; k <= r; ++k) {
      if (i == 0 && k == 0) continue;
      Delta d{i * sp.step[0], k * sp.step[1]};
      if (sp.contains(shifted_point(theta, d))) g.push_back(d);
    }
  return g;
}

}  // namespace

TEST(Lambda, PoissonExamples) {
  EXPECT_EQ(lambda_poisson(pixels({4, 7}), pixels({4, 7})), 0.0);
  EXPECT_DOUBLE_EQ(lambda_poisson(pixels({4}), pixels({2})), 1.0);
  EXPECT_THROW(lambda_poisson(pixels({0}), pixels({1})), NumericError);
  EXPECT_EQ(lambda_poisson(pixels({0, 2}), pixels({0, 2})), 0.0);  // 0/0 pixels contribute nothing
  EXPECT_THROW(lambda_poisson(pixels({1, 2}), pixels({1})), DomainError);
}

TEST(Lambda, GaussianExamples) {
  EXPECT_EQ(lambda_gaussian(pixels({1, 5}), pixels({1, 5}), 0.3), 0.0);
  EXPECT_DOUBLE_EQ(lambda_gaussian(pixels({1, 0}), pixels({0, 1}), 1.0), 2.0);
  EXPECT_DOUBLE_EQ(lambda_gaussian(pixels({2, 2}), pixels({1, 3}), 0.5), 8.0);
}

TEST(Lambda, NonnegativeAndZeroOnlyForEqualImages) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int t = 0; t < 200; ++t) {
    Image<double> a(20, 1, 3), b(20, 1, 3);
    for (auto& v : a.data) v = u(gen);
    for (auto& v : b.data) v = u(gen);
    EXPECT_GT(lambda_poisson(a, b), 0.0);
    EXPECT_GT(lambda_gaussian(a, b, 0.7), 0.0);
    EXPECT_EQ(lambda_poisson(a, a), 0.0);
  }
}

TEST(Functional, Examples) {
  EXPECT_NEAR(hcr_functional(std::log(2.0), 1.0).value, 1.0, 1e-15);
  const auto z = hcr_functional(0.0, 0.5);
  EXPECT_TRUE(z.unbounded);
  EXPECT_NEAR(hcr_functional(50.0, 1.0).value, 1.0 / std::expm1(50.0), 1e-36);
  EXPECT_NEAR(hcr_functional(50.0, 1.0).value, 1.93e-22, 0.01e-22);
  EXPECT_THROW(hcr_functional(-1.0, 1.0), DomainError);
  EXPECT_THROW(hcr_functional(1.0, 0.0), DomainError);
  // Small lambda keeps full relative precision.
  EXPECT_NEAR(hcr_functional(1e-12, 1.0).value * 1e-12, 1.0, 1e-9);
}

TEST(Functional, ConvexInLambda) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(1e-4, 30.0), t01(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double l1 = u(gen), l2 = u(gen), t = t01(gen);
    const double lhs = hcr_functional(t * l1 + (1 - t) * l2, 1.0).value;
    const double rhs = t * hcr_functional(l1, 1.0).value + (1 - t) * hcr_functional(l2, 1.0).value;
    ASSERT_LE(lhs, rhs * (1 + 1e-12)) << l1 << " " << l2 << " " << t;
  }
}

TEST(HcrBound, ConstantPoissonOracle) {
  const auto fwd = constant_model(100);
  const std::vector<double> theta{10.0};
  const auto grid = axis_grid(kConstSpace, theta, 0, 100);
  ASSERT_EQ(grid.size(), 200u);
  const auto r = hcr_bound(fwd, theta, grid, NoiseModel::poisson(), 0, kConstSpace);
  EXPECT_NEAR(r.bound, constant_poisson_oracle(10.0, 100, 100, 0.01), 1e-9);
  EXPECT_NEAR(r.bound, 0.09995, 1e-6);
  EXPECT_LT(r.bound, 0.1);
  EXPECT_NEAR(std::abs(r.argmax_delta[0]), 0.01, 1e-12);
  EXPECT_FALSE(r.unbounded);
  EXPECT_EQ(r.trace.size(), 200u);
}

TEST(HcrBound, SingleDeltaGrid) {
  const auto fwd = constant_model(100);
  const std::vector<double> theta{10.0};
  const auto r = hcr_bound(fwd, theta, {{0.5}}, NoiseModel::poisson(), 0, kConstSpace);
  EXPECT_DOUBLE_EQ(r.bound, hcr_functional(r.trace[0].lambda, 0.5).value);
  EXPECT_EQ(r.argmax_delta, Delta{0.5});
}

TEST(HcrBound, IdenticalImagesAreUnbounded) {
  const AnalyticForward flat{[](std::span<const double>) { return Image<double>(4, 1, 1, 3.0); }};
  const std::vector<double> theta{10.0};
  const auto r = hcr_bound(flat, theta, axis_grid(kConstSpace, theta, 0, 3), NoiseModel::poisson(), 0, kConstSpace);
  EXPECT_TRUE(r.unbounded);
  const auto m = mse_bound(flat, theta, axis_grid(kConstSpace, theta, 0, 3), NoiseModel::awgn(1.0), kConstSpace);
  EXPECT_TRUE(m.unbounded);
}

TEST(HcrBound, TieBreakIsLexicographic) {
  const auto fwd = constant_model(100);
  const std::vector<double> theta{10.0};
  // 10 +- 0.25 are exact in binary, so under AWGN both sides tie exactly.
  const auto r = hcr_bound(fwd, theta, {{0.25}, {-0.25}}, NoiseModel::awgn(1.0), 0, kConstSpace);
  ASSERT_EQ(r.ties.size(), 2u);
  EXPECT_EQ(r.argmax_delta, Delta{-0.25});
}

TEST(HcrBound, GridValidation) {
  const auto fwd = constant_model(4);
  const std::vector<double> theta{10.0};
  EXPECT_THROW(hcr_bound(fwd, theta, {}, NoiseModel::poisson(), 0, kConstSpace), DomainError);
  EXPECT_THROW(hcr_bound(fwd, theta, {{0.0}}, NoiseModel::poisson(), 0, kConstSpace), DomainError);
  EXPECT_THROW(hcr_bound(fwd, theta, {{15.0}}, NoiseModel::poisson(), 0, kConstSpace), DomainError);
}

TEST(MseBound, EqualsHcrForOneParameter) {
  const auto fwd = constant_model(100);
  const std::vector<double> theta{10.0};
  const auto grid = axis_grid(kConstSpace, theta, 0, 100);
  const auto h = hcr_bound(fwd, theta, grid, NoiseModel::poisson(), 0, kConstSpace);
  const auto m = mse_bound(fwd, theta, grid, NoiseModel::poisson(), kConstSpace);
  EXPECT_EQ(h.bound, m.bound);
  EXPECT_NEAR(m.bound, 0.09995, 1e-6);
}

TEST(CrLimit, ConstantPoissonIsExact) {
  const auto fwd = constant_model(100);
  const std::vector<double> theta{10.0};
  const auto cr = cr_limit(fwd, theta, 0.01, NoiseModel::poisson(), 0, kConstSpace);
  EXPECT_NEAR(cr.value, 0.1, 1e-12);
  EXPECT_FALSE(cr.unbounded);
  const std::vector<double> edge{0.0};
  EXPECT_THROW(cr_limit(fwd, edge, 0.01, NoiseModel::poisson(), 0, kConstSpace), DomainError);
  const AnalyticForward flat{[](std::span<const double>) { return Image<double>(4, 1, 1, 3.0); }};
  EXPECT_TRUE(cr_limit(flat, theta, 0.01, NoiseModel::poisson(), 0, kConstSpace).unbounded);
}

TEST(CrLimit, HcrDominatesCrOnConstantModel) {
  const auto fwd = constant_model(100);
  const std::vector<double> theta{10.0};
  const auto h = hcr_bound(fwd, theta, axis_grid(kConstSpace, theta, 0, 5), NoiseModel::poisson(), 0, kConstSpace);
  const auto cr = cr_limit(fwd, theta, 0.01, NoiseModel::poisson(), 0, kConstSpace);
  EXPECT_GE(h.bound, cr.value * (1 - 1e-3));
}

TEST(Properties, SupDominatesEveryGridValue) {
  std::mt19937_64 gen(4);
  const auto sp = ParameterSpace::box({0.0, 0.0}, {1.0, 1.0}, {0.05, 0.05});
  for (int t = 0; t < 20; ++t) {
    const auto fwd = random_bilinear(gen, 30);
    const std::vector<double> theta{0.5, 0.5};
    const auto r = hcr_bound(fwd, theta, square_grid(sp, theta, 3), NoiseModel::poisson(), t % 2, sp);
    for (const auto& e : r.trace) ASSERT_GE(r.bound, e.value);
  }
}

TEST(Properties, SumOfComponentBoundsDominatesMseBound) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> idx(2, 18);
  const auto sp = ParameterSpace::box({0.0, 0.0}, {1.0, 1.0}, {0.05, 0.05});
  for (int t = 0; t < 30; ++t) {
    const auto fwd = random_bilinear(gen, 25);
    const std::vector<double> theta{sp.lattice_value(0, idx(gen)), sp.lattice_value(1, idx(gen))};
    const auto grid = square_grid(sp, theta, 2);
    const NoiseModel noise = t % 2 ? NoiseModel::poisson() : NoiseModel::awgn(0.3);
    const double sum = hcr_bound(fwd, theta, grid, noise, 0, sp).bound + hcr_bound(fwd, theta, grid, noise, 1, sp).bound;
    ASSERT_GE(sum, mse_bound(fwd, theta, grid, noise, sp).bound);
  }
}

TEST(Properties, AwgnBoundNondecreasingInSigma) {
  std::mt19937_64 gen(6);
  const auto sp = ParameterSpace::box({0.0, 0.0}, {1.0, 1.0}, {0.05, 0.05});
  const auto fwd = random_bilinear(gen, 40);
  const std::vector<double> theta{0.5, 0.5};
  const auto grid = square_grid(sp, theta, 3);
  double prev = 0.0;
  for (double sigma : {0.01, 0.03, 0.1, 0.3, 1.0, 3.0}) {
    const double b = hcr_bound(fwd, theta, grid, NoiseModel::awgn(sigma), 0, sp).bound;
    EXPECT_GE(b, prev) << sigma;
    prev = b;
  }
}

TEST(AxisGrid, ClipsToParameterSpace) {
  const std::vector<double> theta{0.02};
  const auto g = axis_grid(kConstSpace, theta, 0, 5);
  ASSERT_EQ(g.size(), 7u);  // -2,-1 and +1..+5
  EXPECT_NEAR(g.front()[0], -0.02, 1e-15);
  EXPECT_NEAR(g.back()[0], 0.05, 1e-15);
  const auto strided = axis_grid(kConstSpace, std::vector<double>{10.0}, 0, 2, 5);
  EXPECT_NEAR(strided.back()[0], 0.1, 1e-15);
}

TEST(NoiseModelTest, Names) {
  EXPECT_EQ(NoiseModel::poisson().name(), "poisson");
  EXPECT_EQ(NoiseModel::awgn(0.1).name(), "awgn(0.1)");
  EXPECT_THROW(NoiseModel::awgn(0.0), DomainError);
}

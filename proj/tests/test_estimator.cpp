#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace plb;
using namespace plb::testing;

namespace {

const ParameterSpace kSpace = ParameterSpace::box({0.0}, {20.0}, {0.01});

MleConfig identity_config() {
  MleConfig c;
  c.init_lo = {4.0};
  c.init_hi = {12.0};
  c.step = 0.5;
  c.max_iterations = 400;
  c.tolerance = 1e-6;
  return c;
}

}  // namespace

TEST(Synthesize, DeterministicPerSeed) {
  const Image<double> l(10, 1, 3, 2.0);
  for (const auto& n : {NoiseModel::awgn(0.3), NoiseModel::poisson()}) {
    EXPECT_EQ(synthesize_noisy(l, n, 5).data.data, synthesize_noisy(l, n, 5).data.data);
    EXPECT_NE(synthesize_noisy(l, n, 5).data.data, synthesize_noisy(l, n, 6).data.data);
  }
}

TEST(Synthesize, PoissonZeroRateGivesZeroCounts) {
  const Image<double> l(20, 1, 3, 0.0);
  for (double v : synthesize_noisy(l, NoiseModel::poisson(), 1).data.data) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(synthesize_noisy(Image<double>(1, 1, 1, -1.0), NoiseModel::poisson(), 1), DomainError);
}

TEST(Synthesize, PoissonCountsHaveRateMoments) {
  const Image<double> l(20000, 1, 1, 3.5);
  const auto y = synthesize_noisy(l, NoiseModel::poisson(), 4).data.data;
  double m = 0, v = 0;
  for (double x : y) m += x / y.size();
  for (double x : y) v += (x - m) * (x - m) / (y.size() - 1);
  EXPECT_NEAR(m, 3.5, 0.05);
  EXPECT_NEAR(v, 3.5, 0.15);
}

TEST(Synthesize, AwgnResidualVarianceOnCorridor) {
  RenderConfig cfg;
  cfg.spp = 1;
  const auto l = render(corridor(), cfg);
  const std::size_t n = l.data.size();
  std::vector<double> s1(n, 0.0), s2(n, 0.0);
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    const auto y = synthesize_noisy(l, NoiseModel::awgn(0.1), derive_seed(3, {static_cast<std::uint64_t>(d)}));
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y.data.data[i] - l.data[i];
      s1[i] += r;
      s2[i] += r * r;
    }
  }
  std::size_t outside = 0;
  double mean_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double var = (s2[i] - s1[i] * s1[i] / draws) / (draws - 1);
    mean_var += var / n;
    outside += std::abs(var / 0.01 - 1.0) > 0.05;
  }
  EXPECT_NEAR(mean_var, 0.01, 0.0001);
  // Each pixel's estimate has relative sd sqrt(2/1e4) = 1.4%, so +-5% is 3.5 sd.
  EXPECT_LE(outside, n / 1000);
}

TEST(Mle, NoiselessOnePixel) {
  const auto fwd = identity_model(1);
  NoisyObservation y;
  y.data = Image<double>(1, 1, 1, 7.0);
  y.noise = NoiseModel::awgn(0.1);
  const auto run = mle_gaussian(y, fwd, identity_config(), kSpace, {11.0}, 1);
  EXPECT_TRUE(run.converged);
  EXPECT_NEAR(run.theta_hat[0], 7.0, 1e-3);
  EXPECT_FALSE(run.loss.empty());
  EXPECT_LT(run.loss.back(), run.loss.front());
}

TEST(Mle, NoisyOnePixelMatchesClosedForm) {
  const auto fwd = identity_model(1);
  const auto y = synthesize_noisy(fwd(std::vector<double>{7.0}), NoiseModel::awgn(0.5), 9);
  const auto run = mle_gaussian(y, fwd, identity_config(), kSpace, {5.0}, 2);
  EXPECT_NEAR(run.theta_hat[0], y.data.data[0], 1e-3);
}

TEST(Mle, ProjectsOntoParameterSpace) {
  const auto fwd = identity_model(1);
  NoisyObservation y;
  y.data = Image<double>(1, 1, 1, 25.0);  // beyond the upper bound of 20
  y.noise = NoiseModel::awgn(0.1);
  const auto run = mle_gaussian(y, fwd, identity_config(), kSpace, {10.0}, 1);
  EXPECT_LE(run.theta_hat[0], 20.0);
  EXPECT_NEAR(run.theta_hat[0], 20.0, 1e-2);
}

TEST(Mle, RejectsPoissonObservationsAndBadConfig) {
  const auto fwd = identity_model(1);
  NoisyObservation y;
  y.data = Image<double>(1, 1, 1, 7.0);
  y.noise = NoiseModel::poisson();
  EXPECT_THROW(mle_gaussian(y, fwd, identity_config(), kSpace, {5.0}, 1), DomainError);
  y.noise = NoiseModel::awgn(0.1);
  MleConfig bad = identity_config();
  bad.init_hi = {30.0};
  EXPECT_THROW(mle_gaussian(y, fwd, bad, kSpace, {5.0}, 1), DomainError);
}

TEST(RunTrials, IdentityOracle) {
  const auto fwd = identity_model(1);
  const std::vector<double> theta{10.0};
  const auto rep = run_trials(fwd(theta), fwd, theta, NoiseModel::awgn(0.1), identity_config(), kSpace, 1000, 17, 0);
  EXPECT_EQ(rep.diverged, 0u);
  EXPECT_NEAR(rep.variance, 0.01, 0.001);
  EXPECT_NEAR(rep.mse, 0.01, 0.001);
  EXPECT_LT(std::abs(rep.bias[0]), 3.0 * std::sqrt(rep.variance / 1000));
  EXPECT_NEAR(rep.mse - rep.variance, rep.bias[0] * rep.bias[0], 1e-12);
}

TEST(RunTrials, ForcedIdenticalSeeds) {
  const auto fwd = identity_model(4);
  const std::vector<double> theta{10.0};
  const auto rep = run_trials(fwd(theta), fwd, theta, NoiseModel::awgn(0.1), identity_config(), kSpace, 2, 0, 1,
                              std::vector<std::uint64_t>{42, 42});
  EXPECT_EQ(rep.variance, 0.0);
  const double err = rep.runs[0].theta_hat[0] - 10.0;
  EXPECT_DOUBLE_EQ(rep.mse, err * err);
}

TEST(RunTrials, WorkerCountDoesNotChangeResults) {
  const auto fwd = identity_model(3);
  const std::vector<double> theta{10.0};
  const auto a = run_trials(fwd(theta), fwd, theta, NoiseModel::awgn(0.1), identity_config(), kSpace, 12, 5, 1);
  const auto b = run_trials(fwd(theta), fwd, theta, NoiseModel::awgn(0.1), identity_config(), kSpace, 12, 5, 4);
  for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(a.runs[k].theta_hat, b.runs[k].theta_hat);
  EXPECT_EQ(a.mse, b.mse);
}

TEST(RunTrials, MseVarianceIdentityOnRandomReports) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  for (int t = 0; t < 50; ++t) {
    TrialReport rep;
    rep.theta_star = {1.0, 2.0};
    for (int k = 0; k < 20; ++k) {
      MleRun r;
      r.theta_hat = {1.0 + 0.1 * z(gen) + 0.05, 2.0 + 0.1 * z(gen)};
      r.diverged = k == 7;
      rep.runs.push_back(r);
    }
    aggregate(rep);
    EXPECT_EQ(rep.diverged, 1u);
    const double b2 = rep.bias[0] * rep.bias[0] + rep.bias[1] * rep.bias[1];
    EXPECT_NEAR(rep.mse - rep.variance, b2, 1e-12);
    EXPECT_GE(rep.mse - rep.variance, -1e-15);
  }
}

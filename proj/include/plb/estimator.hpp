#pragma once

// Noise synthesis and a maximum-likelihood harness under additive white
// Gaussian noise: the MLE minimizes sum (Y - L_theta)^2, here with an Adam-style
// optimizer on finite-difference gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "plb/bounds.hpp"
#include "plb/error.hpp"
#include "plb/forward.hpp"
#include "plb/image.hpp"
#include "plb/parallel.hpp"
#include "plb/rng.hpp"

namespace plb {

struct NoisyObservation {
  Image<double> data;
  NoiseModel noise;
  std::uint64_t seed = 0;
  std::vector<double> theta_star;
};

/// AWGN: Y = L + N(0, sigma^2); Poisson: Y ~ Poisson(L). Deterministic per seed.
template <class T>
NoisyObservation synthesize_noisy(const Image<T>& l, const NoiseModel& noise, std::uint64_t seed) {
  noise.validate();
  NoisyObservation y;
  y.data = Image<double>(l.width, l.height, l.channels);
  y.data.meta = l.meta;
  y.noise = noise;
  y.seed = seed;
  y.theta_star = l.meta.theta;
  std::mt19937_64 gen(seed);
  if (noise.kind == NoiseKind::awgn) {
    std::normal_distribution<double> eps(0.0, noise.sigma);
    for (std::size_t i = 0; i < l.data.size(); ++i) y.data.data[i] = static_cast<double>(l.data[i]) + eps(gen);
  } else {
    for (std::size_t i = 0; i < l.data.size(); ++i) {
      const double rate = l.data[i];
      if (!(rate >= 0.0)) throw DomainError("synthesize_noisy: negative Poisson rate at element " + std::to_string(i));
      if (rate == 0.0) continue;
      std::poisson_distribution<long long> draw(rate);
      y.data.data[i] = static_cast<double>(draw(gen));
    }
  }
  return y;
}

struct MleConfig {
  std::vector<double> init_lo;  // uniform initialization box
  std::vector<double> init_hi;
  double step = 0.05;           // initial learning rate (parameter units)
  double step_decay = 0.99;     // learning rate multiplier per iteration
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_iterations = 200;
  double xi = 0.01;             // finite-difference step
  std::uint32_t spp_coarse = 512;
  std::uint32_t spp_fine = 1024;
  int switch_iteration = 50;    // first iteration rendered at spp_fine
  double tolerance = 1e-3;      // stop when no coordinate moves more than this...
  int patience = 5;             // ...for this many consecutive iterations

  void validate(const ParameterSpace& space) const {
    if (init_lo.size() != space.dim() || init_hi.size() != space.dim())
      throw DomainError("mle config: init range must have one entry per component");
    for (std::size_t j = 0; j < space.dim(); ++j) {
      if (!(init_lo[j] < init_hi[j])) throw DomainError("mle config: init range lo must be < hi");
      if (init_lo[j] < space.lower[j] - space.tolerance(j) || init_hi[j] > space.upper[j] + space.tolerance(j))
        throw DomainError("mle config: init range outside the parameter space");
    }
    if (!(step > 0.0) || !(step_decay > 0.0 && step_decay <= 1.0)) throw DomainError("mle config: bad step schedule");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
      throw DomainError("mle config: bad moment decay");
    if (max_iterations < 1 || !(xi > 0.0) || !(tolerance > 0.0) || patience < 1) throw DomainError("mle config: nonpositive iteration settings");
    if (spp_coarse < 1 || spp_fine < 1 || switch_iteration < 0) throw DomainError("mle config: bad spp schedule");
  }
};

struct MleRun {
  std::uint64_t seed = 0;
  std::vector<double> init;
  std::vector<double> theta_hat;
  std::vector<double> loss;  // per iteration, mean of the two finite-difference evaluations
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

/// Sum of squared residuals. Non-finite values propagate.
template <class T>
double l2_loss(const Image<double>& y, const Image<T>& l) {
  require_same_shape(y, l, "mle loss");
  return pairwise_sum(0, y.data.size(), [&](std::size_t i) {
    const double d = y.data[i] - static_cast<double>(l.data[i]);
    return d * d;
  });
}

/// Gaussian MLE from `init`. Iteration t renders its gradient evaluations on
/// stream derive_seed(seed, {t, j}); the +xi and -xi sides share that stream.
template <ForwardModel F>
MleRun mle_gaussian(const NoisyObservation& y, const F& forward, const MleConfig& cfg, const ParameterSpace& space,
                    std::vector<double> init, std::uint64_t seed) {
  if (y.noise.kind != NoiseKind::awgn) throw DomainError("mle_gaussian: observation must carry AWGN");
  cfg.validate(space);
  if (!space.contains(init)) throw DomainError("mle_gaussian: init out of bounds");
  const std::size_t dim = space.dim();
  MleRun run;
  run.seed = seed;
  run.init = init;
  std::vector<double> theta = std::move(init), m(dim, 0.0), v(dim, 0.0), grad(dim, 0.0);
  double lr = cfg.step;
  int still = 0;  // consecutive iterations below tolerance; a single small step
                  // happens whenever the momentum changes sign
  for (int t = 1; t <= cfg.max_iterations; ++t) {
    const std::uint32_t spp = t <= cfg.switch_iteration ? cfg.spp_coarse : cfg.spp_fine;
    double loss_sum = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<double> plus = theta, minus = theta;
      plus[j] = std::min(theta[j] + cfg.xi, space.upper[j]);
      minus[j] = std::max(theta[j] - cfg.xi, space.lower[j]);
      const EvalRequest req{spp, derive_seed(seed, {static_cast<std::uint64_t>(t), j})};
      const double lp = l2_loss(y.data, forward(plus, req));
      const double lm = l2_loss(y.data, forward(minus, req));
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        run.diverged = true;
        break;
      }
      grad[j] = (lp - lm) / (plus[j] - minus[j]);
      loss_sum += 0.5 * (lp + lm);
    }
    if (run.diverged) {
      run.iterations = t;
      break;
    }
    run.loss.push_back(loss_sum / static_cast<double>(dim));
    double moved = 0.0;
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t j = 0; j < dim; ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
      const double step = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.epsilon);
      const double next = std::clamp(theta[j] - step, space.lower[j], space.upper[j]);
      moved = std::max(moved, std::abs(next - theta[j]));
      theta[j] = next;
    }
    if (!std::all_of(theta.begin(), theta.end(), [](double x) { return std::isfinite(x); })) {
      run.diverged = true;
      run.iterations = t;
      break;
    }
    lr *= cfg.step_decay;
    run.iterations = t;
    still = moved < cfg.tolerance ? still + 1 : 0;
    if (still >= cfg.patience) {
      run.converged = true;
      break;
    }
  }
  run.theta_hat = theta;
  return run;
}

struct TrialReport {
  std::vector<double> theta_star;
  std::vector<MleRun> runs;
  double mse = 0.0;       // mean ||theta_hat - theta*||^2 over non-diverged runs
  double variance = 0.0;  // mean ||theta_hat - mean theta_hat||^2 over non-diverged runs
  std::vector<double> bias;
  std::size_t diverged = 0;
  std::size_t converged = 0;
};

inline void aggregate(TrialReport& rep) {
  const std::size_t dim = rep.theta_star.size();
  std::vector<double> mean(dim, 0.0);
  std::size_t n = 0;
  rep.diverged = rep.converged = 0;
  for (const auto& r : rep.runs) {
    if (r.diverged) {
      ++rep.diverged;
      continue;
    }
    if (r.converged) ++rep.converged;
    ++n;
    for (std::size_t j = 0; j < dim; ++j) mean[j] += r.theta_hat[j];
  }
  rep.mse = rep.variance = 0.0;
  rep.bias.assign(dim, 0.0);
  if (n == 0) return;
  for (auto& x : mean) x /= static_cast<double>(n);
  for (const auto& r : rep.runs) {
    if (r.diverged) continue;
    for (std::size_t j = 0; j < dim; ++j) {
      const double e = r.theta_hat[j] - rep.theta_star[j];
      const double c = r.theta_hat[j] - mean[j];
      rep.mse += e * e;
      rep.variance += c * c;
    }
  }
  rep.mse /= static_cast<double>(n);
  rep.variance /= static_cast<double>(n);
  for (std::size_t j = 0; j < dim; ++j) rep.bias[j] = mean[j] - rep.theta_star[j];
}

/// K independent MLE runs against fresh noise realizations of `truth` (the
/// clean image at theta*). Run k uses seed derive_seed(base_seed, {k}) unless
/// `seeds` forces explicit per-run seeds; the seed fixes both the noise
/// realization and the uniform initialization.
template <ForwardModel F, class T>
TrialReport run_trials(const Image<T>& truth, const F& forward, std::span<const double> theta_star, const NoiseModel& noise,
                       const MleConfig& cfg, const ParameterSpace& space, std::size_t runs, std::uint64_t base_seed,
                       unsigned workers = 1, std::optional<std::vector<std::uint64_t>> seeds = std::nullopt) {
  if (runs < 2) throw DomainError("run_trials: need at least 2 runs");
  if (seeds && seeds->size() != runs) throw DomainError("run_trials: one seed per run required");
  if (!space.contains(theta_star)) throw DomainError("run_trials: theta* out of bounds");
  cfg.validate(space);
  TrialReport rep;
  rep.theta_star.assign(theta_star.begin(), theta_star.end());
  rep.runs.resize(runs);
  parallel_for(runs, workers, [&](std::size_t k) {
    const std::uint64_t seed = seeds ? (*seeds)[k] : derive_seed(base_seed, {k});
    CounterStream init_rng(derive_seed(seed, {0x1417ull}), 0, 0);
    std::vector<double> init(space.dim());
    for (std::size_t j = 0; j < init.size(); ++j)
      init[j] = cfg.init_lo[j] + (cfg.init_hi[j] - cfg.init_lo[j]) * init_rng.uniform();
    NoisyObservation y = synthesize_noisy(truth, noise, derive_seed(seed, {0x4015Eull}));
    y.theta_star = rep.theta_star;
    rep.runs[k] = mle_gaussian(y, forward, cfg, space, std::move(init), seed);
  });
  aggregate(rep);
  return rep;
}

}  // namespace plb

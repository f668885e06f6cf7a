#pragma once

// Rendering-error correction. An exponent computed from images rendered with
// N samples per pixel behaves like lambda + C / N + eta, with zero-mean eta of
// variance O(1/N); observing it at several N separates lambda from C.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plb/bounds.hpp"
#include "plb/error.hpp"
#include "plb/forward.hpp"
#include "plb/image.hpp"
#include "plb/rng.hpp"

namespace plb {

struct LambdaObservation {
  std::uint32_t spp = 1;
  double lambda_tilde = 0.0;
};

struct LambdaEstimate {
  double lambda_hat = 0.0;  // after clamping
  double raw_lambda = 0.0;  // least-squares solution before clamping
  double c_hat = 0.0;
  std::vector<double> residuals;  // lambda_tilde_i - (raw_lambda + c_hat / N_i)
  bool clamped = false;
};

/// Weighted least squares fit of lambda_tilde_i = lambda + C / N_i. Weights
/// default to N_i (inverse of the O(1/N) noise variance). A negative lambda
/// is clamped to 0 and flagged.
inline LambdaEstimate estimate_lambda(std::span<const LambdaObservation> obs,
                                      std::optional<std::span<const double>> weights = std::nullopt) {
  if (obs.size() < 2) throw DomainError("estimate_lambda: need at least 2 observations");
  if (weights && weights->size() != obs.size()) throw DomainError("estimate_lambda: one weight per observation required");
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].spp < 1) throw DomainError("estimate_lambda: spp must be >= 1");
    if (!std::isfinite(obs[i].lambda_tilde)) throw NumericError("estimate_lambda: non-finite observation");
    const double w = weights ? (*weights)[i] : static_cast<double>(obs[i].spp);
    if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("estimate_lambda: weights must be positive");
    sw += w;
    sx += w / obs[i].spp;
    sy += w * obs[i].lambda_tilde;
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double w = weights ? (*weights)[i] : static_cast<double>(obs[i].spp);
    const double dx = 1.0 / obs[i].spp - mx;
    sxx += w * dx * dx;
    sxy += w * dx * (obs[i].lambda_tilde - my);
  }
  const bool distinct = std::any_of(obs.begin(), obs.end(), [&](const LambdaObservation& o) { return o.spp != obs[0].spp; });
  if (!distinct || !(sxx > 0.0)) throw DomainError("estimate_lambda: singular design (need at least 2 distinct spp values)");
  LambdaEstimate e;
  e.c_hat = sxy / sxx;
  e.raw_lambda = my - e.c_hat * mx;
  for (const auto& o : obs) e.residuals.push_back(o.lambda_tilde - (e.raw_lambda + e.c_hat / o.spp));
  e.clamped = e.raw_lambda < 0.0;
  e.lambda_hat = e.clamped ? 0.0 : e.raw_lambda;
  return e;
}

struct HcrHatResult {
  HcrResult result;
  std::vector<std::uint32_t> schedule;
  std::vector<std::vector<double>> lambda_tilde;  // [delta][schedule index]
  std::vector<LambdaEstimate> estimates;          // [delta]
};

/// Bias-corrected HCR from per-delta exponents observed over an spp schedule.
/// Deltas whose estimate clamps to zero are excluded from the maximum.
inline HcrHatResult hcr_hat_from_lambdas(std::vector<TraceEntry> trace, const std::vector<std::uint32_t>& schedule,
                                         std::vector<std::vector<double>> lambda_tilde, std::span<const double> theta_star,
                                         std::size_t j, const NoiseModel& noise) {
  if (lambda_tilde.size() != trace.size()) throw DomainError("hcr_hat: one lambda row per delta required");
  HcrHatResult out;
  out.schedule = schedule;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (lambda_tilde[i].size() != schedule.size()) throw DomainError("hcr_hat: lambda row length differs from schedule");
    std::vector<LambdaObservation> obs;
    for (std::size_t k = 0; k < schedule.size(); ++k) obs.push_back({schedule[k], lambda_tilde[i][k]});
    LambdaEstimate e = estimate_lambda(obs);
    trace[i].lambda = e.lambda_hat;
    trace[i].excluded = e.clamped;
    out.estimates.push_back(std::move(e));
  }
  out.lambda_tilde = std::move(lambda_tilde);
  out.result = hcr_from_trace(std::move(trace), theta_star, j, noise);
  return out;
}

inline void validate_schedule(const std::vector<std::uint32_t>& schedule) {
  if (schedule.size() < 2) throw DomainError("spp schedule needs at least 2 entries");
  for (auto n : schedule)
    if (n < 1) throw DomainError("spp schedule entries must be >= 1");
  if (std::all_of(schedule.begin(), schedule.end(), [&](auto n) { return n == schedule[0]; }))
    throw DomainError("spp schedule needs at least 2 distinct values");
}

/// Renders theta* and every theta* + delta at each spp of the schedule (fresh
/// streams throughout) and returns the bias-corrected bound.
template <ForwardModel F>
HcrHatResult hcr_hat(const F& forward, std::span<const double> theta_star, const std::vector<Delta>& grid,
                     const NoiseModel& noise, std::size_t j, const std::vector<std::uint32_t>& schedule,
                     const ParameterSpace& space) {
  validate_schedule(schedule);
  validate_grid(space, theta_star, grid);
  if (j >= theta_star.size()) throw DomainError("component index out of range");
  std::vector<std::vector<double>> table(grid.size(), std::vector<double>(schedule.size()));
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto base = forward(theta_star, EvalRequest{schedule[k], 0});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto img = forward(shifted_point(theta_star, grid[i]), EvalRequest{schedule[k], i + 1});
      table[i][k] = lambda_for(base, img, noise);
    }
  }
  return hcr_hat_from_lambdas(make_trace(theta_star, grid, j), schedule, std::move(table), theta_star, j, noise);
}

struct HcrInterval {
  double lower = 0.0;  // direct bound at high spp
  double upper = 0.0;  // bias-corrected estimate
  std::vector<double> theta_star;
  std::size_t component = 0;
  NoiseModel noise;
  bool inverted = false;          // upper < lower on this realization
  bool lower_unbounded = false;
  bool upper_unbounded = false;
  std::size_t clamped = 0;        // deltas excluded from the corrected maximum
};

inline HcrInterval hcr_interval(const HcrResult& direct, const HcrHatResult& corrected) {
  const HcrResult& c = corrected.result;
  if (direct.theta_star != c.theta_star || direct.component != c.component || !(direct.noise == c.noise))
    throw DomainError("hcr_interval: direct and corrected results describe different configurations");
  if (direct.trace.size() != c.trace.size()) throw DomainError("hcr_interval: grids differ");
  for (std::size_t i = 0; i < direct.trace.size(); ++i)
    if (direct.trace[i].delta != c.trace[i].delta) throw DomainError("hcr_interval: grids differ");
  HcrInterval iv;
  iv.lower = direct.bound;
  iv.upper = c.bound;
  iv.theta_star = direct.theta_star;
  iv.component = direct.component;
  iv.noise = direct.noise;
  iv.inverted = iv.upper < iv.lower;
  iv.lower_unbounded = direct.unbounded;
  iv.upper_unbounded = c.unbounded;
  iv.clamped = static_cast<std::size_t>(std::count_if(corrected.estimates.begin(), corrected.estimates.end(),
                                                      [](const LambdaEstimate& e) { return e.clamped; }));
  return iv;
}

// ---- variance decay ----------------------------------------------------------

struct ExponentFit {
  double p = 0.0;
  double c = 0.0;
  double error = 0.0;  // squared residual norm
};

inline constexpr double kDecayPLow = 0.85;
inline constexpr double kDecayPHigh = 1.15;
inline constexpr double kDecayPStep = 0.001;

/// Grid search of p in [0.85, 1.15] (step 0.001) for gamma ~ C_p N^-p, with C_p
/// the least-squares coefficient at each p. Ties keep the smaller p.
inline ExponentFit fit_decay_exponent(std::span<const std::uint32_t> schedule, std::span<const double> gamma) {
  if (schedule.size() != gamma.size() || schedule.size() < 2) throw DomainError("fit_decay_exponent: need >= 2 (N, gamma) pairs");
  const int steps = static_cast<int>(std::lround((kDecayPHigh - kDecayPLow) / kDecayPStep));
  // Grid points as integer / 1000 so they print as short decimals.
  const double scale = static_cast<double>(std::lround(1.0 / kDecayPStep));
  const long first = std::lround(kDecayPLow / kDecayPStep);
  ExponentFit best;
  bool have = false;
  std::vector<double> x(schedule.size());
  for (int k = 0; k <= steps; ++k) {
    const double p = static_cast<double>(first + k) / scale;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      x[i] = std::pow(static_cast<double>(schedule[i]), -p);
      sxx += x[i] * x[i];
      sxy += x[i] * gamma[i];
    }
    const double c = sxy / sxx;
    double err = 0.0;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const double r = gamma[i] - c * x[i];
      err += r * r;
    }
    if (!have || err < best.error) {
      best = {p, c, err};
      have = true;
    }
  }
  return best;
}

struct DecayFit {
  std::vector<ExponentFit> fits;  // one per weight draw
  std::vector<std::pair<double, std::size_t>> histogram;  // (p_opt, count), ascending p

  double median_p() const {
    std::vector<double> p;
    for (const auto& f : fits) p.push_back(f.p);
    if (p.empty()) return 0.0;
    std::sort(p.begin(), p.end());
    const std::size_t n = p.size();
    return n % 2 ? p[n / 2] : 0.5 * (p[n / 2 - 1] + p[n / 2]);
  }
  double mean_p() const {
    double s = 0.0;
    for (const auto& f : fits) s += f.p;
    return fits.empty() ? 0.0 : s / fits.size();
  }
};

/// Per-element unbiased sample variance over K replicates.
template <class T>
std::vector<double> sample_variance(const std::vector<Image<T>>& reps) {
  if (reps.size() < 2) throw DomainError("sample_variance: need at least 2 replicates");
  for (const auto& r : reps) require_same_shape(reps.front(), r, "sample_variance");
  const std::size_t n = reps.front().data.size();
  std::vector<double> var(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const auto& r : reps) mean += r.data[i];
    mean /= static_cast<double>(reps.size());
    double ss = 0.0;
    for (const auto& r : reps) {
      const double d = r.data[i] - mean;
      ss += d * d;
    }
    var[i] = ss / static_cast<double>(reps.size() - 1);
  }
  return var;
}

/// Weighted-variance decay protocol: for each of `draws` weight vectors
/// W ~ U[0, l_max] (one weight per pixel and channel), gamma(N) = sum W * var_N
/// and the best exponent p is found by fit_decay_exponent.
inline DecayFit variance_decay_fit_from_variances(const std::vector<std::vector<double>>& variances,
                                                  const std::vector<std::uint32_t>& schedule, std::size_t draws,
                                                  double l_max, std::uint64_t seed) {
  if (variances.size() != schedule.size() || schedule.size() < 2) throw DomainError("variance_decay_fit: need >= 2 spp values");
  if (std::all_of(schedule.begin(), schedule.end(), [&](auto n) { return n == schedule[0]; }))
    throw DomainError("variance_decay_fit: need >= 2 distinct spp values");
  if (draws < 1) throw DomainError("variance_decay_fit: draws must be >= 1");
  if (!(l_max > 0.0)) throw DomainError("variance_decay_fit: l_max must be > 0");
  const std::size_t n = variances.front().size();
  for (const auto& v : variances)
    if (v.size() != n) throw DomainError("variance_decay_fit: dimension mismatch across spp values");
  DecayFit out;
  std::vector<double> gamma(schedule.size());
  for (std::size_t d = 0; d < draws; ++d) {
    std::fill(gamma.begin(), gamma.end(), 0.0);
    CounterStream rng(seed, static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32));
    for (std::size_t i = 0; i < n; ++i) {
      const double w = l_max * rng.uniform();
      for (std::size_t k = 0; k < schedule.size(); ++k) gamma[k] += w * variances[k][i];
    }
    out.fits.push_back(fit_decay_exponent(schedule, gamma));
  }
  std::vector<double> ps;
  for (const auto& f : out.fits) ps.push_back(f.p);
  std::sort(ps.begin(), ps.end());
  for (double p : ps) {
    if (!out.histogram.empty() && out.histogram.back().first == p) ++out.histogram.back().second;
    else out.histogram.emplace_back(p, 1);
  }
  return out;
}

/// renders[k] holds the K independent replicates rendered at schedule[k].
template <class T>
DecayFit variance_decay_fit(const std::vector<std::vector<Image<T>>>& renders, const std::vector<std::uint32_t>& schedule,
                            std::size_t draws, double l_max, std::uint64_t seed) {
  if (renders.size() != schedule.size()) throw DomainError("variance_decay_fit: one replicate set per spp value");
  std::vector<std::vector<double>> variances;
  for (const auto& reps : renders) {
    if (reps.size() < 2) throw DomainError("variance_decay_fit: insufficient replicates (need K >= 2)");
    variances.push_back(sample_variance(reps));
  }
  for (const auto& v : variances)
    if (v.size() != variances.front().size()) throw DomainError("variance_decay_fit: dimension mismatch across spp values");
  return variance_decay_fit_from_variances(variances, schedule, draws, l_max, seed);
}

}  // namespace plb

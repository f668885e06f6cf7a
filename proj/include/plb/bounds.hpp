#pragma once

// Chi-square divergence exponents and Hammersley-Chapman-Robbins bounds.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "plb/error.hpp"
#include "plb/forward.hpp"
#include "plb/image.hpp"
#include "plb/scene.hpp"

namespace plb {

enum class NoiseKind { poisson, awgn };

struct NoiseModel {
  NoiseKind kind = NoiseKind::poisson;
  double sigma = 0.0;  // AWGN only

  static NoiseModel poisson() { return {NoiseKind::poisson, 0.0}; }
  static NoiseModel awgn(double sigma) {
    NoiseModel m{NoiseKind::awgn, sigma};
    m.validate();
    return m;
  }

  void validate() const {
    if (kind == NoiseKind::awgn && !(sigma > 0.0 && std::isfinite(sigma)))
      throw DomainError("awgn noise: sigma must be > 0");
  }

  /// "poisson" or "awgn(0.1)".
  std::string name() const {
    if (kind == NoiseKind::poisson) return "poisson";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, sigma);
    return "awgn(" + std::string(buf, end) + ")";
  }

  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

/// Poisson exponent: sum over pixels and channels of (L1 - L2)^2 / L1.
template <class T>
double lambda_poisson(const Image<T>& l1, const Image<T>& l2) {
  require_same_shape(l1, l2, "lambda_poisson");
  return pairwise_sum(0, l1.data.size(), [&](std::size_t i) {
    const double a = l1.data[i];
    const double d = a - static_cast<double>(l2.data[i]);
    if (d == 0.0) return 0.0;
    if (!(a > 0.0)) {
      const std::size_t px = i / l1.channels;
      throw NumericError("lambda_poisson: divergence undefined at pixel (" + std::to_string(px % l1.width) + ", " +
                         std::to_string(px / l1.width) + "), channel " + std::to_string(i % l1.channels) +
                         ": zero rate with nonzero difference");
    }
    return d * d / a;
  });
}

/// Gaussian exponent: ||L1 - L2||^2 / sigma^2.
template <class T>
double lambda_gaussian(const Image<T>& l1, const Image<T>& l2, double sigma) {
  require_same_shape(l1, l2, "lambda_gaussian");
  if (!(sigma > 0.0)) throw DomainError("lambda_gaussian: sigma must be > 0");
  const double ss = pairwise_sum(0, l1.data.size(), [&](std::size_t i) {
    const double d = static_cast<double>(l1.data[i]) - static_cast<double>(l2.data[i]);
    return d * d;
  });
  return ss / (sigma * sigma);
}

template <class T>
double lambda_for(const Image<T>& l1, const Image<T>& l2, const NoiseModel& noise) {
  noise.validate();
  return noise.kind == NoiseKind::poisson ? lambda_poisson(l1, l2) : lambda_gaussian(l1, l2, noise.sigma);
}

struct FunctionalValue {
  double value = 0.0;
  bool unbounded = false;  // lambda == 0: the perturbation is unidentifiable
};

/// d^2 / (exp(lambda) - 1) for the squared perturbation d2 > 0.
inline FunctionalValue functional_sq(double lambda, double d2) {
  if (!(lambda >= 0.0)) throw DomainError("hcr functional: lambda must be >= 0 (got " + std::to_string(lambda) + ")");
  if (lambda == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {d2 / std::expm1(lambda), false};
}

/// delta_j^2 / (exp(lambda) - 1). lambda == 0 is reported as unbounded.
inline FunctionalValue hcr_functional(double lambda, double delta_j) {
  if (delta_j == 0.0 || !std::isfinite(delta_j)) throw DomainError("hcr functional: delta_j must be nonzero and finite");
  return functional_sq(lambda, delta_j * delta_j);
}

using Delta = std::vector<double>;

struct TraceEntry {
  Delta delta;          // perturbation as requested
  double delta_j = 0.0; // realized component difference (theta* + delta)_j - theta*_j
  double delta_sq = 0.0; // realized squared norm
  double lambda = 0.0;
  double value = 0.0;
  bool unbounded = false;
  bool excluded = false;  // not eligible for the maximum (e.g. clamped estimate)

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct HcrResult {
  double bound = 0.0;  // maximum over finite, eligible trace values
  Delta argmax_delta;
  std::vector<TraceEntry> trace;
  bool unbounded = false;  // some eligible perturbation had lambda == 0
  std::vector<std::size_t> ties;  // trace indices attaining the bound
  std::vector<double> theta_star;
  std::size_t component = 0;
  NoiseModel noise;

  friend bool operator==(const HcrResult&, const HcrResult&) = default;
};

/// Checks that the grid is a valid perturbation set around theta*.
inline void validate_grid(const ParameterSpace& space, std::span<const double> theta_star, const std::vector<Delta>& grid) {
  if (grid.empty()) throw DomainError("delta grid is empty");
  if (!space.contains(theta_star)) throw DomainError("theta* out of bounds");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Delta& d = grid[i];
    if (d.size() != theta_star.size()) throw DomainError("delta " + std::to_string(i) + ": wrong dimensionality");
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; }))
      throw DomainError("delta " + std::to_string(i) + ": zero perturbation");
    std::vector<double> shifted(theta_star.begin(), theta_star.end());
    for (std::size_t k = 0; k < d.size(); ++k) shifted[k] += d[k];
    if (!space.contains(shifted)) throw DomainError("delta " + std::to_string(i) + ": theta* + delta out of bounds");
  }
}

/// Lattice perturbations k * stride * step_j * e_j for k = +-1 .. +-max_multiple,
/// dropping those that leave the parameter space. Ordered by delta.
inline std::vector<Delta> axis_grid(const ParameterSpace& space, std::span<const double> theta_star, std::size_t j,
                                    long long max_multiple, long long stride = 1) {
  if (j >= space.dim()) throw DomainError("axis_grid: component out of range");
  if (max_multiple < 1 || stride < 1) throw DomainError("axis_grid: multiples must be >= 1");
  std::vector<Delta> out;
  for (long long k = -max_multiple; k <= max_multiple; ++k) {
    if (k == 0) continue;
    Delta d(space.dim(), 0.0);
    d[j] = static_cast<double>(k * stride) * space.step[j];
    std::vector<double> shifted(theta_star.begin(), theta_star.end());
    shifted[j] += d[j];
    if (space.contains(shifted)) out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<double> shifted_point(std::span<const double> theta, const Delta& d) {
  std::vector<double> out(theta.begin(), theta.end());
  for (std::size_t k = 0; k < d.size(); ++k) out[k] += d[k];
  return out;
}

/// Trace skeleton with realized perturbation sizes; lambdas filled in by the caller.
inline std::vector<TraceEntry> make_trace(std::span<const double> theta_star, const std::vector<Delta>& grid, std::size_t j) {
  std::vector<TraceEntry> trace;
  trace.reserve(grid.size());
  for (const Delta& d : grid) {
    const auto shifted = shifted_point(theta_star, d);
    TraceEntry e;
    e.delta = d;
    e.delta_j = shifted[j] - theta_star[j];
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double r = shifted[k] - theta_star[k];
      e.delta_sq += r * r;
    }
    trace.push_back(std::move(e));
  }
  return trace;
}

namespace bounds_detail {

/// Fills values and takes the maximum; `numerator` picks delta_j^2 or ||delta||^2.
template <class Numerator>
HcrResult reduce(std::vector<TraceEntry> trace, Numerator numerator) {
  HcrResult r;
  bool have = false;
  for (TraceEntry& e : trace) {
    const double d2 = numerator(e);
    if (d2 == 0.0) {
      // No displacement along the bounded quantity: contributes nothing.
      if (!(e.lambda >= 0.0)) throw DomainError("hcr functional: lambda must be >= 0");
      e.value = 0.0;
      e.unbounded = false;
    } else {
      const FunctionalValue f = functional_sq(e.lambda, d2);
      e.value = f.value;
      e.unbounded = f.unbounded;
    }
    if (e.excluded) continue;
    if (e.unbounded) {
      r.unbounded = true;
    } else if (!have || e.value > r.bound) {
      r.bound = e.value;
      have = true;
    }
  }
  if (have) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const TraceEntry& e = trace[i];
      if (e.excluded || e.unbounded || e.value != r.bound) continue;
      r.ties.push_back(i);
      if (r.ties.size() == 1 || e.delta < r.argmax_delta) r.argmax_delta = e.delta;
    }
  }
  r.trace = std::move(trace);
  return r;
}

}  // namespace bounds_detail

/// HCR bound for component j from a trace whose lambdas are set.
inline HcrResult hcr_from_trace(std::vector<TraceEntry> trace, std::span<const double> theta_star, std::size_t j,
                                const NoiseModel& noise) {
  HcrResult r = bounds_detail::reduce(std::move(trace), [](const TraceEntry& e) { return e.delta_j * e.delta_j; });
  r.theta_star.assign(theta_star.begin(), theta_star.end());
  r.component = j;
  r.noise = noise;
  return r;
}

/// MSE bound (sum over components) from a trace whose lambdas are set.
inline HcrResult mse_from_trace(std::vector<TraceEntry> trace, std::span<const double> theta_star, const NoiseModel& noise) {
  HcrResult r = bounds_detail::reduce(std::move(trace), [](const TraceEntry& e) { return e.delta_sq; });
  r.theta_star.assign(theta_star.begin(), theta_star.end());
  r.component = static_cast<std::size_t>(-1);
  r.noise = noise;
  return r;
}

/// Evaluates lambda(L_theta*, L_theta*+delta) for every grid entry. theta* is
/// rendered on stream 0 and grid entry i on stream i + 1.
template <ForwardModel F>
std::vector<TraceEntry> lambda_trace(const F& forward, std::span<const double> theta_star, const std::vector<Delta>& grid,
                                     const NoiseModel& noise, std::size_t j, const ParameterSpace& space,
                                     std::uint32_t spp = 0) {
  if (j >= theta_star.size()) throw DomainError("component index out of range");
  validate_grid(space, theta_star, grid);
  noise.validate();
  const auto base = forward(theta_star, EvalRequest{spp, 0});
  auto trace = make_trace(theta_star, grid, j);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto shifted = shifted_point(theta_star, grid[i]);
    const auto img = forward(shifted, EvalRequest{spp, i + 1});
    trace[i].lambda = lambda_for(base, img, noise);
  }
  return trace;
}

/// HCR lower bound on the variance of unbiased estimators of theta_j: the
/// maximum of the HCR functional over the finite perturbation grid.
template <ForwardModel F>
HcrResult hcr_bound(const F& forward, std::span<const double> theta_star, const std::vector<Delta>& grid,
                    const NoiseModel& noise, std::size_t j, const ParameterSpace& space, std::uint32_t spp = 0) {
  return hcr_from_trace(lambda_trace(forward, theta_star, grid, noise, j, space, spp), theta_star, j, noise);
}

/// Lower bound on the MSE (summed over components) of unbiased estimators.
template <ForwardModel F>
HcrResult mse_bound(const F& forward, std::span<const double> theta_star, const std::vector<Delta>& grid,
                    const NoiseModel& noise, const ParameterSpace& space, std::uint32_t spp = 0) {
  return mse_from_trace(lambda_trace(forward, theta_star, grid, noise, 0, space, spp), theta_star, noise);
}

struct CrResult {
  double value = 0.0;
  double lambda = 0.0;
  bool unbounded = false;
};

/// xi^2 / lambda(L_theta*, L_theta*+xi e_j): small-step limit of the functional.
template <ForwardModel F>
CrResult cr_limit(const F& forward, std::span<const double> theta_star, double xi, const NoiseModel& noise, std::size_t j,
                  const ParameterSpace& space, std::uint32_t spp = 0) {
  if (!(xi > 0.0)) throw DomainError("cr_limit: xi must be > 0");
  if (j >= theta_star.size()) throw DomainError("component index out of range");
  noise.validate();
  std::vector<double> plus(theta_star.begin(), theta_star.end()), minus = plus;
  plus[j] += xi;
  minus[j] -= xi;
  if (!space.contains(theta_star) || !space.contains(plus) || !space.contains(minus))
    throw DomainError("cr_limit: theta* +- xi e_j out of bounds");
  const auto base = forward(theta_star, EvalRequest{spp, 0});
  const auto img = forward(plus, EvalRequest{spp, 1});
  const double realized = plus[j] - theta_star[j];
  CrResult r;
  r.lambda = lambda_for(base, img, noise);
  if (r.lambda == 0.0) {
    r.unbounded = true;
    r.value = std::numeric_limits<double>::infinity();
  } else {
    r.value = realized * realized / r.lambda;
  }
  return r;
}

}  // namespace plb

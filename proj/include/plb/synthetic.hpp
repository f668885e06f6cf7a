#pragma once

// Stand-in for a Monte-Carlo renderer with known ground truth: the clean
// image of an analytic model plus independent zero-mean Gaussian error whose
// variance is (rel * L)^2 / N per element. Useful for checking the
// rendering-error machinery against exact answers.

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "plb/forward.hpp"
#include "plb/image.hpp"
#include "plb/rng.hpp"

namespace plb {

struct SyntheticNoisyForward {
  AnalyticForward clean;
  double rel = 1.0;         // relative per-sample standard deviation
  std::uint64_t seed = 0;   // trial seed
  std::uint32_t default_spp = 1024;

  Image<double> operator()(std::span<const double> theta, EvalRequest req = {}) const {
    Image<double> img = clean(theta);
    const std::uint32_t n = req.spp ? req.spp : default_spp;
    std::uint64_t s = derive_seed(seed, {req.stream, n});
    for (double t : theta) s = derive_seed(s, {std::bit_cast<std::uint64_t>(t)});
    std::mt19937_64 gen(s);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = rel / std::sqrt(static_cast<double>(n));
    for (auto& v : img.data) v += scale * v * normal(gen);
    img.meta.spp = n;
    img.meta.seed = s;
    return img;
  }
};

}  // namespace plb

#pragma once

// Finite-difference image gradients and pixel-wise Fisher information.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plb/bounds.hpp"
#include "plb/error.hpp"
#include "plb/forward.hpp"
#include "plb/image.hpp"
#include "plb/parallel.hpp"
#include "plb/renderer.hpp"
#include "plb/scene.hpp"

namespace plb {

struct GradientImage {
  Image<double> grad;
  Image<double> mean;  // average of the +xi and -xi evaluations, an estimate of L(theta*)
  double xi = 0.0;
  std::size_t component = 0;
  int rounds = 0;
};

struct FiMap {
  Image<double> fi;
  NoiseModel noise;
  std::size_t component = 0;
  std::vector<double> theta;
};

/// Central differences (L(theta + xi e_j) - L(theta - xi e_j)) / 2 xi averaged
/// over `rounds` rounds. Round r evaluates both sides on stream
/// `stream_base + r`, so each round draws fresh samples while the pair within
/// a round shares them.
template <ForwardModel F>
GradientImage fd_gradient(const F& forward, std::span<const double> theta, std::size_t j, double xi, int rounds,
                          const ParameterSpace& space, std::uint32_t spp = 0, std::uint64_t stream_base = 0) {
  if (!(xi > 0.0)) throw DomainError("fd_gradient: xi must be > 0");
  if (rounds < 1) throw DomainError("fd_gradient: rounds must be >= 1");
  if (j >= theta.size()) throw DomainError("fd_gradient: component index out of range");
  std::vector<double> plus(theta.begin(), theta.end()), minus = plus;
  plus[j] += xi;
  minus[j] -= xi;
  if (!space.contains(plus) || !space.contains(minus)) throw DomainError("fd_gradient: theta +- xi e_j out of bounds");

  GradientImage g;
  g.xi = xi;
  g.component = j;
  g.rounds = rounds;
  for (int r = 0; r < rounds; ++r) {
    const EvalRequest req{spp, stream_base + static_cast<std::uint64_t>(r)};
    const auto lp = forward(plus, req);
    const auto lm = forward(minus, req);
    require_same_shape(lp, lm, "fd_gradient");
    if (r == 0) {
      g.grad = Image<double>(lp.width, lp.height, lp.channels);
      g.mean = Image<double>(lp.width, lp.height, lp.channels);
    }
    for (std::size_t i = 0; i < lp.data.size(); ++i) {
      const double a = lp.data[i], b = lm.data[i];
      g.grad.data[i] += (a - b) / (2.0 * xi);
      g.mean.data[i] += 0.5 * (a + b);
    }
  }
  for (auto& v : g.grad.data) v /= rounds;
  for (auto& v : g.mean.data) v /= rounds;
  for (double v : g.grad.data)
    if (!std::isfinite(v)) throw NumericError("fd_gradient: non-finite gradient");
  g.grad.meta.theta.assign(theta.begin(), theta.end());
  g.mean.meta.theta = g.grad.meta.theta;
  return g;
}

/// Poisson: grad^2 / L; AWGN: grad^2 / sigma^2. Zero gradient gives zero information.
template <class T>
FiMap pixelwise_fi(const GradientImage& g, const Image<T>& l, const NoiseModel& noise) {
  noise.validate();
  if (!g.grad.same_shape(l)) throw DomainError("pixelwise_fi: gradient and radiance shapes differ");
  FiMap m;
  m.fi = Image<double>(l.width, l.height, l.channels);
  m.noise = noise;
  m.component = g.component;
  m.theta = g.grad.meta.theta;
  for (std::size_t i = 0; i < l.data.size(); ++i) {
    const double d = g.grad.data[i];
    if (d == 0.0) continue;
    if (noise.kind == NoiseKind::awgn) {
      m.fi.data[i] = d * d / (noise.sigma * noise.sigma);
    } else {
      const double rate = l.data[i];
      if (!(rate > 0.0)) {
        const std::size_t px = i / l.channels;
        throw NumericError("pixelwise_fi: zero Poisson rate with nonzero gradient at pixel (" + std::to_string(px % l.width) +
                           ", " + std::to_string(px / l.width) + ")");
      }
      m.fi.data[i] = d * d / rate;
    }
  }
  return m;
}

inline double total_fi(const FiMap& m) {
  return pairwise_sum(0, m.fi.data.size(), [&](std::size_t i) { return m.fi.data[i]; });
}

inline double mean_fi(const FiMap& m) { return m.fi.data.empty() ? 0.0 : total_fi(m) / static_cast<double>(m.fi.data.size()); }

/// Per-pixel mean over channels (single-channel image).
inline Image<double> channel_mean(const Image<double>& img) {
  Image<double> out(img.width, img.height, 1);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    double s = 0.0;
    for (int c = 0; c < img.channels; ++c) s += img.data[p * img.channels + c];
    out.data[p] = s / img.channels;
  }
  out.meta = img.meta;
  return out;
}

/// log(x + eps) elementwise, for display of maps spanning many decades.
inline Image<double> log_map(const Image<double>& img, double eps = 1e-12) {
  Image<double> out = img;
  for (auto& v : out.data) v = std::log(v + eps);
  return out;
}

struct ViewpointOptions {
  std::vector<double> offsets_u;  // displacements along the camera's right axis
  std::vector<double> offsets_v;  // displacements along the camera's up axis
  std::size_t component = 0;
  double xi = 0.01;
  int rounds = 16;
  RenderConfig render;
};

/// Camera moved by (du, dv) in its own right/up frame, still aimed at look_at.
inline CameraModel displaced_camera(const CameraModel& cam, double du, double dv) {
  const Vec3 forward = normalize(cam.look_at - cam.position);
  const Vec3 right = normalize(cross(forward, cam.up));
  const Vec3 up = cross(right, forward);
  CameraModel out = cam;
  out.position = cam.position + right * du + up * dv;
  return out;
}

/// Matrix (row a = offsets_v index, column b = offsets_u index) of the mean
/// pixel-wise FI seen from each displaced camera.
inline std::vector<std::vector<double>> viewpoint_grid(const SceneDescription& scene, std::span<const double> theta,
                                                      const NoiseModel& noise, const ViewpointOptions& opt) {
  if (opt.offsets_u.empty() || opt.offsets_v.empty()) throw DomainError("viewpoint_grid: empty offset list");
  std::vector<std::vector<double>> out(opt.offsets_v.size(), std::vector<double>(opt.offsets_u.size(), 0.0));
  for (std::size_t a = 0; a < opt.offsets_v.size(); ++a) {
    for (std::size_t b = 0; b < opt.offsets_u.size(); ++b) {
      SceneDescription s = scene;
      s.camera = displaced_camera(scene.camera, opt.offsets_u[b], opt.offsets_v[a]);
      if (inside_geometry(s, s.camera.position))
        throw DomainError("viewpoint_grid: camera offset (" + std::to_string(opt.offsets_u[b]) + ", " +
                          std::to_string(opt.offsets_v[a]) + ") is inside scene geometry");
      RenderConfig cfg = opt.render;
      cfg.seed = derive_seed(opt.render.seed, {a, b});
      const RenderedForward fwd{s, cfg};
      const GradientImage g = fd_gradient(fwd, theta, opt.component, opt.xi, opt.rounds, scene.parameter_space);
      out[a][b] = mean_fi(pixelwise_fi(g, g.mean, noise));
    }
  }
  return out;
}

}  // namespace plb

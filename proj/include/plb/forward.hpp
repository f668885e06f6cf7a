#pragma once

// Forward models map a parameter vector to a clean (expected) image. The
// rendered forward model is stochastic: every call is an independent
// Monte-Carlo estimate whose random stream is chosen by the caller through
// EvalRequest, so bounds code can control which evaluations share noise.

#include <concepts>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>

#include "plb/image.hpp"
#include "plb/renderer.hpp"
#include "plb/scene.hpp"

namespace plb {

struct EvalRequest {
  std::uint32_t spp = 0;  // 0: model default
  std::uint64_t stream = 0;
};

template <class F>
concept ForwardModel = requires(const F& f, std::span<const double> theta, EvalRequest req) {
  { f(theta, req) };
  { f(theta, req).data };
};

template <class F>
using forward_image_t = std::remove_cvref_t<decltype(std::declval<const F&>()(std::span<const double>{}, EvalRequest{}))>;

/// Path-traced forward model.
struct RenderedForward {
  SceneDescription scene;
  RenderConfig config;

  RadianceImage operator()(std::span<const double> theta, EvalRequest req = {}) const {
    RenderConfig c = config;
    if (req.spp != 0) c.spp = req.spp;
    c.seed = derive_seed(config.seed, {req.stream, c.spp});
    RadianceImage img = render(apply_parameters(scene, theta), c);
    img.meta.theta.assign(theta.begin(), theta.end());
    return img;
  }
};

/// Wraps a deterministic function theta -> Image<double>.
struct AnalyticForward {
  std::function<Image<double>(std::span<const double>)> fn;

  Image<double> operator()(std::span<const double> theta, EvalRequest = {}) const {
    Image<double> img = fn(theta);
    img.meta.theta.assign(theta.begin(), theta.end());
    return img;
  }
};

/// M pixels, each with value theta[0] (single channel).
inline AnalyticForward constant_model(int pixels) {
  return {[pixels](std::span<const double> theta) { return Image<double>(pixels, 1, 1, theta[0]); }};
}

/// Identity: pixel i equals theta[0] for all M pixels, with `channels` channels.
inline AnalyticForward identity_model(int pixels, int channels = 1) {
  return {[pixels, channels](std::span<const double> theta) { return Image<double>(pixels, 1, channels, theta[0]); }};
}

}  // namespace plb

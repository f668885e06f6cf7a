#pragma once

// Unbiased Monte-Carlo path tracer for Lambertian scenes.
//
// The estimated quantity is depth-D transport: the sum over all light paths
// with at most D segments (camera segment included) of emitted radiance. A
// camera ray that hits an emitter front face contributes its radiance; after
// the first surface vertex, emitter contributions are gathered only through
// next-event estimation, and continuation rays that hit an emitter end the
// path. Rays escaping the scene pick up the background radiance. Paths are
// cut deterministically at depth D (no Russian roulette).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "plb/error.hpp"
#include "plb/image.hpp"
#include "plb/parallel.hpp"
#include "plb/rng.hpp"
#include "plb/scene.hpp"

namespace plb {

struct RenderConfig {
  std::uint32_t spp = 64;
  std::uint64_t seed = 0;
  int depth = 4;  // maximum number of path segments
  int tile = 16;  // tile edge in pixels
  unsigned workers = 0;  // 0: hardware concurrency

  friend bool operator==(const RenderConfig&, const RenderConfig&) = default;
};

inline void validate_render_config(const RenderConfig& cfg) {
  if (cfg.spp < 1) throw InvariantError("render config: spp must be >= 1");
  if (cfg.depth < 1) throw InvariantError("render config: depth must be >= 1");
  if (cfg.tile < 1) throw InvariantError("render config: tile must be >= 1");
}

namespace render_detail {

struct Ray {
  Vec3 origin;
  Vec3 dir;
  Vec3 inv_dir;

  Ray(const Vec3& o, const Vec3& d) : origin(o), dir(d), inv_dir{1.0 / d.x, 1.0 / d.y, 1.0 / d.z} {}
};

enum class PrimKind : std::uint8_t { box, sphere, rect };

struct Primitive {
  PrimKind kind;
  Vec3 a;  // box min | sphere center | rect corner
  Vec3 b;  // box max | rect edge_u
  Vec3 c;  // rect edge_v
  double radius = 0.0;
  Vec3 normal;  // rect geometric normal
  double inv_uu = 0.0, inv_vv = 0.0;
  Vec3 albedo;
  Vec3 emitted;  // front-face radiance of emitters
  int emitter = -1;  // index into emitters, -1 for ordinary surfaces
  int surface = -1;  // index into scene surfaces, -1 for emitters
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int prim = -1;
};

struct EmitterSample {
  Vec3 corner, edge_u, edge_v, normal, radiance;
  double area = 0.0;
  double cdf = 0.0;
};

inline Primitive make_rect(const Rect& r) {
  Primitive p{};
  p.kind = PrimKind::rect;
  p.a = r.corner;
  p.b = r.edge_u;
  p.c = r.edge_v;
  p.normal = normalize(cross(r.edge_u, r.edge_v));
  p.inv_uu = 1.0 / dot(r.edge_u, r.edge_u);
  p.inv_vv = 1.0 / dot(r.edge_v, r.edge_v);
  return p;
}

inline double intersect(const Primitive& p, const Ray& ray, double tmin, double tmax) {
  constexpr double kMiss = std::numeric_limits<double>::infinity();
  switch (p.kind) {
    case PrimKind::box: {
      double t0 = tmin, t1 = tmax;
      auto slab = [&](double lo, double hi, double o, double inv) {
        double tn = (lo - o) * inv;
        double tf = (hi - o) * inv;
        if (tn > tf) std::swap(tn, tf);
        t0 = tn > t0 ? tn : t0;
        t1 = tf < t1 ? tf : t1;
        return t0 <= t1;
      };
      if (!slab(p.a.x, p.b.x, ray.origin.x, ray.inv_dir.x)) return kMiss;
      if (!slab(p.a.y, p.b.y, ray.origin.y, ray.inv_dir.y)) return kMiss;
      if (!slab(p.a.z, p.b.z, ray.origin.z, ray.inv_dir.z)) return kMiss;
      return t0 > tmin ? t0 : (t1 < tmax ? t1 : kMiss);
    }
    case PrimKind::sphere: {
      const Vec3 oc = ray.origin - p.a;
      const double b = dot(oc, ray.dir);
      const double c = dot(oc, oc) - p.radius * p.radius;
      const double disc = b * b - c;
      if (disc < 0.0) return kMiss;
      const double sq = std::sqrt(disc);
      double t = -b - sq;
      if (t <= tmin) t = -b + sq;
      return (t > tmin && t < tmax) ? t : kMiss;
    }
    case PrimKind::rect: {
      const double denom = dot(p.normal, ray.dir);
      if (denom == 0.0) return kMiss;
      const double t = dot(p.normal, p.a - ray.origin) / denom;
      if (!(t > tmin && t < tmax)) return kMiss;
      const Vec3 q = ray.origin + ray.dir * t - p.a;
      const double u = dot(q, p.b) * p.inv_uu;
      const double v = dot(q, p.c) * p.inv_vv;
      return (u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0) ? t : kMiss;
    }
  }
  return kMiss;
}

inline Vec3 geometric_normal(const Primitive& p, const Vec3& x) {
  switch (p.kind) {
    case PrimKind::sphere:
      return (x - p.a) / p.radius;
    case PrimKind::rect:
      return p.normal;
    case PrimKind::box: {
      // Face whose plane is closest to the hit point.
      int best_axis = 0;
      double best = std::numeric_limits<double>::infinity();
      double sign = 1.0;
      for (int axis = 0; axis < 3; ++axis) {
        const double dmin = std::abs(x[axis] - p.a[axis]);
        const double dmax = std::abs(x[axis] - p.b[axis]);
        if (dmin < best) best = dmin, best_axis = axis, sign = -1.0;
        if (dmax < best) best = dmax, best_axis = axis, sign = 1.0;
      }
      Vec3 n;
      n[best_axis] = sign;
      return n;
    }
  }
  return {};
}

/// Orthonormal basis around n (Duff et al. 2017).
inline void basis(const Vec3& n, Vec3& t, Vec3& b) {
  const double sign = std::copysign(1.0, n.z);
  const double a = -1.0 / (sign + n.z);
  const double bb = n.x * n.y * a;
  t = {1.0 + sign * n.x * n.x * a, sign * bb, -sign * n.x};
  b = {bb, sign + n.y * n.y * a, -n.y};
}

class Tracer {
 public:
  explicit Tracer(const SceneDescription& scene)
      : background_(scene.background),
        has_background_(scene.background.x > 0.0 || scene.background.y > 0.0 || scene.background.z > 0.0) {
    for (std::size_t i = 0; i < scene.surfaces.size(); ++i) {
      const Surface& s = scene.surfaces[i];
      Primitive p{};
      if (const auto* b = std::get_if<Box>(&s.shape)) {
        p.kind = PrimKind::box;
        p.a = b->min;
        p.b = b->max;
      } else if (const auto* sp = std::get_if<Sphere>(&s.shape)) {
        p.kind = PrimKind::sphere;
        p.a = sp->center;
        p.radius = sp->radius;
      } else {
        p = make_rect(std::get<Rect>(s.shape));
      }
      p.albedo = s.albedo;
      p.surface = static_cast<int>(i);
      prims_.push_back(p);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < scene.emitters.size(); ++i) {
      const Emitter& e = scene.emitters[i];
      Primitive p = make_rect(e.shape);
      p.emitter = static_cast<int>(i);
      p.emitted = e.radiance;
      prims_.push_back(p);
      EmitterSample es;
      es.corner = e.shape.corner;
      es.edge_u = e.shape.edge_u;
      es.edge_v = e.shape.edge_v;
      es.normal = p.normal;
      es.radiance = e.radiance;
      es.area = length(cross(e.shape.edge_u, e.shape.edge_v));
      const double power = es.area * mean(e.radiance);
      if (power > 0.0) {
        total += power;
        es.cdf = total;
        lights_.push_back(es);
      }
    }
    for (auto& l : lights_) l.cdf /= total;
    if (!lights_.empty()) lights_.back().cdf = 1.0;
  }

  Hit trace(const Ray& ray, double tmax = std::numeric_limits<double>::infinity()) const {
    Hit h;
    h.t = tmax;
    for (std::size_t i = 0; i < prims_.size(); ++i) {
      const double t = intersect(prims_[i], ray, kEps, h.t);
      if (t < h.t) {
        h.t = t;
        h.prim = static_cast<int>(i);
      }
    }
    return h;
  }

  bool occluded(const Vec3& from, const Vec3& to) const {
    const Vec3 d = to - from;
    const double dist = length(d);
    const Ray r{from, d / dist};
    const double tmax = dist * (1.0 - 1e-7) - kEps;
    for (const auto& p : prims_)
      if (intersect(p, r, kEps, tmax) < tmax) return true;
    return false;
  }

  /// One depth-truncated path sample for the given camera ray.
  Vec3 radiance(Ray ray, int depth, CounterStream& rng) const {
    Vec3 result;
    Hit hit = trace(ray);
    if (hit.prim < 0) return background_;
    const Primitive* prim = &prims_[hit.prim];
    if (prim->emitter >= 0) {
      // Front face emits; back face is black.
      return dot(prim->normal, ray.dir) < 0.0 ? prim->emitted : result;
    }
    Vec3 throughput{1.0, 1.0, 1.0};
    // `segments` counts path segments up to and including the current vertex.
    for (int segments = 1; segments < depth; ++segments) {
      const Vec3 x = ray.origin + ray.dir * hit.t;
      Vec3 n = geometric_normal(*prim, x);
      if (dot(n, ray.dir) > 0.0) n = -n;
      const Vec3 origin = x + n * kOffset;
      const Vec3 brdf_weight = mul(throughput, prim->albedo);

      if (!lights_.empty()) result += mul(brdf_weight, direct_light(origin, n, rng)) / std::numbers::pi;

      const bool need_continuation = segments + 1 < depth || has_background_;
      if (!need_continuation) break;
      // Cosine-weighted continuation: brdf * cos / pdf = albedo.
      Vec3 t, b;
      basis(n, t, b);
      const double u1 = rng.uniform();
      const double u2 = rng.uniform();
      const double r = std::sqrt(u1);
      const double phi = 2.0 * std::numbers::pi * u2;
      const Vec3 dir = normalize(t * (r * std::cos(phi)) + b * (r * std::sin(phi)) + n * std::sqrt(std::max(0.0, 1.0 - u1)));
      throughput = brdf_weight;
      ray = Ray{origin, dir};
      hit = trace(ray);
      if (hit.prim < 0) {
        result += mul(throughput, background_);
        break;
      }
      prim = &prims_[hit.prim];
      if (prim->emitter >= 0) break;  // accounted for by next-event estimation
    }
    return result;
  }

  bool has_lights() const { return !lights_.empty(); }

 private:
  /// Next-event estimate of emitted radiance arriving at x (before the BRDF / pi factor).
  Vec3 direct_light(const Vec3& x, const Vec3& n, CounterStream& rng) const {
    const double pick = rng.uniform();
    const double su = rng.uniform();
    const double sv = rng.uniform();
    std::size_t li = 0;
    while (li + 1 < lights_.size() && pick >= lights_[li].cdf) ++li;
    const EmitterSample& l = lights_[li];
    const double p_select = (l.cdf - (li == 0 ? 0.0 : lights_[li - 1].cdf));
    const Vec3 y = l.corner + l.edge_u * su + l.edge_v * sv;
    const Vec3 d = y - x;
    const double dist2 = dot(d, d);
    const double dist = std::sqrt(dist2);
    const Vec3 w = d / dist;
    const double cos_x = dot(n, w);
    const double cos_y = -dot(l.normal, w);
    if (cos_x <= 0.0 || cos_y <= 0.0) return {};
    if (occluded(x, y)) return {};
    return l.radiance * (cos_x * cos_y * l.area / (dist2 * p_select));
  }

  static constexpr double kEps = 1e-9;
  static constexpr double kOffset = 1e-7;

  std::vector<Primitive> prims_;
  std::vector<EmitterSample> lights_;
  Vec3 background_;
  bool has_background_ = false;
};

struct CameraFrame {
  Vec3 origin, forward, right, up;
  double tan_half = 0.0;
  double aspect = 1.0;
  int width = 1, height = 1;

  explicit CameraFrame(const CameraModel& cam) {
    origin = cam.position;
    forward = normalize(cam.look_at - cam.position);
    right = normalize(cross(forward, cam.up));
    up = cross(right, forward);
    tan_half = std::tan(cam.fov_deg * std::numbers::pi / 360.0);
    width = cam.width;
    height = cam.height;
    aspect = static_cast<double>(width) / height;
  }

  /// Ray through image-plane position (px, py) in pixel units; py grows downward.
  Ray ray(double px, double py) const {
    const double sx = (2.0 * px / width - 1.0) * tan_half * aspect;
    const double sy = (1.0 - 2.0 * py / height) * tan_half;
    return {origin, normalize(forward + right * sx + up * sy)};
  }
};

}  // namespace render_detail

/// Renders `scene` with `cfg.spp` samples per pixel. Each pixel value is the
/// mean of independent path samples whose random numbers are keyed on
/// (seed, pixel index, sample index); the output does not depend on the
/// worker count.
inline RadianceImage render(const SceneDescription& scene, const RenderConfig& cfg) {
  validate_render_config(cfg);
  render_detail::Tracer tracer(scene);
  const render_detail::CameraFrame frame(scene.camera);
  const int w = scene.camera.width;
  const int h = scene.camera.height;
  RadianceImage img(w, h, SceneDescription::kChannels);
  img.meta.spp = cfg.spp;
  img.meta.seed = cfg.seed;
  img.meta.depth = cfg.depth;

  const int tiles_x = (w + cfg.tile - 1) / cfg.tile;
  const int tiles_y = (h + cfg.tile - 1) / cfg.tile;
  parallel_for(static_cast<std::size_t>(tiles_x) * tiles_y, cfg.workers, [&](std::size_t tile_index) {
    const int tx = static_cast<int>(tile_index % tiles_x) * cfg.tile;
    const int ty = static_cast<int>(tile_index / tiles_x) * cfg.tile;
    for (int y = ty; y < std::min(ty + cfg.tile, h); ++y) {
      for (int x = tx; x < std::min(tx + cfg.tile, w); ++x) {
        const auto pixel = static_cast<std::uint32_t>(y * w + x);
        double acc[3] = {0.0, 0.0, 0.0};
        for (std::uint32_t s = 0; s < cfg.spp; ++s) {
          CounterStream rng(cfg.seed, pixel, s);
          const double jx = rng.uniform();
          const double jy = rng.uniform();
          const Vec3 L = tracer.radiance(frame.ray(x + jx, y + jy), cfg.depth, rng);
          if (!is_finite(L))
            throw NumericError("non-finite path sample at pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                               "), sample " + std::to_string(s));
          acc[0] += L.x;
          acc[1] += L.y;
          acc[2] += L.z;
        }
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(acc[c] / cfg.spp);
      }
    }
  });
  return img;
}

/// Number of pixels whose center ray first hits surface `surface_index`.
inline std::size_t primary_visibility(const SceneDescription& scene, std::size_t surface_index) {
  render_detail::Tracer tracer(scene);
  const render_detail::CameraFrame frame(scene.camera);
  std::size_t count = 0;
  for (int y = 0; y < scene.camera.height; ++y) {
    for (int x = 0; x < scene.camera.width; ++x) {
      const auto hit = tracer.trace(frame.ray(x + 0.5, y + 0.5));
      if (hit.prim == static_cast<int>(surface_index)) ++count;
    }
  }
  return count;
}

/// Seed of image (theta_index, cfg_index) within a stack rendered from `base`.
constexpr std::uint64_t stack_seed(std::uint64_t base, std::size_t theta_index, std::size_t cfg_index) {
  return derive_seed(base, {0x57ACull, theta_index, cfg_index});
}

/// Renders every (theta, cfg) pair, theta-major. Image (i, k) is rendered with
/// seed stack_seed(cfgs[k].seed, i, k), so all streams are disjoint.
inline std::vector<RadianceImage> render_stack(const SceneDescription& scene, const std::vector<std::vector<double>>& thetas,
                                               const std::vector<RenderConfig>& cfgs) {
  for (const auto& t : thetas) {
    if (!scene.parameter_space.contains(t)) throw DomainError("render_stack: theta out of bounds");
  }
  std::vector<RadianceImage> out;
  out.reserve(thetas.size() * cfgs.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const SceneDescription s = apply_parameters(scene, thetas[i]);
    for (std::size_t k = 0; k < cfgs.size(); ++k) {
      RenderConfig c = cfgs[k];
      c.seed = stack_seed(cfgs[k].seed, i, k);
      RadianceImage img = render(s, c);
      img.meta.theta = thetas[i];
      out.push_back(std::move(img));
    }
  }
  return out;
}

}  // namespace plb

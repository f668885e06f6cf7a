#pragma once

// Parametric scene descriptions and the map from parameter vectors to scenes.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "plb/error.hpp"
#include "plb/vec3.hpp"

namespace plb {

struct Box {
  Vec3 min;
  Vec3 max;
  friend bool operator==(const Box&, const Box&) = default;
};

struct Sphere {
  Vec3 center;
  double radius = 0.0;
  friend bool operator==(const Sphere&, const Sphere&) = default;
};

/// Rectangle spanned by two perpendicular edges from a corner. The geometric
/// normal is normalize(edge_u x edge_v).
struct Rect {
  Vec3 corner;
  Vec3 edge_u;
  Vec3 edge_v;
  friend bool operator==(const Rect&, const Rect&) = default;
};

using Shape = std::variant<Box, Sphere, Rect>;

/// Lambertian surface; BRDF value is albedo / pi.
struct Surface {
  std::string name;
  Shape shape;
  Vec3 albedo;
  friend bool operator==(const Surface&, const Surface&) = default;
};

/// One-sided rectangular area light emitting `radiance` uniformly into the
/// hemisphere around the rectangle normal. Its back side is black.
struct Emitter {
  std::string name;
  Rect shape;
  Vec3 radiance;
  friend bool operator==(const Emitter&, const Emitter&) = default;
};

struct CameraModel {
  Vec3 position;
  Vec3 look_at{0.0, 0.0, 1.0};
  Vec3 up{0.0, 1.0, 0.0};
  double fov_deg = 60.0;  // vertical
  int width = 64;
  int height = 48;
  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

/// attribute(target) = scale * theta[index] + offset
struct ParameterBinding {
  std::string target;
  std::size_t index = 0;
  double scale = 1.0;
  double offset = 0.0;
  friend bool operator==(const ParameterBinding&, const ParameterBinding&) = default;
};

/// Axis-aligned parameter box with a lattice step per component.
struct ParameterSpace {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> step;

  std::size_t dim() const { return lower.size(); }

  static ParameterSpace box(std::vector<double> lo, std::vector<double> hi, std::vector<double> st) {
    return ParameterSpace{std::move(lo), std::move(hi), std::move(st)};
  }

  /// Tolerance absorbs the rounding of lattice points lower + k*step.
  double tolerance(std::size_t j) const { return 1e-9 * (upper[j] - lower[j]); }

  bool contains(std::span<const double> theta) const {
    if (theta.size() != dim()) return false;
    for (std::size_t j = 0; j < dim(); ++j) {
      if (!(theta[j] >= lower[j] - tolerance(j) && theta[j] <= upper[j] + tolerance(j))) return false;
    }
    return true;
  }

  double lattice_value(std::size_t j, long long k) const { return lower[j] + static_cast<double>(k) * step[j]; }

  /// Index k of the lattice point nearest to v; throws if v is not on the lattice.
  long long lattice_index(std::size_t j, double v) const {
    const double r = (v - lower[j]) / step[j];
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-6)
      throw DomainError("value " + std::to_string(v) + " is not on the lattice of component " +
                        std::to_string(j));
    return static_cast<long long>(k);
  }

  long long lattice_max(std::size_t j) const {
    return static_cast<long long>(std::floor((upper[j] - lower[j]) / step[j] + 1e-9));
  }

  friend bool operator==(const ParameterSpace&, const ParameterSpace&) = default;
};

struct SceneDescription {
  CameraModel camera;
  std::vector<Surface> surfaces;
  std::vector<Emitter> emitters;
  Vec3 background;
  std::vector<ParameterBinding> bindings;
  ParameterSpace parameter_space;

  static constexpr int kChannels = 3;

  friend bool operator==(const SceneDescription&, const SceneDescription&) = default;
};

namespace detail {

inline void require(bool ok, const std::string& rule) {
  if (!ok) throw InvariantError(rule);
}

inline bool finite(const Vec3& v) { return is_finite(v); }

inline bool inside_solid(const Shape& shape, const Vec3& p) {
  if (const auto* b = std::get_if<Box>(&shape)) {
    return p.x > b->min.x && p.x < b->max.x && p.y > b->min.y && p.y < b->max.y && p.z > b->min.z &&
           p.z < b->max.z;
  }
  if (const auto* s = std::get_if<Sphere>(&shape)) {
    const Vec3 d = p - s->center;
    return dot(d, d) < s->radius * s->radius;
  }
  return false;
}

inline void validate_rect(const Rect& r, const std::string& where) {
  require(finite(r.corner) && finite(r.edge_u) && finite(r.edge_v), where + ": geometry must be finite");
  const double lu = length(r.edge_u);
  const double lv = length(r.edge_v);
  require(lu > 0.0 && lv > 0.0, where + ": rectangle extents must be > 0");
  require(std::abs(dot(r.edge_u, r.edge_v)) <= 1e-9 * lu * lv, where + ": rectangle edges must be perpendicular");
}

inline void validate_shape(const Shape& shape, const std::string& where) {
  if (const auto* b = std::get_if<Box>(&shape)) {
    require(finite(b->min) && finite(b->max), where + ": geometry must be finite");
    require(b->max.x > b->min.x && b->max.y > b->min.y && b->max.z > b->min.z, where + ": box extents must be > 0");
  } else if (const auto* s = std::get_if<Sphere>(&shape)) {
    require(finite(s->center) && std::isfinite(s->radius), where + ": geometry must be finite");
    require(s->radius > 0.0, where + ": sphere radius must be > 0");
  } else {
    validate_rect(std::get<Rect>(shape), where);
  }
}

inline bool in_unit_interval(const Vec3& v) {
  for (int c = 0; c < 3; ++c)
    if (!(v[c] >= 0.0 && v[c] <= 1.0)) return false;
  return true;
}

inline bool nonnegative(const Vec3& v) { return v.x >= 0.0 && v.y >= 0.0 && v.z >= 0.0; }

inline std::size_t parse_index(std::string_view seg, std::string_view name, std::string_view path) {
  // seg looks like name[123]
  if (seg.size() < name.size() + 3 || seg.substr(0, name.size()) != name || seg[name.size()] != '[' ||
      seg.back() != ']')
    throw DomainError("binding target '" + std::string(path) + "' does not resolve");
  std::size_t idx = 0;
  const auto digits = seg.substr(name.size() + 1, seg.size() - name.size() - 2);
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
  if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size())
    throw DomainError("binding target '" + std::string(path) + "' has a malformed index");
  return idx;
}

inline double* vec_component(Vec3& v, std::string_view c) {
  if (c == "x") return &v.x;
  if (c == "y") return &v.y;
  if (c == "z") return &v.z;
  return nullptr;
}

inline std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot_pos = path.find('.', start);
    const std::size_t end = dot_pos == std::string_view::npos ? path.size() : dot_pos;
    out.push_back(path.substr(start, end - start));
    if (dot_pos == std::string_view::npos) break;
    start = dot_pos + 1;
  }
  return out;
}

inline double* rect_field(Rect& r, std::span<const std::string_view> rest) {
  if (rest.size() != 2) return nullptr;
  Vec3* v = rest[0] == "corner" ? &r.corner : rest[0] == "edge_u" ? &r.edge_u : rest[0] == "edge_v" ? &r.edge_v : nullptr;
  return v ? vec_component(*v, rest[1]) : nullptr;
}

inline double* color_field(Vec3& color, std::string_view seg, std::string_view name, std::string_view path) {
  const std::size_t k = parse_index(seg, name, path);
  return k < 3 ? &color[static_cast<int>(k)] : nullptr;
}

}  // namespace detail

/// Resolves a binding target path (e.g. "surfaces[2].shape.center.x") to the
/// scalar it names inside `scene`. Throws DomainError if it does not resolve.
inline double* resolve_target(SceneDescription& scene, std::string_view path) {
  const auto segs = detail::split_path(path);
  const auto fail = [&]() -> double* {
    throw DomainError("binding target '" + std::string(path) + "' does not resolve to a scalar attribute");
  };
  if (segs.empty()) return fail();
  const std::string_view head = segs[0];
  double* out = nullptr;
  if (head.starts_with("surfaces[")) {
    const std::size_t i = detail::parse_index(head, "surfaces", path);
    if (i >= scene.surfaces.size()) return fail();
    Surface& s = scene.surfaces[i];
    if (segs.size() == 2 && segs[1].starts_with("albedo[")) {
      out = detail::color_field(s.albedo, segs[1], "albedo", path);
    } else if (segs.size() >= 3 && segs[1] == "shape") {
      const std::span<const std::string_view> rest(segs.begin() + 2, segs.end());
      if (auto* b = std::get_if<Box>(&s.shape)) {
        if (rest.size() == 2 && (rest[0] == "min" || rest[0] == "max"))
          out = detail::vec_component(rest[0] == "min" ? b->min : b->max, rest[1]);
      } else if (auto* sp = std::get_if<Sphere>(&s.shape)) {
        if (rest.size() == 1 && rest[0] == "radius") out = &sp->radius;
        if (rest.size() == 2 && rest[0] == "center") out = detail::vec_component(sp->center, rest[1]);
      } else {
        out = detail::rect_field(std::get<Rect>(s.shape), rest);
      }
    }
  } else if (head.starts_with("emitters[")) {
    const std::size_t i = detail::parse_index(head, "emitters", path);
    if (i >= scene.emitters.size()) return fail();
    Emitter& e = scene.emitters[i];
    if (segs.size() == 2 && segs[1].starts_with("radiance[")) {
      out = detail::color_field(e.radiance, segs[1], "radiance", path);
    } else if (segs.size() >= 3 && segs[1] == "shape") {
      out = detail::rect_field(e.shape, std::span<const std::string_view>(segs.begin() + 2, segs.end()));
    }
  } else if (head == "camera") {
    CameraModel& c = scene.camera;
    if (segs.size() == 2 && segs[1] == "fov_deg") out = &c.fov_deg;
    if (segs.size() == 3) {
      Vec3* v = segs[1] == "position" ? &c.position : segs[1] == "look_at" ? &c.look_at : segs[1] == "up" ? &c.up : nullptr;
      if (v) out = detail::vec_component(*v, segs[2]);
    }
  } else if (head.starts_with("background[")) {
    if (segs.size() == 1) out = detail::color_field(scene.background, head, "background", path);
  }
  return out ? out : fail();
}

inline void validate_camera(const CameraModel& cam) {
  using detail::require;
  require(detail::finite(cam.position) && detail::finite(cam.look_at) && detail::finite(cam.up),
          "camera: geometry must be finite");
  require(cam.fov_deg > 0.0 && cam.fov_deg < 180.0, "camera: fov must be in (0, 180)");
  require(cam.width >= 1 && cam.height >= 1, "camera: resolution must be at least 1x1");
  require(!(cam.look_at == cam.position), "camera: look_at must differ from position");
  const Vec3 fwd = cam.look_at - cam.position;
  require(length(cross(fwd, cam.up)) > 1e-12 * length(fwd) * length(cam.up), "camera: up must not be parallel to the view direction");
}

inline void validate_parameter_space(const ParameterSpace& sp) {
  using detail::require;
  require(sp.upper.size() == sp.dim() && sp.step.size() == sp.dim(), "parameter_space: lower/upper/step lengths differ");
  for (std::size_t j = 0; j < sp.dim(); ++j) {
    const std::string where = "parameter_space[" + std::to_string(j) + "]";
    require(std::isfinite(sp.lower[j]) && std::isfinite(sp.upper[j]) && std::isfinite(sp.step[j]), where + ": values must be finite");
    require(sp.lower[j] < sp.upper[j], where + ": lower must be < upper");
    require(sp.step[j] > 0.0, where + ": step must be > 0");
    require(sp.lattice_max(j) >= 1, where + ": grid must have at least 2 points");
  }
}

/// Checks every scene invariant; throws InvariantError naming the violated rule.
inline void validate_scene(const SceneDescription& scene) {
  using detail::require;
  validate_camera(scene.camera);
  require(detail::finite(scene.background) && detail::nonnegative(scene.background), "background: radiance must be finite and >= 0");
  const bool lit_background = scene.background.x > 0.0 || scene.background.y > 0.0 || scene.background.z > 0.0;
  require(!scene.emitters.empty() || lit_background, "scene: needs at least one emitter or a nonzero background");
  for (std::size_t i = 0; i < scene.surfaces.size(); ++i) {
    const std::string where = "surfaces[" + std::to_string(i) + "]";
    detail::validate_shape(scene.surfaces[i].shape, where);
    require(detail::in_unit_interval(scene.surfaces[i].albedo), where + ": albedo out of [0,1]");
    require(!detail::inside_solid(scene.surfaces[i].shape, scene.camera.position), "camera: position is inside " + where);
  }
  for (std::size_t i = 0; i < scene.emitters.size(); ++i) {
    const std::string where = "emitters[" + std::to_string(i) + "]";
    detail::validate_rect(scene.emitters[i].shape, where);
    require(detail::finite(scene.emitters[i].radiance) && detail::nonnegative(scene.emitters[i].radiance),
            where + ": radiance must be finite and >= 0");
  }
  validate_parameter_space(scene.parameter_space);
  std::vector<int> bound(scene.parameter_space.dim(), 0);
  SceneDescription probe = scene;
  for (std::size_t b = 0; b < scene.bindings.size(); ++b) {
    const auto& binding = scene.bindings[b];
    const std::string where = "bindings[" + std::to_string(b) + "]";
    require(binding.index < scene.parameter_space.dim(), where + ": index exceeds parameter_space dimension");
    require(std::isfinite(binding.scale) && std::isfinite(binding.offset), where + ": affine map must be finite");
    try {
      resolve_target(probe, binding.target);
    } catch (const DomainError& e) {
      throw InvariantError(where + ": " + e.what());
    }
    ++bound[binding.index];
  }
  for (std::size_t j = 0; j < bound.size(); ++j)
    require(bound[j] > 0, "parameter_space[" + std::to_string(j) + "]: component is not bound to any target");
}

/// Returns a copy of `scene` with every bound attribute set to
/// scale * theta[index] + offset. Everything else is copied unchanged.
inline SceneDescription apply_parameters(const SceneDescription& scene, std::span<const double> theta) {
  const ParameterSpace& space = scene.parameter_space;
  if (theta.size() != space.dim())
    throw DomainError("theta has " + std::to_string(theta.size()) + " components, parameter space has " +
                      std::to_string(space.dim()));
  if (!space.contains(theta)) {
    std::string msg = "theta out of bounds: [";
    for (std::size_t j = 0; j < theta.size(); ++j) msg += (j ? ", " : "") + std::to_string(theta[j]);
    throw DomainError(msg + "]");
  }
  SceneDescription out = scene;
  for (const auto& b : scene.bindings) *resolve_target(out, b.target) = b.scale * theta[b.index] + b.offset;
  validate_scene(out);
  return out;
}

/// True if `point` lies strictly inside any box or sphere of the scene.
inline bool inside_geometry(const SceneDescription& scene, const Vec3& point) {
  for (const auto& s : scene.surfaces)
    if (detail::inside_solid(s.shape, point)) return true;
  return false;
}

}  // namespace plb

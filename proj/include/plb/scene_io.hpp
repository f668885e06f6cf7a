#pragma once

// JSON scene documents. The schema is documented in docs/scene-schema.md.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "plb/error.hpp"
#include "plb/scene.hpp"

namespace plb {

namespace json_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw SchemaError(path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaError(path + "." + key + ": unknown key");
  }
}

inline const json& required(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "." + key + ": missing required key");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path + ": expected a number");
  return v.get<double>();
}

inline Vec3 vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw SchemaError(path + ": expected an array of 3 numbers");
  return {number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]")};
}

inline std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::string string_or(const json& obj, const char* key, const std::string& path, std::string fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw SchemaError(path + "." + key + ": expected a string");
  return it->get<std::string>();
}

inline Rect rect(const json& j, const std::string& path) {
  return {vec3(required(j, path, "corner"), path + ".corner"), vec3(required(j, path, "edge_u"), path + ".edge_u"),
          vec3(required(j, path, "edge_v"), path + ".edge_v")};
}

inline Shape shape(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path + ": expected an object");
  const json& type = required(j, path, "type");
  if (!type.is_string()) throw SchemaError(path + ".type: expected a string");
  const std::string t = type.get<std::string>();
  if (t == "box") {
    check_keys(j, path, {"type", "min", "max"});
    return Box{vec3(required(j, path, "min"), path + ".min"), vec3(required(j, path, "max"), path + ".max")};
  }
  if (t == "sphere") {
    check_keys(j, path, {"type", "center", "radius"});
    return Sphere{vec3(required(j, path, "center"), path + ".center"), number(required(j, path, "radius"), path + ".radius")};
  }
  if (t == "rectangle") {
    check_keys(j, path, {"type", "corner", "edge_u", "edge_v"});
    return rect(j, path);
  }
  throw SchemaError(path + ".type: unknown shape type '" + t + "'");
}

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline json rect_json(const Rect& r) {
  return {{"type", "rectangle"}, {"corner", to_json(r.corner)}, {"edge_u", to_json(r.edge_u)}, {"edge_v", to_json(r.edge_v)}};
}

inline json shape_json(const Shape& s) {
  if (const auto* b = std::get_if<Box>(&s)) return {{"type", "box"}, {"min", to_json(b->min)}, {"max", to_json(b->max)}};
  if (const auto* sp = std::get_if<Sphere>(&s))
    return {{"type", "sphere"}, {"center", to_json(sp->center)}, {"radius", sp->radius}};
  return rect_json(std::get<Rect>(s));
}

inline json parse_text(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

}  // namespace json_detail

inline ParameterSpace parse_parameter_space(const nlohmann::json& j, const std::string& path) {
  using namespace json_detail;
  check_keys(j, path, {"lower", "upper", "step"});
  return ParameterSpace{numbers(required(j, path, "lower"), path + ".lower"), numbers(required(j, path, "upper"), path + ".upper"),
                        numbers(required(j, path, "step"), path + ".step")};
}

/// Parses an already-decoded JSON scene object (used by experiment configs too).
inline SceneDescription parse_scene_json(const nlohmann::json& doc) {
  using namespace json_detail;
  const std::string root = "$";
  check_keys(doc, root, {"camera", "surfaces", "emitters", "background", "bindings", "parameter_space"});
  SceneDescription scene;

  const json& cam = required(doc, root, "camera");
  const std::string cp = root + ".camera";
  check_keys(cam, cp, {"position", "look_at", "up", "fov_deg", "resolution"});
  scene.camera.position = vec3(required(cam, cp, "position"), cp + ".position");
  scene.camera.look_at = vec3(required(cam, cp, "look_at"), cp + ".look_at");
  if (cam.contains("up")) scene.camera.up = vec3(cam["up"], cp + ".up");
  if (cam.contains("fov_deg")) scene.camera.fov_deg = number(cam["fov_deg"], cp + ".fov_deg");
  if (cam.contains("resolution")) {
    const json& r = cam["resolution"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer())
      throw SchemaError(cp + ".resolution: expected [width, height] integers");
    scene.camera.width = r[0].get<int>();
    scene.camera.height = r[1].get<int>();
  }

  if (doc.contains("surfaces")) {
    const json& arr = doc["surfaces"];
    if (!arr.is_array()) throw SchemaError(root + ".surfaces: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = root + ".surfaces[" + std::to_string(i) + "]";
      check_keys(arr[i], p, {"name", "shape", "albedo"});
      scene.surfaces.push_back(Surface{string_or(arr[i], "name", p, ""), shape(required(arr[i], p, "shape"), p + ".shape"),
                                       vec3(required(arr[i], p, "albedo"), p + ".albedo")});
    }
  }

  if (doc.contains("emitters")) {
    const json& arr = doc["emitters"];
    if (!arr.is_array()) throw SchemaError(root + ".emitters: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = root + ".emitters[" + std::to_string(i) + "]";
      check_keys(arr[i], p, {"name", "shape", "radiance"});
      const json& sh = required(arr[i], p, "shape");
      check_keys(sh, p + ".shape", {"type", "corner", "edge_u", "edge_v"});
      if (!sh.contains("type") || sh["type"] != "rectangle") throw SchemaError(p + ".shape.type: emitters must be rectangles");
      scene.emitters.push_back(
          Emitter{string_or(arr[i], "name", p, ""), rect(sh, p + ".shape"), vec3(required(arr[i], p, "radiance"), p + ".radiance")});
    }
  }

  if (doc.contains("background")) scene.background = vec3(doc["background"], root + ".background");

  if (doc.contains("bindings")) {
    const json& arr = doc["bindings"];
    if (!arr.is_array()) throw SchemaError(root + ".bindings: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = root + ".bindings[" + std::to_string(i) + "]";
      check_keys(arr[i], p, {"target", "index", "scale", "offset"});
      ParameterBinding b;
      const json& target = required(arr[i], p, "target");
      if (!target.is_string()) throw SchemaError(p + ".target: expected a string");
      b.target = target.get<std::string>();
      const json& index = required(arr[i], p, "index");
      if (!index.is_number_unsigned()) throw SchemaError(p + ".index: expected a nonnegative integer");
      b.index = index.get<std::size_t>();
      if (arr[i].contains("scale")) b.scale = number(arr[i]["scale"], p + ".scale");
      if (arr[i].contains("offset")) b.offset = number(arr[i]["offset"], p + ".offset");
      scene.bindings.push_back(std::move(b));
    }
  }

  if (doc.contains("parameter_space")) scene.parameter_space = parse_parameter_space(doc["parameter_space"], root + ".parameter_space");

  validate_scene(scene);
  return scene;
}

/// Parses and validates a scene document. Unknown keys are rejected.
inline SceneDescription parse_scene(std::string_view document) {
  return parse_scene_json(json_detail::parse_text(document, "scene"));
}

inline nlohmann::json scene_to_json(const SceneDescription& scene) {
  using namespace json_detail;
  json doc;
  doc["camera"] = {{"position", to_json(scene.camera.position)},
                   {"look_at", to_json(scene.camera.look_at)},
                   {"up", to_json(scene.camera.up)},
                   {"fov_deg", scene.camera.fov_deg},
                   {"resolution", json::array({scene.camera.width, scene.camera.height})}};
  doc["surfaces"] = json::array();
  for (const auto& s : scene.surfaces)
    doc["surfaces"].push_back({{"name", s.name}, {"shape", shape_json(s.shape)}, {"albedo", to_json(s.albedo)}});
  doc["emitters"] = json::array();
  for (const auto& e : scene.emitters)
    doc["emitters"].push_back({{"name", e.name}, {"shape", rect_json(e.shape)}, {"radiance", to_json(e.radiance)}});
  doc["background"] = to_json(scene.background);
  doc["bindings"] = json::array();
  for (const auto& b : scene.bindings)
    doc["bindings"].push_back({{"target", b.target}, {"index", b.index}, {"scale", b.scale}, {"offset", b.offset}});
  doc["parameter_space"] = {{"lower", scene.parameter_space.lower},
                            {"upper", scene.parameter_space.upper},
                            {"step", scene.parameter_space.step}};
  return doc;
}

inline std::string serialize_scene(const SceneDescription& scene) { return scene_to_json(scene).dump(2); }

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SceneDescription load_scene(const std::filesystem::path& path) { return parse_scene(read_text_file(path)); }

}  // namespace plb

#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "plb/plb.hpp"

namespace plb::testing {

inline std::filesystem::path source_dir() { return PLB_SOURCE_DIR; }
inline std::filesystem::path corridor_path() { return source_dir() / "fixtures" / "corridor.json"; }
inline SceneDescription corridor() { return load_scene(corridor_path()); }

/// Corridor at reduced resolution, for tests that only need the geometry.
inline SceneDescription small_corridor(int w = 32, int h = 24) {
  SceneDescription s = corridor();
  s.camera.width = w;
  s.camera.height = h;
  return s;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("plb_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// One rect emitter at z = 1 facing the camera, large enough to fill the frustum.
inline std::string emitter_wall_json(double radiance = 5.0) {
  const std::string r = std::to_string(radiance);
  return R"({
    "camera": {"position": [0, 0, 0], "look_at": [0, 0, 1], "fov_deg": 40, "resolution": [8, 6]},
    "emitters": [{"name": "wall", "shape": {"type": "rectangle", "corner": [-10, 10, 1], "edge_u": [20, 0, 0], "edge_v": [0, -20, 0]},
                  "radiance": [)" + r + "," + r + "," + r + R"(]}]
  })";
}

}  // namespace plb::testing

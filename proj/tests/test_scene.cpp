#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace plb;
using namespace plb::testing;

namespace {

const char* kMinimal = R"({
  "camera": {"position": [0, 1, 0], "look_at": [0, 1, 1]},
  "emitters": [{"shape": {"type": "rectangle", "corner": [0, 2, 0], "edge_u": [1, 0, 0], "edge_v": [0, 0, 1]}, "radiance": [1, 1, 1]}]
})";

std::string with_sphere(const std::string& albedo, const std::string& binding, const std::string& space) {
  return R"({
  "camera": {"position": [0, 1, 0], "look_at": [0, 1, 1]},
  "surfaces": [{"name": "ball", "shape": {"type": "sphere", "center": [0, 1, 3], "radius": 0.1}, "albedo": )" +
         albedo + R"(}],
  "emitters": [{"shape": {"type": "rectangle", "corner": [0, 2, 0], "edge_u": [1, 0, 0], "edge_v": [0, 0, 1]}, "radiance": [1, 1, 1]}],
  "bindings": [)" + binding + R"(],
  "parameter_space": )" + space + "}";
}

}  // namespace

TEST(Scene, MinimalDocumentIsValid) {
  const auto s = parse_scene(kMinimal);
  EXPECT_TRUE(s.surfaces.empty());
  EXPECT_EQ(s.emitters.size(), 1u);
  EXPECT_EQ(s.camera.width, 64);
  EXPECT_EQ(s.camera.height, 48);
}

TEST(Scene, AlbedoAboveOneRejected) {
  try {
    parse_scene(with_sphere("[1.2, 0.5, 0.5]", "", R"({"lower": [], "upper": [], "step": []})"));
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("albedo out of [0,1]"), std::string::npos) << e.what();
  }
}

TEST(Scene, CorridorFixtureCounts) {
  const auto s = corridor();
  int boxes = 0, spheres = 0;
  for (const auto& surf : s.surfaces) {
    boxes += std::holds_alternative<Box>(surf.shape);
    spheres += std::holds_alternative<Sphere>(surf.shape);
  }
  EXPECT_EQ(boxes, 8);
  EXPECT_EQ(spheres, 1);
  EXPECT_EQ(s.emitters.size(), 2u);
  EXPECT_EQ(s.camera.width, 64);
  EXPECT_EQ(s.camera.height, 48);
  EXPECT_DOUBLE_EQ(s.camera.fov_deg, 60.0);
  for (const auto& e : s.emitters) EXPECT_EQ(e.radiance, (Vec3{12, 12, 12}));
}

TEST(Scene, UnknownKeyRejected) {
  EXPECT_THROW(parse_scene(R"({"camera": {"position": [0,1,0], "look_at": [0,1,1]}, "lights": []})"), SchemaError);
  EXPECT_THROW(parse_scene(R"({"camera": {"position": [0,1,0], "look_at": [0,1,1], "fov": 3}})"), SchemaError);
  EXPECT_THROW(parse_scene("{not json"), SchemaError);
}

TEST(Scene, IdentityBinding) {
  const auto s = parse_scene(with_sphere("[0.5,0.5,0.5]", R"({"target": "surfaces[0].shape.center.x", "index": 0})",
                                         R"({"lower": [0], "upper": [1], "step": [0.1]})"));
  const std::vector<double> theta{0.5};
  const auto posed = apply_parameters(s, theta);
  EXPECT_EQ(std::get<Sphere>(posed.surfaces[0].shape).center.x, 0.5);
}

TEST(Scene, ScaledRadiusBinding) {
  const auto s = parse_scene(with_sphere("[0.5,0.5,0.5]", R"({"target": "surfaces[0].shape.radius", "index": 0, "scale": 0.01})",
                                         R"({"lower": [1], "upper": [20], "step": [1]})"));
  const std::vector<double> theta{10};
  EXPECT_DOUBLE_EQ(std::get<Sphere>(apply_parameters(s, theta).surfaces[0].shape).radius, 0.10);
}

TEST(Scene, OutOfBoundsTheta) {
  const auto s = corridor();
  const std::vector<double> theta{-1.0};
  try {
    apply_parameters(s, theta);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("theta out of bounds"), std::string::npos);
  }
}

TEST(Scene, ApplyIsPureAndTouchesOnlyBoundAttributes) {
  const auto s = corridor();
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 3.2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> a{u(gen)}, b{u(gen)};
    EXPECT_EQ(apply_parameters(s, a), apply_parameters(s, a));
    auto pa = apply_parameters(s, a), pb = apply_parameters(s, b);
    // Undo the bound attribute; the rest must agree exactly.
    EXPECT_NE(std::get<Sphere>(pa.surfaces[8].shape).center.x, std::get<Sphere>(pb.surfaces[8].shape).center.x);
    std::get<Sphere>(pb.surfaces[8].shape).center.x = std::get<Sphere>(pa.surfaces[8].shape).center.x;
    EXPECT_EQ(pa, pb);
  }
}

TEST(Scene, SerializeRoundTrip) {
  const auto s = corridor();
  EXPECT_EQ(parse_scene(serialize_scene(s)), s);
  const auto m = parse_scene(kMinimal);
  EXPECT_EQ(parse_scene(serialize_scene(m)), m);
}

TEST(Scene, BindingMustResolve) {
  EXPECT_THROW(parse_scene(with_sphere("[0.5,0.5,0.5]", R"({"target": "surfaces[3].shape.radius", "index": 0})",
                                       R"({"lower": [0], "upper": [1], "step": [0.1]})")),
               InvariantError);
}

TEST(Scene, CameraInsideGeometryRejected) {
  auto s = corridor();
  s.camera.position = {0.5, 0.15, 2.0};  // inside the sphere
  EXPECT_THROW(validate_scene(s), InvariantError);
}

TEST(ParameterSpaceLattice, IndexAndValue) {
  const auto sp = ParameterSpace::box({0.0}, {3.2}, {0.01});
  EXPECT_EQ(sp.lattice_index(0, 0.3), 30);
  EXPECT_EQ(sp.lattice_max(0), 320);
  EXPECT_THROW(sp.lattice_index(0, 0.305), DomainError);
  const std::vector<double> edge{3.2 + 1e-12};
  EXPECT_TRUE(sp.contains(edge));
}

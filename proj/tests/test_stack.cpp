#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace plb;
using namespace plb::testing;

namespace {

ManifestRow row(std::string path, double theta, std::uint32_t spp = 4, std::uint64_t seed = 1, StackRole role = StackRole::primary) {
  return {std::move(path), {theta}, spp, seed, role};
}

}  // namespace

TEST(Manifest, EncodeDecodeRoundTrip) {
  std::vector<ManifestRow> rows{row("a.pfm", 0.1), {"b.pfm", {0.25, -3.0}, 64, 18446744073709551615ull, StackRole::gradient_minus}};
  rows[0].theta = {0.1, 2.0};
  const std::string text = encode_manifest(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), "path,theta,spp,seed,role");
  EXPECT_NE(text.find("b.pfm,0.25;-3,64,18446744073709551615,gradient-minus"), std::string::npos) << text;
  EXPECT_EQ(decode_manifest(text), rows);
}

TEST(Manifest, RejectsBadRows) {
  EXPECT_THROW(decode_manifest("path,theta,spp,seed,role\na.pfm,0.1,0,1,primary\n"), IoError);
  EXPECT_THROW(decode_manifest("path,theta,spp,seed,role\na.pfm,0.1,4,1,sideways\n"), Error);
  EXPECT_THROW(decode_manifest("path,theta\n"), IoError);
  EXPECT_THROW(decode_manifest("path,theta,spp,seed,role\na.pfm,0.1,4,1,primary\na.pfm,0.2,4,1,primary\n"), IoError);
}

TEST(Stack, EmptyManifestGivesEmptyList) {
  const auto dir = scratch("stack_empty");
  write_text(dir / "m.csv", "path,theta,spp,seed,role\n");
  EXPECT_TRUE(load_stack(dir / "m.csv").empty());
  write_text(dir / "blank.csv", "");
  EXPECT_TRUE(load_stack(dir / "blank.csv").empty());
}

TEST(Stack, DimensionMismatch) {
  const auto dir = scratch("stack_dims");
  write_pfm(Image<float>(64, 48, 3, 1.0f), dir / "a.pfm");
  write_pfm(Image<float>(32, 24, 3, 1.0f), dir / "b.pfm");
  write_manifest({row("a.pfm", 0.1), row("b.pfm", 0.2)}, dir / "m.csv");
  try {
    load_stack(dir / "m.csv");
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos);
  }
}

TEST(Stack, MissingFileAndDuplicateTriple) {
  const auto dir = scratch("stack_missing");
  write_pfm(Image<float>(2, 2, 3, 1.0f), dir / "a.pfm");
  write_pfm(Image<float>(2, 2, 3, 1.0f), dir / "b.pfm");
  write_manifest({row("a.pfm", 0.1), row("gone.pfm", 0.2)}, dir / "m.csv");
  EXPECT_THROW(load_stack(dir / "m.csv"), IoError);
  write_manifest({row("a.pfm", 0.1), row("b.pfm", 0.1)}, dir / "d.csv");
  try {
    load_stack(dir / "d.csv");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
  write_manifest({row("a.pfm", 0.1), row("b.pfm", 0.1, 4, 2)}, dir / "ok.csv");
  EXPECT_EQ(load_stack(dir / "ok.csv").size(), 2u);
}

TEST(Stack, RenderStackWriteLoadPreservesOrderAndBits) {
  const auto s = small_corridor(8, 6);
  RenderConfig cfg;
  cfg.spp = 2;
  cfg.seed = 3;
  std::vector<std::vector<double>> thetas;
  for (int i = 0; i < 10; ++i) thetas.push_back({3.0 - 0.3 * i});
  const auto imgs = render_stack(s, thetas, {cfg});
  const auto dir = scratch("stack_ten");
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const std::string name = "img" + std::to_string(i) + ".pfm";
    write_pfm(imgs[i], dir / name);
    rows.push_back({name, imgs[i].meta.theta, imgs[i].meta.spp, imgs[i].meta.seed, StackRole::primary});
  }
  write_manifest(rows, dir / "manifest.csv");
  const auto loaded = load_stack(dir / "manifest.csv");
  ASSERT_EQ(loaded.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(loaded[i].row.theta, thetas[i]);
    EXPECT_EQ(loaded[i].image.data, imgs[i].data);
    EXPECT_EQ(loaded[i].image.meta.seed, imgs[i].meta.seed);
  }
}

#pragma once

// Render-stack manifests: a CSV index of PFM files with their provenance.
//
//   path,theta,spp,seed,role
//   img_0000.pfm,0.25;1.5,1024,9813,primary

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "plb/csv.hpp"
#include "plb/error.hpp"
#include "plb/image.hpp"
#include "plb/pfm.hpp"
#include "plb/scene_io.hpp"

namespace plb {

enum class StackRole { primary, perturbed, gradient_plus, gradient_minus };

inline std::string to_string(StackRole r) {
  switch (r) {
    case StackRole::primary: return "primary";
    case StackRole::perturbed: return "perturbed";
    case StackRole::gradient_plus: return "gradient-plus";
    case StackRole::gradient_minus: return "gradient-minus";
  }
  return "primary";
}

inline StackRole parse_role(std::string_view s, const std::string& where) {
  if (s == "primary") return StackRole::primary;
  if (s == "perturbed") return StackRole::perturbed;
  if (s == "gradient-plus") return StackRole::gradient_plus;
  if (s == "gradient-minus") return StackRole::gradient_minus;
  throw IoError(where + ": unknown role '" + std::string(s) + "'");
}

struct ManifestRow {
  std::string path;  // relative to the manifest's directory
  std::vector<double> theta;
  std::uint32_t spp = 1;
  std::uint64_t seed = 0;
  StackRole role = StackRole::primary;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

struct StackEntry {
  ManifestRow row;
  RadianceImage image;
};

inline constexpr const char* kManifestHeader = "path,theta,spp,seed,role";

inline void validate_manifest(const std::vector<ManifestRow>& rows) {
  std::set<std::string> paths;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "manifest row " + std::to_string(i + 1);
    if (r.path.empty() || r.path.find_first_of(",\n\r") != std::string::npos) throw IoError(where + ": invalid path");
    if (!paths.insert(r.path).second) throw IoError(where + ": duplicate path " + r.path);
    if (r.spp < 1) throw IoError(where + ": spp must be >= 1");
    if (r.theta.size() != rows.front().theta.size()) throw IoError(where + ": theta dimensionality differs from row 1");
  }
}

inline std::string encode_manifest(const std::vector<ManifestRow>& rows) {
  validate_manifest(rows);
  CsvWriter csv(kManifestHeader);
  for (const auto& r : rows) csv.row(r.path, join_doubles(r.theta, ';'), r.spp, r.seed, to_string(r.role));
  return csv.str();
}

inline std::vector<ManifestRow> decode_manifest(const std::string& text, const std::string& name = "manifest") {
  std::vector<ManifestRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (std::string_view rest = text; !rest.empty();) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    if (!header_seen) {
      if (line != kManifestHeader) throw IoError(where + ": expected header '" + kManifestHeader + "'");
      header_seen = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 5) throw IoError(where + ": expected 5 columns");
    ManifestRow r;
    r.path = std::string(cells[0]);
    if (!cells[1].empty())
      for (auto v : split(cells[1], ';')) r.theta.push_back(parse_double(v, where + " theta"));
    const std::uint64_t spp = parse_u64(cells[2], where + " spp");
    if (spp < 1 || spp > UINT32_MAX) throw IoError(where + ": spp out of range");
    r.spp = static_cast<std::uint32_t>(spp);
    r.seed = parse_u64(cells[3], where + " seed");
    r.role = parse_role(cells[4], where);
    rows.push_back(std::move(r));
  }
  // A blank file is an empty manifest, same as a header-only one.
  validate_manifest(rows);
  return rows;
}

inline void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << encode_manifest(rows);
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  return decode_manifest(read_text_file(path), path.string());
}

/// Loads every image of a manifest, in manifest order. All images must share
/// one shape and no (theta, spp, seed) triple may repeat.
inline std::vector<StackEntry> load_stack(const std::filesystem::path& manifest) {
  const auto rows = read_manifest(manifest);
  std::set<std::tuple<std::vector<double>, std::uint32_t, std::uint64_t>> seen;
  std::vector<StackEntry> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (!seen.emplace(r.theta, r.spp, r.seed).second)
      throw IoError(manifest.string() + ": duplicate (theta, spp, seed) for " + r.path);
    const std::filesystem::path file = manifest.parent_path() / r.path;
    if (!std::filesystem::exists(file)) throw IoError(manifest.string() + ": missing file " + file.string());
    RadianceImage img = read_pfm(file);
    if (!out.empty() && !img.same_shape(out.front().image))
      throw DomainError(manifest.string() + ": dimension mismatch at " + r.path + " (" + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + " vs " + std::to_string(out.front().image.width) + "x" +
                        std::to_string(out.front().image.height) + ")");
    img.meta.theta = r.theta;
    img.meta.spp = r.spp;
    img.meta.seed = r.seed;
    out.push_back({r, std::move(img)});
  }
  return out;
}

}  // namespace plb

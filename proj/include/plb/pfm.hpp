#pragma once

// Portable Float Map I/O. Only little-endian files (negative scale) are
// supported. "PF" holds three channels, "Pf" one.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plb/error.hpp"
#include "plb/image.hpp"

namespace plb {

namespace pfm_detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

}  // namespace pfm_detail

/// Encodes an image as PFM bytes. Rows are written bottom-to-top.
inline std::string encode_pfm(const Image<float>& img) {
  if (img.channels != 3 && img.channels != 1) throw DomainError("pfm: only 1 or 3 channels are supported");
  if (img.width < 1 || img.height < 1 || img.data.size() != img.pixels() * img.channels)
    throw DomainError("pfm: inconsistent image dimensions");
  for (float v : img.data)
    if (!std::isfinite(v)) throw DomainError("pfm: refusing to write a non-finite value");
  std::string out = (img.channels == 3 ? "PF\n" : "Pf\n") + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  const std::size_t header = out.size();
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  out.resize(header + img.data.size() * 4);
  char* dst = out.data() + header;
  for (int y = img.height - 1; y >= 0; --y) {
    const float* src = img.data.data() + static_cast<std::size_t>(y) * row;
    for (std::size_t i = 0; i < row; ++i) {
      const std::uint32_t bits = pfm_detail::to_le(std::bit_cast<std::uint32_t>(src[i]));
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}

inline Image<float> decode_pfm(const std::string& bytes, const std::string& name = "pfm") {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw IoError(name + ": malformed header");
    return bytes.substr(start, pos - start);
  };
  const std::string magic = token();
  int channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw IoError(name + ": malformed header: bad magic '" + magic + "'");
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    std::size_t used = 0;
    const std::string w = token(), h = token(), s = token();
    width = std::stoi(w, &used);
    if (used != w.size()) throw std::invalid_argument(w);
    height = std::stoi(h, &used);
    if (used != h.size()) throw std::invalid_argument(h);
    scale = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
  } catch (const std::logic_error&) {
    throw IoError(name + ": malformed header");
  }
  if (width < 1 || height < 1) throw IoError(name + ": malformed header: nonpositive dimensions");
  if (scale == 0.0 || !std::isfinite(scale)) throw IoError(name + ": malformed header: bad scale");
  if (scale > 0.0) throw IoError(name + ": big-endian unsupported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) throw IoError(name + ": malformed header");
  ++pos;  // single whitespace byte ends the header

  Image<float> img(width, height, channels);
  const std::size_t row = static_cast<std::size_t>(width) * channels;
  const std::size_t need = img.data.size() * 4;
  if (bytes.size() - pos < need) throw IoError(name + ": truncated payload");
  if (bytes.size() - pos > need) throw IoError(name + ": trailing bytes after payload");
  const char* src = bytes.data() + pos;
  for (int y = height - 1; y >= 0; --y) {
    float* dst = img.data.data() + static_cast<std::size_t>(y) * row;
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, src, 4);
      src += 4;
      const float v = std::bit_cast<float>(pfm_detail::to_le(bits));
      if (!std::isfinite(v)) throw IoError(name + ": non-finite pixel value");
      dst[i] = v;
    }
  }
  return img;
}

inline void write_pfm(const Image<float>& img, const std::filesystem::path& path) {
  const std::string bytes = encode_pfm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline Image<float> read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_pfm(ss.str(), path.string());
}

}  // namespace plb

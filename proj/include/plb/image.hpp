#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "plb/error.hpp"

namespace plb {

/// Provenance of a rendered or synthesized image.
struct ImageMeta {
  std::uint32_t spp = 0;
  std::uint64_t seed = 0;
  std::vector<double> theta;
  int depth = 0;

  friend bool operator==(const ImageMeta&, const ImageMeta&) = default;
};

/// Row-major W x H x C grid. Row 0 is the top of the image; channels are
/// interleaved per pixel.
template <class T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> data;
  ImageMeta meta;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c) const { return data[index(x, y, c)]; }

  bool same_shape(const auto& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

using RadianceImage = Image<float>;

template <class T, class U>
void require_same_shape(const Image<T>& a, const Image<U>& b, const char* what) {
  if (!a.same_shape(b))
    throw DomainError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width) + "x" +
                      std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                      std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                      std::to_string(b.channels) + ")");
}

/// Checks the radiance invariants: finite, nonnegative, consistent size.
template <class T>
void validate_radiance(const Image<T>& img) {
  if (img.width < 1 || img.height < 1 || img.channels < 1)
    throw InvariantError("image dimensions must be positive");
  if (img.data.size() != img.pixels() * static_cast<std::size_t>(img.channels))
    throw InvariantError("image data length does not match W*H*C");
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = static_cast<double>(img.data[i]);
    if (!std::isfinite(v)) throw InvariantError("non-finite radiance at element " + std::to_string(i));
    if (v < 0.0) throw InvariantError("negative radiance at element " + std::to_string(i));
  }
}

/// Converts between scalar types, keeping metadata.
template <class To, class From>
Image<To> image_cast(const Image<From>& src) {
  Image<To> out(src.width, src.height, src.channels);
  for (std::size_t i = 0; i < src.data.size(); ++i) out.data[i] = static_cast<To>(src.data[i]);
  out.meta = src.meta;
  return out;
}

/// Pairwise (cascade) summation of term(i) for i in [lo, hi).
template <class Term>
double pairwise_sum(std::size_t lo, std::size_t hi, const Term& term) {
  const std::size_t n = hi - lo;
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    return s;
  }
  const std::size_t mid = lo + n / 2;
  return pairwise_sum(lo, mid, term) + pairwise_sum(mid, hi, term);
}

}  // namespace plb

#pragma once

// Planar floating-point image containers.
//
// ImageBuf and LatentImage share one storage template; the tag keeps pixel
// space and latent space from being mixed up by accident. Data is stored
// plane by plane (all of channel 0, then channel 1, ...), row-major inside a
// plane.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "structsr/errors.hpp"

namespace structsr {

struct ImageTag {};
struct LatentTag {};

template <class Tag>
class Planar {
 public:
  Planar() = default;

  Planar(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    check_shape(width, height, channels);
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
    if (!std::isfinite(fill)) throw NumericError("non-finite fill value");
  }

  Planar(int width, int height, int channels, std::vector<double> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check_shape(width, height, channels);
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw ParameterError("data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(width) + "x" +
                           std::to_string(height) + "x" + std::to_string(channels));
    }
    validate_finite();
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int c, int x, int y) { return data_[index(c, x, y)]; }
  double at(int c, int x, int y) const { return data_[index(c, x, y)]; }

  std::span<double> plane(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }
  std::span<const double> plane(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(), plane_size()};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  template <class OtherTag>
  bool same_shape(const Planar<OtherTag>& other) const noexcept {
    return width_ == other.width() && height_ == other.height() &&
           channels_ == other.channels();
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  void validate_finite() const {
    if (!all_finite()) throw NumericError("image contains NaN or Inf");
  }

  friend bool operator==(const Planar&, const Planar&) = default;

 private:
  static void check_shape(int width, int height, int channels) {
    if (width < 1 || height < 1) throw ParameterError("image dimensions must be >= 1");
    if constexpr (std::is_same_v<Tag, ImageTag>) {
      if (channels != 1 && channels != 3) {
        throw ParameterError("image must have 1 or 3 channels");
      }
    } else {
      if (channels < 1) throw ParameterError("latent must have >= 1 channel");
    }
  }

  std::size_t index(int c, int x, int y) const noexcept {
    return static_cast<std::size_t>(c) * plane_size() +
           static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Pixel-space image. Grayscale = [Y], color = [R, G, B]; nominal range [0, 1].
using ImageBuf = Planar<ImageTag>;
/// Latent-space tensor. Values are unbounded.
using LatentImage = Planar<LatentTag>;

template <class To, class From>
To retag(const Planar<From>& src) {
  std::vector<double> data(src.values().begin(), src.values().end());
  return To(src.width(), src.height(), src.channels(), std::move(data));
}

template <class TagA, class TagB>
void require_same_shape(const Planar<TagA>& a, const Planar<TagB>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ParameterError(std::string(what) + ": shape mismatch (" +
                         std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         "x" + std::to_string(a.channels()) + " vs " +
                         std::to_string(b.width()) + "x" + std::to_string(b.height()) +
                         "x" + std::to_string(b.channels()) + ")");
  }
}

/// Elementwise combination of two equally shaped planars.
template <class Tag, class Fn>
Planar<Tag> zip_with(const Planar<Tag>& a, const Planar<Tag>& b, Fn&& fn, const char* what) {
  require_same_shape(a, b, what);
  Planar<Tag> out(a.width(), a.height(), a.channels());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fn(av[i], bv[i]);
  return out;
}

template <class Tag, class Fn>
Planar<Tag> map_values(const Planar<Tag>& a, Fn&& fn) {
  Planar<Tag> out(a.width(), a.height(), a.channels());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fn(av[i]);
  return out;
}

// ITU-R BT.601 full-range luma weights.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Y channel of an RGB image; a copy for grayscale input.
inline ImageBuf to_luma(const ImageBuf& img) {
  if (img.channels() == 1) return img;
  ImageBuf out(img.width(), img.height(), 1);
  auto r = img.plane(0);
  auto g = img.plane(1);
  auto b = img.plane(2);
  auto y = out.plane(0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
  }
  return out;
}

/// Centered crop; the offset is ((W - w) / 2, (H - h) / 2) with integer division.
template <class Tag>
Planar<Tag> center_crop(const Planar<Tag>& img, int w, int h) {
  if (w < 1 || h < 1 || w > img.width() || h > img.height()) {
    throw ParameterError("crop size " + std::to_string(w) + "x" + std::to_string(h) +
                         " does not fit in " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()));
  }
  const int ox = (img.width() - w) / 2;
  const int oy = (img.height() - h) / 2;
  Planar<Tag> out(w, h, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, x, y) = img.at(c, x + ox, y + oy);
  return out;
}

/// Element-wise clamp to [lo, hi]; used only at export time.
template <class Tag>
Planar<Tag> clamp_values(const Planar<Tag>& img, double lo = 0.0, double hi = 1.0) {
  return map_values(img, [lo, hi](double v) { return std::clamp(v, lo, hi); });
}

/// 64-bit FNV-1a over the raw bytes of the values; used to fingerprint latents.
template <class Tag>
std::uint64_t content_hash(const Planar<Tag>& img) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const int dims[3] = {img.width(), img.height(), img.channels()};
  mix(dims, sizeof(dims));
  mix(img.values().data(), img.values().size_bytes());
  return h;
}

}  // namespace structsr

#pragma once

// Separable resampling and Gaussian filtering on planar images.
//
// Coordinates follow the pixel-center convention:
//   src = (dst + 0.5) * (src_len / dst_len) - 0.5
// Samples that fall outside the image are clamped to the nearest edge pixel.
// Values are never clipped to [0, 1] here.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "structsr/errors.hpp"
#include "structsr/image.hpp"

namespace structsr {

enum class ResampleKind { Bicubic, Nearest };

struct ResampleKernel {
  ResampleKind kind = ResampleKind::Bicubic;
  /// Keys cubic sharpness; -0.5 is Catmull-Rom.
  double a = -0.5;
};

/// Keys cubic convolution kernel evaluated at offset x.
inline double cubic_weight(double x, double a = -0.5) {
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

struct Tap {
  int index;
  double weight;
};

/// One list of taps per output sample along a single axis.
inline std::vector<std::vector<Tap>> resample_taps(int src_len, int dst_len,
                                                   const ResampleKernel& kernel) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(dst_len));
  const double scale = static_cast<double>(src_len) / dst_len;
  for (int d = 0; d < dst_len; ++d) {
    const double s = (d + 0.5) * scale - 0.5;
    auto& out = taps[static_cast<std::size_t>(d)];
    if (kernel.kind == ResampleKind::Nearest) {
      const int i = static_cast<int>(std::floor((d + 0.5) * scale));
      out.push_back({std::clamp(i, 0, src_len - 1), 1.0});
      continue;
    }
    const int base = static_cast<int>(std::floor(s));
    const double frac = s - base;
    for (int k = -1; k <= 2; ++k) {
      out.push_back({std::clamp(base + k, 0, src_len - 1), cubic_weight(k - frac, kernel.a)});
    }
  }
  return taps;
}

template <class Tag>
Planar<Tag> resample_rows(const Planar<Tag>& img, int new_w, const ResampleKernel& kernel) {
  const auto taps = resample_taps(img.width(), new_w, kernel);
  Planar<Tag> out(new_w, img.height(), img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < new_w; ++x) {
        double acc = 0.0;
        for (const Tap& t : taps[static_cast<std::size_t>(x)]) acc += t.weight * img.at(c, t.index, y);
        out.at(c, x, y) = acc;
      }
    }
  }
  return out;
}

template <class Tag>
Planar<Tag> resample_cols(const Planar<Tag>& img, int new_h, const ResampleKernel& kernel) {
  const auto taps = resample_taps(img.height(), new_h, kernel);
  Planar<Tag> out(img.width(), new_h, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < new_h; ++y) {
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0.0;
        for (const Tap& t : taps[static_cast<std::size_t>(y)]) acc += t.weight * img.at(c, x, t.index);
        out.at(c, x, y) = acc;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Resize to exactly new_w x new_h, horizontal pass first.
template <class Tag>
Planar<Tag> resize(const Planar<Tag>& img, int new_w, int new_h, const ResampleKernel& kernel = {}) {
  if (new_w < 1 || new_h < 1) throw ParameterError("resize: target size must be >= 1");
  return detail::resample_cols(detail::resample_rows(img, new_w, kernel), new_h, kernel);
}

/// Normalized 1-D Gaussian taps with radius ceil(3 sigma).
inline std::vector<double> gaussian_taps(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("gaussian sigma must be > 0");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

/// Same-size separable convolution with clamp-to-edge borders. taps.size() must be odd.
template <class Tag>
Planar<Tag> convolve_separable(const Planar<Tag>& img, const std::vector<double>& taps) {
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = img.width();
  const int h = img.height();
  Planar<Tag> tmp(w, h, img.channels());
  Planar<Tag> out(w, h, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += taps[static_cast<std::size_t>(k + radius)] * img.at(c, std::clamp(x + k, 0, w - 1), y);
        }
        tmp.at(c, x, y) = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += taps[static_cast<std::size_t>(k + radius)] * tmp.at(c, x, std::clamp(y + k, 0, h - 1));
        }
        out.at(c, x, y) = acc;
      }
    }
  }
  return out;
}

template <class Tag>
Planar<Tag> gaussian_blur(const Planar<Tag>& img, double sigma) {
  return convolve_separable(img, gaussian_taps(sigma));
}

}  // namespace structsr

#pragma once

// JPEG-equivalent distortion: 8x8 block DCT-II, quantization with the Annex K
// luminance table scaled by the libjpeg quality mapping, dequantization and
// inverse DCT. There is no entropy coding and no chroma subsampling; the same
// table is applied to every channel. Samples are level-shifted on the 0..255
// scale and are not rounded or clipped afterwards.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "structsr/errors.hpp"
#include "structsr/image.hpp"

namespace structsr {

inline constexpr std::array<int, 64> kJpegLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

/// Quantization table for a quality in [1, 100], row-major.
inline std::array<int, 64> jpeg_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw ParameterError("jpeg quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> table{};
  for (std::size_t i = 0; i < 64; ++i) {
    const int v = (kJpegLumaTable[i] * scale + 50) / 100;
    table[i] = std::clamp(v, 1, 255);
  }
  return table;
}

namespace detail {

/// Orthonormal DCT-II basis: coef[u] = sum_x basis[u][x] * sample[x].
inline const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) {
        b[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
    return b;
  }();
  return basis;
}

using Block = std::array<std::array<double, 8>, 8>;

inline Block dct2d(const Block& in) {
  const auto& b = dct_basis();
  Block tmp{}, out{};
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += b[u][x] * in[y][x];
      tmp[y][u] = acc;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += b[v][y] * tmp[y][u];
      out[v][u] = acc;
    }
  return out;
}

inline Block idct2d(const Block& in) {
  const auto& b = dct_basis();
  Block tmp{}, out{};
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += b[u][x] * in[v][u];
      tmp[v][x] = acc;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += b[v][y] * tmp[v][x];
      out[y][x] = acc;
    }
  return out;
}

}  // namespace detail

inline ImageBuf jpeg_roundtrip(const ImageBuf& img, int quality) {
  const auto table = jpeg_quant_table(quality);
  const int w = img.width();
  const int h = img.height();
  ImageBuf out(w, h, img.channels());
  detail::Block block{};
  for (int c = 0; c < img.channels(); ++c) {
    for (int by = 0; by < h; by += 8) {
      for (int bx = 0; bx < w; bx += 8) {
        // Edge replication pads partial blocks.
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) {
            const int sx = std::min(bx + x, w - 1);
            const int sy = std::min(by + y, h - 1);
            block[y][x] = img.at(c, sx, sy) * 255.0 - 128.0;
          }
        auto coef = detail::dct2d(block);
        for (int v = 0; v < 8; ++v)
          for (int u = 0; u < 8; ++u) {
            const double q = table[static_cast<std::size_t>(v * 8 + u)];
            coef[v][u] = std::nearbyint(coef[v][u] / q) * q;
          }
        const auto rec = detail::idct2d(coef);
        for (int y = 0; y < 8 && by + y < h; ++y)
          for (int x = 0; x < 8 && bx + x < w; ++x) {
            out.at(c, bx + x, by + y) = (rec[y][x] + 128.0) / 255.0;
          }
      }
    }
  }
  return out;
}

}  // namespace structsr

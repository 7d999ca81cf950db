#pragma once

// Procedural test scenes: smooth background, flat shapes with sharp edges and
// low-amplitude oriented gratings. Deterministic for a given seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "structsr/image.hpp"
#include "structsr/resample.hpp"

namespace structsr {

inline ImageBuf synthetic_scene(int size, std::uint64_t seed, int channels = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  ImageBuf img(size, size, channels);
  for (int c = 0; c < channels; ++c) {
    ImageBuf noise(size, size, 1);
    for (double& v : noise.values()) v = unit(rng);
    noise = gaussian_blur(noise, std::max(1.0, size / 16.0));
    const auto [lo, hi] = std::minmax_element(noise.values().begin(), noise.values().end());
    const double span = std::max(*hi - *lo, 1e-12);
    auto dst = img.plane(c);
    auto src = noise.plane(0);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = 0.2 + 0.4 * (src[i] - *lo) / span;
  }

  for (int shape = 0; shape < 6; ++shape) {
    const double cx = uniform(0.0, size);
    const double cy = uniform(0.0, size);
    const double r = uniform(size / 16.0, size / 4.0);
    const bool disc = unit(rng) < 0.5;
    double value[3];
    for (double& v : value) v = unit(rng);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const bool inside = disc ? dx * dx + dy * dy < r * r
                                 : std::abs(dx) < r && std::abs(dy) < 0.6 * r;
        if (!inside) continue;
        for (int c = 0; c < channels; ++c) img.at(c, x, y) = value[c];
      }
  }

  for (int g = 0; g < 3; ++g) {
    const double freq = uniform(0.3, 1.2);
    const double angle = uniform(0.0, std::numbers::pi);
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) img.at(c, x, y) += 0.05 * std::sin(freq * (ca * x + sa * y));
  }
  return clamp_values(img);
}

}  // namespace structsr

#pragma once

// LR synthesis from HR ground truth: blur -> bicubic downsample -> JPEG.

#include <cstdint>
#include <optional>
#include <string>

#include "structsr/errors.hpp"
#include "structsr/image.hpp"
#include "structsr/jpeg.hpp"
#include "structsr/resample.hpp"

namespace structsr {

struct DegradationSpec {
  int scale_factor = 4;
  /// Gaussian blur sigma in HR pixels; 0 disables the blur.
  double blur_sigma = 0.0;
  /// JPEG quality in [1, 100]; empty disables compression.
  std::optional<int> jpeg_quality;

  void validate() const {
    if (scale_factor < 1) throw ParameterError("scale_factor must be >= 1");
    if (!(blur_sigma >= 0.0)) throw ParameterError("blur_sigma must be >= 0");
    if (jpeg_quality && (*jpeg_quality < 1 || *jpeg_quality > 100)) {
      throw ParameterError("jpeg_quality must be in [1, 100]");
    }
  }

  /// Short label in the D / D+B / D+B+J scheme.
  std::string label() const {
    std::string s = "D";
    if (blur_sigma > 0.0) s += "+B";
    if (jpeg_quality) s += "+J";
    return s;
  }
};

/// `seed` is accepted for stochastic degradations; the current pipeline is deterministic.
inline ImageBuf degrade(const ImageBuf& hr, const DegradationSpec& spec,
                        [[maybe_unused]] std::uint64_t seed = 0) {
  spec.validate();
  if (hr.width() % spec.scale_factor != 0 || hr.height() % spec.scale_factor != 0) {
    throw ParameterError("image " + std::to_string(hr.width()) + "x" +
                         std::to_string(hr.height()) + " not divisible by scale " +
                         std::to_string(spec.scale_factor));
  }
  ImageBuf out = spec.blur_sigma > 0.0 ? gaussian_blur(hr, spec.blur_sigma) : hr;
  if (spec.scale_factor > 1) {
    out = resize(out, hr.width() / spec.scale_factor, hr.height() / spec.scale_factor);
  }
  if (spec.jpeg_quality) out = jpeg_roundtrip(out, *spec.jpeg_quality);
  return out;
}

}  // namespace structsr

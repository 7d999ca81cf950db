#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "structsr/degrade.hpp"
#include "structsr/jpeg.hpp"
#include "structsr/metrics.hpp"
#include "structsr/synthetic.hpp"

using namespace structsr;

namespace {

// ITU-T T.81 Annex K, table K.1, typed independently of the library copy.
constexpr int kAnnexK[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                             14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                             18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                             49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

std::vector<int> libjpeg_table(int q) {
  const long scale = q < 50 ? 5000 / q : 200 - q * 2;
  std::vector<int> t(64);
  for (int i = 0; i < 64; ++i) {
    long v = (kAnnexK[i] * scale + 50L) / 100L;
    if (v <= 0L) v = 1L;
    if (v > 255L) v = 255L;
    t[i] = static_cast<int>(v);
  }
  return t;
}

ImageBuf oracle_jpeg(const ImageBuf& img, int q) {
  const auto table = libjpeg_table(q);
  ImageBuf out(img.width(), img.height(), img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int by = 0; by < img.height(); by += 8)
      for (int bx = 0; bx < img.width(); bx += 8) {
        std::vector<double> block(64);
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) block[y * 8 + x] = img.at(c, bx + x, by + y) * 255.0 - 128.0;
        const auto rec = oracle::jpeg_block(block, table.data());
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) out.at(c, bx + x, by + y) = (rec[y * 8 + x] + 128.0) / 255.0;
      }
  return out;
}

ImageBuf ramp(int n) {
  ImageBuf img(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) img.at(0, x, y) = (x + 2.0 * y) / (3.0 * (n - 1));
  return img;
}

}  // namespace

TEST(JpegTable, QualityMapping) {
  for (int q : {1, 10, 25, 49, 50, 51, 75, 90, 100}) {
    const auto got = jpeg_quant_table(q);
    const auto want = libjpeg_table(q);
    for (int i = 0; i < 64; ++i) EXPECT_EQ(got[i], want[i]) << "q=" << q << " i=" << i;
  }
  const auto q50 = jpeg_quant_table(50);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(q50[i], kAnnexK[i]);
  for (int v : jpeg_quant_table(100)) EXPECT_EQ(v, 1);
  EXPECT_THROW(jpeg_quant_table(0), ParameterError);
  EXPECT_THROW(jpeg_quant_table(101), ParameterError);
}

TEST(Jpeg, MatchesNonSeparableDctOracle) {
  for (int q : {10, 50, 90}) {
    const auto img = oracle::random_image(16, 24, 3, static_cast<std::uint64_t>(q));
    EXPECT_LT(oracle::max_abs_diff(jpeg_roundtrip(img, q), oracle_jpeg(img, q)), 1e-9) << "q=" << q;
  }
}

// At quality 100 every step is 1, so each coefficient moves by at most half a
// level and a pixel by at most half the L1 norm of its basis row.
namespace {

double q100_pixel_bound() {
  auto cu = [](int u) { return u == 0 ? 1.0 / std::sqrt(2.0) : 1.0; };
  double worst = 0.0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double l1 = 0.0;
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u)
          l1 += std::fabs(0.25 * cu(u) * cu(v) * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
                          std::cos((2 * y + 1) * v * std::numbers::pi / 16));
      worst = std::max(worst, 0.5 * l1);
    }
  return worst / 255.0;
}

}  // namespace

TEST(Jpeg, Quality100ErrorWithinCoefficientRoundingBound) {
  const double bound = q100_pixel_bound();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto img = oracle::random_image(32, 32, 1, seed);
    const auto out = jpeg_roundtrip(img, 100);
    EXPECT_LE(oracle::max_abs_diff(out, img), bound + 1e-12) << "seed " << seed;
    // Independent half-level rounding errors: RMS is sqrt(1/12) of a level.
    EXPECT_LE(std::sqrt(oracle::mse(out, img)), 0.35 / 255.0) << "seed " << seed;
  }
  const auto scene = synthetic_scene(64, 3, 3);
  EXPECT_LE(oracle::max_abs_diff(jpeg_roundtrip(scene, 100), scene), bound + 1e-12);
}

TEST(Jpeg, ConstantImageStaysUniform) {
  for (int q : {1, 10, 50, 75, 100}) {
    for (double v : {0.0, 0.2, 128.0 / 255.0, 0.77, 1.0}) {
      const ImageBuf img(16, 16, 1, v);
      const auto out = jpeg_roundtrip(img, q);
      const double first = out.values()[0];
      for (double o : out.values()) EXPECT_NEAR(o, first, 1e-6);
      // Only the DC coefficient survives; its quantization error is at most half a step of DC/8.
      const double dc_step = jpeg_quant_table(q)[0];
      EXPECT_LE(std::fabs(first - v), dc_step / 16.0 / 255.0 + 1e-12) << "q=" << q << " v=" << v;
    }
  }
  const ImageBuf mid(8, 8, 1, 128.0 / 255.0);
  EXPECT_LT(oracle::max_abs_diff(jpeg_roundtrip(mid, 10), mid), 1e-6);
}

TEST(Jpeg, LowerQualityIsMoreSevere) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto img = synthetic_scene(64, seed);
    EXPECT_LT(ssim(jpeg_roundtrip(img, 10), img), ssim(jpeg_roundtrip(img, 90), img));
  }
}

TEST(Jpeg, PartialBlocksUseEdgeReplication) {
  const auto img = oracle::random_image(13, 9, 1, 4);
  const auto out = jpeg_roundtrip(img, 100);
  EXPECT_EQ(out.width(), 13);
  EXPECT_EQ(out.height(), 9);
  EXPECT_LE(oracle::max_abs_diff(out, img), 1.0 / 255.0);
}

TEST(Degrade, IdentityPipeline) {
  const auto img = oracle::random_image(12, 8, 3, 1);
  const DegradationSpec spec{.scale_factor = 1, .blur_sigma = 0.0, .jpeg_quality = std::nullopt};
  EXPECT_LT(oracle::max_abs_diff(degrade(img, spec), img), 1e-6);
  EXPECT_EQ(spec.label(), "D");
}

TEST(Degrade, DimensionContract) {
  const ImageBuf hr(512, 512, 1, 0.5);
  const DegradationSpec spec{.scale_factor = 4, .blur_sigma = 0.0, .jpeg_quality = std::nullopt};
  const auto lr = degrade(hr, spec);
  EXPECT_EQ(lr.width(), 128);
  EXPECT_EQ(lr.height(), 128);
  EXPECT_THROW(degrade(ImageBuf(30, 32, 1), spec), ParameterError);
}

TEST(Degrade, ComposesIndependentStageOracles) {
  const auto hr = ramp(32);
  const DegradationSpec spec{.scale_factor = 2, .blur_sigma = 1.2, .jpeg_quality = 50};
  EXPECT_EQ(spec.label(), "D+B+J");
  const auto blurred = oracle::convolve_2d(hr, oracle::gaussian_kernel_2d(1.2));
  const auto down = oracle::bicubic(blurred, 16, 16);
  const auto expect = oracle_jpeg(down, 50);
  EXPECT_LT(oracle::max_abs_diff(degrade(hr, spec, 0), expect), 1e-9);
}

TEST(Degrade, DeterministicForSeed) {
  const auto hr = synthetic_scene(32, 5, 3);
  const DegradationSpec spec{.scale_factor = 2, .blur_sigma = 0.8, .jpeg_quality = 30};
  EXPECT_EQ(degrade(hr, spec, 17), degrade(hr, spec, 17));
}

TEST(Degrade, RejectsInvalidSpecs) {
  const ImageBuf hr(8, 8, 1);
  EXPECT_THROW(degrade(hr, DegradationSpec{.scale_factor = 0, .blur_sigma = 0.0, .jpeg_quality = std::nullopt}),
               ParameterError);
  EXPECT_THROW(degrade(hr, DegradationSpec{.scale_factor = 2, .blur_sigma = -1.0, .jpeg_quality = std::nullopt}),
               ParameterError);
  EXPECT_THROW(degrade(hr, DegradationSpec{.scale_factor = 2, .blur_sigma = 0.0, .jpeg_quality = 0}),
               ParameterError);
}

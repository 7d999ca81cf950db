#include <gtest/gtest.h>

#include "oracles.hpp"
#include "structsr/resample.hpp"

using namespace structsr;

TEST(Resample, ConstantIsPreservedAtAnyScale) {
  const ImageBuf img(9, 7, 3, 0.5);
  for (auto [w, h] : {std::pair{18, 14}, {3, 2}, {9, 7}, {31, 5}}) {
    const auto out = resize(img, w, h);
    for (double v : out.values()) EXPECT_NEAR(v, 0.5, 1e-12);
  }
}

TEST(Resample, IdentityScaleReproducesInput) {
  const auto img = oracle::random_image(4, 4, 1, 5);
  EXPECT_LT(oracle::max_abs_diff(resize(img, 4, 4), img), 1e-6);
}

TEST(Resample, CheckerboardUpscaleMatchesDirectKernel) {
  ImageBuf board(2, 2, 1);
  board.at(0, 0, 0) = 1.0;
  board.at(0, 1, 1) = 1.0;
  const auto got = resize(board, 4, 4);
  EXPECT_LT(oracle::max_abs_diff(got, oracle::bicubic(board, 4, 4)), 1e-12);
}

TEST(Resample, ArbitraryScalesMatchDirectKernel) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto img = oracle::random_image(7 + static_cast<int>(seed), 9, seed % 2 ? 3 : 1, seed);
    for (auto [w, h] : {std::pair{14, 18}, {3, 4}, {10, 5}}) {
      EXPECT_LT(oracle::max_abs_diff(resize(img, w, h), oracle::bicubic(img, w, h)), 1e-12);
    }
  }
}

TEST(Resample, SharpnessParameterIsHonoured) {
  const auto img = oracle::random_image(6, 6, 1, 1);
  const auto out = resize(img, 12, 12, ResampleKernel{ResampleKind::Bicubic, -0.75});
  EXPECT_LT(oracle::max_abs_diff(out, oracle::bicubic(img, 12, 12, -0.75)), 1e-12);
}

TEST(Resample, KernelValues) {
  EXPECT_EQ(cubic_weight(0.0), 1.0);
  EXPECT_EQ(cubic_weight(1.0), 0.0);
  EXPECT_EQ(cubic_weight(2.0), 0.0);
  for (double x : {0.1, 0.5, 1.3, 1.9}) EXPECT_NEAR(cubic_weight(x), oracle::keys(x, -0.5), 1e-13);
}

TEST(Resample, RejectsEmptyTarget) {
  EXPECT_THROW(resize(ImageBuf(4, 4, 1), 0, 4), ParameterError);
}

TEST(Resample, NearestPicksSourcePixels) {
  const auto img = oracle::random_image(4, 4, 1, 8);
  const auto up = resize(img, 8, 8, ResampleKernel{ResampleKind::Nearest});
  EXPECT_EQ(up.at(0, 5, 3), img.at(0, 2, 1));
}

TEST(Blur, ConstantUnchanged) {
  const ImageBuf img(10, 6, 1, 0.37);
  const auto out = gaussian_blur(img, 2.5);
  for (double v : out.values()) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Blur, ImpulseGivesOuterProductOfTaps) {
  ImageBuf img(15, 15, 1);
  img.at(0, 7, 7) = 1.0;
  const auto out = gaussian_blur(img, 1.0);
  const auto taps = gaussian_taps(1.0);
  ASSERT_EQ(taps.size(), 7u);
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) {
      const int dx = x - 7, dy = y - 7;
      const double expect = (std::abs(dx) <= 3 && std::abs(dy) <= 3) ? taps[dx + 3] * taps[dy + 3] : 0.0;
      EXPECT_NEAR(out.at(0, x, y), expect, 1e-15);
    }
}

TEST(Blur, MatchesDirect2dConvolution) {
  for (double sigma : {0.6, 1.0, 2.2}) {
    const auto img = oracle::random_image(13, 11, 3, 4);
    EXPECT_LT(oracle::max_abs_diff(gaussian_blur(img, sigma),
                                   oracle::convolve_2d(img, oracle::gaussian_kernel_2d(sigma))),
              1e-12);
  }
}

TEST(Blur, TinySigmaIsNearIdentity) {
  const auto img = oracle::random_image(16, 16, 1, 2);
  EXPECT_LT(oracle::max_abs_diff(gaussian_blur(img, 0.1), img), 1e-3);
}

TEST(Blur, RejectsNonPositiveSigma) {
  EXPECT_THROW(gaussian_taps(0.0), ParameterError);
  EXPECT_THROW(gaussian_taps(-1.0), ParameterError);
}

TEST(Blur, Deterministic) {
  const auto img = oracle::random_image(12, 12, 3, 6);
  EXPECT_EQ(gaussian_blur(img, 1.3), gaussian_blur(img, 1.3));
  EXPECT_EQ(resize(img, 5, 7), resize(img, 5, 7));
}

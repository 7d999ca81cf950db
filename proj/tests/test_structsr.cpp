#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "structsr/degrade.hpp"
#include "structsr/structsr.hpp"
#include "structsr/synthetic.hpp"

using namespace structsr;

namespace {

struct CountingCodec {
  mutable int decodes = 0;
  LatentImage encode(const ImageBuf& img) const { return retag<LatentImage>(img); }
  ImageBuf decode(const LatentImage& z) const {
    ++decodes;
    return retag<ImageBuf>(z);
  }
};

struct NanDenoiser {
  int bad_t;
  LatentImage predict(const LatentImage& z, const LatentImage&, int t) const {
    LatentImage out(z.width(), z.height(), z.channels());
    if (t == bad_t) out.values()[0] = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
};

LatentImage filled(double v) { return LatentImage(4, 4, 1, v); }

InferenceOptions opts_for(const ImageBuf& hr, bool diagnostics = false) {
  return {.out_width = hr.width(), .out_height = hr.height(), .diagnostics = diagnostics, .ssim = {}};
}

struct Scene {
  ImageBuf hr;
  ImageBuf lr;
  NoiseSchedule sched;
  RestorationDenoiser denoiser;
};

Scene hallucinating_scene(std::uint64_t seed, int T = 50) {
  ImageBuf hr = synthetic_scene(32, seed);
  ImageBuf lr = degrade(hr, DegradationSpec{.scale_factor = 2, .blur_sigma = 1.0, .jpeg_quality = std::nullopt});
  NoiseSchedule sched = make_schedule(T);
  RestorationSpec spec;
  spec.hallucination.seed = seed;
  RestorationDenoiser den(sched, spec, 32, 32, 1);
  return {std::move(hr), std::move(lr), sched, std::move(den)};
}

}  // namespace

TEST(Params, ScreeningSteps) {
  StructSrParams p;
  EXPECT_EQ(p.screening_steps(200), 60);
  EXPECT_EQ(p.screening_steps(50), 15);
  p.t_sas_fraction = 0.01;
  EXPECT_THROW(p.screening_steps(20), ParameterError);
  p.t_sas_fraction = 0.99;
  EXPECT_THROW(p.screening_steps(20), ParameterError);
  p.t_sas_fraction = 1.0;
  EXPECT_THROW(p.screening_steps(200), ParameterError);
}

TEST(Sas, ArgmaxExamples) {
  SasState a(10, 3);
  a.record(10, 0.3, filled(1));
  a.record(9, 0.5, filled(2));
  a.record(8, 0.4, filled(3));
  EXPECT_EQ(a.s_max(), 0.5);
  EXPECT_EQ(a.capture_t(), 9);
  EXPECT_EQ(a.z_se(), filled(2));
  EXPECT_EQ(a.buffer().size(), 3u);

  SasState b(10, 3);
  b.record(10, 0.42, filled(7));
  EXPECT_EQ(b.s_max(), 0.42);
  EXPECT_EQ(b.z_se(), filled(7));

  SasState c(10, 3);
  c.record(10, 0.5, filled(1));
  c.record(9, 0.5, filled(2));
  EXPECT_EQ(c.capture_t(), 9);
  EXPECT_EQ(c.z_se(), filled(2));
}

TEST(Sas, WindowContract) {
  SasState s(10, 3);
  EXPECT_TRUE(s.in_window(10));
  EXPECT_TRUE(s.in_window(8));
  EXPECT_FALSE(s.in_window(7));
  EXPECT_FALSE(s.has_embedding());
  EXPECT_THROW(s.z_se(), ContractError);
  EXPECT_THROW(s.record(7, 0.1, filled(0)), ContractError);
  s.record(9, 0.1, filled(0));
  EXPECT_THROW(s.record(10, 0.1, filled(0)), ContractError);
  EXPECT_THROW(s.record(8, std::nan(""), filled(0)), NumericError);
  EXPECT_THROW(SasState(10, 0), ParameterError);
  EXPECT_THROW(SasState(10, 10), ParameterError);
}

TEST(Sas, RandomSequencesMatchBruteForce) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> len(1, 30);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng);
    std::vector<double> s(n);
    for (double& v : s) v = level(rng) / 5.0 - 0.2;  // coarse levels force ties
    SasState st(n + 5, n);
    for (int i = 0; i < n; ++i) st.record(n + 5 - i, s[i], filled(i));
    const auto best = oracle::argmax_last(s);
    EXPECT_EQ(st.s_max(), s[best]);
    EXPECT_EQ(st.capture_t(), n + 5 - static_cast<int>(best));
    EXPECT_EQ(st.z_se(), filled(static_cast<double>(best)));
  }
}

TEST(Sas, UpdateScoresDecodedEstimateAgainstUpscaledInput) {
  const auto lr = oracle::random_image(8, 8, 1, 1);
  const auto z0t = retag<LatentImage>(resize(lr, 16, 16));
  SasState st(10, 2);
  CountingCodec codec;
  const double s = sas_update(st, z0t, 10, lr, codec, SsimParams{});
  EXPECT_NEAR(s, 1.0, 1e-9);
  EXPECT_EQ(codec.decodes, 1);
  EXPECT_THROW(sas_update(st, z0t, 8, lr, codec, SsimParams{}), ContractError);
}

TEST(Sce, Endpoints) {
  const auto e = standard_normal_latent(4, 4, 1, 1);
  const auto o = standard_normal_latent(4, 4, 1, 2);
  EXPECT_EQ(sce_blend(e, o, 0.0), o);
  EXPECT_EQ(sce_blend(e, o, 1.0), e);
  EXPECT_EQ(sce_blend(filled(2), filled(0), 0.5), filled(1));
  EXPECT_THROW(sce_blend(e, o, 1.5), ParameterError);
  EXPECT_THROW(sce_blend(e, LatentImage(3, 4, 1), 0.5), ParameterError);
}

TEST(Sce, Convexity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = standard_normal_latent(6, 6, 2, 100 + trial);
    const auto o = standard_normal_latent(6, 6, 2, 200 + trial);
    const auto b = sce_blend(e, o, u(rng));
    for (std::size_t i = 0; i < b.size(); ++i) {
      EXPECT_GE(b.values()[i], std::min(e.values()[i], o.values()[i]));
      EXPECT_LE(b.values()[i], std::max(e.values()[i], o.values()[i]));
    }
  }
}

TEST(Ide, WeightExamples) {
  EXPECT_EQ(ide_weight(0, 200, 60, 0.8), 0.0);
  EXPECT_EQ(ide_weight(140, 200, 60, 0.8), 0.8);
  EXPECT_NEAR(ide_weight(70, 200, 60, 0.8), 0.4, 1e-15);
  EXPECT_THROW(ide_weight(141, 200, 60, 0.8), ContractError);
  EXPECT_THROW(ide_weight(-1, 200, 60, 0.8), ContractError);
  EXPECT_THROW(ide_weight(0, 60, 60, 0.8), ParameterError);
}

TEST(Ide, WeightStrictlyDecreasing) {
  for (int T : {10, 50, 200})
    for (int t_sas : {1, T / 4, T / 2})
      for (double s : {0.05, 0.5, 1.0}) {
        for (int t = T - t_sas; t >= 1; --t) EXPECT_GT(ide_weight(t, T, t_sas, s), ide_weight(t - 1, T, t_sas, s));
      }
}

TEST(Ide, InsertExamples) {
  const auto z = standard_normal_latent(4, 4, 1, 1);
  const auto se = standard_normal_latent(4, 4, 1, 2);
  EXPECT_EQ(ide_insert(z, se, 0.0), z);
  EXPECT_EQ(ide_insert(z, se, 1.0), se);
  EXPECT_EQ(ide_insert(filled(0), filled(4), 0.25), filled(1));
  EXPECT_THROW(ide_insert(z, se, -0.1), ParameterError);
  EXPECT_THROW(ide_insert(z, LatentImage(4, 4, 2), 0.5), ParameterError);
}

TEST(ClampWeight, Range) {
  EXPECT_EQ(clamp_weight(-0.3), 0.0);
  EXPECT_EQ(clamp_weight(1.2), 1.0);
  EXPECT_EQ(clamp_weight(0.4), 0.4);
}

TEST(Inference, ForcedZeroWeightIsBitwiseBaseline) {
  auto sc = hallucinating_scene(1);
  const IdentityCodec codec;
  StructSrParams p;
  p.force_s_max = 0.0;
  const auto base = run_inference(sc.lr, sc.denoiser, codec, sc.sched, std::nullopt, 9, opts_for(sc.hr));
  const auto ssr = run_inference(sc.lr, sc.denoiser, codec, sc.sched, p, 9, opts_for(sc.hr));
  EXPECT_EQ(ssr.image, base.image);
  EXPECT_GT(ssr.report.s_max, 0.5);
}

TEST(Inference, NegativeScreenedSimilarityClampsToNoOp) {
  const auto hr = synthetic_scene(32, 2);
  const auto inverted = map_values(hr, [](double v) { return 1.0 - v; });
  const auto lr = resize(inverted, 16, 16);
  const auto sched = make_schedule(30);
  const OracleDenoiser den(retag<LatentImage>(hr), sched);
  const IdentityCodec codec;
  const auto base = run_inference(lr, den, codec, sched, std::nullopt, 4, opts_for(hr));
  const auto ssr = run_inference(lr, den, codec, sched, StructSrParams{}, 4, opts_for(hr));
  EXPECT_LT(ssr.report.s_max, 0.0);
  EXPECT_EQ(ssr.image, base.image);
}

TEST(Inference, OracleFixedPointIsSharedByBothPaths) {
  const auto hr = synthetic_scene(32, 3);
  const auto lr = degrade(hr, DegradationSpec{.scale_factor = 2, .blur_sigma = 0.0, .jpeg_quality = std::nullopt});
  const auto sched = make_schedule(50);
  const IdentityCodec codec;
  const auto target = codec.encode(resize(lr, 32, 32));
  const OracleDenoiser den(target, sched);
  const auto base = run_inference(lr, den, codec, sched, std::nullopt, 5, opts_for(hr));
  const auto ssr = run_inference(lr, den, codec, sched, StructSrParams{}, 5, opts_for(hr));
  const auto tgt = retag<ImageBuf>(target);
  EXPECT_LT(oracle::max_abs_diff(base.image, tgt), 1e-3);
  EXPECT_LT(oracle::max_abs_diff(ssr.image, tgt), 1e-3);
}

TEST(Inference, DisablingBothBranchesMatchesBaseline) {
  auto sc = hallucinating_scene(4);
  const IdentityCodec codec;
  StructSrParams p;
  p.enable_sce = false;
  p.enable_ide = false;
  const auto base = run_inference(sc.lr, sc.denoiser, codec, sc.sched, std::nullopt, 3, opts_for(sc.hr));
  const auto off = run_inference(sc.lr, sc.denoiser, codec, sc.sched, p, 3, opts_for(sc.hr));
  EXPECT_GT(off.report.s_max, 0.0);
  EXPECT_LT(oracle::max_abs_diff(base.image, off.image), 1e-6);
}

TEST(Inference, EachBranchChangesTheOutput) {
  auto sc = hallucinating_scene(5);
  const IdentityCodec codec;
  const auto base = run_inference(sc.lr, sc.denoiser, codec, sc.sched, std::nullopt, 3, opts_for(sc.hr));
  StructSrParams full;
  StructSrParams no_sce;
  no_sce.enable_sce = false;
  StructSrParams no_ide;
  no_ide.enable_ide = false;
  const auto a = run_inference(sc.lr, sc.denoiser, codec, sc.sched, full, 3, opts_for(sc.hr));
  const auto b = run_inference(sc.lr, sc.denoiser, codec, sc.sched, no_sce, 3, opts_for(sc.hr));
  const auto c = run_inference(sc.lr, sc.denoiser, codec, sc.sched, no_ide, 3, opts_for(sc.hr));
  for (const auto* r : {&b, &c}) {
    EXPECT_GT(oracle::max_abs_diff(r->image, base.image), 1e-4);
    EXPECT_GT(oracle::max_abs_diff(r->image, a.image), 1e-4);
  }
}

TEST(Inference, SharesInitialLatentAcrossPaths) {
  auto sc = hallucinating_scene(6);
  const IdentityCodec codec;
  const auto base = run_inference(sc.lr, sc.denoiser, codec, sc.sched, std::nullopt, 77, opts_for(sc.hr));
  const auto ssr = run_inference(sc.lr, sc.denoiser, codec, sc.sched, StructSrParams{}, 77, opts_for(sc.hr));
  EXPECT_EQ(base.report.z_t_hash, ssr.report.z_t_hash);
  EXPECT_EQ(base.report.z_t_hash, content_hash(standard_normal_latent(32, 32, 1, 77)));
  const auto other = run_inference(sc.lr, sc.denoiser, codec, sc.sched, std::nullopt, 78, opts_for(sc.hr));
  EXPECT_NE(other.report.z_t_hash, base.report.z_t_hash);
}

TEST(Inference, ScreeningDecodesExactlyTheWindow) {
  auto sc = hallucinating_scene(7, 40);
  for (double f : {0.1, 0.3, 0.6}) {
    CountingCodec codec;
    StructSrParams p;
    p.t_sas_fraction = f;
    const auto r = run_inference(sc.lr, sc.denoiser, codec, sc.sched, p, 1, opts_for(sc.hr));
    const int t_sas = p.screening_steps(40);
    EXPECT_EQ(r.report.decode_calls, t_sas);
    EXPECT_EQ(codec.decodes, t_sas + 1);  // plus the output decode
    EXPECT_EQ(r.trajectory.size(), static_cast<std::size_t>(t_sas));
    EXPECT_EQ(r.report.t_sas, t_sas);
    EXPECT_GT(r.report.capture_t, 40 - t_sas);
  }
  CountingCodec codec;
  const auto base = run_inference(sc.lr, sc.denoiser, codec, sc.sched, std::nullopt, 1, opts_for(sc.hr));
  EXPECT_EQ(base.report.decode_calls, 0);
  EXPECT_TRUE(base.trajectory.empty());
}

TEST(Inference, DiagnosticsRecordEveryStep) {
  auto sc = hallucinating_scene(8, 30);
  const IdentityCodec codec;
  const auto base = run_inference(sc.lr, sc.denoiser, codec, sc.sched, std::nullopt, 1, opts_for(sc.hr, true));
  const auto ssr = run_inference(sc.lr, sc.denoiser, codec, sc.sched, StructSrParams{}, 1, opts_for(sc.hr, true));
  EXPECT_EQ(base.trajectory.size(), 30u);
  EXPECT_EQ(ssr.trajectory.size(), 30u);
  EXPECT_EQ(ssr.trajectory.entries().front().t, 30);
  EXPECT_EQ(ssr.trajectory.entries().back().t, 1);
  const auto quiet = run_inference(sc.lr, sc.denoiser, codec, sc.sched, StructSrParams{}, 1, opts_for(sc.hr));
  EXPECT_EQ(quiet.image, ssr.image);
}

TEST(Inference, NanAbortsWithTimestep) {
  const auto lr = oracle::random_image(8, 8, 1, 1);
  const auto sched = make_schedule(20);
  const IdentityCodec codec;
  try {
    run_inference(lr, NanDenoiser{13}, codec, sched, StructSrParams{}, 1, InferenceOptions{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("t=13"), std::string::npos) << e.what();
  }
}

TEST(Inference, Deterministic) {
  auto sc = hallucinating_scene(9);
  const IdentityCodec codec;
  const auto a = run_inference(sc.lr, sc.denoiser, codec, sc.sched, StructSrParams{}, 5, opts_for(sc.hr, true));
  const auto b = run_inference(sc.lr, sc.denoiser, codec, sc.sched, StructSrParams{}, 5, opts_for(sc.hr, true));
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.trajectory.to_csv(), b.trajectory.to_csv());
}

#pragma once

// Structure-aware intervention in a diffusion super-resolution loop.
//
// During the first T_SAS steps every clean estimate is decoded and compared
// with the bicubically upscaled LR input; the estimate with the highest SSIM
// is kept as the structural embedding Z_SE and its score as S_max. In the
// remaining steps the predicted noise is blended with the noise predicted
// under Z_SE (weight S_max), and Z_SE is mixed back into the clean estimate
// with a weight that decays linearly to zero at t = 0.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "structsr/diffusion.hpp"
#include "structsr/errors.hpp"
#include "structsr/image.hpp"
#include "structsr/metrics.hpp"
#include "structsr/resample.hpp"

namespace structsr {

struct StructSrParams {
  /// Screening window as a fraction of T.
  double t_sas_fraction = 0.3;
  bool enable_sce = true;
  bool enable_ide = true;
  SsimParams ssim{};
  /// Replaces the screened S_max (before clamping) when set. Diagnostic use.
  std::optional<double> force_s_max;

  /// T_SAS = round(fraction * T); must leave at least one step on each side.
  int screening_steps(int total_steps) const {
    if (!(t_sas_fraction >= 0.0 && t_sas_fraction < 1.0)) {
      throw ParameterError("t_sas_fraction must be in [0, 1)");
    }
    const int t_sas = static_cast<int>(std::lround(t_sas_fraction * total_steps));
    if (t_sas < 1) throw ParameterError("T_SAS rounds to 0; raise t_sas_fraction or T");
    if (t_sas >= total_steps) throw ParameterError("T_SAS must be smaller than T");
    return t_sas;
  }
};

struct ScreeningRecord {
  int t;
  double s;
};

/// Screening buffer, running maximum and the captured structural embedding.
class SasState {
 public:
  SasState(int total_steps, int screening_steps) : total_(total_steps), t_sas_(screening_steps) {
    if (screening_steps < 1 || screening_steps >= total_steps) {
      throw ParameterError("screening window must satisfy 1 <= T_SAS < T");
    }
  }

  int total_steps() const noexcept { return total_; }
  int screening_steps() const noexcept { return t_sas_; }
  bool in_window(int t) const noexcept { return t > total_ - t_sas_ && t <= total_; }

  /// Appends (t, s); on s >= S_max the estimate becomes the new embedding.
  void record(int t, double s, const LatentImage& z0t) {
    if (!in_window(t)) {
      throw ContractError("screening update at t=" + std::to_string(t) + " outside window (" +
                          std::to_string(total_ - t_sas_) + ", " + std::to_string(total_) + "]");
    }
    if (!buffer_.empty() && t >= buffer_.back().t) {
      throw ContractError("screening timesteps must strictly decrease");
    }
    if (!std::isfinite(s)) throw NumericError("non-finite SSIM at t=" + std::to_string(t));
    buffer_.push_back({t, s});
    if (s >= s_max_) {
      s_max_ = s;
      z_se_ = z0t;
      capture_t_ = t;
    }
  }

  const std::vector<ScreeningRecord>& buffer() const noexcept { return buffer_; }
  bool has_embedding() const noexcept { return z_se_.has_value(); }
  double s_max() const noexcept { return s_max_; }
  int capture_t() const noexcept { return capture_t_; }

  const LatentImage& z_se() const {
    if (!z_se_) throw ContractError("no structural embedding captured yet");
    return *z_se_;
  }

 private:
  int total_;
  int t_sas_;
  std::vector<ScreeningRecord> buffer_;
  double s_max_ = -std::numeric_limits<double>::infinity();
  std::optional<LatentImage> z_se_;
  int capture_t_ = -1;
};

/// One screening step: S_t of the decoded estimate against SR(lr), then update.
template <Codec C>
double sas_update(SasState& state, const LatentImage& z0t, int t, const ImageBuf& lr,
                  const C& codec, const SsimParams& ssim_params) {
  if (!state.in_window(t)) {
    throw ContractError("sas_update called at t=" + std::to_string(t) + " outside the screening window");
  }
  const double s = structural_similarity_at_step(codec.decode(z0t), lr, ssim_params);
  state.record(t, s, z0t);
  return s;
}

/// S_max restricted to [0, 1] so the blends stay convex.
inline double clamp_weight(double s_max) { return std::clamp(s_max, 0.0, 1.0); }

/// eps_hat = s_max * eps_e + (1 - s_max) * eps_o.
inline LatentImage sce_blend(const LatentImage& eps_e, const LatentImage& eps_o, double s_max) {
  if (!(s_max >= 0.0 && s_max <= 1.0)) throw ParameterError("sce_blend weight must be in [0, 1]");
  const double keep = 1.0 - s_max;
  return zip_with(eps_e, eps_o, [=](double e, double o) { return s_max * e + keep * o; }, "sce_blend");
}

/// w_t = s_max * t / (T - T_SAS) for 0 <= t <= T - T_SAS.
inline double ide_weight(int t, int total_steps, int t_sas, double s_max) {
  if (total_steps <= t_sas) throw ParameterError("ide_weight needs T > T_SAS");
  if (t < 0 || t > total_steps - t_sas) {
    throw ContractError("ide_weight at t=" + std::to_string(t) + " outside [0, " +
                        std::to_string(total_steps - t_sas) + "]");
  }
  return s_max * t / static_cast<double>(total_steps - t_sas);
}

/// Z' = w * z_se + (1 - w) * z0t.
inline LatentImage ide_insert(const LatentImage& z0t, const LatentImage& z_se, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("ide_insert weight must be in [0, 1]");
  const double keep = 1.0 - w;
  return zip_with(z_se, z0t, [=](double se, double z) { return w * se + keep * z; }, "ide_insert");
}

struct StageTimings {
  double denoise_ms = 0.0;
  double screening_ms = 0.0;
  double sampler_ms = 0.0;
  double decode_ms = 0.0;
};

struct RunReport {
  /// Screened maximum before clamping; NaN for baseline runs.
  double s_max = std::numeric_limits<double>::quiet_NaN();
  int capture_t = -1;
  int t_sas = 0;
  int decode_calls = 0;
  std::uint64_t z_t_hash = 0;
  double wall_ms = 0.0;
  StageTimings timings;
};

struct InferenceResult {
  ImageBuf image;
  Trajectory trajectory;
  RunReport report;
};

struct InferenceOptions {
  int out_width = 0;
  int out_height = 0;
  /// Measure S_t at every step, not only inside the screening window.
  bool diagnostics = false;
  /// SSIM settings for diagnostic measurement of baseline runs.
  SsimParams ssim{};
};

namespace detail {

class StageClock {
 public:
  explicit StageClock(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    sink_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }
  StageClock(const StageClock&) = delete;
  StageClock& operator=(const StageClock&) = delete;

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

/// Codec adapter that counts and times decodes.
template <Codec C>
struct MeteredCodec {
  const C& inner;
  double& decode_ms;
  mutable int calls = 0;

  LatentImage encode(const ImageBuf& img) const { return inner.encode(img); }
  ImageBuf decode(const LatentImage& z) const {
    StageClock clk(decode_ms);
    ++calls;
    return inner.decode(z);
  }
};

inline void require_finite(const LatentImage& z, int t, const char* what) {
  if (!z.all_finite()) {
    throw NumericError(std::string("non-finite values in ") + what + " at t=" + std::to_string(t));
  }
}

}  // namespace detail

/// Full inference loop. Without `params` this is the unmodified sampler; both
/// paths draw the same Z_T for the same seed.
template <Denoiser D, Codec C>
InferenceResult run_inference(const ImageBuf& lr, const D& denoiser, const C& codec,
                              const NoiseSchedule& sched, const std::optional<StructSrParams>& params,
                              std::uint64_t seed, const InferenceOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  const int T = sched.steps();
  const int out_w = options.out_width > 0 ? options.out_width : lr.width();
  const int out_h = options.out_height > 0 ? options.out_height : lr.height();

  InferenceResult result;
  RunReport& report = result.report;
  const SsimParams& ssim_params = params ? params->ssim : options.ssim;

  std::optional<SasState> sas;
  if (params) {
    report.t_sas = params->screening_steps(T);
    sas.emplace(T, report.t_sas);
  }

  const ImageBuf lr_up = resize(lr, out_w, out_h);
  const LatentImage cond = codec.encode(lr_up);
  const detail::MeteredCodec<C> metered{codec, report.timings.decode_ms};

  LatentImage z = standard_normal_latent(cond.width(), cond.height(), cond.channels(), seed);
  report.z_t_hash = content_hash(z);

  double weight = 0.0;  // clamped S_max, fixed once screening ends
  for (int t = T; t >= 1; --t) {
    LatentImage eps_o;
    {
      detail::StageClock clk(report.timings.denoise_ms);
      eps_o = denoiser.predict(z, cond, t);
    }
    detail::require_finite(eps_o, t, "predicted noise");

    if (!params || sas->in_window(t)) {
      LatentImage z0t;
      {
        detail::StageClock clk(report.timings.sampler_ms);
        z0t = predict_x0(z, eps_o, t, sched);
      }
      if (params) {
        detail::StageClock clk(report.timings.screening_ms);
        result.trajectory.push(t, sas_update(*sas, z0t, t, lr, metered, ssim_params));
      } else if (options.diagnostics) {
        detail::StageClock clk(report.timings.screening_ms);
        result.trajectory.push(t, structural_similarity_at_step(metered.decode(z0t), lr, ssim_params));
      }
      detail::StageClock clk(report.timings.sampler_ms);
      z = step_prev(z0t, eps_o, t, sched);
    } else {
      if (t == T - report.t_sas) {
        weight = clamp_weight(params->force_s_max.value_or(sas->s_max()));
      }
      const LatentImage& z_se = sas->z_se();
      LatentImage eps_hat;
      if (params->enable_sce) {
        LatentImage eps_e;
        {
          detail::StageClock clk(report.timings.denoise_ms);
          eps_e = denoiser.predict(z, z_se, t);
        }
        detail::require_finite(eps_e, t, "embedding-conditioned noise");
        eps_hat = sce_blend(eps_e, eps_o, weight);
      } else {
        eps_hat = std::move(eps_o);
      }
      LatentImage z0t;
      {
        detail::StageClock clk(report.timings.sampler_ms);
        z0t = predict_x0(z, eps_hat, t, sched);
        if (params->enable_ide) z0t = ide_insert(z0t, z_se, ide_weight(t, T, report.t_sas, weight));
      }
      if (options.diagnostics) {
        detail::StageClock clk(report.timings.screening_ms);
        result.trajectory.push(t, structural_similarity_at_step(metered.decode(z0t), lr, ssim_params));
      }
      detail::StageClock clk(report.timings.sampler_ms);
      z = step_prev(z0t, eps_hat, t, sched);
    }
    detail::require_finite(z, t, "latent");
  }

  // Counted decodes are the intervention's overhead; the output decode is not.
  report.decode_calls = metered.calls;
  result.image = codec.decode(z);
  if (sas) {
    report.s_max = sas->s_max();
    report.capture_t = sas->capture_t();
  }
  report.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - started).count();
  return result;
}

}  // namespace structsr

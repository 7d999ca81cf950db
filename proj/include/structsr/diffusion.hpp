#pragma once

// Noise schedule, deterministic DDIM sampler steps, codec and denoiser
// contracts, and two analytic denoisers used in place of a trained network.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "structsr/errors.hpp"
#include "structsr/image.hpp"
#include "structsr/resample.hpp"

namespace structsr {

/// Linear beta schedule indexed by t = 1..T, with alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  NoiseSchedule(int steps, double beta_start, double beta_end) : steps_(steps) {
    if (steps < 2) throw ParameterError("schedule needs T >= 2");
    if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
      throw ParameterError("schedule needs 0 < beta_start < beta_end < 1");
    }
    betas_.resize(static_cast<std::size_t>(steps) + 1, 0.0);
    alpha_bars_.resize(static_cast<std::size_t>(steps) + 1, 1.0);
    long double prod = 1.0L;
    for (int t = 1; t <= steps; ++t) {
      const double beta = beta_start + (beta_end - beta_start) * (t - 1) / (steps - 1);
      betas_[static_cast<std::size_t>(t)] = beta;
      prod *= 1.0L - static_cast<long double>(beta);
      alpha_bars_[static_cast<std::size_t>(t)] = static_cast<double>(prod);
    }
    for (int t = 1; t <= steps; ++t) {
      if (!(alpha_bar(t) > 0.0 && alpha_bar(t) < alpha_bar(t - 1))) {
        throw NumericError("alpha_bar must be positive and strictly decreasing");
      }
    }
  }

  int steps() const noexcept { return steps_; }
  double beta(int t) const { return betas_.at(checked(t, 1)); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bars_.at(checked(t, 0)); }

 private:
  std::size_t checked(int t, int lo) const {
    if (t < lo || t > steps_) {
      throw ParameterError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) +
                           ", " + std::to_string(steps_) + "]");
    }
    return static_cast<std::size_t>(t);
  }

  int steps_;
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

inline NoiseSchedule make_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02) {
  return {steps, beta_start, beta_end};
}

namespace detail {
inline void require_step(int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps()) {
    throw ParameterError("timestep " + std::to_string(t) + " outside [1, " +
                         std::to_string(sched.steps()) + "]");
  }
}
}  // namespace detail

/// Clean estimate Z_{0|t} = (Z_t - sqrt(1 - abar_t) eps) / sqrt(abar_t).
inline LatentImage predict_x0(const LatentImage& z_t, const LatentImage& eps, int t,
                              const NoiseSchedule& sched) {
  detail::require_step(t, sched);
  const double ab = sched.alpha_bar(t);
  const double s_noise = std::sqrt(1.0 - ab);
  const double s_signal = std::sqrt(ab);
  return zip_with(z_t, eps, [=](double z, double e) { return (z - s_noise * e) / s_signal; },
                  "predict_x0");
}

/// Deterministic DDIM step Z_{t-1} = sqrt(abar_{t-1}) x0 + sqrt(1 - abar_{t-1}) eps.
inline LatentImage step_prev(const LatentImage& x0, const LatentImage& eps, int t,
                             const NoiseSchedule& sched) {
  detail::require_step(t, sched);
  const double ab_prev = sched.alpha_bar(t - 1);
  const double s_signal = std::sqrt(ab_prev);
  const double s_noise = std::sqrt(1.0 - ab_prev);
  return zip_with(x0, eps, [=](double x, double e) { return s_signal * x + s_noise * e; },
                  "step_prev");
}

/// Noise that makes `clean` the clean estimate of z at step t.
inline LatentImage noise_for_clean(const LatentImage& z, const LatentImage& clean, int t,
                                   const NoiseSchedule& sched) {
  detail::require_step(t, sched);
  const double ab = sched.alpha_bar(t);
  const double s_signal = std::sqrt(ab);
  const double s_noise = std::sqrt(1.0 - ab);
  return zip_with(z, clean, [=](double zv, double c) { return (zv - s_signal * c) / s_noise; },
                  "denoiser");
}

/// Predicts the noise in z at step t given a conditioning latent.
template <class D>
concept Denoiser = requires(const D& d, const LatentImage& z, const LatentImage& cond, int t) {
  { d.predict(z, cond, t) } -> std::convertible_to<LatentImage>;
};

/// Maps images to latents (E) and back (D).
template <class C>
concept Codec = requires(const C& c, const ImageBuf& img, const LatentImage& z) {
  { c.encode(img) } -> std::convertible_to<LatentImage>;
  { c.decode(z) } -> std::convertible_to<ImageBuf>;
};

/// Latent space equals pixel space.
struct IdentityCodec {
  LatentImage encode(const ImageBuf& img) const { return retag<LatentImage>(img); }
  ImageBuf decode(const LatentImage& z) const { return retag<ImageBuf>(z); }
};

/// Seeded standard-normal latent, used for Z_T.
inline LatentImage standard_normal_latent(int width, int height, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  LatentImage z(width, height, channels);
  for (double& v : z.values()) v = dist(rng);
  return z;
}

/// Denoiser whose clean estimate is always `target`; ignores the condition.
class OracleDenoiser {
 public:
  OracleDenoiser(LatentImage target, NoiseSchedule sched)
      : target_(std::move(target)), sched_(std::move(sched)) {
    target_.validate_finite();
  }

  LatentImage predict(const LatentImage& z, const LatentImage& /*cond*/, int t) const {
    return noise_for_clean(z, target_, t, sched_);
  }

  const LatentImage& target() const noexcept { return target_; }

 private:
  LatentImage target_;
  NoiseSchedule sched_;
};

/// Spurious high-frequency detail injected by RestorationDenoiser.
struct HallucinationSpec {
  /// Amplitude reached at t = 0, in intensity units (RMS of the field is 1).
  double a_max = 0.0;
  /// Ramp exponent p in a(t) = a_max * (1 - t/T)^p; must be >= 1.
  double exponent = 2.0;
  /// Band-pass of the pseudo-noise field: blur(noise, inner) - blur(noise, outer).
  /// inner = 0 keeps the raw noise as the upper band edge.
  double band_inner_sigma = 0.0;
  double band_outer_sigma = 1.5;
  std::uint64_t seed = 0;
  /// When set, the hallucination amplitude is carried by the latent: the
  /// denoiser reads back the amplitude already present along the field and
  /// relaxes it toward a(t). When clear, a(t) is injected afresh every step.
  bool latent_memory = true;

  void validate() const {
    if (!(a_max >= 0.0)) throw ParameterError("hallucination a_max must be >= 0");
    if (!(exponent >= 1.0)) throw ParameterError("hallucination exponent must be >= 1");
    if (!(band_inner_sigma >= 0.0) || !(band_outer_sigma > band_inner_sigma)) {
      throw ParameterError("hallucination band needs 0 <= inner < outer");
    }
  }
};

/// Unit-RMS band-passed pseudo-noise field.
inline LatentImage hallucination_field(int width, int height, int channels, const HallucinationSpec& spec) {
  const LatentImage noise = standard_normal_latent(width, height, channels, spec.seed ^ 0x9e3779b97f4a7c15ULL);
  const LatentImage inner = spec.band_inner_sigma > 0.0 ? gaussian_blur(noise, spec.band_inner_sigma) : noise;
  LatentImage field = zip_with(inner, gaussian_blur(noise, spec.band_outer_sigma),
                               [](double a, double b) { return a - b; }, "hallucination_field");
  double energy = 0.0;
  for (double v : field.values()) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(field.size()));
  if (rms > 0.0) {
    for (double& v : field.values()) v /= rms;
  }
  return field;
}

/// Parameters of RestorationDenoiser.
struct RestorationSpec {
  /// Unsharp-mask gain and radius of the conditioned content.
  double detail_gain = 0.1;
  double detail_sigma = 1.0;
  /// Coarse-to-fine warm-up: the content is blurred with sigma
  /// coarse_sigma * max(0, (t/T - (1 - coarse_fraction)) / coarse_fraction),
  /// so it is fully resolved once t <= (1 - coarse_fraction) T. 0 disables it.
  double coarse_sigma = 1.0;
  double coarse_fraction = 0.1;
  HallucinationSpec hallucination{.a_max = 0.1};

  void validate() const {
    if (!(detail_gain >= 0.0)) throw ParameterError("detail_gain must be >= 0");
    if (!(detail_sigma > 0.0)) throw ParameterError("detail_sigma must be > 0");
    if (!(coarse_sigma >= 0.0)) throw ParameterError("coarse_sigma must be >= 0");
    if (!(coarse_fraction > 0.0 && coarse_fraction <= 1.0)) {
      throw ParameterError("coarse_fraction must be in (0, 1]");
    }
    hallucination.validate();
  }
};

/// Stand-in for a restoration backbone.
///
/// The implied clean image is blur(f(cond), sigma_c(t)) + h, where
///   f(cond) = cond + gain * (cond - blur(cond, detail_sigma))
/// sharpens the condition, sigma_c(t) is the coarse-to-fine warm-up and
/// h = amplitude * field is seeded spurious detail whose target amplitude
/// a(t) = a_max (1 - t/T)^p grows toward t = 0.
/// Without latent memory the amplitude is a(t) itself. With latent memory it
/// is k * r + (1 - k) * a(t), where r is the amplitude the latent already
/// carries along the field and k = 1 - t/T.
class RestorationDenoiser {
 public:
  RestorationDenoiser(NoiseSchedule sched, RestorationSpec spec, int width, int height, int channels)
      : sched_(std::move(sched)), spec_(spec) {
    spec_.validate();
    if (spec_.hallucination.a_max > 0.0) {
      field_ = hallucination_field(width, height, channels, spec_.hallucination);
      for (double v : field_.values()) field_energy_ += v * v;
    }
  }

  /// Conditioned content f(cond).
  LatentImage enhance(const LatentImage& cond) const {
    if (spec_.detail_gain == 0.0) return cond;
    const LatentImage low = gaussian_blur(cond, spec_.detail_sigma);
    const double g = spec_.detail_gain;
    return zip_with(cond, low, [g](double c, double l) { return c + g * (c - l); }, "enhance");
  }

  double coarse_sigma(int t) const {
    const double ramp = (static_cast<double>(t) / sched_.steps() - (1.0 - spec_.coarse_fraction)) /
                        spec_.coarse_fraction;
    return spec_.coarse_sigma * std::max(0.0, ramp);
  }

  double target_amplitude(int t) const {
    const double frac = 1.0 - static_cast<double>(t) / sched_.steps();
    return spec_.hallucination.a_max * std::pow(frac, spec_.hallucination.exponent);
  }

  LatentImage implied_clean(const LatentImage& z, const LatentImage& cond, int t) const {
    detail::require_step(t, sched_);
    require_same_shape(z, cond, "RestorationDenoiser");
    LatentImage clean = enhance(cond);
    const double sigma = coarse_sigma(t);
    if (sigma > 0.0) clean = gaussian_blur(clean, sigma);
    if (spec_.hallucination.a_max == 0.0) return clean;
    require_same_shape(z, field_, "RestorationDenoiser field");

    double amplitude = target_amplitude(t);
    if (spec_.hallucination.latent_memory) {
      const double inv_signal = 1.0 / std::sqrt(sched_.alpha_bar(t));
      auto zv = z.values();
      auto cv = clean.values();
      auto fv = field_.values();
      double proj = 0.0;
      for (std::size_t i = 0; i < zv.size(); ++i) proj += (zv[i] * inv_signal - cv[i]) * fv[i];
      const double carried = proj / field_energy_;
      const double keep = 1.0 - static_cast<double>(t) / sched_.steps();
      amplitude = keep * carried + (1.0 - keep) * amplitude;
    }
    auto cv = clean.values();
    auto fv = field_.values();
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] += amplitude * fv[i];
    return clean;
  }

  LatentImage predict(const LatentImage& z, const LatentImage& cond, int t) const {
    return noise_for_clean(z, implied_clean(z, cond, t), t, sched_);
  }

  const RestorationSpec& spec() const noexcept { return spec_; }
  const LatentImage& field() const noexcept { return field_; }

 private:
  NoiseSchedule sched_;
  RestorationSpec spec_;
  LatentImage field_;
  double field_energy_ = 0.0;
};

}  // namespace structsr

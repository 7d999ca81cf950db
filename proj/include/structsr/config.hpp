#pragma once

// Binds RunConfig to command-line flags and a TOML/INI config file.
// Config keys are the long flag names without the leading dashes, e.g.
// `tsas-fraction = 0.3`; flags given on the command line win.

#include <CLI11.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "structsr/errors.hpp"
#include "structsr/harness.hpp"

namespace structsr {

inline std::vector<Mode> parse_modes(const std::string& list) {
  std::vector<Mode> modes;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const Mode m = parse_mode(item);
    if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
  }
  if (modes.empty()) throw ParameterError("modes list is empty");
  return modes;
}

inline DenoiserKind parse_denoiser_kind(const std::string& s) {
  if (s == "oracle") return DenoiserKind::Oracle;
  if (s == "restoration") return DenoiserKind::Restoration;
  throw ParameterError("unknown denoiser '" + s + "'");
}

inline SsimWindow parse_ssim_window(const std::string& s) {
  if (s == "gaussian") return SsimWindow::Gaussian;
  if (s == "uniform") return SsimWindow::Uniform;
  if (s == "global") return SsimWindow::Global;
  throw ParameterError("unknown ssim window '" + s + "'");
}

/// Registers every RunConfig knob on `app`; parsed values are written into `cfg`.
inline void bind_run_config(CLI::App& app, RunConfig& cfg) {
  app.set_config("--config", "", "TOML/INI file with default values for any flag");

  app.add_option_function<std::string>("--input", [&cfg](const std::string& v) { cfg.input_dir = v; },
                                       "Directory of HR images");
  app.add_option_function<std::string>("--output", [&cfg](const std::string& v) { cfg.output_dir = v; },
                                       "Output directory");
  app.add_option("--timesteps", cfg.timesteps, "Total inference steps T")->capture_default_str();
  app.add_option("--tsas-fraction", cfg.t_sas_fraction, "Screening window as a fraction of T")
      ->capture_default_str();
  app.add_option_function<std::string>("--modes", [&cfg](const std::string& v) { cfg.modes = parse_modes(v); },
                                       "Comma list of baseline,structsr,wo_sce,wo_ide");
  app.add_option("--seed", cfg.seed, "Run seed")->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "Worker threads, 0 = all cores")->capture_default_str();
  app.add_flag("--diagnostics", cfg.diagnostics, "Measure S_t at every step and check seed sharing");
  app.add_option_function<int>("--crop", [&cfg](int v) { cfg.crop = v; }, "Center-crop size");

  app.add_option("--beta-start", cfg.beta_start)->capture_default_str();
  app.add_option("--beta-end", cfg.beta_end)->capture_default_str();

  app.add_option("--scale", cfg.degradation.scale_factor, "Downsampling factor")->capture_default_str();
  app.add_option("--blur-sigma", cfg.degradation.blur_sigma, "Gaussian blur sigma, 0 = off")
      ->capture_default_str();
  app.add_option_function<int>(
      "--jpeg-quality",
      [&cfg](int q) {
        if (q == 0) {
          cfg.degradation.jpeg_quality.reset();
        } else {
          cfg.degradation.jpeg_quality = q;
        }
      },
      "JPEG quality 1..100, 0 = off");

  app.add_option_function<std::string>(
      "--denoiser", [&cfg](const std::string& v) { cfg.denoiser.kind = parse_denoiser_kind(v); },
      "oracle or restoration");
  auto& rs = cfg.denoiser.restoration;
  app.add_option("--detail-gain", rs.detail_gain)->capture_default_str();
  app.add_option("--detail-sigma", rs.detail_sigma)->capture_default_str();
  app.add_option("--coarse-sigma", rs.coarse_sigma, "Content blur at t = T")->capture_default_str();
  app.add_option("--coarse-fraction", rs.coarse_fraction, "Fraction of T spent resolving coarse content")
      ->capture_default_str();
  auto& hs = rs.hallucination;
  app.add_option("--a-max", hs.a_max, "Hallucination amplitude at t = 0")->capture_default_str();
  app.add_option("--hallucination-exponent", hs.exponent)->capture_default_str();
  app.add_option("--band-inner-sigma", hs.band_inner_sigma)->capture_default_str();
  app.add_option("--band-outer-sigma", hs.band_outer_sigma)->capture_default_str();
  app.add_option("--hallucination-seed", hs.seed)->capture_default_str();
  app.add_option("--latent-memory", hs.latent_memory)->capture_default_str();

  app.add_option_function<std::string>(
      "--ssim-window", [&cfg](const std::string& v) { cfg.ssim.window = parse_ssim_window(v); },
      "gaussian, uniform or global");
  app.add_option("--ssim-size", cfg.ssim.size)->capture_default_str();
  app.add_option("--ssim-sigma", cfg.ssim.sigma)->capture_default_str();
  app.add_option("--ssim-c1", cfg.ssim.c1)->capture_default_str();
  app.add_option("--ssim-c2", cfg.ssim.c2)->capture_default_str();

  app.add_option_function<double>("--force-s-max", [&cfg](double v) { cfg.force_s_max = v; },
                                  "Override the screened S_max");
  app.add_flag("--record-runtime", cfg.record_runtime, "Fill runtime_ms in report.csv");
  app.add_option("--write-images", cfg.write_images, "Write output PNGs")->capture_default_str();
}

/// RunConfig from a config file alone.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("config not found: " + path.string());
  RunConfig cfg;
  CLI::App app;
  bind_run_config(app, cfg);
  app.allow_config_extras(CLI::config_extras_mode::error);
  try {
    app.parse(std::vector<std::string>{path.string(), "--config"});
  } catch (const CLI::ParseError& e) {
    throw ParameterError(std::string("config error: ") + e.what());
  }
  return cfg;
}

}  // namespace structsr

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "structsr.hpp"

namespace {

using namespace structsr;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

void require_dirs(const RunConfig& cfg) {
  if (cfg.input_dir.empty()) throw ParameterError("--input is required");
  if (cfg.output_dir.empty()) throw ParameterError("--output is required");
}

void print_summary(const ExperimentReport& report) {
  for (const auto& s : report.summary()) {
    fmt::print("{:<9} n={:<3} psnr={:.4f} dB  ssim={:.4f}", mode_name(s.mode), s.count, s.mean_psnr_db,
               s.mean_ssim);
    if (s.mode != Mode::Baseline && !std::isnan(s.psnr_gain_pct)) {
      fmt::print("  ({:+.2f}% psnr, {:+.2f}% ssim)", s.psnr_gain_pct, s.ssim_gain_pct);
    }
    fmt::print("\n");
  }
  if (report.skipped_inputs > 0) fmt::print(stderr, "skipped {} unreadable input(s)\n", report.skipped_inputs);
  for (const auto& f : report.failures) fmt::print(stderr, "failed: {}: {}\n", f.image, f.message);
}

int exit_status(const ExperimentReport& report) { return report.failures.empty() ? kExitOk : kExitPartial; }

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Structure-aware screening for diffusion super-resolution"};
  app.require_subcommand(1);
  bind_run_config(app, cfg);

  auto* run = app.add_subcommand("run", "Run every mode on a corpus and write report.csv")->fallthrough();

  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5};
  auto* sweep = app.add_subcommand("sweep", "Repeat the experiment for several screening fractions")->fallthrough();
  sweep->add_option("--fractions", fractions, "Comma list of T_SAS fractions")->delimiter(',')->capture_default_str();

  std::string degrade_in, degrade_out;
  auto* degrade_cmd = app.add_subcommand("degrade", "Synthesize an LR image from an HR image")->fallthrough();
  degrade_cmd->add_option("hr", degrade_in, "HR image")->required();
  degrade_cmd->add_option("lr", degrade_out, "LR output (.png, .ppm or .pgm)")->required();

  std::string metric_a, metric_b;
  auto* metrics_cmd = app.add_subcommand("metrics", "PSNR and SSIM between two images")->fallthrough();
  metrics_cmd->add_option("a", metric_a)->required();
  metrics_cmd->add_option("b", metric_b)->required();

  auto* trace = app.add_subcommand("trace", "Record S_t trajectories at three degradation levels")->fallthrough();

  int synth_count = 10;
  int synth_size = 64;
  int synth_channels = 1;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus to --output")->fallthrough();
  synth->add_option("--count", synth_count)->capture_default_str();
  synth->add_option("--size", synth_size)->capture_default_str();
  synth->add_option("--channels", synth_channels)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFatal;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFatal;
  }

  try {
    if (run->parsed()) {
      require_dirs(cfg);
      const auto report = run_experiment(cfg);
      print_summary(report);
      fmt::print("report: {}\n", (cfg.output_dir / "report.csv").string());
      return exit_status(report);
    }
    if (sweep->parsed()) {
      require_dirs(cfg);
      const auto result = sweep_tsas(cfg, fractions);
      int status = kExitOk;
      for (std::size_t i = 0; i < result.reports.size(); ++i) {
        fmt::print("fraction {}\n", format_number(result.fractions[i]));
        print_summary(result.reports[i]);
        if (exit_status(result.reports[i]) != kExitOk) status = kExitPartial;
      }
      if (result.best_fraction_by_ssim) {
        fmt::print("best fraction by ssim: {}\n", format_number(*result.best_fraction_by_ssim));
      }
      fmt::print("sweep: {}\n", result.combined_csv.string());
      return status;
    }
    if (degrade_cmd->parsed()) {
      ImageBuf hr = read_image(degrade_in);
      if (cfg.crop) hr = center_crop(hr, *cfg.crop, *cfg.crop);
      const ImageBuf lr = degrade(hr, cfg.degradation, cfg.seed);
      write_image(degrade_out, lr);
      fmt::print("{} {}x{} -> {}x{}\n", cfg.degradation.label(), hr.width(), hr.height(), lr.width(), lr.height());
      return kExitOk;
    }
    if (metrics_cmd->parsed()) {
      const ImageBuf a = read_image(metric_a);
      const ImageBuf b = read_image(metric_b);
      fmt::print("psnr_db,ssim\n{},{}\n", format_number(psnr(a, b)), format_number(ssim(a, b, cfg.ssim)));
      return kExitOk;
    }
    if (trace->parsed()) {
      require_dirs(cfg);
      fmt::print("index: {}\n", trace_trajectories(cfg).string());
      return kExitOk;
    }
    if (synth->parsed()) {
      if (cfg.output_dir.empty()) throw ParameterError("--output is required");
      if (synth_count < 1 || synth_size < 8) throw ParameterError("synth needs --count >= 1 and --size >= 8");
      if (synth_channels != 1 && synth_channels != 3) throw ParameterError("--channels must be 1 or 3");
      std::filesystem::create_directories(cfg.output_dir);
      for (int i = 0; i < synth_count; ++i) {
        const auto path = cfg.output_dir / fmt::format("img_{:03d}.png", i);
        write_image(path, synthetic_scene(synth_size, mix_seed(cfg.seed + static_cast<std::uint64_t>(i)),
                                          synth_channels));
      }
      fmt::print("wrote {} image(s) to {}\n", synth_count, cfg.output_dir.string());
      return kExitOk;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFatal;
  }
  return kExitFatal;
}

#pragma once

// Experiment orchestration: corpus ingestion, baseline vs intervention runs,
// T_SAS sweeps, trajectory bundles and CSV reports.

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "structsr/degrade.hpp"
#include "structsr/diffusion.hpp"
#include "structsr/errors.hpp"
#include "structsr/image.hpp"
#include "structsr/image_io.hpp"
#include "structsr/metrics.hpp"
#include "structsr/structsr.hpp"

namespace structsr {

namespace fs = std::filesystem;

enum class Mode { Baseline, StructSr, WoSce, WoIde };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Baseline: return "baseline";
    case Mode::StructSr: return "structsr";
    case Mode::WoSce: return "wo_sce";
    case Mode::WoIde: return "wo_ide";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::Baseline, Mode::StructSr, Mode::WoSce, Mode::WoIde}) {
    if (mode_name(m) == s) return m;
  }
  throw ParameterError("unknown mode '" + std::string(s) + "'");
}

enum class DenoiserKind { Oracle, Restoration };

struct DenoiserSpec {
  DenoiserKind kind = DenoiserKind::Restoration;
  RestorationSpec restoration;
};

struct RunConfig {
  fs::path input_dir;
  fs::path output_dir;
  int timesteps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double t_sas_fraction = 0.3;
  DegradationSpec degradation{.scale_factor = 2, .blur_sigma = 1.0, .jpeg_quality = std::nullopt};
  DenoiserSpec denoiser;
  std::uint64_t seed = 0;
  std::vector<Mode> modes{Mode::Baseline, Mode::StructSr};
  bool diagnostics = false;
  std::optional<int> crop;
  /// Worker threads; 0 uses the hardware concurrency.
  int jobs = 0;
  SsimParams ssim{};
  std::optional<double> force_s_max;
  /// Fill runtime_ms in report.csv. Off by default so reports are reproducible byte for byte.
  bool record_runtime = false;
  bool write_images = true;

  void validate() const {
    if (timesteps < 2) throw ParameterError("timesteps must be >= 2");
    if (modes.empty()) throw ParameterError("at least one mode is required");
    if (crop && *crop < 1) throw ParameterError("crop must be >= 1");
    if (jobs < 0) throw ParameterError("jobs must be >= 0");
    degradation.validate();
    denoiser.restoration.validate();
    ssim.validate();
    (void)make_schedule(timesteps, beta_start, beta_end);
    const bool intervenes = std::any_of(modes.begin(), modes.end(), [](Mode m) { return m != Mode::Baseline; });
    if (intervenes) {
      StructSrParams p;
      p.t_sas_fraction = t_sas_fraction;
      p.screening_steps(timesteps);
    }
  }
};

/// Parameters for a mode; empty for the baseline.
inline std::optional<StructSrParams> mode_params(Mode mode, const RunConfig& cfg) {
  if (mode == Mode::Baseline) return std::nullopt;
  StructSrParams p;
  p.t_sas_fraction = cfg.t_sas_fraction;
  p.ssim = cfg.ssim;
  p.force_s_max = cfg.force_s_max;
  p.enable_sce = mode != Mode::WoSce;
  p.enable_ide = mode != Mode::WoIde;
  return p;
}

/// splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-image seed from the run seed and the image id, independent of corpus order.
inline std::uint64_t image_seed(std::uint64_t seed, std::string_view id) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return mix_seed(seed ^ h);
}

struct NamedImage {
  std::string id;
  ImageBuf image;
};

struct IngestResult {
  std::vector<NamedImage> images;
  int skipped = 0;
  std::vector<std::string> warnings;
};

/// Readable PNG/PPM/PGM files of `dir` in lexicographic order, optionally center-cropped.
inline IngestResult ingest(const fs::path& dir, std::optional<int> crop = std::nullopt) {
  if (!fs::is_directory(dir)) throw IoError("input directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  IngestResult result;
  for (const auto& file : files) {
    try {
      ImageBuf img = read_image(file);
      if (crop) img = center_crop(img, *crop, *crop);
      result.images.push_back({file.stem().string(), std::move(img)});
    } catch (const std::exception& e) {
      ++result.skipped;
      result.warnings.push_back(file.filename().string() + ": " + e.what());
    }
  }
  if (result.images.empty()) throw IoError("no readable images in " + dir.string());
  return result;
}

struct ReportRow {
  std::string image;
  Mode mode;
  double psnr_db;
  double ssim;
  /// Screened S_max and capture step; absent for the baseline.
  std::optional<double> s_max;
  std::optional<int> capture_t;
  double runtime_ms;
};

struct ImageFailure {
  std::string image;
  std::string message;
};

struct ModeSummary {
  Mode mode;
  int count;
  double mean_psnr_db;
  double mean_ssim;
  /// Relative change of the means against the baseline, in percent; NaN without a baseline.
  double psnr_gain_pct;
  double ssim_gain_pct;
};

inline constexpr std::string_view kReportHeader = "image,mode,psnr_db,ssim,s_max,capture_t,runtime_ms";

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<ImageFailure> failures;
  int skipped_inputs = 0;
  bool record_runtime = false;

  std::vector<ModeSummary> summary() const {
    std::vector<ModeSummary> out;
    for (Mode m : {Mode::Baseline, Mode::StructSr, Mode::WoSce, Mode::WoIde}) {
      double p = 0.0, s = 0.0;
      int n = 0;
      for (const auto& r : rows) {
        if (r.mode != m) continue;
        p += r.psnr_db;
        s += r.ssim;
        ++n;
      }
      if (n == 0) continue;
      out.push_back({m, n, p / n, s / n, std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN()});
    }
    const auto base = std::find_if(out.begin(), out.end(), [](const ModeSummary& s) { return s.mode == Mode::Baseline; });
    if (base != out.end()) {
      for (auto& s : out) {
        s.psnr_gain_pct = (s.mean_psnr_db - base->mean_psnr_db) / base->mean_psnr_db * 100.0;
        s.ssim_gain_pct = (s.mean_ssim - base->mean_ssim) / base->mean_ssim * 100.0;
      }
    }
    return out;
  }

  std::string report_csv() const {
    std::string out(kReportHeader);
    out += '\n';
    for (const auto& r : rows) {
      out += fmt::format("{},{},{},{},{},{},{}\n", r.image, mode_name(r.mode), format_number(r.psnr_db),
                         format_number(r.ssim), r.s_max ? format_number(*r.s_max) : "",
                         r.capture_t ? std::to_string(*r.capture_t) : "",
                         record_runtime ? format_number(r.runtime_ms) : "");
    }
    return out;
  }

  std::string summary_csv() const {
    std::string out = "mode,count,mean_psnr_db,mean_ssim,psnr_gain_pct,ssim_gain_pct\n";
    for (const auto& s : summary()) {
      out += fmt::format("{},{},{},{},{},{}\n", mode_name(s.mode), s.count, format_number(s.mean_psnr_db),
                         format_number(s.mean_ssim), format_number(s.psnr_gain_pct),
                         format_number(s.ssim_gain_pct));
    }
    return out;
  }

  std::string failures_csv() const {
    std::string out = "image,message\n";
    for (const auto& f : failures) {
      std::string msg = f.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out += f.image + "," + msg + "\n";
    }
    return out;
  }
};

inline void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

/// Denoiser chosen by DenoiserSpec, built for one image.
using AnyDenoiser = std::variant<OracleDenoiser, RestorationDenoiser>;

inline AnyDenoiser build_denoiser(const DenoiserSpec& spec, const NoiseSchedule& sched, const LatentImage& cond,
                                  std::uint64_t seed) {
  if (spec.kind == DenoiserKind::Oracle) return OracleDenoiser(cond, sched);
  RestorationSpec r = spec.restoration;
  r.hallucination.seed = mix_seed(r.hallucination.seed ^ seed);
  return RestorationDenoiser(sched, r, cond.width(), cond.height(), cond.channels());
}

struct ModeRun {
  Mode mode;
  InferenceResult result;
};

/// Degrades `hr` and runs every configured mode on it with a shared seed.
inline std::vector<ModeRun> run_modes(const ImageBuf& hr, const ImageBuf& lr, const RunConfig& cfg,
                                      const NoiseSchedule& sched, std::uint64_t seed) {
  const IdentityCodec codec;
  const LatentImage cond = codec.encode(resize(lr, hr.width(), hr.height()));
  const AnyDenoiser denoiser = build_denoiser(cfg.denoiser, sched, cond, seed);
  InferenceOptions opts{.out_width = hr.width(), .out_height = hr.height(), .diagnostics = cfg.diagnostics,
                        .ssim = cfg.ssim};
  std::vector<ModeRun> runs;
  for (Mode mode : cfg.modes) {
    runs.push_back({mode, std::visit(
                              [&](const auto& d) {
                                return run_inference(lr, d, codec, sched, mode_params(mode, cfg), seed, opts);
                              },
                              denoiser)});
  }
  if (cfg.diagnostics) {
    for (const auto& r : runs) {
      if (r.result.report.z_t_hash != runs.front().result.report.z_t_hash) {
        throw ContractError("initial latent differs between modes");
      }
    }
  }
  return runs;
}

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Runs every mode on every image and writes outputs under cfg.output_dir:
/// report.csv, summary.csv, failures.csv, <image>_<mode>.png, <image>_lr.png,
/// traj_<image>_<mode>.csv.
inline ExperimentReport run_experiment(const RunConfig& cfg) {
  cfg.validate();
  const IngestResult corpus = ingest(cfg.input_dir, cfg.crop);
  fs::create_directories(cfg.output_dir);
  const NoiseSchedule sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);

  struct Slot {
    std::vector<ReportRow> rows;
    std::optional<ImageFailure> failure;
  };
  std::vector<Slot> slots(corpus.images.size());

  detail::parallel_for(corpus.images.size(), cfg.jobs, [&](std::size_t i) {
    const auto& [id, hr] = corpus.images[i];
    try {
      const std::uint64_t seed = image_seed(cfg.seed, id);
      const ImageBuf lr = degrade(hr, cfg.degradation, seed);
      const auto runs = run_modes(hr, lr, cfg, sched, seed);
      if (cfg.write_images) write_image(cfg.output_dir / (id + "_lr.png"), lr);
      for (const auto& run : runs) {
        const auto& rep = run.result.report;
        ReportRow row{id, run.mode, psnr(run.result.image, hr), ssim(run.result.image, hr, cfg.ssim),
                      std::nullopt, std::nullopt, rep.wall_ms};
        if (run.mode != Mode::Baseline) {
          row.s_max = rep.s_max;
          row.capture_t = rep.capture_t;
        }
        slots[i].rows.push_back(std::move(row));
        const std::string stem = id + "_" + std::string(mode_name(run.mode));
        if (cfg.write_images) write_image(cfg.output_dir / (stem + ".png"), run.result.image);
        run.result.trajectory.write_csv(cfg.output_dir / ("traj_" + stem + ".csv"));
      }
    } catch (const std::exception& e) {
      slots[i].rows.clear();
      slots[i].failure = ImageFailure{id, e.what()};
    }
  });

  ExperimentReport report;
  report.record_runtime = cfg.record_runtime;
  report.skipped_inputs = corpus.skipped;
  for (auto& slot : slots) {
    for (auto& row : slot.rows) report.rows.push_back(std::move(row));
    if (slot.failure) report.failures.push_back(*slot.failure);
  }
  write_text(cfg.output_dir / "report.csv", report.report_csv());
  write_text(cfg.output_dir / "summary.csv", report.summary_csv());
  write_text(cfg.output_dir / "failures.csv", report.failures_csv());
  return report;
}

inline constexpr double kMinSweepFraction = 0.05;
inline constexpr double kMaxSweepFraction = 0.9;

struct SweepResult {
  std::vector<double> fractions;
  std::vector<ExperimentReport> reports;
  std::optional<double> best_fraction_by_ssim;
  fs::path combined_csv;
};

/// One experiment per screening fraction, each in output_dir/tsas_<fraction>,
/// plus output_dir/sweep.csv with one row of per-mode means per fraction and a
/// footer naming the fraction with the best mean SSIM.
inline SweepResult sweep_tsas(const RunConfig& cfg, std::span<const double> fractions) {
  if (fractions.empty()) throw ParameterError("sweep needs at least one fraction");
  for (double f : fractions) {
    if (!(f >= kMinSweepFraction && f <= kMaxSweepFraction)) {
      throw ParameterError(fmt::format("sweep fraction {} outside [{}, {}]", f, kMinSweepFraction, kMaxSweepFraction));
    }
  }
  SweepResult sweep;
  std::string csv = "fraction,t_sas";
  for (Mode m : cfg.modes) csv += fmt::format(",{0}_psnr_db,{0}_ssim", mode_name(m));
  csv += '\n';
  const Mode scored = std::find(cfg.modes.begin(), cfg.modes.end(), Mode::StructSr) != cfg.modes.end()
                          ? Mode::StructSr
                          : cfg.modes.front();
  double best_ssim = -std::numeric_limits<double>::infinity();
  for (double f : fractions) {
    RunConfig run_cfg = cfg;
    run_cfg.t_sas_fraction = f;
    run_cfg.output_dir = cfg.output_dir / ("tsas_" + format_number(f));
    ExperimentReport rep = run_experiment(run_cfg);
    const auto summary = rep.summary();
    csv += fmt::format("{},{}", format_number(f), std::lround(f * cfg.timesteps));
    for (Mode m : cfg.modes) {
      const auto it = std::find_if(summary.begin(), summary.end(), [m](const ModeSummary& s) { return s.mode == m; });
      if (it == summary.end()) {
        csv += ",,";
        continue;
      }
      csv += "," + format_number(it->mean_psnr_db) + "," + format_number(it->mean_ssim);
      if (m == scored && it->mean_ssim > best_ssim) {
        best_ssim = it->mean_ssim;
        sweep.best_fraction_by_ssim = f;
      }
    }
    csv += '\n';
    sweep.fractions.push_back(f);
    sweep.reports.push_back(std::move(rep));
  }
  csv += "# best_fraction_by_ssim=" + (sweep.best_fraction_by_ssim ? format_number(*sweep.best_fraction_by_ssim) : "") +
         " mode=" + std::string(mode_name(scored)) + "\n";
  fs::create_directories(cfg.output_dir);
  sweep.combined_csv = cfg.output_dir / "sweep.csv";
  write_text(sweep.combined_csv, csv);
  return sweep;
}

struct TrajectoryRun {
  std::string id;
  DegradationSpec degradation;
  Trajectory trajectory;
};

/// Writes <out>/<id>.csv per run and <out>/index.csv; returns the index path.
inline fs::path emit_trajectory_bundle(std::span<const TrajectoryRun> runs, const fs::path& out) {
  if (runs.empty()) throw ParameterError("trajectory bundle needs at least one run");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  std::string index = "run_id,label,scale_factor,blur_sigma,jpeg_quality,file\n";
  for (const auto& run : runs) {
    const std::string file = run.id + ".csv";
    run.trajectory.write_csv(out / file);
    const auto& d = run.degradation;
    index += fmt::format("{},{},{},{},{},{}\n", run.id, d.label(), d.scale_factor, format_number(d.blur_sigma),
                         d.jpeg_quality ? std::to_string(*d.jpeg_quality) : "", file);
  }
  const fs::path index_path = out / "index.csv";
  write_text(index_path, index);
  return index_path;
}

/// Degradation levels D, D+B and D+B+J derived from `spec`; blur and JPEG
/// fall back to sigma 1.0 and quality 50 when `spec` disables them.
inline std::vector<DegradationSpec> degradation_levels(const DegradationSpec& spec) {
  const double sigma = spec.blur_sigma > 0.0 ? spec.blur_sigma : 1.0;
  const int quality = spec.jpeg_quality.value_or(50);
  return {DegradationSpec{spec.scale_factor, 0.0, std::nullopt},
          DegradationSpec{spec.scale_factor, sigma, std::nullopt},
          DegradationSpec{spec.scale_factor, sigma, quality}};
}

/// Trajectory-only diagnostic: every image at the three degradation levels,
/// every configured mode, S_t measured at all steps. Returns the bundle index path.
inline fs::path trace_trajectories(const RunConfig& cfg) {
  RunConfig run_cfg = cfg;
  run_cfg.diagnostics = true;
  run_cfg.validate();
  const IngestResult corpus = ingest(cfg.input_dir, cfg.crop);
  const NoiseSchedule sched = make_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
  const auto levels = degradation_levels(cfg.degradation);

  std::vector<std::vector<TrajectoryRun>> per_image(corpus.images.size());
  detail::parallel_for(corpus.images.size(), cfg.jobs, [&](std::size_t i) {
    const auto& [id, hr] = corpus.images[i];
    const std::uint64_t seed = image_seed(cfg.seed, id);
    for (const auto& level : levels) {
      RunConfig level_cfg = run_cfg;
      level_cfg.degradation = level;
      const ImageBuf lr = degrade(hr, level, seed);
      for (auto& run : run_modes(hr, lr, level_cfg, sched, seed)) {
        std::string label = level.label();
        std::replace(label.begin(), label.end(), '+', '_');
        per_image[i].push_back({id + "_" + label + "_" + std::string(mode_name(run.mode)), level,
                                std::move(run.result.trajectory)});
      }
    }
  });
  std::vector<TrajectoryRun> runs;
  for (auto& v : per_image)
    for (auto& r : v) runs.push_back(std::move(r));
  return emit_trajectory_bundle(runs, cfg.output_dir);
}

}  // namespace structsr

#pragma once

// Full-reference metrics: windowed SSIM, PSNR and the per-timestep
// structural similarity S_t used by screening, plus trajectory recording.
//
// Both metrics work on luma; 3-channel inputs are converted with BT.601
// weights first. The dynamic range is 1.

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "structsr/errors.hpp"
#include "structsr/image.hpp"
#include "structsr/resample.hpp"

namespace structsr {

enum class SsimWindow {
  Gaussian,  ///< Gaussian weights of the given size and sigma.
  Uniform,   ///< Box window of the given size.
  Global,    ///< One window covering the whole image.
};

struct SsimParams {
  SsimWindow window = SsimWindow::Gaussian;
  int size = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;

  /// Single global statistic with one stabilizer constant in both terms.
  static SsimParams global(double o) { return {SsimWindow::Global, 0, 0.0, o, o}; }
  static SsimParams uniform(int size) { return {SsimWindow::Uniform, size, 0.0, 0.01 * 0.01, 0.03 * 0.03}; }

  void validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw ParameterError("ssim constants must be > 0");
    if (window != SsimWindow::Global) {
      if (size < 1 || size % 2 == 0) throw ParameterError("ssim window size must be odd");
      if (window == SsimWindow::Gaussian && !(sigma > 0.0)) {
        throw ParameterError("ssim gaussian sigma must be > 0");
      }
    }
  }
};

namespace detail {

/// 1-D window weights of length `size`, normalized to sum 1.
inline std::vector<double> ssim_window_taps(const SsimParams& p, int size) {
  std::vector<double> taps(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double w = p.window == SsimWindow::Gaussian ? std::exp(-(i * i) / (2.0 * p.sigma * p.sigma)) : 1.0;
    taps[static_cast<std::size_t>(i + r)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

/// Valid-mode separable filtering: output is (w - k + 1) x (h - k + 1).
inline std::vector<double> filter_valid(std::span<const double> src, int w, int h,
                                        const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

inline double ssim_term(double mx, double my, double vx, double vy, double cxy, double c1, double c2) {
  return ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace detail

/// Window size actually used for a w x h image: the configured size, shrunk to
/// the largest odd value that fits when the image is smaller than the window.
inline int effective_ssim_window(const SsimParams& p, int w, int h) {
  int k = std::min({p.size, w, h});
  if (k % 2 == 0) --k;
  return k;
}

inline double ssim(const ImageBuf& x, const ImageBuf& y, const SsimParams& params = {}) {
  params.validate();
  require_same_shape(x, y, "ssim");
  const ImageBuf lx = to_luma(x);
  const ImageBuf ly = to_luma(y);
  const auto a = lx.plane(0);
  const auto b = ly.plane(0);
  const int w = lx.width();
  const int h = lx.height();

  if (params.window == SsimWindow::Global) {
    const double n = static_cast<double>(a.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      mx += a[i];
      my += b[i];
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0, cxy = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      vx += (a[i] - mx) * (a[i] - mx);
      vy += (b[i] - my) * (b[i] - my);
      cxy += (a[i] - mx) * (b[i] - my);
    }
    return detail::ssim_term(mx, my, vx / n, vy / n, cxy / n, params.c1, params.c2);
  }

  const auto taps = detail::ssim_window_taps(params, effective_ssim_window(params, w, h));
  std::vector<double> xx(a.size()), yy(a.size()), xy(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    xx[i] = a[i] * a[i];
    yy[i] = b[i] * b[i];
    xy[i] = a[i] * b[i];
  }
  const auto mu_x = detail::filter_valid(a, w, h, taps);
  const auto mu_y = detail::filter_valid(b, w, h, taps);
  const auto e_xx = detail::filter_valid(xx, w, h, taps);
  const auto e_yy = detail::filter_valid(yy, w, h, taps);
  const auto e_xy = detail::filter_valid(xy, w, h, taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    sum += detail::ssim_term(mx, my, e_xx[i] - mx * mx, e_yy[i] - my * my, e_xy[i] - mx * my,
                             params.c1, params.c2);
  }
  return sum / static_cast<double>(mu_x.size());
}

inline double mse(const ImageBuf& x, const ImageBuf& y) {
  require_same_shape(x, y, "mse");
  const ImageBuf lx = to_luma(x);
  const ImageBuf ly = to_luma(y);
  const auto a = lx.plane(0);
  const auto b = ly.plane(0);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

/// PSNR in dB on luma; +infinity for identical images.
inline double psnr(const ImageBuf& x, const ImageBuf& y) {
  const double e = mse(x, y);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / e);
}

/// SSIM between a reconstruction and the LR input bicubically resized to match it.
inline double structural_similarity_at_step(const ImageBuf& recon, const ImageBuf& lr,
                                            const SsimParams& params = {}) {
  const ImageBuf up = (lr.width() == recon.width() && lr.height() == recon.height())
                          ? lr
                          : resize(lr, recon.width(), recon.height());
  return ssim(recon, up, params);
}

/// Decimal text that parses back to the same double.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

inline double parse_number(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParameterError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

struct TrajectoryEntry {
  int t;
  double s;
  friend bool operator==(const TrajectoryEntry&, const TrajectoryEntry&) = default;
};

/// S_t values in inference order; timesteps strictly decrease.
class Trajectory {
 public:
  void push(int t, double s) {
    if (!entries_.empty() && t >= entries_.back().t) {
      throw ContractError("trajectory timesteps must strictly decrease");
    }
    if (!std::isfinite(s)) throw NumericError("non-finite SSIM at t=" + std::to_string(t));
    entries_.push_back({t, s});
  }

  const std::vector<TrajectoryEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Entry with the largest s; the latest one on ties.
  const TrajectoryEntry& max_entry() const {
    if (entries_.empty()) throw ContractError("empty trajectory");
    const TrajectoryEntry* best = &entries_.front();
    for (const auto& e : entries_)
      if (e.s >= best->s) best = &e;
    return *best;
  }

  std::string to_csv() const {
    std::string out = "t,ssim\n";
    for (const auto& e : entries_) out += fmt::format("{},{}\n", e.t, format_number(e.s));
    return out;
  }

  static Trajectory from_csv(std::string_view text) {
    Trajectory traj;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != "t,ssim") throw ParameterError("trajectory CSV must start with 't,ssim'");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw ParameterError("malformed trajectory row: " + line);
      traj.push(static_cast<int>(parse_number(std::string_view(line).substr(0, comma))),
                parse_number(std::string_view(line).substr(comma + 1)));
    }
    return traj;
  }

  void write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    out << to_csv();
    if (!out) throw IoError("cannot write " + path.string());
  }

  static Trajectory read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_csv(buf.str());
  }

 private:
  std::vector<TrajectoryEntry> entries_;
};

}  // namespace structsr

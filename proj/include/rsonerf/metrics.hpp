#pragma once

// Image-quality metrics for evaluation reports: PSNR, SSIM (luma, 11x11
// Gaussian window, sigma 1.5, the reference constants), and the per-view
// report with optional externally computed LPIPS.

#include "rsonerf/core.hpp"
#include "rsonerf/image.hpp"

#include <map>
#include <optional>
#include <string>

namespace rsonerf::metrics {

// 10 log10(max^2 / MSE) over all pixels and channels; +infinity when the
// images agree exactly. Channel counts and dimensions must match.
double psnr(const img::ImageF& a, const img::ImageF& b, double max_value = 1.0);

// Mean SSIM over valid 11x11 windows of the Rec.601 luma; dynamic_range is
// the L in C1 = (0.01 L)^2, C2 = (0.03 L)^2. Images must be at least 11x11.
double ssim(const img::ImageF& a, const img::ImageF& b, double dynamic_range = 1.0);

struct MetricRow {
  std::string view_id;
  double psnr = 0;
  double ssim = 0;
  std::optional<double> lpips;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_psnr = 0;
  double mean_ssim = 0;
  std::optional<double> mean_lpips;

  std::string to_text() const;   // aligned human-readable table
  std::string to_jsonl() const;  // one machine-readable record per row
  static MetricReport from_jsonl(const std::string& text);
  static MetricReport from_rows(std::vector<MetricRow> rows);
};

// Per-view PSNR/SSIM against ground truth; the LPIPS column appears only
// when the caller supplies values (computing LPIPS needs pretrained network
// weights and is out of scope).
MetricReport build_report(const std::vector<std::string>& view_ids,
                          const std::vector<img::ImageF>& rendered,
                          const std::vector<img::ImageF>& truth,
                          const std::map<std::string, double>* lpips = nullptr,
                          double max_value = 1.0);

// "view_id value" per line.
std::map<std::string, double> load_lpips_file(const std::string& path);

}  // namespace rsonerf::metrics

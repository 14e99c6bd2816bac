#include "rsonerf/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rsonerf::metrics {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

void check_dims(const img::ImageF& a, const img::ImageF& b, const char* who) {
  require(a.width == b.width && a.height == b.height && a.channels == b.channels,
          cat(who, ": image mismatch ", a.width, "x", a.height, "x", a.channels,
              " vs ", b.width, "x", b.height, "x", b.channels));
}

// Rec.601 luma; gray images pass through, alpha is ignored.
std::vector<double> luma(const img::ImageF& image) {
  std::vector<double> out(std::size_t(image.width) * image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      double v;
      if (image.channels >= 3)
        v = 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
            0.114 * image.at(x, y, 2);
      else
        v = image.at(x, y, 0);
      out[std::size_t(y) * image.width + x] = v;
    }
  return out;
}

std::array<double, kWindow> gaussian_kernel() {
  std::array<double, kWindow> k{};
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - (kWindow - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// separable valid-region Gaussian filter; output is (w-10) x (h-10)
std::vector<double> gauss_valid(const std::vector<double>& in, int w, int h) {
  const auto kernel = gaussian_kernel();
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(std::size_t(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += kernel[k] * in[std::size_t(y) * w + x + k];
      rows[std::size_t(y) * ow + x] = acc;
    }
  std::vector<double> out(std::size_t(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += kernel[k] * rows[std::size_t(y + k) * ow + x];
      out[std::size_t(y) * ow + x] = acc;
    }
  return out;
}

nlohmann::json psnr_to_json(double v) {
  if (std::isinf(v)) return nullptr;  // JSON has no infinity
  return v;
}

double psnr_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

double psnr(const img::ImageF& a, const img::ImageF& b, double max_value) {
  check_dims(a, b, "psnr");
  require(max_value > 0, "psnr: max_value must be positive");
  require(!a.data.empty(), "psnr: empty images");
  double sum = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    sum += d * d;
  }
  const double mse = sum / double(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse);
}

double ssim(const img::ImageF& a, const img::ImageF& b, double dynamic_range) {
  check_dims(a, b, "ssim");
  require(a.width >= kWindow && a.height >= kWindow,
          cat("ssim: images must be at least ", kWindow, "x", kWindow, ", got ", a.width,
              "x", a.height));
  require(dynamic_range > 0, "ssim: dynamic_range must be positive");
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);

  const auto la = luma(a), lb = luma(b);
  const int w = a.width, h = a.height;
  std::vector<double> aa(la.size()), bb(la.size()), ab(la.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    aa[i] = la[i] * la[i];
    bb[i] = lb[i] * lb[i];
    ab[i] = la[i] * lb[i];
  }
  const auto mu1 = gauss_valid(la, w, h);
  const auto mu2 = gauss_valid(lb, w, h);
  const auto m11 = gauss_valid(aa, w, h);
  const auto m22 = gauss_valid(bb, w, h);
  const auto m12 = gauss_valid(ab, w, h);

  double total = 0;
  for (std::size_t i = 0; i < mu1.size(); ++i) {
    const double var1 = m11[i] - mu1[i] * mu1[i];
    const double var2 = m22[i] - mu2[i] * mu2[i];
    const double cov = m12[i] - mu1[i] * mu2[i];
    const double num = (2.0 * mu1[i] * mu2[i] + c1) * (2.0 * cov + c2);
    const double den = (mu1[i] * mu1[i] + mu2[i] * mu2[i] + c1) * (var1 + var2 + c2);
    total += num / den;
  }
  return total / double(mu1.size());
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  const bool with_lpips = mean_lpips.has_value();
  out << "view                 psnr_db     ssim";
  if (with_lpips) out << "    lpips";
  out << "\n";
  auto row_line = [&](const std::string& id, double p, double s,
                      const std::optional<double>& l) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %9s %8.4f", id.c_str(),
                  format_psnr(p).c_str(), s);
    out << buf;
    if (with_lpips) {
      if (l)
        std::snprintf(buf, sizeof(buf), " %8.4f", *l);
      else
        std::snprintf(buf, sizeof(buf), " %8s", "-");
      out << buf;
    }
    out << "\n";
  };
  for (const auto& r : rows) row_line(r.view_id, r.psnr, r.ssim, r.lpips);
  row_line("mean", mean_psnr, mean_ssim, mean_lpips);
  return out.str();
}

std::string MetricReport::to_jsonl() const {
  std::ostringstream out;
  for (const auto& r : rows) {
    nlohmann::json j;
    j["view"] = r.view_id;
    j["psnr"] = psnr_to_json(r.psnr);
    j["ssim"] = r.ssim;
    if (r.lpips) j["lpips"] = *r.lpips;
    out << j.dump() << "\n";
  }
  return out.str();
}

MetricReport MetricReport::from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    MetricRow row;
    row.view_id = j.at("view").get<std::string>();
    row.psnr = psnr_from_json(j.at("psnr"));
    row.ssim = j.at("ssim").get<double>();
    if (j.contains("lpips")) row.lpips = j.at("lpips").get<double>();
    rows.push_back(std::move(row));
  }
  return from_rows(std::move(rows));
}

MetricReport MetricReport::from_rows(std::vector<MetricRow> rows) {
  require(!rows.empty(), "metric report: no rows");
  MetricReport report;
  report.rows = std::move(rows);
  double psnr_sum = 0, ssim_sum = 0, lpips_sum = 0;
  bool all_lpips = true;
  for (const auto& r : report.rows) {
    psnr_sum += r.psnr;
    ssim_sum += r.ssim;
    if (r.lpips)
      lpips_sum += *r.lpips;
    else
      all_lpips = false;
  }
  const double n = double(report.rows.size());
  report.mean_psnr = psnr_sum / n;
  report.mean_ssim = ssim_sum / n;
  if (all_lpips) report.mean_lpips = lpips_sum / n;
  return report;
}

MetricReport build_report(const std::vector<std::string>& view_ids,
                          const std::vector<img::ImageF>& rendered,
                          const std::vector<img::ImageF>& truth,
                          const std::map<std::string, double>* lpips, double max_value) {
  require(!view_ids.empty(), "build_report: empty pair list");
  require(view_ids.size() == rendered.size() && view_ids.size() == truth.size(),
          cat("build_report: ", view_ids.size(), " ids, ", rendered.size(),
              " renders, ", truth.size(), " truths"));
  std::vector<MetricRow> rows;
  for (std::size_t i = 0; i < view_ids.size(); ++i) {
    MetricRow row;
    row.view_id = view_ids[i];
    row.psnr = psnr(rendered[i], truth[i], max_value);
    row.ssim = ssim(rendered[i], truth[i], max_value);
    if (lpips) {
      const auto it = lpips->find(row.view_id);
      if (it != lpips->end()) row.lpips = it->second;
    }
    rows.push_back(std::move(row));
  }
  return MetricReport::from_rows(std::move(rows));
}

std::map<std::string, double> load_lpips_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("load_lpips_file: cannot open " + path);
  std::map<std::string, double> out;
  std::string id;
  double value;
  while (in >> id >> value) out[id] = value;
  return out;
}

}  // namespace rsonerf::metrics

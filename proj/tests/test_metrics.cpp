#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rsonerf/metrics.hpp"
#include "testing_util.hpp"

#include <filesystem>
#include <fstream>

using namespace rsonerf;
using namespace rsonerf::img;
using namespace rsonerf::metrics;

namespace {

ImageF random_image(int w, int h, int c, std::uint64_t seed, double lo = 0.0,
                    double hi = 1.0) {
  ImageF image(w, h, c);
  Rng rng(seed);
  for (auto& v : image.data) v = static_cast<float>(rng.uniform(lo, hi));
  return image;
}

// Independent SSIM reference: direct 2D convolution, no separable pass.
// Weighted window moments computed in place from the 2D Gaussian.
double reference_ssim(const ImageF& a, const ImageF& b, double dynamic_range) {
  const int w = a.width, h = a.height;
  auto luma_of = [](const ImageF& im, int x, int y) {
    if (im.channels >= 3)
      return 0.299 * im.at(x, y, 0) + 0.587 * im.at(x, y, 1) + 0.114 * im.at(x, y, 2);
    return double(im.at(x, y, 0));
  };
  double kernel[11][11];
  double ksum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double dx = i - 5.0, dy = j - 5.0;
      kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      ksum += kernel[i][j];
    }
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) kernel[i][j] /= ksum;

  const double c1 = std::pow(0.01 * dynamic_range, 2);
  const double c2 = std::pow(0.03 * dynamic_range, 2);
  double total = 0;
  int count = 0;
  for (int y = 0; y + 11 <= h; ++y)
    for (int x = 0; x + 11 <= w; ++x) {
      double mu1 = 0, mu2 = 0, m11 = 0, m22 = 0, m12 = 0;
      for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) {
          const double va = luma_of(a, x + i, y + j);
          const double vb = luma_of(b, x + i, y + j);
          const double k = kernel[j][i];
          mu1 += k * va;
          mu2 += k * vb;
          m11 += k * va * va;
          m22 += k * vb * vb;
          m12 += k * va * vb;
        }
      const double var1 = m11 - mu1 * mu1, var2 = m22 - mu2 * mu2;
      const double cov = m12 - mu1 * mu2;
      total += ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) /
               ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("psnr formula anchors") {
  auto a = random_image(8, 6, 3, 1);
  CHECK(std::isinf(psnr(a, a)));

  // full-range error at 8 bits is 0 dB
  ImageF zeros(8, 8, 1), full(8, 8, 1);
  for (auto& v : full.data) v = 255.f;
  CHECK(psnr(zeros, full, 255.0) == doctest::Approx(0.0).epsilon(1e-12));

  // uniform +16 offset at 8 bits
  ImageF base(16, 16, 3), offset(16, 16, 3);
  Rng rng(3);
  for (std::size_t i = 0; i < base.data.size(); ++i) {
    base.data[i] = static_cast<float>(rng.uniform_index(200));
    offset.data[i] = base.data[i] + 16.f;
  }
  const double expected = 10.0 * std::log10(255.0 * 255.0 / (16.0 * 16.0));
  CHECK(psnr(base, offset, 255.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(psnr(base, offset, 255.0) == doctest::Approx(24.0485).epsilon(1e-4));
}

TEST_CASE("psnr and ssim are symmetric") {
  auto a = random_image(24, 20, 3, 11);
  auto b = random_image(24, 20, 3, 12);
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("psnr strictly decreases with noise amplitude") {
  auto base = random_image(32, 32, 3, 21, 0.2, 0.8);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {4.0, 8.0, 16.0, 32.0}) {
    ImageF noisy = base;
    Rng rng(77);
    for (auto& v : noisy.data)
      v = static_cast<float>(v + rng.uniform(-amp / 255.0, amp / 255.0));
    const double p = psnr(base, noisy);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("psnr rejects mismatched dimensions") {
  auto a = random_image(8, 8, 3, 1);
  auto b = random_image(8, 9, 3, 1);
  CHECK_THROWS_AS(psnr(a, b), ContractError);
  CHECK_THROWS_AS(ssim(a, b), ContractError);
}

TEST_CASE("ssim of an image with itself is one, constants included") {
  auto a = random_image(16, 16, 3, 5);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  ImageF constant(12, 12, 1);
  for (auto& v : constant.data) v = 0.42f;
  CHECK(ssim(constant, constant) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim rejects images smaller than the window") {
  auto a = random_image(10, 12, 1, 2);
  CHECK_THROWS_AS(ssim(a, a), ContractError);
}

TEST_CASE("ssim is invariant to a joint constant shift") {
  auto a = random_image(20, 20, 1, 31, 0.1, 0.7);
  ImageF b = a;
  Rng rng(32);
  for (auto& v : b.data) v = static_cast<float>(v + rng.uniform(-0.02, 0.02));
  const double base = ssim(a, b);
  const float k = 1e-3f;
  ImageF ak = a, bk = b;
  for (auto& v : ak.data) v += k;
  for (auto& v : bk.data) v += k;
  CHECK(std::abs(ssim(ak, bk) - base) < 1e-6);
}

TEST_CASE("ssim matches the direct-convolution reference") {
  Rng seeds(1234);
  for (int trial = 0; trial < 6; ++trial) {
    auto a = random_image(21, 17, 3, seeds.next_u64());
    ImageF b = a;
    Rng rng(seeds.next_u64());
    for (auto& v : b.data) v = static_cast<float>(v * 0.9 + rng.uniform(0, 0.1));
    const double fast = ssim(a, b);
    const double slow = reference_ssim(a, b, 1.0);
    CHECK(std::abs(fast - slow) < 1e-6);
    CHECK(fast >= -1.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("report over a single identical pair") {
  auto a = random_image(16, 16, 3, 8);
  auto report = build_report({"view0"}, {a}, {a});
  REQUIRE(report.rows.size() == 1);
  CHECK(std::isinf(report.rows[0].psnr));
  CHECK(report.rows[0].ssim == doctest::Approx(1.0));
  CHECK(std::isinf(report.mean_psnr));
  CHECK(!report.mean_lpips.has_value());
  CHECK(report.to_text().find("inf") != std::string::npos);
}

TEST_CASE("report means average the rows and round-trip through jsonl") {
  auto a = random_image(16, 16, 3, 9);
  auto b = random_image(16, 16, 3, 10);
  auto c = random_image(16, 16, 3, 11);
  auto report = build_report({"v0", "v1"}, {a, a}, {b, c});
  CHECK(report.mean_psnr ==
        doctest::Approx(0.5 * (report.rows[0].psnr + report.rows[1].psnr)).epsilon(1e-12));
  CHECK(report.mean_ssim ==
        doctest::Approx(0.5 * (report.rows[0].ssim + report.rows[1].ssim)).epsilon(1e-12));

  const auto back = MetricReport::from_jsonl(report.to_jsonl());
  REQUIRE(back.rows.size() == 2);
  CHECK(back.mean_psnr == report.mean_psnr);
  CHECK(back.mean_ssim == report.mean_ssim);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.rows[i].view_id == report.rows[i].view_id);
    CHECK(back.rows[i].psnr == report.rows[i].psnr);
    CHECK(back.rows[i].ssim == report.rows[i].ssim);
  }
}

TEST_CASE("empty report is rejected") {
  CHECK_THROWS_AS(build_report({}, {}, {}), ContractError);
}

TEST_CASE("external lpips column merges by view id") {
  auto a = random_image(16, 16, 3, 13);
  auto b = random_image(16, 16, 3, 14);
  std::map<std::string, double> lpips = {{"v0", 0.12}, {"v1", 0.34}};
  auto report = build_report({"v0", "v1"}, {a, a}, {b, b}, &lpips);
  REQUIRE(report.rows[0].lpips.has_value());
  CHECK(*report.rows[0].lpips == 0.12);
  REQUIRE(report.mean_lpips.has_value());
  CHECK(*report.mean_lpips == doctest::Approx(0.23));
  CHECK(report.to_text().find("lpips") != std::string::npos);

  // partial LPIPS: no aggregate
  std::map<std::string, double> partial = {{"v0", 0.5}};
  auto partial_report = build_report({"v0", "v1"}, {a, a}, {b, b}, &partial);
  CHECK(!partial_report.mean_lpips.has_value());
}

TEST_CASE("lpips files parse as id/value lines") {
  auto dir = rsotest::fresh_temp_dir("lpips");
  const auto path = (dir / "lpips.txt").string();
  std::ofstream(path) << "view0 0.08\nview1 0.11\n";
  auto values = load_lpips_file(path);
  CHECK(values.at("view0") == 0.08);
  CHECK(values.at("view1") == 0.11);
  std::filesystem::remove_all(dir);
}

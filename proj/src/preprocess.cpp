#include "rsonerf/preprocess.hpp"

#include <cmath>

namespace rsonerf::prep {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  v = mx;
  s = (mx > 0) ? delta / mx : 0.0;
  if (delta <= 0 || s == 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = 60.0 * std::fmod((g - b) / delta + 6.0, 6.0);
  else if (mx == g)
    h = 60.0 * ((b - r) / delta + 2.0);
  else
    h = 60.0 * ((r - g) / delta + 4.0);
  if (h >= 360.0) h -= 360.0;
}

double hue_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

namespace {

// primary channel nearest to the key hue: despill target
int key_channel(double key_hue) {
  const double candidates[3] = {0.0, 120.0, 240.0};
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (hue_distance(key_hue, candidates[c]) < hue_distance(key_hue, candidates[best]))
      best = c;
  return best;
}

std::vector<std::uint8_t> box_blur_alpha(const std::vector<std::uint8_t>& alpha, int w,
                                         int h, int radius) {
  if (radius == 0) return alpha;
  std::vector<std::uint8_t> out(alpha.size());
  const int window = 2 * radius + 1;
  // two-pass separable blur with edge clamping
  std::vector<double> horizontal(alpha.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k) {
        const int xs = std::clamp(x + k, 0, w - 1);
        acc += alpha[std::size_t(y) * w + xs];
      }
      horizontal[std::size_t(y) * w + x] = acc / window;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k) {
        const int ys = std::clamp(y + k, 0, h - 1);
        acc += horizontal[std::size_t(ys) * w + x];
      }
      out[std::size_t(y) * w + x] =
          static_cast<std::uint8_t>(std::clamp(acc / window + 0.5, 0.0, 255.0));
    }
  return out;
}

}  // namespace

img::ImageU8 chroma_key(const img::ImageU8& image, const ChromaKeyConfig& cfg) {
  cfg.validate();
  require(image.channels == 3 || image.channels == 4,
          cat("chroma_key expects RGB or RGBA input, got ", image.channels, " channels"));
  const int w = image.width, h = image.height;

  std::vector<std::uint8_t> alpha(std::size_t(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double r = image.at(x, y, 0) / 255.0;
      const double g = image.at(x, y, 1) / 255.0;
      const double b = image.at(x, y, 2) / 255.0;
      double hh, ss, vv;
      rgb_to_hsv(r, g, b, hh, ss, vv);
      const bool keyed = hue_distance(hh, cfg.key_hue) <= cfg.hue_tolerance &&
                         ss >= cfg.min_saturation && vv >= cfg.min_value;
      alpha[std::size_t(y) * w + x] = keyed ? 0 : 255;
    }
  alpha = box_blur_alpha(alpha, w, h, cfg.feather_radius);

  img::ImageU8 out(w, h, 4);
  const int spill = key_channel(cfg.key_hue);
  const int other1 = (spill + 1) % 3, other2 = (spill + 2) % 3;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double rgb[3] = {image.at(x, y, 0) / 255.0, image.at(x, y, 1) / 255.0,
                       image.at(x, y, 2) / 255.0};
      const std::uint8_t a = alpha[std::size_t(y) * w + x];
      if (a > 0 && cfg.despill_strength > 0) {
        const double mean_other = 0.5 * (rgb[other1] + rgb[other2]);
        if (rgb[spill] > mean_other)
          rgb[spill] -= cfg.despill_strength * (rgb[spill] - mean_other);
      }
      for (int c = 0; c < 3; ++c)
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(rgb[c], 0.0, 1.0) * 255.0 + 0.5);
      out.at(x, y, 3) = a;
    }
  return out;
}

img::ImageU8 composite_over(const img::ImageU8& rgba, const Vec3<double>& background) {
  require(rgba.channels == 4, "composite_over expects RGBA input");
  require(background.minCoeff() >= 0 && background.maxCoeff() <= 1,
          "composite_over: background must lie in [0,1]");
  img::ImageU8 out(rgba.width, rgba.height, 3);
  for (int y = 0; y < rgba.height; ++y)
    for (int x = 0; x < rgba.width; ++x) {
      const double a = rgba.at(x, y, 3) / 255.0;
      for (int c = 0; c < 3; ++c) {
        const double fg = rgba.at(x, y, c) / 255.0;
        const double v = a * fg + (1.0 - a) * background[c];
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
      }
    }
  return out;
}

}  // namespace rsonerf::prep

#pragma once

// Chroma-key background removal: HSV range keying, alpha feathering, and
// despill of the key-adjacent channel. Produces RGBA training images from
// green-screen captures.

#include "rsonerf/core.hpp"
#include "rsonerf/image.hpp"

namespace rsonerf::prep {

struct ChromaKeyConfig {
  double key_hue = 120.0;       // degrees; 120 = green screen
  double hue_tolerance = 35.0;  // degrees either side of key_hue
  double min_saturation = 0.25;
  double min_value = 0.15;
  double despill_strength = 0.5;
  int feather_radius = 1;  // box-blur radius on the alpha mask, pixels

  void validate() const {
    require(key_hue >= 0 && key_hue < 360, "chroma: key_hue must lie in [0,360)");
    require(hue_tolerance > 0, "chroma: hue_tolerance must be positive");
    require(min_saturation >= 0 && min_saturation <= 1,
            "chroma: min_saturation must lie in [0,1]");
    require(min_value >= 0 && min_value <= 1, "chroma: min_value must lie in [0,1]");
    require(despill_strength >= 0 && despill_strength <= 1,
            "chroma: despill_strength must lie in [0,1]");
    require(feather_radius >= 0, "chroma: feather_radius must be >= 0");
  }
};

// Standard hexcone conversion; h in degrees [0,360), s and v in [0,1].
// Achromatic pixels (s = 0) report h = 0.
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);

// Circular distance between two hues, degrees in [0,180].
double hue_distance(double a, double b);

// RGB (or RGBA; alpha is replaced) -> RGBA with the key range knocked out.
img::ImageU8 chroma_key(const img::ImageU8& image, const ChromaKeyConfig& cfg);

// out = alpha * fg + (1 - alpha) * background, per pixel; RGBA -> RGB.
img::ImageU8 composite_over(const img::ImageU8& rgba, const Vec3<double>& background);

}  // namespace rsonerf::prep

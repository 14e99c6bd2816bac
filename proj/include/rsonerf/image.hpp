#pragma once

// Interleaved image buffers and the PNG / raw-float file formats. The PNG
// codec is deliberately minimal (8-bit, non-interlaced, gray/RGB/RGBA) so
// that output bytes are stable run to run.

#include <cstdint>
#include <string>
#include <vector>

namespace rsonerf::img {

struct ImageU8 {
  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> data;  // row-major, interleaved

  ImageU8() = default;
  ImageU8(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0) {}

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

struct ImageF {
  int width = 0, height = 0, channels = 0;
  std::vector<float> data;

  ImageF() = default;
  ImageF(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.f) {}

  float& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// [0,255] -> [0,1] and back (round-to-nearest, clamped).
ImageF to_float(const ImageU8& u);
ImageU8 to_u8(const ImageF& f);

void write_png(const std::string& path, const ImageU8& image);
ImageU8 read_png(const std::string& path);

// Little-endian float32 dump: "RSORAW1\n<w> <h> <c>\n" header then payload.
void write_raw_f32(const std::string& path, const ImageF& image);
ImageF read_raw_f32(const std::string& path);

}  // namespace rsonerf::img

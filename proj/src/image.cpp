#include "rsonerf/image.hpp"

#include "rsonerf/core.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace rsonerf::img {

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t read_u32_be(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc = crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

int color_type_for(int channels) {
  switch (channels) {
    case 1: return 0;
    case 2: return 4;
    case 3: return 2;
    case 4: return 6;
  }
  throw ContractError(cat("PNG: unsupported channel count ", channels));
}

int channels_for(int color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 4: return 2;
    case 6: return 4;
  }
  throw AbortError(cat("PNG: unsupported color type ", color_type,
                       " (palette and sub-byte formats are not handled)"));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

ImageF to_float(const ImageU8& u) {
  ImageF f(u.width, u.height, u.channels);
  for (std::size_t i = 0; i < u.data.size(); ++i)
    f.data[i] = static_cast<float>(u.data[i]) / 255.f;
  return f;
}

ImageU8 to_u8(const ImageF& f) {
  ImageU8 u(f.width, f.height, f.channels);
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    const float v = std::min(1.f, std::max(0.f, f.data[i]));
    u.data[i] = static_cast<std::uint8_t>(v * 255.f + 0.5f);
  }
  return u;
}

void write_png(const std::string& path, const ImageU8& image) {
  require(image.width > 0 && image.height > 0, "write_png: empty image");
  const int channels = image.channels;
  const int color_type = color_type_for(channels);

  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(image.width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(static_cast<std::uint8_t>(color_type));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace

  // filter byte 0 (None) per scanline keeps the encoder trivially stable
  const std::size_t stride = static_cast<std::size_t>(image.width) * channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * image.height);
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const auto* row = image.data.data() + static_cast<std::size_t>(y) * stride;
    raw.insert(raw.end(), row, row + stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> idat(bound);
  if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw AbortError("write_png: deflate failed");
  idat.resize(bound);

  std::vector<std::uint8_t> file(kSignature, kSignature + 8);
  append_chunk(file, "IHDR", ihdr);
  append_chunk(file, "IDAT", idat);
  append_chunk(file, "IEND", {});

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AbortError("write_png: cannot open " + path);
  out.write(reinterpret_cast<const char*>(file.data()),
            static_cast<std::streamsize>(file.size()));
  if (!out) throw AbortError("write_png: short write to " + path);
}

ImageU8 read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("read_png: cannot open " + path);
  std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (file.size() < 8 || std::memcmp(file.data(), kSignature, 8) != 0)
    throw AbortError("read_png: " + path + " is not a PNG file");

  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> idat;
  std::size_t off = 8;
  bool saw_end = false;
  while (off + 8 <= file.size() && !saw_end) {
    const std::uint32_t len = read_u32_be(&file[off]);
    if (off + 12 + len > file.size()) throw AbortError("read_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(&file[off + 4]);
    const std::uint8_t* payload = &file[off + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, "read_png: bad IHDR");
      width = static_cast<int>(read_u32_be(payload));
      height = static_cast<int>(read_u32_be(payload + 4));
      const int bit_depth = payload[8];
      if (bit_depth != 8)
        throw AbortError(cat("read_png: only 8-bit images supported, got depth ", bit_depth));
      channels = channels_for(payload[9]);
      if (payload[12] != 0) throw AbortError("read_png: interlaced PNGs not supported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_end = true;
    }
    off += 12 + len;
  }
  if (width <= 0 || height <= 0 || channels == 0)
    throw AbortError("read_png: missing IHDR in " + path);

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw AbortError("read_png: inflate failed for " + path);

  ImageU8 image(width, height, channels);
  const int bpp = channels;  // bytes per pixel at depth 8
  std::vector<std::uint8_t> prev(stride, 0);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[(stride + 1) * y];
    const std::uint8_t* src = &raw[(stride + 1) * y + 1];
    std::uint8_t* dst = image.data.data() + stride * y;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw AbortError(cat("read_png: unknown filter ", int(filter)));
      }
      dst[i] = static_cast<std::uint8_t>(v);
    }
    std::memcpy(prev.data(), dst, stride);
  }
  return image;
}

void write_raw_f32(const std::string& path, const ImageF& image) {
  static_assert(std::endian::native == std::endian::little,
                "raw dumps are little-endian");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AbortError("write_raw_f32: cannot open " + path);
  out << "RSORAW1\n" << image.width << " " << image.height << " " << image.channels << "\n";
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size() * 4));
  if (!out) throw AbortError("write_raw_f32: short write to " + path);
}

ImageF read_raw_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AbortError("read_raw_f32: cannot open " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "RSORAW1") throw AbortError("read_raw_f32: bad magic in " + path);
  int w = 0, h = 0, c = 0;
  in >> w >> h >> c;
  in.ignore(1);  // newline
  require(w > 0 && h > 0 && c > 0, "read_raw_f32: bad dimensions");
  ImageF image(w, h, c);
  in.read(reinterpret_cast<char*>(image.data.data()),
          static_cast<std::streamsize>(image.data.size() * 4));
  if (!in) throw AbortError("read_raw_f32: truncated payload in " + path);
  return image;
}

}  // namespace rsonerf::img

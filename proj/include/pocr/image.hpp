#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pocr {

struct ImageU8 {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, one byte per pixel

  std::uint8_t at(std::int64_t x, std::int64_t y) const {
    return pixels[static_cast<std::size_t>(y * width + x)];
  }
  void set(std::int64_t x, std::int64_t y, std::uint8_t v) {
    pixels[static_cast<std::size_t>(y * width + x)] = v;
  }
  bool operator==(const ImageU8&) const = default;
};

struct ImageRGB {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, RGB triples

  void set(std::int64_t x, std::int64_t y, std::uint8_t r, std::uint8_t g,
           std::uint8_t b) {
    const auto i = static_cast<std::size_t>(3 * (y * width + x));
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
  bool operator==(const ImageRGB&) const = default;
};

ImageU8 make_image(std::int64_t width, std::int64_t height, std::uint8_t fill = 0);
ImageRGB grayscale_to_rgb(const ImageU8& img);

// Binary PGM (P5, maxval 255) and PPM (P6).
void write_pgm(const ImageU8& img, const std::string& path);
ImageU8 read_pgm(const std::string& path);
void write_ppm(const ImageRGB& img, const std::string& path);
ImageRGB read_ppm(const std::string& path);

}  // namespace pocr

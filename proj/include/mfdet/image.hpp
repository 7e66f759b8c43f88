#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace mfdet {

/// 8-bit interleaved RGB image, row-major.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), rgb(w * h * 3, fill) {}

  std::uint8_t* pixel(std::size_t x, std::size_t y) { return &rgb[(y * width + x) * 3]; }
  const std::uint8_t* pixel(std::size_t x, std::size_t y) const { return &rgb[(y * width + x) * 3]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary P6, maxval 255.
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

std::uint8_t luminance(const std::uint8_t* px);

/// Draws a 1-pixel rectangle outline given normalized centre-form extents.
void draw_box(Image& image, float cx, float cy, float w, float h, std::array<std::uint8_t, 3> color);

}  // namespace mfdet

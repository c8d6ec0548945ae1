#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hsp {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* pixel(int r, int c) { return &rgb[(static_cast<std::size_t>(r) * width + c) * 3]; }
  const std::uint8_t* pixel(int r, int c) const { return &rgb[(static_cast<std::size_t>(r) * width + c) * 3]; }
};

Image flipped_vertically(const Image& image);

// Throws IoError on failure.
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

}  // namespace hsp

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semu/types.hpp"

// Minimal raster IO: binary PGM (P5, 8/16-bit, P2 accepted on read) and
// non-interlaced PNG (8/16-bit grayscale, 8-bit RGB) over zlib.

namespace semu {

struct GrayImage {
  Index rows = 0, cols = 0;
  int max_value = 255;                 // 255 or 65535
  std::vector<std::uint16_t> pixels;   // row-major

  std::uint16_t at(Index r, Index c) const { return pixels[static_cast<size_t>(r * cols + c)]; }
};

struct RgbImage {
  Index rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel
};

GrayImage read_gray(const std::string& path);   // dispatches on extension/signature
void write_pgm(const GrayImage& img, const std::string& path);
void write_png_gray(const GrayImage& img, const std::string& path);
void write_png_rgb(const RgbImage& img, const std::string& path);

// [0,1] image scaled to 8-bit gray
GrayImage to_gray8(const MatD& img);

}  // namespace semu

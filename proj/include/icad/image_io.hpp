#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "icad/errors.hpp"

namespace icad {

// Raw 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  size_t size() const { return size_t(width) * size_t(height); }
};

// Reads a binary PGM (P5) or an 8-bit grayscale non-interlaced PNG, detected
// by file signature. Throws data_error on anything else.
GrayImage read_gray_image(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const GrayImage& img);
void write_png_gray(const std::filesystem::path& path, const GrayImage& img);

// Picks the container from the extension: ".pgm" writes P5, everything else
// (canonically ".png") writes PNG.
void write_gray_image(const std::filesystem::path& path, const GrayImage& img);

// Pixel value mapping between 8-bit storage and the normalized [-1, 1] range
// the models operate in: v/127.5 - 1 on load, round((v+1)*127.5) on save.
std::vector<float> to_normalized(const GrayImage& img);
GrayImage from_normalized(int width, int height, std::span<const float> values);

inline float normalize_pixel(uint8_t v) { return float(v) / 127.5f - 1.0f; }
uint8_t denormalize_pixel(float v);

}  // namespace icad

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adrd/tensor.hpp"

namespace adrd {

// 8-bit RGB image promoted to planar float [0,1] in memory (3 planes of
// height x width). The u8 -> float -> u8 round trip is exact.
struct RgbImage {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<float> data;  // 3 * height * width, channel-major

  RgbImage() = default;
  RgbImage(std::int64_t h, std::int64_t w) : height(h), width(w), data(static_cast<std::size_t>(3 * h * w), 0.0f) {}

  float at(int c, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  float& at(int c, std::int64_t y, std::int64_t x) {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
};

// Only 8-bit non-interlaced RGB PNGs are accepted; anything else raises
// DataError with the offending property.
RgbImage read_png(const std::string& path);
void write_png(const RgbImage& image, const std::string& path);

// Separable bicubic (Catmull-Rom, a = -0.5) with edge-clamped taps and
// area-aligned coordinates; weights are renormalized so constants are
// preserved exactly. Output is clamped to [0,1].
RgbImage bicubic_resample(const RgbImage& image, std::int64_t out_h, std::int64_t out_w);

RgbImage flip_horizontal(const RgbImage& image);
RgbImage flip_vertical(const RgbImage& image);
RgbImage rotate90(const RgbImage& image);   // counter-clockwise
RgbImage rotate180(const RgbImage& image);
RgbImage rotate270(const RgbImage& image);

RgbImage crop(const RgbImage& image, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w);
// Trims so both extents divide the scale factor.
RgbImage modcrop(const RgbImage& image, int scale);

Tensor<float> image_to_tensor(const RgbImage& image);           // [1,3,H,W]
RgbImage tensor_to_image(const Tensor<float>& t, std::int64_t batch_index = 0);  // clamps to [0,1]

// Sorted list of *.png files in a directory; DataError if none.
std::vector<std::string> list_png_files(const std::string& dir);

}  // namespace adrd

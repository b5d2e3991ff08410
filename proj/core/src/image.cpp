#include "adrd/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "adrd/errors.hpp"

namespace adrd {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

RgbImage read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open '" + path + "' for reading");

  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw DataError("'" + path + "' is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng: failed to create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng: failed to create info struct");
  }
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng: failed to decode '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  const int interlace = png_get_interlace_type(png, info);
  if (bit_depth != 8 || color_type != PNG_COLOR_TYPE_RGB || interlace != PNG_INTERLACE_NONE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("'" + path + "' is not an 8-bit non-interlaced RGB PNG (bit depth " +
                    std::to_string(bit_depth) + ", color type " + std::to_string(color_type) + ")");
  }

  std::vector<png_byte> rows(static_cast<std::size_t>(height) * width * 3);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = rows.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  RgbImage image(height, width);
  for (std::int64_t y = 0; y < image.height; ++y)
    for (std::int64_t x = 0; x < image.width; ++x) {
      const png_byte* px = rows.data() + (y * image.width + x) * 3;
      for (int c = 0; c < 3; ++c) image.at(c, y, x) = static_cast<float>(px[c]) / 255.0f;
    }
  return image;
}

void write_png(const RgbImage& image, const std::string& path) {
  if (image.height <= 0 || image.width <= 0) throw DataError("write_png: empty image");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng: failed to create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng: failed to create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng: failed to encode '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 3);
  for (std::int64_t y = 0; y < image.height; ++y) {
    for (std::int64_t x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        row[x * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

// Catmull-Rom kernel, a = -0.5.
double cubic_weight(double d) {
  d = std::abs(d);
  if (d < 1.0) return (1.5 * d - 2.5) * d * d + 1.0;
  if (d < 2.0) return ((-0.5 * d + 2.5) * d - 4.0) * d + 2.0;
  return 0.0;
}

struct TapPlan {
  std::vector<std::int64_t> index;  // 4 per output coordinate, edge-clamped
  std::vector<double> weight;       // renormalized to sum 1
};

TapPlan plan_taps(std::int64_t in, std::int64_t out) {
  TapPlan plan;
  plan.index.resize(static_cast<std::size_t>(out) * 4);
  plan.weight.resize(static_cast<std::size_t>(out) * 4);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const std::int64_t base = static_cast<std::int64_t>(std::floor(src));
    double sum = 0.0;
    for (int t = 0; t < 4; ++t) {
      const std::int64_t tap = base - 1 + t;
      const double w = cubic_weight(src - static_cast<double>(tap));
      plan.index[o * 4 + t] = std::clamp<std::int64_t>(tap, 0, in - 1);
      plan.weight[o * 4 + t] = w;
      sum += w;
    }
    for (int t = 0; t < 4; ++t) plan.weight[o * 4 + t] /= sum;
  }
  return plan;
}

}  // namespace

RgbImage bicubic_resample(const RgbImage& image, std::int64_t out_h, std::int64_t out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bicubic_resample: target extents must be >= 1");
  const TapPlan cols = plan_taps(image.width, out_w);
  const TapPlan rows = plan_taps(image.height, out_h);

  RgbImage out(out_h, out_w);
  std::vector<double> horizontal(static_cast<std::size_t>(image.height) * out_w);
  for (int c = 0; c < 3; ++c) {
    for (std::int64_t y = 0; y < image.height; ++y)
      for (std::int64_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int t = 0; t < 4; ++t)
          acc += cols.weight[x * 4 + t] * static_cast<double>(image.at(c, y, cols.index[x * 4 + t]));
        horizontal[y * out_w + x] = acc;
      }
    for (std::int64_t y = 0; y < out_h; ++y)
      for (std::int64_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int t = 0; t < 4; ++t)
          acc += rows.weight[y * 4 + t] * horizontal[rows.index[y * 4 + t] * out_w + x];
        out.at(c, y, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
  }
  return out;
}

RgbImage flip_horizontal(const RgbImage& image) {
  RgbImage out(image.height, image.width);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < image.height; ++y)
      for (std::int64_t x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
  return out;
}

RgbImage flip_vertical(const RgbImage& image) {
  RgbImage out(image.height, image.width);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < image.height; ++y)
      for (std::int64_t x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, image.height - 1 - y, x);
  return out;
}

RgbImage rotate90(const RgbImage& image) {
  RgbImage out(image.width, image.height);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < out.height; ++y)
      for (std::int64_t x = 0; x < out.width; ++x) out.at(c, y, x) = image.at(c, x, image.width - 1 - y);
  return out;
}

RgbImage rotate180(const RgbImage& image) {
  RgbImage out(image.height, image.width);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < image.height; ++y)
      for (std::int64_t x = 0; x < image.width; ++x)
        out.at(c, y, x) = image.at(c, image.height - 1 - y, image.width - 1 - x);
  return out;
}

RgbImage rotate270(const RgbImage& image) {
  RgbImage out(image.width, image.height);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < out.height; ++y)
      for (std::int64_t x = 0; x < out.width; ++x) out.at(c, y, x) = image.at(c, image.height - 1 - x, y);
  return out;
}

RgbImage crop(const RgbImage& image, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w) {
  if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > image.height || x0 + w > image.width)
    throw std::invalid_argument("crop: window outside image");
  RgbImage out(h, w);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y0 + y, x0 + x);
  return out;
}

RgbImage modcrop(const RgbImage& image, int scale) {
  const std::int64_t h = image.height - image.height % scale;
  const std::int64_t w = image.width - image.width % scale;
  if (h == image.height && w == image.width) return image;
  return crop(image, 0, 0, h, w);
}

Tensor<float> image_to_tensor(const RgbImage& image) {
  std::vector<float> values(image.data.begin(), image.data.end());
  return Tensor<float>::from_data({1, 3, image.height, image.width}, std::move(values));
}

RgbImage tensor_to_image(const Tensor<float>& t, std::int64_t batch_index) {
  const Shape& s = t.shape();
  if (s.size() != 4 || s[1] != 3)
    throw std::invalid_argument("tensor_to_image expects [N,3,H,W], got " + shape_str(s));
  if (batch_index < 0 || batch_index >= s[0]) throw std::invalid_argument("tensor_to_image: batch index out of range");
  RgbImage out(s[2], s[3]);
  const auto plane = s[2] * s[3];
  const float* src = t.data().data() + batch_index * 3 * plane;
  for (std::int64_t i = 0; i < 3 * plane; ++i) out.data[i] = std::clamp(src[i], 0.0f, 1.0f);
  return out;
}

std::vector<std::string> list_png_files(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("'" + dir + "' is not a directory");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == ".png") files.push_back(entry.path().string());
  }
  if (files.empty()) throw DataError("no .png files in '" + dir + "'");
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace adrd

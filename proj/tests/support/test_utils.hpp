#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adrd/image.hpp"
#include "adrd/network.hpp"
#include "adrd/rng.hpp"
#include "adrd/tensor.hpp"

namespace adrd::test {

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape shape, bool requires_grad = false, double lo = -1.0,
                        double hi = 1.0) {
  std::vector<T> values(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : values) v = static_cast<T>(lo + (hi - lo) * rng.uniform());
  return Tensor<T>::from_data(std::move(shape), std::move(values), requires_grad);
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double worst = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(da[i]) - static_cast<double>(db[i])));
  return worst;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i)
    if (da[i] != db[i]) return false;
  return true;
}

// Tiny two-group topology used by trainer/pipeline tests.
inline NetworkConfig tiny_config(std::int64_t growth = 8) {
  NetworkConfig cfg;
  cfg.primary_channels = growth;
  cfg.growth_rate = growth;
  cfg.dense_layers_per_group = {3, 3};
  cfg.attention_blend = 0.5;
  cfg.bottleneck_channels = 2 * growth;
  cfg.scale_factor = 4;
  return cfg;
}

// Smooth low-frequency content; bicubic reconstructs it well, so noise
// dominates the error budget in robustness sweeps.
inline RgbImage smooth_image(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(h, w);
  double fy[3], fx[3], phase[3], base[3];
  for (int c = 0; c < 3; ++c) {
    fy[c] = 1.0 + 2.0 * rng.uniform();
    fx[c] = 1.0 + 2.0 * rng.uniform();
    phase[c] = 6.28318530717958647692 * rng.uniform();
    base[c] = 0.35 + 0.3 * rng.uniform();
  }
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const double u = static_cast<double>(y) / static_cast<double>(h);
        const double v = static_cast<double>(x) / static_cast<double>(w);
        double value = base[c];
        value += 0.20 * std::sin(6.28318530717958647692 * fy[c] * u + phase[c]);
        value += 0.20 * std::sin(6.28318530717958647692 * fx[c] * v + 0.7 * phase[c]);
        value += 0.10 * std::sin(6.28318530717958647692 * (fy[c] * u + fx[c] * v));
        img.at(c, y, x) = static_cast<float>(std::clamp(value, 0.02, 0.98));
      }
  return img;
}

// Blocky content with strong edges plus texture; bicubic struggles and a
// small network has something to gain by memorizing it.
inline RgbImage detailed_image(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(h, w);
  const std::int64_t cell = 8;
  const std::int64_t cells_y = (h + cell - 1) / cell;
  const std::int64_t cells_x = (w + cell - 1) / cell;
  std::vector<float> block(static_cast<std::size_t>(3 * cells_y * cells_x));
  for (auto& b : block) b = static_cast<float>(0.1 + 0.8 * rng.uniform());
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const std::int64_t by = y / cell, bx = x / cell;
        double value = block[(c * cells_y + by) * cells_x + bx];
        value += 0.10 * std::sin(0.9 * static_cast<double>(x + 2 * y) + c);
        img.at(c, y, x) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
  return img;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = (std::filesystem::temp_directory_path() / ("adrd_" + tag + "_" + std::to_string(counter_++)))
                .string();
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  static inline int counter_ = 0;
  std::string path_;
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace adrd::test

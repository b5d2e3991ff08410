#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "adrd/image.hpp"

namespace adrd {

// Luminance plane in [0,255] real, derived via the BT.601 studio-swing
// transform (black maps to 16, white to 235).
struct YImage {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<double> values;

  YImage() = default;
  YImage(std::int64_t h, std::int64_t w) : height(h), width(w), values(static_cast<std::size_t>(h * w), 0.0) {}

  double at(std::int64_t y, std::int64_t x) const { return values[static_cast<std::size_t>(y * width + x)]; }
  double& at(std::int64_t y, std::int64_t x) { return values[static_cast<std::size_t>(y * width + x)]; }
};

YImage rgb_to_y(const RgbImage& image);

// 10*log10(255^2 / MSE) over the region left after cropping `border_crop`
// pixels from every side. Identical inputs give +infinity.
double psnr(const YImage& a, const YImage& b, int border_crop = 0);

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 255, windows fully inside the cropped region.
double ssim(const YImage& a, const YImage& b, int border_crop = 0);

// Convenience: Y-channel PSNR of two RGB images.
double psnr_rgb(const RgbImage& a, const RgbImage& b, int border_crop = 0);
double ssim_rgb(const RgbImage& a, const RgbImage& b, int border_crop = 0);

// Deterministic map from an RGB image to a flat feature vector.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<float> features(const RgbImage& image) const = 0;
  virtual std::string describe() const = 0;
};

// Features are the raw pixels; useful as the linear reference extractor.
class IdentityFeatureExtractor : public FeatureExtractor {
 public:
  std::vector<float> features(const RgbImage& image) const override;
  std::string describe() const override { return "identity"; }
};

// Frozen stack of random 3x3 convs + ReLU with stride-2 average pooling.
// Weights are fixed by the seed at construction and never trained, so scores
// are comparable only across runs of the same extractor.
class RandomConvFeatureExtractor : public FeatureExtractor {
 public:
  explicit RandomConvFeatureExtractor(std::uint64_t seed = 1001, int depth = 3);
  std::vector<float> features(const RgbImage& image) const override;
  std::string describe() const override;

 private:
  std::uint64_t seed_;
  int depth_;
  std::vector<std::vector<float>> kernels_;  // [out*in*3*3] per level
  std::vector<std::int64_t> widths_;         // channel count per level
};

// Relative content increasing rate: 1 - MAE(phi(hr), phi(sr)) /
// MAE(phi(hr), phi(bicubic)). Throws NumericError when the denominator is 0.
double rcir(const RgbImage& hr, const RgbImage& sr, const RgbImage& bicubic, const FeatureExtractor& phi);

// Adds i.i.d. zero-mean Gaussian noise with the given variance in normalized
// [0,1] space, clamped back to [0,1]. Deterministic per seed.
RgbImage add_gaussian_noise(const RgbImage& image, double variance, std::uint64_t seed);

// The four noise variances of the robustness protocol.
inline constexpr double kNoiseVariances[4] = {5e-5, 1e-4, 2e-4, 5e-4};

}  // namespace adrd

#include "adrd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "adrd/conv.hpp"
#include "adrd/errors.hpp"
#include "adrd/rng.hpp"

namespace adrd {

YImage rgb_to_y(const RgbImage& image) {
  YImage out(image.height, image.width);
  for (std::int64_t y = 0; y < image.height; ++y)
    for (std::int64_t x = 0; x < image.width; ++x) {
      const double r = image.at(0, y, x);
      const double g = image.at(1, y, x);
      const double b = image.at(2, y, x);
      out.at(y, x) = 16.0 + 65.481 * r + 128.553 * g + 24.966 * b;
    }
  return out;
}

namespace {

void check_compatible(const YImage& a, const YImage& b, int border_crop, const char* op) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument(std::string(op) + ": image sizes differ");
  if (border_crop < 0) throw std::invalid_argument(std::string(op) + ": negative border crop");
  if (2 * border_crop >= a.height || 2 * border_crop >= a.width)
    throw std::invalid_argument(std::string(op) + ": border crop leaves no pixels");
}

}  // namespace

double psnr(const YImage& a, const YImage& b, int border_crop) {
  check_compatible(a, b, border_crop, "psnr");
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::int64_t y = border_crop; y < a.height - border_crop; ++y)
    for (std::int64_t x = border_crop; x < a.width - border_crop; ++x) {
      const double d = a.at(y, x) - b.at(y, x);
      acc += d * d;
      ++count;
    }
  const double mse = acc / static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;
constexpr double kSsimRange = 255.0;

std::vector<double> gaussian_taps() {
  std::vector<double> taps(kSsimWindow);
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Separable 'valid' Gaussian filtering: output is (h-10) x (w-10).
std::vector<double> gaussian_filter_valid(const std::vector<double>& img, std::int64_t h, std::int64_t w,
                                          const std::vector<double>& taps) {
  const std::int64_t ow = w - kSsimWindow + 1;
  const std::int64_t oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h * ow));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) acc += taps[t] * img[y * w + x + t];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) acc += taps[t] * tmp[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const YImage& a, const YImage& b, int border_crop) {
  check_compatible(a, b, border_crop, "ssim");
  const std::int64_t h = a.height - 2 * border_crop;
  const std::int64_t w = a.width - 2 * border_crop;
  if (h < kSsimWindow || w < kSsimWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window after crop");

  std::vector<double> pa(static_cast<std::size_t>(h * w)), pb(static_cast<std::size_t>(h * w));
  std::vector<double> paa(pa.size()), pbb(pa.size()), pab(pa.size());
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      const double va = a.at(y + border_crop, x + border_crop);
      const double vb = b.at(y + border_crop, x + border_crop);
      pa[y * w + x] = va;
      pb[y * w + x] = vb;
      paa[y * w + x] = va * va;
      pbb[y * w + x] = vb * vb;
      pab[y * w + x] = va * vb;
    }

  const auto taps = gaussian_taps();
  const auto mu_a = gaussian_filter_valid(pa, h, w, taps);
  const auto mu_b = gaussian_filter_valid(pb, h, w, taps);
  const auto e_aa = gaussian_filter_valid(paa, h, w, taps);
  const auto e_bb = gaussian_filter_valid(pbb, h, w, taps);
  const auto e_ab = gaussian_filter_valid(pab, h, w, taps);

  const double c1 = (kSsimK1 * kSsimRange) * (kSsimK1 * kSsimRange);
  const double c2 = (kSsimK2 * kSsimRange) * (kSsimK2 * kSsimRange);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu_a.size());
}

double psnr_rgb(const RgbImage& a, const RgbImage& b, int border_crop) {
  return psnr(rgb_to_y(a), rgb_to_y(b), border_crop);
}

double ssim_rgb(const RgbImage& a, const RgbImage& b, int border_crop) {
  return ssim(rgb_to_y(a), rgb_to_y(b), border_crop);
}

std::vector<float> IdentityFeatureExtractor::features(const RgbImage& image) const {
  return image.data;
}

RandomConvFeatureExtractor::RandomConvFeatureExtractor(std::uint64_t seed, int depth)
    : seed_(seed), depth_(depth) {
  if (depth < 1) throw std::invalid_argument("feature extractor depth must be >= 1");
  Rng rng(seed);
  std::int64_t in_ch = 3;
  std::int64_t out_ch = 16;
  for (int level = 0; level < depth_; ++level) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * 9));
    std::vector<float> kernel(static_cast<std::size_t>(out_ch * in_ch * 9));
    for (auto& v : kernel) v = static_cast<float>(stddev * rng.normal());
    kernels_.push_back(std::move(kernel));
    widths_.push_back(out_ch);
    in_ch = out_ch;
    out_ch = std::min<std::int64_t>(out_ch * 2, 64);
  }
}

std::string RandomConvFeatureExtractor::describe() const {
  return "random-conv(seed=" + std::to_string(seed_) + ", depth=" + std::to_string(depth_) + ")";
}

std::vector<float> RandomConvFeatureExtractor::features(const RgbImage& image) const {
  if (image.height < (std::int64_t(1) << depth_) || image.width < (std::int64_t(1) << depth_))
    throw std::invalid_argument("image too small for feature extractor depth " + std::to_string(depth_));
  NoGradGuard ng;
  Tensor<float> x = image_to_tensor(image);
  std::int64_t in_ch = 3;
  for (int level = 0; level < depth_; ++level) {
    const std::int64_t out_ch = widths_[level];
    Tensor<float> kernel =
        Tensor<float>::from_data({out_ch, in_ch, 3, 3}, kernels_[static_cast<std::size_t>(level)]);
    x = relu(conv2d(x, kernel, Tensor<float>(), 1, 1));
    // 2x2 average pooling, stride 2 (odd trailing row/column dropped).
    const Shape& s = x.shape();
    const std::int64_t h2 = s[2] / 2, w2 = s[3] / 2;
    std::vector<float> pooled(static_cast<std::size_t>(out_ch * h2 * w2));
    const float* src = x.data().data();
    for (std::int64_t c = 0; c < out_ch; ++c)
      for (std::int64_t y = 0; y < h2; ++y)
        for (std::int64_t xx = 0; xx < w2; ++xx) {
          const float* p = src + (c * s[2] + 2 * y) * s[3] + 2 * xx;
          pooled[(c * h2 + y) * w2 + xx] = 0.25f * (p[0] + p[1] + p[s[3]] + p[s[3] + 1]);
        }
    x = Tensor<float>::from_data({1, out_ch, h2, w2}, std::move(pooled));
    in_ch = out_ch;
  }
  auto d = x.data();
  return std::vector<float>(d.begin(), d.end());
}

namespace {

double mean_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("rcir: feature sizes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return acc / static_cast<double>(a.size());
}

}  // namespace

double rcir(const RgbImage& hr, const RgbImage& sr, const RgbImage& bicubic, const FeatureExtractor& phi) {
  if (hr.height != sr.height || hr.width != sr.width || hr.height != bicubic.height ||
      hr.width != bicubic.width)
    throw std::invalid_argument("rcir: image sizes differ");
  const auto f_hr = phi.features(hr);
  const auto f_sr = phi.features(sr);
  const auto f_bic = phi.features(bicubic);
  const double e_hr_bic = mean_abs_diff(f_hr, f_bic);
  const double e_hr_sr = mean_abs_diff(f_hr, f_sr);
  if (e_hr_bic == 0.0)
    throw NumericError("rcir: HR and bicubic images are identical under the extractor");
  return 1.0 - e_hr_sr / e_hr_bic;
}

RgbImage add_gaussian_noise(const RgbImage& image, double variance, std::uint64_t seed) {
  if (variance < 0.0) throw std::invalid_argument("add_gaussian_noise: negative variance");
  RgbImage out = image;
  if (variance == 0.0) return out;
  Rng rng(seed);
  const double sigma = std::sqrt(variance);
  for (auto& v : out.data)
    v = std::clamp(static_cast<float>(v + sigma * rng.normal()), 0.0f, 1.0f);
  return out;
}

}  // namespace adrd

#pragma once

// Independent reference implementations used to freeze expected values. These
// deliberately avoid the library's im2col/GEMM path: plain nested loops and
// direct windowed statistics only.

#include <cmath>
#include <cstdint>
#include <vector>

#include "adrd/metrics.hpp"

namespace adrd::test {

// Direct 7-loop cross-correlation.
template <typename T>
std::vector<T> conv2d_oracle(const std::vector<T>& input, std::int64_t batch, std::int64_t in_ch,
                             std::int64_t h, std::int64_t w, const std::vector<T>& kernel,
                             std::int64_t out_ch, std::int64_t kh, std::int64_t kw,
                             const std::vector<T>& bias, int pad, int stride) {
  const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::int64_t ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<T> out(static_cast<std::size_t>(batch * out_ch * oh * ow), T(0));
  for (std::int64_t n = 0; n < batch; ++n)
    for (std::int64_t oc = 0; oc < out_ch; ++oc)
      for (std::int64_t oy = 0; oy < oh; ++oy)
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          T acc = bias.empty() ? T(0) : bias[static_cast<std::size_t>(oc)];
          for (std::int64_t ic = 0; ic < in_ch; ++ic)
            for (std::int64_t ky = 0; ky < kh; ++ky)
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t iy = oy * stride - pad + ky;
                const std::int64_t ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += input[((n * in_ch + ic) * h + iy) * w + ix] *
                       kernel[((oc * in_ch + ic) * kh + ky) * kw + kx];
              }
          out[((n * out_ch + oc) * oh + oy) * ow + ox] = acc;
        }
  return out;
}

// Direct scatter-accumulate transposed convolution; kernel is
// [in_ch, out_ch, kh, kw].
template <typename T>
std::vector<T> conv_transpose2d_oracle(const std::vector<T>& input, std::int64_t batch,
                                       std::int64_t in_ch, std::int64_t h, std::int64_t w,
                                       const std::vector<T>& kernel, std::int64_t out_ch,
                                       std::int64_t kh, std::int64_t kw, const std::vector<T>& bias,
                                       int stride, int pad) {
  const std::int64_t oh = (h - 1) * stride - 2 * pad + kh;
  const std::int64_t ow = (w - 1) * stride - 2 * pad + kw;
  std::vector<T> out(static_cast<std::size_t>(batch * out_ch * oh * ow), T(0));
  for (std::int64_t n = 0; n < batch; ++n) {
    for (std::int64_t oc = 0; oc < out_ch; ++oc)
      if (!bias.empty())
        for (std::int64_t p = 0; p < oh * ow; ++p)
          out[(n * out_ch + oc) * oh * ow + p] = bias[static_cast<std::size_t>(oc)];
    for (std::int64_t ic = 0; ic < in_ch; ++ic)
      for (std::int64_t oc = 0; oc < out_ch; ++oc)
        for (std::int64_t iy = 0; iy < h; ++iy)
          for (std::int64_t ix = 0; ix < w; ++ix)
            for (std::int64_t ky = 0; ky < kh; ++ky)
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t oy = iy * stride - pad + ky;
                const std::int64_t ox = ix * stride - pad + kx;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                out[((n * out_ch + oc) * oh + oy) * ow + ox] +=
                    input[((n * in_ch + ic) * h + iy) * w + ix] *
                    kernel[((ic * out_ch + oc) * kh + ky) * kw + kx];
              }
  }
  return out;
}

// Direct sliding-window SSIM with explicit 2-d Gaussian weights.
inline double ssim_oracle(const YImage& a, const YImage& b, int crop) {
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  double weights[kWindow][kWindow];
  double wsum = 0.0;
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j) {
      const double dy = i - kWindow / 2, dx = j - kWindow / 2;
      weights[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
      wsum += weights[i][j];
    }
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j) weights[i][j] /= wsum;

  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const std::int64_t h = a.height - 2 * crop, w = a.width - 2 * crop;
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::int64_t y = 0; y + kWindow <= h; ++y)
    for (std::int64_t x = 0; x + kWindow <= w; ++x) {
      double mu_a = 0.0, mu_b = 0.0, e_aa = 0.0, e_bb = 0.0, e_ab = 0.0;
      for (int i = 0; i < kWindow; ++i)
        for (int j = 0; j < kWindow; ++j) {
          const double va = a.at(crop + y + i, crop + x + j);
          const double vb = b.at(crop + y + i, crop + x + j);
          mu_a += weights[i][j] * va;
          mu_b += weights[i][j] * vb;
          e_aa += weights[i][j] * va * va;
          e_bb += weights[i][j] * vb * vb;
          e_ab += weights[i][j] * va * vb;
        }
      const double var_a = e_aa - mu_a * mu_a;
      const double var_b = e_bb - mu_b * mu_b;
      const double cov = e_ab - mu_a * mu_b;
      acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
             ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  return acc / static_cast<double>(count);
}

// Scalar Adam recurrence written straight from the update equations.
struct ScalarAdamOracle {
  double m = 0.0, v = 0.0;
  int t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  double update(double param, double grad, double lr) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double m_hat = m / (1.0 - std::pow(beta1, t));
    const double v_hat = v / (1.0 - std::pow(beta2, t));
    return param - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

}  // namespace adrd::test

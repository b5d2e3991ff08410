#pragma once

#include "adrd/tensor.hpp"

namespace adrd {

// Output extent for cross-correlation; requires exact division.
std::int64_t conv2d_output_extent(std::int64_t in, std::int64_t kernel, int padding, int stride);
// Output extent for the transposed op: (in - 1) * stride - 2 * padding + kernel.
std::int64_t conv_transpose2d_output_extent(std::int64_t in, std::int64_t kernel, int padding, int stride);

// 2-d cross-correlation (kernels are not flipped). kernel is
// [out_ch, in_ch, kh, kw]; bias is [out_ch] or an undefined tensor for none.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int padding, int stride);

// Exact adjoint of conv2d with the same geometry: the forward pass computes
// precisely conv2d's input gradient. kernel is [in_ch, out_ch, kh, kw], so the
// same array serves both directions with the channel axes swapping roles.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                           int stride, int padding);

// output[n,c,y,x] = input[n,c,y/factor,x/factor].
template <typename T>
Tensor<T> nearest_upsample(const Tensor<T>& input, int factor);

}  // namespace adrd

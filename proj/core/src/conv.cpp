#include "adrd/conv.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace adrd {

std::int64_t conv2d_output_extent(std::int64_t in, std::int64_t kernel, int padding, int stride) {
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  const std::int64_t span = in + 2 * padding - kernel;
  if (span < 0)
    throw std::invalid_argument("conv2d: kernel " + std::to_string(kernel) + " exceeds padded extent " +
                                std::to_string(in + 2 * padding));
  if (span % stride != 0)
    throw std::invalid_argument("conv2d: non-integral output extent for in=" + std::to_string(in) +
                                " k=" + std::to_string(kernel) + " pad=" + std::to_string(padding) +
                                " stride=" + std::to_string(stride));
  return span / stride + 1;
}

std::int64_t conv_transpose2d_output_extent(std::int64_t in, std::int64_t kernel, int padding, int stride) {
  if (stride < 1) throw std::invalid_argument("conv_transpose2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv_transpose2d: padding must be >= 0");
  const std::int64_t out = (in - 1) * stride - 2 * padding + kernel;
  if (out <= 0)
    throw std::invalid_argument("conv_transpose2d: non-positive output extent " + std::to_string(out));
  return out;
}

namespace {

struct Geometry {
  std::int64_t in_ch, in_h, in_w;
  std::int64_t kh, kw;
  int stride, pad;
  std::int64_t out_h, out_w;

  std::int64_t patch_rows() const { return in_ch * kh * kw; }
  std::int64_t out_pixels() const { return out_h * out_w; }
};

// col[(c*kh+ky)*kw+kx, oy*out_w+ox] = padded input sample. Rows are laid out
// to match the kernel's flattened [in_ch*kh*kw] axis.
template <typename T>
void im2col(const T* src, const Geometry& g, T* col) {
  const std::int64_t P = g.out_pixels();
  for (std::int64_t c = 0; c < g.in_ch; ++c) {
    const T* plane = src + c * g.in_h * g.in_w;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * P;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* in_row = plane + iy * g.in_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? in_row[ix] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-accumulate of a column matrix back onto the input plane: the exact
// transpose of im2col. Accumulation order is a fixed loop nest, so results are
// run-to-run deterministic.
template <typename T>
void col2im_accum(const T* col, const Geometry& g, T* dst) {
  const std::int64_t P = g.out_pixels();
  for (std::int64_t c = 0; c < g.in_ch; ++c) {
    T* plane = dst + c * g.in_h * g.in_w;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * P;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          T* out_row = plane + iy * g.in_w;
          const T* src_row = row + oy * g.out_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) out_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

// C[M,N] += A[M,K] * B[K,N]. i-k-j order: the inner loop runs contiguously
// over B and C rows and each C element accumulates in ascending k.
template <typename T>
void gemm_ab(const T* A, const T* B, T* C, std::int64_t M, std::int64_t K, std::int64_t N) {
  for (std::int64_t i = 0; i < M; ++i) {
    T* c_row = C + i * N;
    const T* a_row = A + i * K;
    for (std::int64_t k = 0; k < K; ++k) {
      const T a = a_row[k];
      if (a == T(0)) continue;
      const T* b_row = B + k * N;
      for (std::int64_t j = 0; j < N; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// C[M,N] += A^T[M,K] * B[K,N] with A stored [K,M].
template <typename T>
void gemm_aTb(const T* A, const T* B, T* C, std::int64_t M, std::int64_t K, std::int64_t N) {
  for (std::int64_t k = 0; k < K; ++k) {
    const T* a_row = A + k * M;
    const T* b_row = B + k * N;
    for (std::int64_t i = 0; i < M; ++i) {
      const T a = a_row[i];
      if (a == T(0)) continue;
      T* c_row = C + i * N;
      for (std::int64_t j = 0; j < N; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// C[M,N] += A[M,K] * B^T[K,N] with B stored [N,K].
template <typename T>
void gemm_abT(const T* A, const T* B, T* C, std::int64_t M, std::int64_t K, std::int64_t N) {
  for (std::int64_t i = 0; i < M; ++i) {
    const T* a_row = A + i * K;
    T* c_row = C + i * N;
    for (std::int64_t j = 0; j < N; ++j) {
      const T* b_row = B + j * K;
      T acc = T(0);
      for (std::int64_t k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
      c_row[j] += acc;
    }
  }
}

bool is_pointwise(const Geometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0;
}

// out[oc,:] = bias[oc] + K[oc,:] . col. `col` may alias the input image for
// 1x1/stride-1 geometry.
template <typename T>
void gather_image(const T* image, const T* kmat, const T* bias, const Geometry& g,
                  std::int64_t out_ch, T* out, std::vector<T>& scratch) {
  const std::int64_t P = g.out_pixels();
  const T* col = image;
  if (!is_pointwise(g)) {
    scratch.resize(static_cast<std::size_t>(g.patch_rows() * P));
    im2col(image, g, scratch.data());
    col = scratch.data();
  }
  for (std::int64_t oc = 0; oc < out_ch; ++oc) {
    const T b = bias ? bias[oc] : T(0);
    std::fill(out + oc * P, out + (oc + 1) * P, b);
  }
  gemm_ab(kmat, col, out, out_ch, g.patch_rows(), P);
}

// dst[in_ch,in_h,in_w] += K^T . G scattered through col2im: the adjoint of
// gather_image. Shared by conv2d's input gradient and conv_transpose2d's
// forward pass, which makes the adjoint identity hold by construction.
template <typename T>
void scatter_image_accum(const T* gout, const T* kmat, const Geometry& g, std::int64_t out_ch,
                         T* dst, std::vector<T>& scratch) {
  const std::int64_t P = g.out_pixels();
  const std::int64_t rows = g.patch_rows();
  if (is_pointwise(g)) {
    gemm_aTb(kmat, gout, dst, rows, out_ch, P);
    return;
  }
  scratch.assign(static_cast<std::size_t>(rows * P), T(0));
  gemm_aTb(kmat, gout, scratch.data(), rows, out_ch, P);
  col2im_accum(scratch.data(), g, dst);
}

// dK[oc, c*kh*kw] += G[oc,:] . col^T.
template <typename T>
void kernel_grad_accum(const T* image, const T* gout, const Geometry& g, std::int64_t out_ch,
                       T* dkernel, std::vector<T>& scratch) {
  const std::int64_t P = g.out_pixels();
  const T* col = image;
  if (!is_pointwise(g)) {
    scratch.resize(static_cast<std::size_t>(g.patch_rows() * P));
    im2col(image, g, scratch.data());
    col = scratch.data();
  }
  gemm_abT(gout, col, dkernel, out_ch, P, g.patch_rows());
}

template <typename T>
void bias_grad_accum(const T* gout, std::int64_t out_ch, std::int64_t pixels, T* dbias) {
  for (std::int64_t oc = 0; oc < out_ch; ++oc) {
    const T* row = gout + oc * pixels;
    T acc = T(0);
    for (std::int64_t p = 0; p < pixels; ++p) acc += row[p];
    dbias[oc] += acc;
  }
}

template <typename T>
void validate_bias(const Tensor<T>& bias, std::int64_t out_ch, const char* op) {
  if (!bias.defined()) return;
  if (bias.shape().size() != 1 || bias.dim(0) != out_ch)
    throw std::invalid_argument(std::string(op) + ": bias shape " + shape_str(bias.shape()) +
                                " does not match " + std::to_string(out_ch) + " output channels");
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int padding, int stride) {
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 4) throw std::invalid_argument("conv2d: input must be 4-d, got " + shape_str(xs));
  if (ks.size() != 4) throw std::invalid_argument("conv2d: kernel must be 4-d, got " + shape_str(ks));
  if (xs[1] != ks[1])
    throw std::invalid_argument("conv2d: input channels " + std::to_string(xs[1]) +
                                " != kernel channels " + std::to_string(ks[1]));
  const std::int64_t batch = xs[0], out_ch = ks[0];
  Geometry g{xs[1], xs[2], xs[3], ks[2], ks[3], stride, padding, 0, 0};
  g.out_h = conv2d_output_extent(xs[2], ks[2], padding, stride);
  g.out_w = conv2d_output_extent(xs[3], ks[3], padding, stride);
  validate_bias(bias, out_ch, "conv2d");

  const std::int64_t in_sz = g.in_ch * g.in_h * g.in_w;
  const std::int64_t out_sz = out_ch * g.out_pixels();
  std::vector<T> out(static_cast<std::size_t>(batch * out_sz));
  std::vector<T> scratch;
  const T* bias_ptr = bias.defined() ? bias.data().data() : nullptr;
  for (std::int64_t n = 0; n < batch; ++n)
    gather_image(input.data().data() + n * in_sz, kernel.data().data(), bias_ptr, g, out_ch,
                 out.data() + n * out_sz, scratch);

  auto nx = input.node();
  auto nk = kernel.node();
  auto nb = bias.defined() ? bias.node() : nullptr;
  std::vector<std::shared_ptr<detail::Node<T>>> parents{nx, nk};
  if (nb) parents.push_back(nb);
  return detail::make_op<T>({batch, out_ch, g.out_h, g.out_w}, std::move(out), std::move(parents),
                         [nx, nk, nb, g, batch, out_ch, in_sz, out_sz](detail::Node<T>& o) {
                           std::vector<T> scratch;
                           if (nx->requires_grad) {
                             auto gx = nx->ensure_grad();
                             for (std::int64_t n = 0; n < batch; ++n)
                               scatter_image_accum(o.grad.data() + n * out_sz, nk->values.data(), g,
                                                   out_ch, gx.data() + n * in_sz, scratch);
                           }
                           if (nk->requires_grad) {
                             auto gk = nk->ensure_grad();
                             for (std::int64_t n = 0; n < batch; ++n)
                               kernel_grad_accum(nx->values.data() + n * in_sz,
                                                 o.grad.data() + n * out_sz, g, out_ch, gk.data(),
                                                 scratch);
                           }
                           if (nb && nb->requires_grad) {
                             auto gb = nb->ensure_grad();
                             for (std::int64_t n = 0; n < batch; ++n)
                               bias_grad_accum(o.grad.data() + n * out_sz, out_ch, g.out_pixels(),
                                               gb.data());
                           }
                         });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                           int stride, int padding) {
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 4) throw std::invalid_argument("conv_transpose2d: input must be 4-d, got " + shape_str(xs));
  if (ks.size() != 4) throw std::invalid_argument("conv_transpose2d: kernel must be 4-d, got " + shape_str(ks));
  if (xs[1] != ks[0])
    throw std::invalid_argument("conv_transpose2d: input channels " + std::to_string(xs[1]) +
                                " != kernel leading axis " + std::to_string(ks[0]));
  const std::int64_t batch = xs[0], in_ch = xs[1], out_ch = ks[1];
  const std::int64_t out_h = conv_transpose2d_output_extent(xs[2], ks[2], padding, stride);
  const std::int64_t out_w = conv_transpose2d_output_extent(xs[3], ks[3], padding, stride);
  // The geometry is phrased from the conv2d side: `in_*` is the large (output)
  // plane, `out_*` the small (input) one.
  Geometry g{out_ch, out_h, out_w, ks[2], ks[3], stride, padding, xs[2], xs[3]};
  validate_bias(bias, out_ch, "conv_transpose2d");

  const std::int64_t in_sz = in_ch * xs[2] * xs[3];
  const std::int64_t out_sz = out_ch * out_h * out_w;
  std::vector<T> out(static_cast<std::size_t>(batch * out_sz), T(0));
  std::vector<T> scratch;
  for (std::int64_t n = 0; n < batch; ++n)
    scatter_image_accum(input.data().data() + n * in_sz, kernel.data().data(), g, in_ch,
                        out.data() + n * out_sz, scratch);
  if (bias.defined()) {
    const T* b = bias.data().data();
    for (std::int64_t n = 0; n < batch; ++n)
      for (std::int64_t oc = 0; oc < out_ch; ++oc) {
        T* plane = out.data() + n * out_sz + oc * out_h * out_w;
        for (std::int64_t p = 0; p < out_h * out_w; ++p) plane[p] += b[oc];
      }
  }

  auto nx = input.node();
  auto nk = kernel.node();
  auto nb = bias.defined() ? bias.node() : nullptr;
  std::vector<std::shared_ptr<detail::Node<T>>> parents{nx, nk};
  if (nb) parents.push_back(nb);
  return detail::make_op<T>({batch, out_ch, out_h, out_w}, std::move(out), std::move(parents),
                         [nx, nk, nb, g, batch, in_ch, in_sz, out_sz](detail::Node<T>& o) {
                           std::vector<T> scratch;
                           if (nx->requires_grad) {
                             // Gradient w.r.t. input is the forward gather.
                             auto gx = nx->ensure_grad();
                             std::vector<T> tmp(static_cast<std::size_t>(in_sz));
                             for (std::int64_t n = 0; n < batch; ++n) {
                               gather_image(o.grad.data() + n * out_sz, nk->values.data(),
                                            static_cast<const T*>(nullptr), g, in_ch, tmp.data(),
                                            scratch);
                               T* dst = gx.data() + n * in_sz;
                               for (std::int64_t i = 0; i < in_sz; ++i) dst[i] += tmp[i];
                             }
                           }
                           if (nk->requires_grad) {
                             auto gk = nk->ensure_grad();
                             for (std::int64_t n = 0; n < batch; ++n)
                               kernel_grad_accum(o.grad.data() + n * out_sz,
                                                 nx->values.data() + n * in_sz, g, in_ch, gk.data(),
                                                 scratch);
                           }
                           if (nb && nb->requires_grad) {
                             auto gb = nb->ensure_grad();
                             const std::int64_t pixels = g.in_h * g.in_w;
                             for (std::int64_t n = 0; n < batch; ++n)
                               bias_grad_accum(o.grad.data() + n * out_sz, g.in_ch, pixels, gb.data());
                           }
                         });
}

template <typename T>
Tensor<T> nearest_upsample(const Tensor<T>& input, int factor) {
  const Shape& xs = input.shape();
  if (xs.size() != 4) throw std::invalid_argument("nearest_upsample: input must be 4-d, got " + shape_str(xs));
  if (factor < 1) throw std::invalid_argument("nearest_upsample: factor must be >= 1");
  const std::int64_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::int64_t oh = h * factor, ow = w * factor;
  std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
  const T* src = input.data().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* in_plane = src + p * h * w;
    T* out_plane = out.data() + p * oh * ow;
    for (std::int64_t y = 0; y < oh; ++y) {
      const T* in_row = in_plane + (y / factor) * w;
      T* out_row = out_plane + y * ow;
      for (std::int64_t x = 0; x < ow; ++x) out_row[x] = in_row[x / factor];
    }
  }
  auto nx = input.node();
  return detail::make_op<T>({xs[0], xs[1], oh, ow}, std::move(out), {nx},
                         [nx, planes, h, w, oh, ow, factor](detail::Node<T>& o) {
                           if (!nx->requires_grad) return;
                           auto g = nx->ensure_grad();
                           for (std::int64_t p = 0; p < planes; ++p) {
                             T* in_plane = g.data() + p * h * w;
                             const T* out_plane = o.grad.data() + p * oh * ow;
                             for (std::int64_t y = 0; y < oh; ++y) {
                               T* in_row = in_plane + (y / factor) * w;
                               const T* out_row = out_plane + y * ow;
                               for (std::int64_t x = 0; x < ow; ++x) in_row[x / factor] += out_row[x];
                             }
                           }
                         });
}

#define ADRD_INSTANTIATE_CONV(T)                                                             \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
  template Tensor<T> conv_transpose2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                         int, int);                                          \
  template Tensor<T> nearest_upsample<T>(const Tensor<T>&, int);

ADRD_INSTANTIATE_CONV(float)
ADRD_INSTANTIATE_CONV(double)
#undef ADRD_INSTANTIATE_CONV

}  // namespace adrd

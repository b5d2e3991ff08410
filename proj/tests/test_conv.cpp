#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adrd/conv.hpp"
#include "support/oracles.hpp"
#include "support/test_utils.hpp"

using namespace adrd;

namespace {

template <typename T>
double inner(const Tensor<T>& a, const Tensor<T>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    acc += static_cast<double>(a.data()[i]) * static_cast<double>(b.data()[i]);
  return acc;
}

}  // namespace

TEST_CASE("1x1 identity kernel passes the input through") {
  Rng rng(1);
  auto x = test::random_tensor<double>(rng, {2, 1, 3, 4});
  auto k = Tensor<double>::from_data({1, 1, 1, 1}, {1.0});
  auto y = conv2d(x, k, Tensor<double>::zeros({1}), 0, 1);
  CHECK(test::bitwise_equal(y, x));
}

TEST_CASE("centered delta kernel with padding 1 is the identity") {
  Rng rng(2);
  auto x = test::random_tensor<double>(rng, {1, 2, 5, 5});
  std::vector<double> kd(2 * 2 * 3 * 3, 0.0);
  // Each output channel copies its matching input channel.
  kd[(0 * 2 + 0) * 9 + 4] = 1.0;
  kd[(1 * 2 + 1) * 9 + 4] = 1.0;
  auto k = Tensor<double>::from_data({2, 2, 3, 3}, std::move(kd));
  auto y = conv2d(x, k, Tensor<double>::zeros({2}), 1, 1);
  CHECK(test::max_abs_diff(y, x) == 0.0);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  Rng rng(3);
  auto x = test::random_tensor<double>(rng, {2, 3, 5, 5});
  auto k = test::random_tensor<double>(rng, {4, 3, 3, 3});
  auto b = test::random_tensor<double>(rng, {4});
  auto y = conv2d(x, k, b, 1, 1);

  const auto expect =
      test::conv2d_oracle(std::vector<double>(x.data().begin(), x.data().end()), 2, 3, 5, 5,
                          std::vector<double>(k.data().begin(), k.data().end()), 4, 3, 3,
                          std::vector<double>(b.data().begin(), b.data().end()), 1, 1);
  CHECK(y.shape() == Shape{2, 4, 5, 5});
  double worst = 0.0;
  for (std::size_t i = 0; i < expect.size(); ++i)
    worst = std::max(worst, std::abs(expect[i] - y.data()[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("conv2d strided geometry matches the oracle") {
  Rng rng(4);
  auto x = test::random_tensor<double>(rng, {1, 2, 7, 9});
  auto k = test::random_tensor<double>(rng, {3, 2, 3, 3});
  auto b = test::random_tensor<double>(rng, {3});
  auto y = conv2d(x, k, b, 1, 2);
  CHECK(y.shape() == Shape{1, 3, 4, 5});
  const auto expect =
      test::conv2d_oracle(std::vector<double>(x.data().begin(), x.data().end()), 1, 2, 7, 9,
                          std::vector<double>(k.data().begin(), k.data().end()), 3, 3, 3,
                          std::vector<double>(b.data().begin(), b.data().end()), 1, 2);
  double worst = 0.0;
  for (std::size_t i = 0; i < expect.size(); ++i)
    worst = std::max(worst, std::abs(expect[i] - y.data()[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("conv2d rejects bad geometry and channel mismatches") {
  auto x = Tensor<double>::zeros({1, 2, 5, 5});
  auto k_wrong_ch = Tensor<double>::zeros({1, 3, 3, 3});
  CHECK_THROWS_AS(conv2d(x, k_wrong_ch, Tensor<double>(), 1, 1), std::invalid_argument);

  // (5 + 0 - 2) is not divisible by 2: non-integral output extent.
  auto k = Tensor<double>::zeros({1, 2, 2, 2});
  CHECK_THROWS_AS(conv2d(x, k, Tensor<double>(), 0, 2), std::invalid_argument);

  auto k_large = Tensor<double>::zeros({1, 2, 7, 7});
  CHECK_THROWS_AS(conv2d(x, k_large, Tensor<double>(), 0, 1), std::invalid_argument);
}

TEST_CASE("conv_transpose2d doubles extents with the 4/2/1 geometry") {
  Rng rng(5);
  auto x = test::random_tensor<double>(rng, {1, 3, 6, 7});
  auto k = Tensor<double>::zeros({3, 2, 4, 4});
  auto y = conv_transpose2d(x, k, Tensor<double>::zeros({2}), 2, 1);
  CHECK(y.shape() == Shape{1, 2, 12, 14});
  for (auto v : y.data()) CHECK(v == 0.0);  // zero kernel, zero bias
}

TEST_CASE("conv_transpose2d matches the scatter oracle") {
  Rng rng(6);
  auto x = test::random_tensor<double>(rng, {1, 1, 2, 2});
  auto k = test::random_tensor<double>(rng, {1, 2, 4, 4});
  auto b = test::random_tensor<double>(rng, {2});
  auto y = conv_transpose2d(x, k, b, 2, 1);
  CHECK(y.shape() == Shape{1, 2, 4, 4});
  const auto expect = test::conv_transpose2d_oracle(
      std::vector<double>(x.data().begin(), x.data().end()), 1, 1, 2, 2,
      std::vector<double>(k.data().begin(), k.data().end()), 2, 4, 4,
      std::vector<double>(b.data().begin(), b.data().end()), 2, 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < expect.size(); ++i)
    worst = std::max(worst, std::abs(expect[i] - y.data()[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("conv_transpose2d output extent must stay positive") {
  auto x = Tensor<double>::zeros({1, 1, 1, 1});
  auto k = Tensor<double>::zeros({1, 1, 2, 2});
  CHECK_THROWS_AS(conv_transpose2d(x, k, Tensor<double>(), 1, 2), std::invalid_argument);
}

TEST_CASE("transpose is the exact adjoint of conv2d across geometries") {
  Rng rng(7);
  const struct {
    std::int64_t cin, cout, h, w, k;
    int stride, pad;
  } cases[] = {
      {1, 1, 5, 5, 3, 1, 1}, {2, 3, 6, 6, 3, 1, 1}, {3, 2, 7, 9, 3, 2, 1},
      {2, 2, 8, 8, 4, 2, 1}, {1, 4, 9, 7, 5, 2, 2}, {4, 1, 6, 10, 1, 1, 0},
  };
  for (const auto& c : cases) {
    const std::int64_t oh = conv2d_output_extent(c.h, c.k, c.pad, c.stride);
    const std::int64_t ow = conv2d_output_extent(c.w, c.k, c.pad, c.stride);
    auto a = test::random_tensor<double>(rng, {2, c.cin, c.h, c.w});
    auto kernel = test::random_tensor<double>(rng, {c.cout, c.cin, c.k, c.k});
    auto b = test::random_tensor<double>(rng, {2, c.cout, oh, ow});
    const double lhs = inner(conv2d(a, kernel, Tensor<double>(), c.pad, c.stride), b);
    const double rhs = inner(a, conv_transpose2d(b, kernel, Tensor<double>(), c.stride, c.pad));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
  }
}

TEST_CASE("nearest_upsample definition, identity and gradient counting") {
  auto x = Tensor<double>::from_data({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  CHECK(test::bitwise_equal(nearest_upsample(x, 1), x));

  auto y = nearest_upsample(x, 2);
  const std::vector<double> expect{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(y.data()[i] == expect[i]);

  sum(y).backward();
  for (auto g : x.grad()) CHECK(g == 4.0);  // each source cell feeds 4 outputs
}

TEST_CASE("conv gradients flow to kernel and bias") {
  Rng rng(8);
  auto x = test::random_tensor<double>(rng, {1, 2, 4, 4});
  auto k = test::random_tensor<double>(rng, {2, 2, 3, 3}, true);
  auto b = test::random_tensor<double>(rng, {2}, true);
  sum(conv2d(x, k, b, 1, 1)).backward();
  CHECK(b.grad()[0] == doctest::Approx(16.0));  // 4x4 output per channel
  bool any = false;
  for (auto g : k.grad()) any = any || g != 0.0;
  CHECK(any);
}

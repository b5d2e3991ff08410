#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "adrd/conv.hpp"
#include "adrd/errors.hpp"
#include "adrd/gradcheck.hpp"
#include "support/test_utils.hpp"

using namespace adrd;

namespace {

// Projects an op output to a scalar through a frozen random weighting so that
// per-element gradient errors cannot cancel.
Tensor<double> project(const Tensor<double>& y, std::uint64_t seed) {
  Rng rng(seed);
  auto w = test::random_tensor<double>(rng, Shape(y.shape()));
  return sum(hadamard(y, w));
}

using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

double run_check(const Fn& fn, std::vector<Tensor<double>> inputs, double tol = 1e-4) {
  const auto report = gradcheck<double>(fn, std::move(inputs), 1e-5, tol);
  INFO("worst at ", report.worst);
  CHECK(report.passed);
  return report.max_rel_error;
}

}  // namespace

TEST_CASE("linear functions agree with finite differences almost exactly") {
  Rng rng(1);
  auto x = test::random_tensor<double>(rng, {8}, true);
  const auto report = gradcheck<double>(
      [](const std::vector<Tensor<double>>& in) { return sum(scale(in[0], 3.0)); }, {x}, 1e-5, 1e-10);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-10);
  CHECK(report.coordinates_checked == 8);
}

TEST_CASE("conv2d gradcheck on 1x2x5x5") {
  Rng rng(2);
  auto x = test::random_tensor<double>(rng, {1, 2, 5, 5}, true);
  auto k = test::random_tensor<double>(rng, {3, 2, 3, 3}, true);
  auto b = test::random_tensor<double>(rng, {3}, true);
  run_check([](const std::vector<Tensor<double>>& in) {
    return project(conv2d(in[0], in[1], in[2], 1, 1), 99);
  }, {x, k, b});
}

TEST_CASE("conv2d gradcheck with stride 2") {
  Rng rng(3);
  auto x = test::random_tensor<double>(rng, {1, 2, 7, 7}, true);
  auto k = test::random_tensor<double>(rng, {2, 2, 3, 3}, true);
  auto b = test::random_tensor<double>(rng, {2}, true);
  run_check([](const std::vector<Tensor<double>>& in) {
    return project(conv2d(in[0], in[1], in[2], 1, 2), 98);
  }, {x, k, b});
}

TEST_CASE("conv_transpose2d gradcheck on the x2 geometry") {
  Rng rng(4);
  auto x = test::random_tensor<double>(rng, {1, 2, 3, 3}, true);
  auto k = test::random_tensor<double>(rng, {2, 3, 4, 4}, true);
  auto b = test::random_tensor<double>(rng, {3}, true);
  run_check([](const std::vector<Tensor<double>>& in) {
    return project(conv_transpose2d(in[0], in[1], in[2], 2, 1), 97);
  }, {x, k, b});
}

TEST_CASE("prelu gradcheck away from the kink") {
  Rng rng(5);
  auto x = test::random_tensor<double>(rng, {1, 2, 5, 5}, true);
  // Push values away from zero so the epsilon probe cannot cross it.
  auto data = x.mutable_data();
  for (auto& v : data) v += (v >= 0 ? 0.5 : -0.5);
  auto s = Tensor<double>::scalar(0.25, true);
  run_check([](const std::vector<Tensor<double>>& in) {
    return project(prelu(in[0], in[1]), 96);
  }, {x, s});
}

TEST_CASE("tanh gradcheck") {
  Rng rng(6);
  auto x = test::random_tensor<double>(rng, {1, 2, 5, 5}, true);
  run_check([](const std::vector<Tensor<double>>& in) { return project(tanh(in[0]), 95); }, {x});
}

TEST_CASE("relu gradcheck away from the kink") {
  Rng rng(7);
  auto x = test::random_tensor<double>(rng, {1, 2, 5, 5}, true);
  auto data = x.mutable_data();
  for (auto& v : data) v += (v >= 0 ? 0.5 : -0.5);
  run_check([](const std::vector<Tensor<double>>& in) { return project(relu(in[0]), 94); }, {x});
}

TEST_CASE("abs_diff gradcheck away from equality") {
  Rng rng(8);
  auto a = test::random_tensor<double>(rng, {2, 3, 4, 4}, true);
  auto b = test::random_tensor<double>(rng, {2, 3, 4, 4}, true);
  auto da = a.mutable_data();
  auto db = b.mutable_data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    if (std::abs(da[i] - db[i]) < 0.2) da[i] += (da[i] >= db[i] ? 0.3 : -0.3);
  }
  run_check([](const std::vector<Tensor<double>>& in) {
    return project(abs_diff(in[0], in[1]), 93);
  }, {a, b});
}

TEST_CASE("hadamard, add, scale, mul_scalar gradcheck") {
  Rng rng(9);
  auto a = test::random_tensor<double>(rng, {2, 2, 3, 3}, true);
  auto b = test::random_tensor<double>(rng, {2, 2, 3, 3}, true);
  auto w = Tensor<double>::scalar(1.7, true);
  run_check([](const std::vector<Tensor<double>>& in) {
    auto mixed = add(hadamard(in[0], in[1]), scale(in[0], -0.5));
    return project(mul_scalar(mixed, in[2]), 92);
  }, {a, b, w});
}

TEST_CASE("concat and slice gradcheck") {
  Rng rng(10);
  auto a = test::random_tensor<double>(rng, {1, 2, 4, 4}, true);
  auto b = test::random_tensor<double>(rng, {1, 3, 4, 4}, true);
  run_check([](const std::vector<Tensor<double>>& in) {
    std::vector<Tensor<double>> parts{in[0], in[1]};
    auto cat = concat_channels<double>(parts);
    return project(slice_channels(cat, 1, 3), 91);
  }, {a, b});
}

TEST_CASE("nearest_upsample gradcheck") {
  Rng rng(11);
  auto x = test::random_tensor<double>(rng, {1, 2, 4, 4}, true);
  run_check([](const std::vector<Tensor<double>>& in) {
    return project(nearest_upsample(in[0], 2), 90);
  }, {x});
}

TEST_CASE("mse_loss gradcheck for both sides") {
  Rng rng(12);
  auto p = test::random_tensor<double>(rng, {2, 3, 3, 3}, true);
  auto t = test::random_tensor<double>(rng, {2, 3, 3, 3}, true);
  run_check([](const std::vector<Tensor<double>>& in) { return mse_loss(in[0], in[1]); }, {p, t});
}

TEST_CASE("gradcheck rejects non-scalar functions and non-finite values") {
  Rng rng(13);
  auto x = test::random_tensor<double>(rng, {3}, true);
  CHECK_THROWS_AS(gradcheck<double>(
                      [](const std::vector<Tensor<double>>& in) { return add(in[0], in[0]); }, {x},
                      1e-5, 1e-4),
                  std::invalid_argument);
  CHECK_THROWS_AS(gradcheck<double>(
                      [](const std::vector<Tensor<double>>& in) {
                        return scale(sum(in[0]), std::numeric_limits<double>::quiet_NaN());
                      },
                      {x}, 1e-5, 1e-4),
                  NumericError);
}

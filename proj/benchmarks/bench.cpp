#include <benchmark/benchmark.h>

#include "adrd/conv.hpp"
#include "adrd/image.hpp"
#include "adrd/metrics.hpp"
#include "adrd/network.hpp"
#include "adrd/rng.hpp"

namespace {

adrd::Tensor<float> random_tensor(adrd::Rng& rng, adrd::Shape shape) {
  std::vector<float> values(static_cast<std::size_t>(adrd::shape_numel(shape)));
  for (auto& v : values) v = static_cast<float>(rng.uniform() - 0.5);
  return adrd::Tensor<float>::from_data(std::move(shape), std::move(values));
}

void BM_Conv2d3x3(benchmark::State& state) {
  adrd::Rng rng(1);
  const std::int64_t ch = state.range(0);
  auto x = random_tensor(rng, {1, ch, 50, 50});
  auto k = random_tensor(rng, {ch, ch, 3, 3});
  auto b = random_tensor(rng, {ch});
  adrd::NoGradGuard ng;
  for (auto _ : state) {
    auto y = adrd::conv2d(x, k, b, 1, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * ch * ch * 9 * 50 * 50);
}
BENCHMARK(BM_Conv2d3x3)->Arg(16)->Arg(32)->Arg(64);

void BM_Conv2d1x1(benchmark::State& state) {
  adrd::Rng rng(2);
  const std::int64_t cin = state.range(0);
  auto x = random_tensor(rng, {1, cin, 50, 50});
  auto k = random_tensor(rng, {32, cin, 1, 1});
  auto b = random_tensor(rng, {32});
  adrd::NoGradGuard ng;
  for (auto _ : state) {
    auto y = adrd::conv2d(x, k, b, 0, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * cin * 32 * 50 * 50);
}
BENCHMARK(BM_Conv2d1x1)->Arg(64)->Arg(256)->Arg(1024);

void BM_ConvTranspose2d(benchmark::State& state) {
  adrd::Rng rng(3);
  const std::int64_t ch = state.range(0);
  auto x = random_tensor(rng, {1, ch, 50, 50});
  auto k = random_tensor(rng, {ch, ch, 4, 4});
  auto b = random_tensor(rng, {ch});
  adrd::NoGradGuard ng;
  for (auto _ : state) {
    auto y = adrd::conv_transpose2d(x, k, b, 2, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * ch * ch * 16 * 50 * 50);
}
BENCHMARK(BM_ConvTranspose2d)->Arg(16)->Arg(64);

void BM_TinyNetworkForward(benchmark::State& state) {
  adrd::NetworkConfig cfg;
  cfg.primary_channels = 8;
  cfg.growth_rate = 8;
  cfg.dense_layers_per_group = {3, 3};
  cfg.bottleneck_channels = 16;
  cfg.scale_factor = 4;
  adrd::AdrdNetwork<float> net(cfg, 7);
  adrd::Rng rng(4);
  auto x = random_tensor(rng, {1, 3, 16, 16});
  adrd::NoGradGuard ng;
  for (auto _ : state) {
    auto y = net.forward(x);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_TinyNetworkForward);

void BM_BicubicResample(benchmark::State& state) {
  adrd::Rng rng(5);
  adrd::RgbImage img(state.range(0), state.range(0));
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  for (auto _ : state) {
    auto out = adrd::bicubic_resample(img, img.height * 4, img.width * 4);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_BicubicResample)->Arg(32)->Arg(64);

void BM_Ssim(benchmark::State& state) {
  adrd::Rng rng(6);
  adrd::RgbImage a(state.range(0), state.range(0));
  for (auto& v : a.data) v = static_cast<float>(rng.uniform());
  adrd::RgbImage b = a;
  for (auto& v : b.data) v = static_cast<float>(v * 0.9f + 0.05f);
  const auto ya = adrd::rgb_to_y(a);
  const auto yb = adrd::rgb_to_y(b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(adrd::ssim(ya, yb, 4));
  }
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();

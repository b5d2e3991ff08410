#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "adrd/errors.hpp"
#include "adrd/gradcheck.hpp"
#include "adrd/network.hpp"
#include "support/test_utils.hpp"

using namespace adrd;

namespace {

AdrdNetwork<double> make_net(NetworkConfig cfg, std::uint64_t seed = 21) {
  return AdrdNetwork<double>(std::move(cfg), seed);
}

}  // namespace

TEST_CASE("config validation and channel plan") {
  NetworkConfig cfg;  // defaults are the full-size topology
  cfg.validate();
  CHECK(cfg.upsample_stages() == 2);
  const ChannelPlan plan = cfg.plan();
  CHECK(plan.group_inputs == std::vector<std::int64_t>{32, 64, 128, 256});
  CHECK(plan.group_outputs == std::vector<std::int64_t>{64, 128, 256, 512});
  CHECK(plan.wdb_outputs == std::vector<std::int64_t>{224, 448, 1664, 1280});
  CHECK(plan.final_features == 512);

  NetworkConfig bad = cfg;
  bad.scale_factor = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.growth_rate = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.dense_layers_per_group.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("config kv round-trip") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.attention_blend = 0.375;
  cfg.weighted_dense = false;
  const NetworkConfig back = NetworkConfig::from_kv(cfg.to_kv());
  CHECK(back.primary_channels == cfg.primary_channels);
  CHECK(back.dense_layers_per_group == cfg.dense_layers_per_group);
  CHECK(back.attention_blend == cfg.attention_blend);
  CHECK(back.weighted_dense == cfg.weighted_dense);
  CHECK_THROWS_AS(NetworkConfig::from_kv("nonsense_key=1\n"), DataError);
}

TEST_CASE("dense layer with unit weights reduces to the plain composite") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.dense_layers_per_group = {2};
  auto net = make_net(cfg);
  const auto& layer2 = net.blocks[0].layers[1];
  REQUIRE(layer2.edge_weights.size() == 2);

  Rng rng(5);
  auto x0 = test::random_tensor<double>(rng, {1, 4, 6, 6});
  auto x1 = test::random_tensor<double>(rng, {1, 4, 6, 6});
  std::vector<Tensor<double>> features{x0, x1};
  const Tensor<double> weighted = layer2.forward(features);

  // Hand-composed unweighted path using the same kernels.
  std::vector<Tensor<double>> parts{x0, x1};
  auto plain = conv2d(conv2d(relu(concat_channels<double>(parts)), layer2.pointwise_weight.tensor(),
                             layer2.pointwise_bias.tensor(), 0, 1),
                      layer2.spatial_weight.tensor(), layer2.spatial_bias.tensor(), 1, 1);
  CHECK(test::bitwise_equal(weighted, plain));
}

TEST_CASE("zero edge weight makes the layer invariant to that feature") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.dense_layers_per_group = {2};
  auto net = make_net(cfg);
  auto& layer2 = net.blocks[0].layers[1];
  layer2.edge_weights[0].values()[0] = 0.0;

  Rng rng(6);
  auto x0a = test::random_tensor<double>(rng, {1, 4, 6, 6});
  auto x0b = test::random_tensor<double>(rng, {1, 4, 6, 6});
  auto x1 = test::random_tensor<double>(rng, {1, 4, 6, 6});
  std::vector<Tensor<double>> fa{x0a, x1};
  std::vector<Tensor<double>> fb{x0b, x1};
  CHECK(test::bitwise_equal(layer2.forward(fa), layer2.forward(fb)));
}

TEST_CASE("dense layer validates feature count") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.dense_layers_per_group = {2};
  auto net = make_net(cfg);
  Rng rng(7);
  auto x0 = test::random_tensor<double>(rng, {1, 4, 6, 6});
  std::vector<Tensor<double>> wrong{x0};
  CHECK_THROWS_AS(net.blocks[0].layers[1].forward(wrong), std::invalid_argument);
}

TEST_CASE("weighted block with unit weights equals an independent dense block") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.dense_layers_per_group = {3};
  auto net = make_net(cfg);
  Rng rng(8);
  auto head = test::random_tensor<double>(rng, {2, 4, 5, 5});
  const Tensor<double> ours = net.blocks[0].forward(head);

  // Independently coded plain dense block over the same kernels.
  std::vector<Tensor<double>> feats{head};
  for (const auto& layer : net.blocks[0].layers) {
    auto mixed = relu(concat_channels<double>(feats));
    auto out = conv2d(conv2d(mixed, layer.pointwise_weight.tensor(), layer.pointwise_bias.tensor(), 0, 1),
                      layer.spatial_weight.tensor(), layer.spatial_bias.tensor(), 1, 1);
    feats.push_back(out);
  }
  const Tensor<double> plain = concat_channels<double>(feats);
  CHECK(test::bitwise_equal(ours, plain));
}

TEST_CASE("block channel arithmetic and the L=0 degenerate case") {
  NetworkConfig cfg;
  cfg.primary_channels = 32;
  cfg.growth_rate = 32;
  cfg.dense_layers_per_group = {6};
  cfg.bottleneck_channels = 64;
  auto net = make_net(cfg);
  Rng rng(9);
  auto head = test::random_tensor<double>(rng, {1, 32, 4, 4});
  CHECK(net.blocks[0].forward(head).dim(1) == 224);  // 32 + 6 * 32

  NetworkConfig empty = test::tiny_config(4);
  empty.dense_layers_per_group = {0, 1};
  auto net2 = make_net(empty);
  auto h2 = test::random_tensor<double>(rng, {1, 4, 4, 4});
  CHECK(test::bitwise_equal(net2.blocks[0].forward(h2), h2));
}

TEST_CASE("attention with zero blend returns the compressed features exactly") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.attention_blend = 0.0;
  auto net = make_net(cfg);
  Rng rng(10);
  auto head = test::random_tensor<double>(rng, {1, 4, 6, 6});
  auto wdb_out = net.blocks[0].forward(head);
  const auto enhanced = net.attentions[0].forward(head, wdb_out);
  const auto bot = net.attentions[0].compress(wdb_out);
  CHECK(test::bitwise_equal(enhanced, bot));
}

TEST_CASE("attention with zero maps returns the compressed features for any blend") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.attention_blend = 0.8;
  auto net = make_net(cfg);
  auto& sa = net.attentions[0];
  for (auto* p : {&sa.att_weight1, &sa.att_bias1, &sa.att_weight2, &sa.att_bias2, &sa.att_project_weight,
                  &sa.att_project_bias}) {
    auto vals = p->values();
    std::fill(vals.begin(), vals.end(), 0.0);
  }
  Rng rng(11);
  auto head = test::random_tensor<double>(rng, {1, 4, 6, 6});
  auto wdb_out = net.blocks[0].forward(head);
  CHECK(test::bitwise_equal(sa.forward(head, wdb_out), sa.compress(wdb_out)));
}

TEST_CASE("attention maps stay strictly inside (-1,1) and bound the update") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.attention_blend = 0.5;
  auto net = make_net(cfg);
  const auto& sa = net.attentions[0];
  Rng rng(12);
  auto head = test::random_tensor<double>(rng, {2, 4, 8, 8}, false, 0.0, 1.0);
  auto wdb_out = net.blocks[0].forward(head);

  const auto bot = sa.compress(wdb_out);
  const auto enhanced = sa.forward(head, wdb_out);
  // |enhanced - bot| = blend * |att| * |bot| <= blend * |bot| elementwise.
  for (std::size_t i = 0; i < bot.data().size(); ++i) {
    const double diff = std::abs(enhanced.data()[i] - bot.data()[i]);
    CHECK(diff <= 0.5 * std::abs(bot.data()[i]) + 1e-15);
  }

  // Reconstruct the attentive maps to check the open range.
  auto a = relu(conv2d(abs_diff(head, bot), sa.att_weight1.tensor(), sa.att_bias1.tensor(), 1, 1));
  a = relu(conv2d(a, sa.att_weight2.tensor(), sa.att_bias2.tensor(), 1, 1));
  a = conv2d(a, sa.att_project_weight.tensor(), sa.att_project_bias.tensor(), 0, 1);
  auto maps = tanh(a);
  for (auto v : maps.data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("upsampling stage isolates its two paths") {
  NetworkConfig cfg = test::tiny_config(4);
  auto net = make_net(cfg);
  auto& stage = net.stages[0];
  Rng rng(13);
  auto x = test::random_tensor<double>(rng, {1, 8, 5, 5});

  SUBCASE("zero deconvolution leaves the interpolation path") {
    auto dvals = stage.deconv_weight.values();
    std::fill(dvals.begin(), dvals.end(), 0.0);
    auto bvals = stage.deconv_bias.values();
    std::fill(bvals.begin(), bvals.end(), 0.0);
    const auto out = stage.forward(x);
    const auto low = conv2d(nearest_upsample(x, 2), stage.pointwise_weight.tensor(),
                            stage.pointwise_bias.tensor(), 0, 1);
    CHECK(test::bitwise_equal(out, low));
  }

  SUBCASE("zero pointwise path leaves the deconvolution path") {
    auto pvals = stage.pointwise_weight.values();
    std::fill(pvals.begin(), pvals.end(), 0.0);
    auto pb = stage.pointwise_bias.values();
    std::fill(pb.begin(), pb.end(), 0.0);
    const auto out = stage.forward(x);
    const auto high = prelu(conv_transpose2d(x, stage.deconv_weight.tensor(), stage.deconv_bias.tensor(),
                                             2, 1),
                            stage.prelu_slope.tensor());
    CHECK(test::bitwise_equal(out, high));
  }
}

TEST_CASE("upsampling stage exactly doubles spatial extents") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.bottleneck_channels = 64;
  auto net = make_net(cfg);
  Rng rng(14);
  auto x = test::random_tensor<double>(rng, {1, 64, 13, 17});
  CHECK(net.stages[0].forward(x).shape() == Shape{1, 64, 26, 34});
}

TEST_CASE("network forward traces channels and doubles per stage") {
  NetworkConfig cfg = test::tiny_config(8);
  auto net = make_net(cfg);
  Rng rng(15);
  auto x = test::random_tensor<double>(rng, {1, 3, 6, 6}, false, 0.0, 1.0);
  ForwardTrace trace;
  auto y = net.forward(x, &trace);
  CHECK(y.shape() == Shape{1, 3, 24, 24});
  CHECK(trace.group_input_channels == std::vector<std::int64_t>{8, 16});
  CHECK(trace.group_output_channels == std::vector<std::int64_t>{16, 32});
  CHECK(trace.post_bottleneck_channels == 16);
  CHECK_THROWS_AS(net.forward(test::random_tensor<double>(rng, {1, 4, 6, 6})), std::invalid_argument);
}

TEST_CASE("lightweight ablation topology constructs and runs") {
  NetworkConfig cfg;
  cfg.primary_channels = 12;
  cfg.growth_rate = 12;
  cfg.dense_layers_per_group = {6, 10, 14, 10};
  cfg.bottleneck_channels = 48;
  cfg.scale_factor = 4;
  auto net = AdrdNetwork<float>(cfg, 3);
  Rng rng(16);
  NoGradGuard ng;
  auto x = test::random_tensor<float>(rng, {1, 3, 12, 12}, false, 0.0, 1.0);
  ForwardTrace trace;
  auto y = net.forward(x, &trace);
  CHECK(y.shape() == Shape{1, 3, 48, 48});
  CHECK(trace.group_input_channels == std::vector<std::int64_t>{12, 24, 48, 96});
}

TEST_CASE("batch invariance: a two-item batch equals stacked single forwards") {
  NetworkConfig cfg = test::tiny_config(4);
  auto net = AdrdNetwork<float>(cfg, 9);
  Rng rng(17);
  NoGradGuard ng;
  auto pair = test::random_tensor<float>(rng, {2, 3, 8, 8}, false, 0.0, 1.0);
  auto one = Tensor<float>::zeros({1, 3, 8, 8});
  auto two = Tensor<float>::zeros({1, 3, 8, 8});
  const auto n = one.numel();
  std::copy(pair.data().begin(), pair.data().begin() + n, one.mutable_data().begin());
  std::copy(pair.data().begin() + n, pair.data().end(), two.mutable_data().begin());

  auto both = net.forward(pair);
  auto y1 = net.forward(one);
  auto y2 = net.forward(two);
  const auto m = y1.numel();
  for (std::int64_t i = 0; i < m; ++i) {
    CHECK(both.data()[i] == y1.data()[i]);
    CHECK(both.data()[m + i] == y2.data()[i]);
  }
}

TEST_CASE("ablation switches drop the matching parameters") {
  NetworkConfig cfg = test::tiny_config(4);
  auto full = AdrdNetwork<float>(cfg, 1);
  cfg.weighted_dense = false;
  auto db = AdrdNetwork<float>(cfg, 1);
  CHECK(db.parameter_count() < full.parameter_count());
  for (const auto* p : db.parameters()) CHECK(p->name().find(".edge") == std::string::npos);

  cfg = test::tiny_config(4);
  cfg.use_attention = false;
  auto nosa = AdrdNetwork<float>(cfg, 1);
  for (const auto* p : nosa.parameters()) CHECK(p->name().find("attention.conv") == std::string::npos);

  cfg = test::tiny_config(4);
  cfg.residual_upsampling = false;
  auto plain = AdrdNetwork<float>(cfg, 1);
  for (const auto* p : plain.parameters()) CHECK(p->name().find("upsample1.pointwise") == std::string::npos);

  Rng rng(18);
  NoGradGuard ng;
  auto x = test::random_tensor<float>(rng, {1, 3, 8, 8}, false, 0.0, 1.0);
  CHECK(db.forward(x).shape() == Shape{1, 3, 32, 32});
  CHECK(nosa.forward(x).shape() == Shape{1, 3, 32, 32});
  CHECK(plain.forward(x).shape() == Shape{1, 3, 32, 32});
}

TEST_CASE("edge weight matrices start at one with triangular rows") {
  NetworkConfig cfg = test::tiny_config(4);
  cfg.dense_layers_per_group = {3, 2};
  auto net = AdrdNetwork<float>(cfg, 30);
  const auto matrices = net.edge_weight_matrices();
  REQUIRE(matrices.size() == 2);
  for (const auto& rows : matrices)
    for (std::size_t l = 0; l < rows.size(); ++l) {
      CHECK(rows[l].size() == l + 1);
      for (auto w : rows[l]) CHECK(w == 1.0f);
    }

  const std::string text = format_edge_weight_matrices(net);
  CHECK(text.find("block 1 (3 layers)") != std::string::npos);
  CHECK(text.find("layer 3: 1 1 1") != std::string::npos);

  // Exported values track the in-memory parameters.
  net.blocks[1].layers[1].edge_weights[0].values()[0] = 0.8125f;  // exact in binary
  const std::string updated = format_edge_weight_matrices(net);
  CHECK(updated.find("0.8125") != std::string::npos);
}

TEST_CASE("miniature end-to-end network passes gradcheck") {
  NetworkConfig cfg;
  cfg.primary_channels = 4;
  cfg.growth_rate = 4;
  cfg.dense_layers_per_group = {2};
  cfg.bottleneck_channels = 8;
  cfg.scale_factor = 2;  // one stage keeps this unit test quick
  auto net = make_net(cfg, 77);

  Rng rng(19);
  auto x = test::random_tensor<double>(rng, {1, 3, 6, 6}, true, 0.0, 1.0);
  auto target = test::random_tensor<double>(rng, {1, 3, 12, 12}, false, 0.0, 1.0);

  std::vector<Tensor<double>> inputs{x};
  for (auto* p : net.parameters()) inputs.push_back(p->tensor());

  const auto report = gradcheck<double>(
      [&net, &target](const std::vector<Tensor<double>>& in) {
        return mse_loss(net.forward(in[0]), target);
      },
      inputs, 1e-5, 1e-3);
  INFO("worst at ", report.worst, " rel err ", report.max_rel_error);
  CHECK(report.passed);
}

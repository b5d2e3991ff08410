#include "adrd/network.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "adrd/errors.hpp"
#include "adrd/rng.hpp"

namespace adrd {

void NetworkConfig::validate() const {
  if (primary_channels <= 0) throw std::invalid_argument("config: primary_channels must be positive");
  if (growth_rate <= 0) throw std::invalid_argument("config: growth_rate must be positive");
  if (dense_layers_per_group.empty())
    throw std::invalid_argument("config: dense_layers_per_group must name at least one group");
  for (auto l : dense_layers_per_group)
    if (l < 0) throw std::invalid_argument("config: dense layer counts must be >= 0");
  if (bottleneck_channels <= 0) throw std::invalid_argument("config: bottleneck_channels must be positive");
  if (scale_factor < 1 || (scale_factor & (scale_factor - 1)) != 0)
    throw std::invalid_argument("config: scale_factor must be a power of 2, got " +
                                std::to_string(scale_factor));
  if (!std::isfinite(attention_blend))
    throw std::invalid_argument("config: attention_blend must be finite");
  if (init_scheme != "he_fan_in")
    throw std::invalid_argument("config: unknown init_scheme '" + init_scheme + "'");
}

int NetworkConfig::upsample_stages() const {
  int stages = 0;
  for (int s = scale_factor; s > 1; s /= 2) ++stages;
  return stages;
}

ChannelPlan NetworkConfig::plan() const {
  validate();
  ChannelPlan p;
  std::int64_t channels = primary_channels;
  for (auto layers : dense_layers_per_group) {
    p.group_inputs.push_back(channels);
    p.wdb_outputs.push_back(channels + layers * growth_rate);
    channels *= 2;  // concat(head, enhanced)
    p.group_outputs.push_back(channels);
  }
  p.final_features = channels;
  p.bottleneck = bottleneck_channels;
  return p;
}

namespace {

std::string bool_str(bool v) { return v ? "1" : "0"; }

std::string double_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::int64_t> parse_int_list(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoll(item));
  }
  return out;
}

}  // namespace

std::string NetworkConfig::to_kv() const {
  std::ostringstream os;
  os << "primary_channels=" << primary_channels << '\n';
  os << "growth_rate=" << growth_rate << '\n';
  os << "dense_layers=";
  for (std::size_t i = 0; i < dense_layers_per_group.size(); ++i) {
    if (i) os << ',';
    os << dense_layers_per_group[i];
  }
  os << '\n';
  os << "attention_blend=" << double_str(attention_blend) << '\n';
  os << "bottleneck_channels=" << bottleneck_channels << '\n';
  os << "scale_factor=" << scale_factor << '\n';
  os << "weighted_dense=" << bool_str(weighted_dense) << '\n';
  os << "use_attention=" << bool_str(use_attention) << '\n';
  os << "residual_upsampling=" << bool_str(residual_upsampling) << '\n';
  os << "init_scheme=" << init_scheme << '\n';
  return os.str();
}

NetworkConfig NetworkConfig::from_kv(const std::string& text) {
  NetworkConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("network config: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "primary_channels") cfg.primary_channels = std::stoll(value);
      else if (key == "growth_rate") cfg.growth_rate = std::stoll(value);
      else if (key == "dense_layers") cfg.dense_layers_per_group = parse_int_list(value);
      else if (key == "attention_blend") cfg.attention_blend = std::stod(value);
      else if (key == "bottleneck_channels") cfg.bottleneck_channels = std::stoll(value);
      else if (key == "scale_factor") cfg.scale_factor = std::stoi(value);
      else if (key == "weighted_dense") cfg.weighted_dense = value != "0";
      else if (key == "use_attention") cfg.use_attention = value != "0";
      else if (key == "residual_upsampling") cfg.residual_upsampling = value != "0";
      else if (key == "init_scheme") cfg.init_scheme = value;
      else throw DataError("network config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw DataError("network config: bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw DataError("network config: bad value for '" + key + "'");
    }
  }
  return cfg;
}

namespace {

template <typename T>
Tensor<T> he_kernel(Rng& rng, Shape shape, std::int64_t fan_in) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<T> values(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : values) v = static_cast<T>(stddev * rng.normal());
  return Tensor<T>::from_data(std::move(shape), std::move(values));
}

// Conv kernels see in_ch*kh*kw inputs per output sample; a stride-s
// deconvolution spreads the same connections over s^2 output positions.
template <typename T>
Parameter<T> conv_param(Rng& rng, const std::string& name, std::int64_t out_ch, std::int64_t in_ch,
                        std::int64_t k) {
  return Parameter<T>(name, he_kernel<T>(rng, {out_ch, in_ch, k, k}, in_ch * k * k));
}

template <typename T>
Parameter<T> deconv_param(Rng& rng, const std::string& name, std::int64_t in_ch, std::int64_t out_ch,
                          std::int64_t k, int stride) {
  return Parameter<T>(name, he_kernel<T>(rng, {in_ch, out_ch, k, k}, in_ch * k * k / (stride * stride)));
}

template <typename T>
Parameter<T> bias_param(const std::string& name, std::int64_t channels) {
  return Parameter<T>(name, Tensor<T>::zeros({channels}));
}

template <typename T>
Parameter<T> slope_param(const std::string& name) {
  return Parameter<T>(name, Tensor<T>::scalar(T(0.25)));
}

}  // namespace

template <typename T>
Tensor<T> DenseLayer<T>::forward(std::span<const Tensor<T>> features) const {
  if (static_cast<std::int64_t>(features.size()) != index)
    throw std::invalid_argument("dense layer " + std::to_string(index) + " expects " +
                                std::to_string(index) + " feature maps, got " +
                                std::to_string(features.size()));
  std::vector<Tensor<T>> scaled;
  scaled.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    scaled.push_back(weighted ? mul_scalar(features[i], edge_weights[i].tensor()) : features[i]);
  Tensor<T> mixed = relu(concat_channels<T>(scaled));
  Tensor<T> compressed = conv2d(mixed, pointwise_weight.tensor(), pointwise_bias.tensor(), 0, 1);
  return conv2d(compressed, spatial_weight.tensor(), spatial_bias.tensor(), 1, 1);
}

template <typename T>
Tensor<T> WeightedDenseBlock<T>::forward(const Tensor<T>& head) const {
  if (head.shape().size() != 4 || head.dim(1) != head_channels)
    throw std::invalid_argument("dense block expects " + std::to_string(head_channels) +
                                " head channels, got " + shape_str(head.shape()));
  std::vector<Tensor<T>> features{head};
  features.reserve(layers.size() + 1);
  for (const auto& layer : layers) features.push_back(layer.forward(features));
  if (features.size() == 1) return head;
  return concat_channels<T>(features);
}

template <typename T>
Tensor<T> SpatialAttention<T>::compress(const Tensor<T>& wdb_out) const {
  return relu(conv2d(wdb_out, bottleneck_weight.tensor(), bottleneck_bias.tensor(), 0, 1));
}

template <typename T>
Tensor<T> SpatialAttention<T>::forward(const Tensor<T>& head, const Tensor<T>& wdb_out) const {
  Tensor<T> bot = compress(wdb_out);
  if (!has_attention) return bot;
  Tensor<T> residual = abs_diff(head, bot);
  Tensor<T> a = relu(conv2d(residual, att_weight1.tensor(), att_bias1.tensor(), 1, 1));
  a = relu(conv2d(a, att_weight2.tensor(), att_bias2.tensor(), 1, 1));
  a = conv2d(a, att_project_weight.tensor(), att_project_bias.tensor(), 0, 1);
  Tensor<T> maps = tanh(a);
  Tensor<T> gated = hadamard(maps, bot);
  return add(scale(gated, blend), bot);
}

template <typename T>
Tensor<T> ResidualDeconvStage<T>::forward(const Tensor<T>& x) const {
  Tensor<T> high = prelu(conv_transpose2d(x, deconv_weight.tensor(), deconv_bias.tensor(), 2, 1),
                         prelu_slope.tensor());
  if (!residual) return high;
  Tensor<T> low = conv2d(nearest_upsample(x, 2), pointwise_weight.tensor(), pointwise_bias.tensor(), 0, 1);
  return add(high, low);
}

template <typename T>
AdrdNetwork<T>::AdrdNetwork(NetworkConfig config, std::uint64_t init_seed)
    : config_(std::move(config)), plan_(config_.plan()) {
  Rng rng(init_seed);
  const std::int64_t k3 = 3, k1 = 1;

  primary_weight = conv_param<T>(rng, "primary.conv.weight", config_.primary_channels, 3, k3);
  primary_bias = bias_param<T>("primary.conv.bias", config_.primary_channels);
  primary_slope = slope_param<T>("primary.prelu.slope");

  const std::size_t groups = config_.dense_layers_per_group.size();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::string gp = "group" + std::to_string(g + 1);
    const std::int64_t head = plan_.group_inputs[g];
    const std::int64_t growth = config_.growth_rate;

    WeightedDenseBlock<T> block;
    block.head_channels = head;
    block.growth_rate = growth;
    for (std::int64_t l = 1; l <= config_.dense_layers_per_group[g]; ++l) {
      const std::string lp = gp + ".dense" + std::to_string(l);
      DenseLayer<T> layer;
      layer.index = l;
      layer.weighted = config_.weighted_dense;
      for (std::int64_t i = 0; i < l; ++i)
        layer.edge_weights.emplace_back(lp + ".edge" + std::to_string(i), Tensor<T>::scalar(T(1)));
      if (!config_.weighted_dense)
        for (auto& w : layer.edge_weights) w.tensor().set_requires_grad(false);
      const std::int64_t concat_ch = head + (l - 1) * growth;
      layer.pointwise_weight = conv_param<T>(rng, lp + ".pointwise.weight", growth, concat_ch, k1);
      layer.pointwise_bias = bias_param<T>(lp + ".pointwise.bias", growth);
      layer.spatial_weight = conv_param<T>(rng, lp + ".spatial.weight", growth, growth, k3);
      layer.spatial_bias = bias_param<T>(lp + ".spatial.bias", growth);
      block.layers.push_back(std::move(layer));
    }
    blocks.push_back(std::move(block));

    SpatialAttention<T> sa;
    sa.has_attention = config_.use_attention;
    sa.blend = static_cast<T>(config_.attention_blend);
    sa.bottleneck_weight =
        conv_param<T>(rng, gp + ".attention.bottleneck.weight", head, plan_.wdb_outputs[g], k1);
    sa.bottleneck_bias = bias_param<T>(gp + ".attention.bottleneck.bias", head);
    if (config_.use_attention) {
      sa.att_weight1 = conv_param<T>(rng, gp + ".attention.conv1.weight", head, head, k3);
      sa.att_bias1 = bias_param<T>(gp + ".attention.conv1.bias", head);
      sa.att_weight2 = conv_param<T>(rng, gp + ".attention.conv2.weight", head, head, k3);
      sa.att_bias2 = bias_param<T>(gp + ".attention.conv2.bias", head);
      sa.att_project_weight = conv_param<T>(rng, gp + ".attention.project.weight", head, head, k1);
      sa.att_project_bias = bias_param<T>(gp + ".attention.project.bias", head);
    }
    attentions.push_back(std::move(sa));
  }

  bottleneck_weight =
      conv_param<T>(rng, "bottleneck.weight", config_.bottleneck_channels, plan_.final_features, k1);
  bottleneck_bias = bias_param<T>("bottleneck.bias", config_.bottleneck_channels);

  for (int s = 0; s < config_.upsample_stages(); ++s) {
    const std::string sp = "upsample" + std::to_string(s + 1);
    ResidualDeconvStage<T> stage;
    stage.residual = config_.residual_upsampling;
    stage.deconv_weight = deconv_param<T>(rng, sp + ".deconv.weight", config_.bottleneck_channels,
                                          config_.bottleneck_channels, 4, 2);
    stage.deconv_bias = bias_param<T>(sp + ".deconv.bias", config_.bottleneck_channels);
    stage.prelu_slope = slope_param<T>(sp + ".prelu.slope");
    if (config_.residual_upsampling) {
      stage.pointwise_weight = conv_param<T>(rng, sp + ".pointwise.weight", config_.bottleneck_channels,
                                             config_.bottleneck_channels, k1);
      stage.pointwise_bias = bias_param<T>(sp + ".pointwise.bias", config_.bottleneck_channels);
    }
    stages.push_back(std::move(stage));
  }

  reconstruct_weight = conv_param<T>(rng, "reconstruct.weight", 3, config_.bottleneck_channels, k3);
  reconstruct_bias = bias_param<T>("reconstruct.bias", 3);
}

template <typename T>
AdrdNetwork<T> AdrdNetwork<T>::clone() const {
  AdrdNetwork<T> copy(config_, 0);
  auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto from = src[i]->values();
    auto to = dst[i]->values();
    std::copy(from.begin(), from.end(), to.begin());
  }
  return copy;
}

template <typename T>
Tensor<T> AdrdNetwork<T>::forward(const Tensor<T>& lr_batch, ForwardTrace* trace) const {
  const Shape& s = lr_batch.shape();
  if (s.size() != 4 || s[1] != 3)
    throw std::invalid_argument("network input must be [N,3,H,W], got " + shape_str(s));

  Tensor<T> x = prelu(conv2d(lr_batch, primary_weight.tensor(), primary_bias.tensor(), 1, 1),
                      primary_slope.tensor());
  for (std::size_t g = 0; g < blocks.size(); ++g) {
    Tensor<T> head = x;
    if (trace) trace->group_input_channels.push_back(head.dim(1));
    Tensor<T> wdb_out = blocks[g].forward(head);
    Tensor<T> enhanced = attentions[g].forward(head, wdb_out);
    std::vector<Tensor<T>> joined{head, enhanced};
    x = concat_channels<T>(joined);
    if (trace) trace->group_output_channels.push_back(x.dim(1));
  }
  x = relu(conv2d(x, bottleneck_weight.tensor(), bottleneck_bias.tensor(), 0, 1));
  if (trace) trace->post_bottleneck_channels = x.dim(1);
  for (const auto& stage : stages) x = stage.forward(x);
  x = conv2d(x, reconstruct_weight.tensor(), reconstruct_bias.tensor(), 1, 1);
  if (trace) trace->output_shape = x.shape();
  return x;
}

template <typename T>
std::vector<Parameter<T>*> AdrdNetwork<T>::parameters() {
  std::vector<Parameter<T>*> out;
  auto push = [&out](Parameter<T>& p) {
    if (p.defined()) out.push_back(&p);
  };
  push(primary_weight);
  push(primary_bias);
  push(primary_slope);
  for (auto& block : blocks)
    for (auto& layer : block.layers) {
      if (layer.weighted)
        for (auto& w : layer.edge_weights) push(w);
      push(layer.pointwise_weight);
      push(layer.pointwise_bias);
      push(layer.spatial_weight);
      push(layer.spatial_bias);
    }
  for (auto& sa : attentions) {
    push(sa.bottleneck_weight);
    push(sa.bottleneck_bias);
    if (sa.has_attention) {
      push(sa.att_weight1);
      push(sa.att_bias1);
      push(sa.att_weight2);
      push(sa.att_bias2);
      push(sa.att_project_weight);
      push(sa.att_project_bias);
    }
  }
  push(bottleneck_weight);
  push(bottleneck_bias);
  for (auto& stage : stages) {
    push(stage.deconv_weight);
    push(stage.deconv_bias);
    push(stage.prelu_slope);
    if (stage.residual) {
      push(stage.pointwise_weight);
      push(stage.pointwise_bias);
    }
  }
  push(reconstruct_weight);
  push(reconstruct_bias);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> AdrdNetwork<T>::parameters() const {
  auto mutable_params = const_cast<AdrdNetwork<T>*>(this)->parameters();
  return std::vector<const Parameter<T>*>(mutable_params.begin(), mutable_params.end());
}

template <typename T>
void AdrdNetwork<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
std::int64_t AdrdNetwork<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto* p : parameters()) n += p->numel();
  return n;
}

template <typename T>
std::vector<std::vector<std::vector<T>>> AdrdNetwork<T>::edge_weight_matrices() const {
  std::vector<std::vector<std::vector<T>>> out;
  for (const auto& block : blocks) {
    std::vector<std::vector<T>> rows;
    for (const auto& layer : block.layers) {
      std::vector<T> row;
      for (const auto& w : layer.edge_weights) row.push_back(w.values()[0]);
      rows.push_back(std::move(row));
    }
    out.push_back(std::move(rows));
  }
  return out;
}

template <typename T>
std::string format_edge_weight_matrices(const AdrdNetwork<T>& net) {
  std::ostringstream os;
  const auto matrices = net.edge_weight_matrices();
  for (std::size_t g = 0; g < matrices.size(); ++g) {
    os << "block " << (g + 1) << " (" << matrices[g].size() << " layers)\n";
    for (std::size_t l = 0; l < matrices[g].size(); ++l) {
      os << "layer " << (l + 1) << ":";
      for (const auto w : matrices[g][l]) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), " %.9g", static_cast<double>(w));
        os << buf;
      }
      os << '\n';
    }
  }
  return os.str();
}

template struct DenseLayer<float>;
template struct DenseLayer<double>;
template struct WeightedDenseBlock<float>;
template struct WeightedDenseBlock<double>;
template struct SpatialAttention<float>;
template struct SpatialAttention<double>;
template struct ResidualDeconvStage<float>;
template struct ResidualDeconvStage<double>;
template class AdrdNetwork<float>;
template class AdrdNetwork<double>;
template std::string format_edge_weight_matrices<float>(const AdrdNetwork<float>&);
template std::string format_edge_weight_matrices<double>(const AdrdNetwork<double>&);

}  // namespace adrd

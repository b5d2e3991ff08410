#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adrd/conv.hpp"
#include "adrd/tensor.hpp"

namespace adrd {

// Static channel arithmetic for a network topology; computed at construction
// and cross-checked against live tensor shapes by ForwardTrace.
struct ChannelPlan {
  std::vector<std::int64_t> group_inputs;
  std::vector<std::int64_t> group_outputs;  // concat doubles each group
  std::vector<std::int64_t> wdb_outputs;    // head + layers * growth
  std::int64_t final_features = 0;
  std::int64_t bottleneck = 0;
};

struct NetworkConfig {
  std::int64_t primary_channels = 32;
  std::int64_t growth_rate = 32;
  std::vector<std::int64_t> dense_layers_per_group = {6, 12, 48, 32};
  double attention_blend = 0.5;
  std::int64_t bottleneck_channels = 256;
  int scale_factor = 4;
  // Ablation switches: fixed unit edge weights, bottleneck-only groups, or
  // plain deconvolution upsampling.
  bool weighted_dense = true;
  bool use_attention = true;
  bool residual_upsampling = true;
  std::string init_scheme = "he_fan_in";

  void validate() const;        // throws std::invalid_argument
  int upsample_stages() const;  // log2(scale_factor)
  ChannelPlan plan() const;

  std::string to_kv() const;
  static NetworkConfig from_kv(const std::string& text);  // throws DataError
};

// One dense layer: per-predecessor scalar edge weights, then
// ReLU -> 1x1 conv -> 3x3 conv (padding 1) producing growth_rate channels.
template <typename T>
struct DenseLayer {
  std::int64_t index = 0;  // 1-based position; equals the edge-weight count
  bool weighted = true;
  std::vector<Parameter<T>> edge_weights;
  Parameter<T> pointwise_weight, pointwise_bias;
  Parameter<T> spatial_weight, spatial_bias;

  Tensor<T> forward(std::span<const Tensor<T>> features) const;
};

template <typename T>
struct WeightedDenseBlock {
  std::int64_t head_channels = 0;
  std::int64_t growth_rate = 0;
  std::vector<DenseLayer<T>> layers;

  // Returns [head, layer 1, ..., layer L] concatenated along channels.
  Tensor<T> forward(const Tensor<T>& head) const;
};

// Compresses block output back to the head width, then gates it with
// attentive maps learned from the residual against the head.
template <typename T>
struct SpatialAttention {
  bool has_attention = true;
  T blend = T(0.5);
  Parameter<T> bottleneck_weight, bottleneck_bias;
  Parameter<T> att_weight1, att_bias1;
  Parameter<T> att_weight2, att_bias2;
  Parameter<T> att_project_weight, att_project_bias;

  Tensor<T> compress(const Tensor<T>& wdb_out) const;  // ReLU(1x1 conv)
  Tensor<T> forward(const Tensor<T>& head, const Tensor<T>& wdb_out) const;
};

// One x2 upsampling stage: learnable deconvolution path for high frequency
// plus nearest-neighbour + 1x1 conv bypass for low frequency.
template <typename T>
struct ResidualDeconvStage {
  bool residual = true;
  Parameter<T> deconv_weight, deconv_bias;  // [C, C, 4, 4], stride 2, pad 1
  Parameter<T> prelu_slope;
  Parameter<T> pointwise_weight, pointwise_bias;

  Tensor<T> forward(const Tensor<T>& x) const;
};

struct ForwardTrace {
  std::vector<std::int64_t> group_input_channels;
  std::vector<std::int64_t> group_output_channels;
  std::int64_t post_bottleneck_channels = 0;
  Shape output_shape;
};

template <typename T>
class AdrdNetwork {
 public:
  AdrdNetwork(NetworkConfig config, std::uint64_t init_seed);
  AdrdNetwork(AdrdNetwork&&) noexcept = default;
  AdrdNetwork& operator=(AdrdNetwork&&) noexcept = default;
  AdrdNetwork(const AdrdNetwork&) = delete;
  AdrdNetwork& operator=(const AdrdNetwork&) = delete;

  // Values are copied; evaluation on a snapshot must clone, parameters are
  // otherwise shared with the training loop.
  AdrdNetwork clone() const;

  // lr_batch is [N,3,h,w] in [0,1]; output is [N,3,h*scale,w*scale],
  // unclamped. Clamping happens at image emission.
  Tensor<T> forward(const Tensor<T>& lr_batch, ForwardTrace* trace = nullptr) const;

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  void zero_grad();
  std::int64_t parameter_count() const;

  const NetworkConfig& config() const { return config_; }
  const ChannelPlan& plan() const { return plan_; }

  // Lower-triangular edge-weight matrix per group: row l holds l entries.
  std::vector<std::vector<std::vector<T>>> edge_weight_matrices() const;

  Parameter<T> primary_weight, primary_bias, primary_slope;
  std::vector<WeightedDenseBlock<T>> blocks;
  std::vector<SpatialAttention<T>> attentions;
  Parameter<T> bottleneck_weight, bottleneck_bias;
  std::vector<ResidualDeconvStage<T>> stages;
  Parameter<T> reconstruct_weight, reconstruct_bias;

 private:
  NetworkConfig config_;
  ChannelPlan plan_;
};

// Plain-text dump of the edge-weight matrices for inspection.
template <typename T>
std::string format_edge_weight_matrices(const AdrdNetwork<T>& net);

}  // namespace adrd

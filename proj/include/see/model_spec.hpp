#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "see/event_ingest.hpp"

namespace see {

enum class LayerKind {
  conv1x1,
  subm_conv3x3,
  subm_dw3x3,
  strided_conv3x3,
  strided_dw3x3,
  max_pool2x2,
  avg_pool2x2,
  global_avg_pool,
};

enum class Activation { none, relu6 };

/// Where a layer sits in the network; residual handling keys off `project`.
enum class LayerRole { stem, stem_pool, expand, depthwise, project, head_pool };

std::string_view to_string(LayerKind k);
std::string_view to_string(Activation a);
LayerKind layer_kind_from_string(std::string_view s);
Activation activation_from_string(std::string_view s);

bool is_3x3(LayerKind k);
bool is_depthwise(LayerKind k);
bool is_strided(LayerKind k);
bool has_weights(LayerKind k);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv1x1;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  Activation activation = Activation::none;
  LayerRole role = LayerRole::stem;
  int block = -1;             // owning block, -1 for stem and head
  bool has_residual = false;  // set on the project layer of a residual block

  std::size_t weight_count() const;
  std::size_t bias_count() const { return has_weights(kind) ? static_cast<std::size_t>(out_channels) : 0; }
  /// Throws ArgumentError on inconsistent kind/stride/channels.
  void validate() const;
};

/// MobileNetV2 inverted bottleneck: [1x1 expand] -> 3x3 depthwise -> 1x1 project.
struct BlockSpec {
  int expansion = 1;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;

  int hidden_channels() const { return in_channels * expansion; }
  bool has_residual() const { return stride == 1 && in_channels == out_channels; }
  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

enum class StemPool { none, max, avg };

std::string_view to_string(StemPool p);
StemPool stem_pool_from_string(std::string_view s);

struct ModelSpec {
  VoxelGridConfig input;
  LayerKind stem_kind = LayerKind::subm_conv3x3;  // subm_conv3x3 or strided_conv3x3
  int stem_channels = 16;
  StemPool stem_pool = StemPool::none;
  std::vector<BlockSpec> blocks;
  int gru_hidden = 32;

  /// Flattened execution order, ending with global average pooling.
  std::vector<LayerSpec> layers() const;
  int embedding_size() const { return blocks.empty() ? stem_channels : blocks.back().out_channels; }
  /// Backbone weights plus biases.
  std::size_t parameter_count() const;
  void validate() const;
  /// FNV-1a 64 over the canonical JSON text.
  std::uint64_t hash() const;
  std::string hash_hex() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VoxelGridConfig& cfg);
VoxelGridConfig voxel_config_from_json(const nlohmann::json& j);

std::string hash_hex(std::uint64_t h);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace see

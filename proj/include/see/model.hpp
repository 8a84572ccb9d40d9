#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "see/model_spec.hpp"
#include "see/recurrent_head.hpp"
#include "see/scnn_engine.hpp"

namespace see {

/// Voxel counts saturate here before entering either backbone.
inline constexpr std::int32_t kCountSaturation = 255;

/// Float backbone; `layers` runs parallel to spec.layers() (pool entries carry no tensors).
struct FloatBackbone {
  ModelSpec spec;
  std::vector<FloatLayerParams> layers;
};

/// Integer backbone produced by quantize_model.
struct QuantBackbone {
  ModelSpec spec;
  double input_scale = 1.0;  // real value of one input quantum
  QuantParams input_q;       // count -> int8, approximates 1 / input_scale
  std::vector<QuantLayerParams> layers;
  std::vector<double> output_scales;  // per layer
  std::vector<QuantParams> skip_q;    // per block; used only by residual blocks
  double embedding_scale = 1.0;
};

enum class NumericMode { float32, int8 };
enum class ExecMode { sparse, dense };

struct Model {
  std::variant<FloatBackbone, QuantBackbone> backbone;
  HeadWeights head;

  const ModelSpec& spec() const;
  NumericMode mode() const { return std::holds_alternative<QuantBackbone>(backbone) ? NumericMode::int8 : NumericMode::float32; }
  /// Throws LoadError naming the first inconsistent layer.
  void validate() const;
};

struct LayerStats {
  std::string name;
  LayerKind kind = LayerKind::conv1x1;
  std::size_t active_in = 0;
  std::size_t active_out = 0;
  OpCounter ops;
};

SparseTensor<float> prepare_input(const SparseTensor<std::int32_t>& counts);
/// Integer-only: saturate at kCountSaturation, then requantize with `input_q`.
SparseTensor<std::int8_t> prepare_input(const SparseTensor<std::int32_t>& counts, const QuantParams& input_q);

/// Runs every layer in order. When `stats` is given it receives one entry per layer.
std::vector<float> run_backbone(const FloatBackbone& bb, const SparseTensor<std::int32_t>& counts,
                                std::vector<LayerStats>* stats = nullptr);
std::vector<std::int8_t> run_backbone(const QuantBackbone& bb, const SparseTensor<std::int32_t>& counts,
                                      std::vector<LayerStats>* stats = nullptr);

/// Same network evaluated with dense layers over the full grid plus an activity mask; results
/// equal the sparse path exactly.
std::vector<float> run_backbone_dense(const FloatBackbone& bb, const SparseTensor<std::int32_t>& counts,
                                      std::vector<LayerStats>* stats = nullptr);
std::vector<std::int8_t> run_backbone_dense(const QuantBackbone& bb, const SparseTensor<std::int32_t>& counts,
                                            std::vector<LayerStats>* stats = nullptr);

/// Backbone embedding as floats (dequantized in int8 mode).
std::vector<float> embed(const Model& model, const SparseTensor<std::int32_t>& counts, ExecMode mode = ExecMode::sparse,
                         std::vector<LayerStats>* stats = nullptr);

/// Threads `state` through the clips, one pixel prediction per clip. The caller owns state resets.
std::vector<PixelPoint> run_sequence(const Model& model, std::span<const SparseTensor<std::int32_t>> clips,
                                     HeadState& state, ExecMode mode = ExecMode::sparse);
std::vector<PixelPoint> run_sequence(const Model& model, std::span<const SparseTensor<std::int32_t>> clips,
                                     ExecMode mode = ExecMode::sparse);

/// Post-training quantization. Scales are per-tensor max-abs over the calibration inputs.
/// Throws ArgumentError when `calibration` is empty.
QuantBackbone quantize_model(const FloatBackbone& bb, std::span<const SparseTensor<std::int32_t>> calibration);

/// He-style uniform init; deterministic for a seed.
FloatBackbone random_backbone(const ModelSpec& spec, std::uint64_t seed);
HeadWeights random_head(int input_size, int hidden_size, std::uint64_t seed, float scale = 0.5f);

}  // namespace see

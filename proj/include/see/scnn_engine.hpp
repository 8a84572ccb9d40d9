#pragma once

#include <cstdint>
#include <vector>

#include "see/model_spec.hpp"
#include "see/quantizer.hpp"
#include "see/sparse_tensor.hpp"

namespace see {

struct FloatLayerParams {
  std::vector<float> weights;  // conv1x1: [cin][cout]; conv3x3: [ky][kx][cin][cout]; dw3x3: [ky][kx][c]
  std::vector<float> bias;
};

struct QuantLayerParams {
  std::vector<std::int8_t> weights;  // same layouts as FloatLayerParams
  std::vector<std::int32_t> bias;    // at scale S_w * S_x
  QuantParams q;                     // S_w * S_x / S_y
  std::int32_t act_max = kQuantMax;  // ReLU6 ceiling in the output domain
};

/// Work counters for one layer execution.
struct OpCounter {
  std::uint64_t macs = 0;
  std::uint64_t float_ops = 0;
  /// Sum over output sites of contributing input positions (kernel offsets for 3x3, 1 for 1x1).
  std::uint64_t offsets = 0;

  OpCounter& operator+=(const OpCounter& o) {
    macs += o.macs;
    float_ops += o.float_ops;
    offsets += o.offsets;
    return *this;
  }
};

/// Active neighbours of a site inside its 3x3 window, as row-major offsets 0..8 (4 = centre).
using KernelOffsets = std::vector<std::uint8_t>;

/// Throws ContractError if `site` is not active.
template <typename T>
KernelOffsets kernel_offsets(const SparseTensor<T>& input, Coord site);

/// Output (oy, ox) of a stride-2 3x3 window reads rows 2oy-1..2oy+1 and cols 2ox-1..2ox+1.
Geometry strided_geometry(const Geometry& in, int out_channels);

// Submanifold layers keep the input site list unchanged. Integer variants accumulate in
// int32 and requantize with the layer's dyadic parameters; float variants add bias and
// apply the activation in fp32. `counter` may be null.

SparseTensor<float> conv1x1(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                            OpCounter* counter = nullptr);
SparseTensor<std::int8_t> conv1x1(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                  const QuantLayerParams& p, OpCounter* counter = nullptr);

/// Projection with a residual add. The integer variant rescales both branches to the output
/// scale (skip via `skip_q`) and saturates after the sum.
SparseTensor<float> conv1x1_residual(const SparseTensor<float>& in, const SparseTensor<float>& skip,
                                     const LayerSpec& spec, const FloatLayerParams& p, OpCounter* counter = nullptr);
SparseTensor<std::int8_t> conv1x1_residual(const SparseTensor<std::int8_t>& in, const SparseTensor<std::int8_t>& skip,
                                           const LayerSpec& spec, const QuantLayerParams& p, const QuantParams& skip_q,
                                           OpCounter* counter = nullptr);

SparseTensor<float> subm_conv3x3(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                                 OpCounter* counter = nullptr);
SparseTensor<std::int8_t> subm_conv3x3(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                       const QuantLayerParams& p, OpCounter* counter = nullptr);

SparseTensor<float> subm_dw3x3(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                               OpCounter* counter = nullptr);
SparseTensor<std::int8_t> subm_dw3x3(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                     const QuantLayerParams& p, OpCounter* counter = nullptr);

/// Regular (non-submanifold) stride-2 convolution, full or depthwise per spec.kind. An output
/// site is active iff its receptive field holds at least one active input.
SparseTensor<float> strided_conv3x3(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                                    OpCounter* counter = nullptr);
SparseTensor<std::int8_t> strided_conv3x3(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                          const QuantLayerParams& p, OpCounter* counter = nullptr);

enum class PoolMode { max, avg };

/// 2x2 stride-2 pooling over active inputs only; inactive positions are absent, not zero.
template <typename T>
SparseTensor<T> pool2x2(const SparseTensor<T>& in, PoolMode mode, OpCounter* counter = nullptr);

/// Per-channel mean over active sites; zeros when there are none. The integer variant rounds
/// half away from zero.
std::vector<float> global_avg_pool(const SparseTensor<float>& in, OpCounter* counter = nullptr);
std::vector<std::int8_t> global_avg_pool(const SparseTensor<std::int8_t>& in, OpCounter* counter = nullptr);

/// Dispatches any weighted layer kind (not residual) by spec.kind.
SparseTensor<float> apply_layer(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                                OpCounter* counter = nullptr);
SparseTensor<std::int8_t> apply_layer(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                      const QuantLayerParams& p, OpCounter* counter = nullptr);

/// Textbook dense layer over every pixel (zero padding 1 for 3x3, plain 2x2 window for pools).
/// Used as the reference for the sparse kernels and as the dense baseline for benchmarking.
DenseTensor<float> dense_oracle(const LayerSpec& spec, const DenseTensor<float>& in, const FloatLayerParams& p,
                                OpCounter* counter = nullptr);
DenseTensor<std::int8_t> dense_oracle(const LayerSpec& spec, const DenseTensor<std::int8_t>& in,
                                      const QuantLayerParams& p, OpCounter* counter = nullptr);

/// Dense projection plus residual, matching conv1x1_residual at every pixel.
DenseTensor<float> dense_residual_project(const LayerSpec& spec, const DenseTensor<float>& in,
                                          const DenseTensor<float>& skip, const FloatLayerParams& p,
                                          OpCounter* counter = nullptr);
DenseTensor<std::int8_t> dense_residual_project(const LayerSpec& spec, const DenseTensor<std::int8_t>& in,
                                                const DenseTensor<std::int8_t>& skip, const QuantLayerParams& p,
                                                const QuantParams& skip_q, OpCounter* counter = nullptr);

/// Activity mask after a layer: unchanged for stride-1 kinds, 3x3/2x2 stride-2 dilation otherwise.
std::vector<std::uint8_t> propagate_mask(const LayerSpec& spec, const std::vector<std::uint8_t>& mask, int height,
                                         int width);

}  // namespace see

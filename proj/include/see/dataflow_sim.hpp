#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "see/model.hpp"
#include "see/model_spec.hpp"

namespace see {

inline constexpr std::size_t kLayerKindCount = 8;
inline constexpr std::uint64_t kDefaultWeightBudget = 4ull << 20;

struct HwConfig {
  double clock_hz = 200e6;
  /// MACs (or pooling taps) per cycle, indexed by LayerKind.
  std::array<std::uint32_t, kLayerKindCount> parallelism{64, 64, 16, 64, 16, 8, 8, 8};
  std::uint64_t weight_budget_bytes = kDefaultWeightBudget;
  std::uint32_t fifo_overhead_cycles = 32;
  /// Throughput of the host running the GRU and FC head.
  double cpu_macs_per_second = 1e9;
  /// When set, per-layer parallelism is this global budget split in proportion to layer work.
  bool auto_balance = false;
  std::uint64_t mac_budget = 1024;

  std::uint32_t parallelism_for(LayerKind k) const { return parallelism[static_cast<std::size_t>(k)]; }
  void set_parallelism(LayerKind k, std::uint32_t p) { parallelism[static_cast<std::size_t>(k)] = p; }
  /// Throws ConfigError when any field is non-positive.
  void validate() const;
};

nlohmann::json to_json(const HwConfig& hw);
/// Missing keys keep their defaults. Throws ConfigError on bad values or unknown kinds.
HwConfig hw_config_from_json(const nlohmann::json& j);

struct LayerProfile {
  /// Output tokens produced; for global pooling, input tokens consumed.
  double active_sites = 0.0;
  /// Mean contributing inputs per token, in [1, 9].
  double mean_offsets = 1.0;
};

struct SparsityProfile {
  std::vector<LayerProfile> layers;  // parallel to ModelSpec::layers()

  /// Throws ArgumentError on a missing entry or a count outside the layer geometry.
  void validate(const ModelSpec& spec) const;
};

struct LayerLatency {
  std::string name;
  LayerKind kind = LayerKind::conv1x1;
  double active_sites = 0.0;
  double mean_offsets = 1.0;
  std::uint64_t parallelism = 1;
  std::uint64_t cycles = 0;
};

struct LatencyReport {
  std::vector<LayerLatency> layers;
  std::size_t bottleneck = 0;
  std::uint64_t fill_cycles = 0;   // sum of per-layer FIFO overheads
  std::uint64_t total_cycles = 0;  // max layer cycles + fill
  double scnn_latency_s = 0.0;
  double head_latency_s = 0.0;
  double total_latency_s = 0.0;
  std::uint64_t weight_bytes = 0;
};

/// Spatial geometry each layer reads and writes.
struct LayerGeometry {
  Geometry in;
  Geometry out;
};
std::vector<LayerGeometry> layer_geometries(const ModelSpec& spec);

/// MACs (or pooling taps) spent per contributing input position.
std::uint64_t work_per_offset(const LayerSpec& layer);

/// ceil(active * offsets * work_per_offset / parallelism) + fifo overhead.
std::uint64_t layer_cycles(const LayerSpec& layer, const LayerProfile& entry, std::uint64_t parallelism,
                           const HwConfig& hw);
std::uint64_t layer_cycles(const LayerSpec& layer, const LayerProfile& entry, const HwConfig& hw);

/// Parallelism actually used per layer (fixed table or auto-balanced budget).
std::vector<std::uint64_t> layer_parallelism(const ModelSpec& spec, const SparsityProfile& profile,
                                             const HwConfig& hw);

std::uint64_t head_mac_count(const ModelSpec& spec);

LatencyReport model_latency(const ModelSpec& spec, const SparsityProfile& profile, const HwConfig& hw);

/// Int8 weights, int32 biases and a 5-byte dyadic record per weighted layer.
std::uint64_t weight_footprint(std::span<const LayerSpec> layers);
std::uint64_t weight_footprint(const ModelSpec& spec);

/// Runs the real engine and averages per-layer counts over `inputs`. Throws ArgumentError when empty.
SparsityProfile measure_profile(const Model& model, std::span<const SparseTensor<std::int32_t>> inputs);

/// Expected profile for inputs whose sites are independently active with probability `density`.
SparsityProfile analytic_profile(const ModelSpec& spec, double density);

nlohmann::json report_to_json(const ModelSpec& spec, const LatencyReport& report);

/// Times the fp32 head on this host; returns MACs per second.
double calibrate_cpu_macs_per_second(int input_size, int hidden_size, int iterations = 2000);

}  // namespace see

#include "see/dataflow_sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "see/errors.hpp"
#include "see/scnn_engine.hpp"

namespace see {

namespace {

constexpr LayerKind kAllKinds[] = {
    LayerKind::conv1x1,       LayerKind::subm_conv3x3, LayerKind::subm_dw3x3,  LayerKind::strided_conv3x3,
    LayerKind::strided_dw3x3, LayerKind::max_pool2x2,  LayerKind::avg_pool2x2, LayerKind::global_avg_pool,
};

bool is_pool2x2(LayerKind k) { return k == LayerKind::max_pool2x2 || k == LayerKind::avg_pool2x2; }

std::uint64_t ceil_work(double work, std::uint64_t parallelism) {
  return static_cast<std::uint64_t>(std::ceil(work / static_cast<double>(parallelism)));
}

double layer_work(const LayerSpec& l, const LayerProfile& e) {
  const double offsets = l.kind == LayerKind::conv1x1 || l.kind == LayerKind::global_avg_pool ? 1.0 : e.mean_offsets;
  return e.active_sites * offsets * static_cast<double>(work_per_offset(l));
}

}  // namespace

void HwConfig::validate() const {
  if (!(clock_hz > 0) || !std::isfinite(clock_hz)) throw ConfigError("clock_hz must be positive");
  for (const LayerKind k : kAllKinds)
    if (parallelism_for(k) == 0) throw ConfigError("parallelism for " + std::string(to_string(k)) + " must be positive");
  if (weight_budget_bytes == 0) throw ConfigError("weight_budget_bytes must be positive");
  if (fifo_overhead_cycles == 0) throw ConfigError("fifo_overhead_cycles must be positive");
  if (!(cpu_macs_per_second > 0) || !std::isfinite(cpu_macs_per_second))
    throw ConfigError("cpu_macs_per_second must be positive");
  if (auto_balance && mac_budget == 0) throw ConfigError("mac_budget must be positive");
}

nlohmann::json to_json(const HwConfig& hw) {
  nlohmann::json par = nlohmann::json::object();
  for (const LayerKind k : kAllKinds) par[std::string(to_string(k))] = hw.parallelism_for(k);
  return {{"clock_hz", hw.clock_hz},
          {"parallelism", par},
          {"weight_budget_bytes", hw.weight_budget_bytes},
          {"fifo_overhead_cycles", hw.fifo_overhead_cycles},
          {"cpu_macs_per_second", hw.cpu_macs_per_second},
          {"auto_balance", hw.auto_balance},
          {"mac_budget", hw.mac_budget}};
}

HwConfig hw_config_from_json(const nlohmann::json& j) {
  HwConfig hw;
  try {
    if (!j.is_object()) throw ConfigError("hardware config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "clock_hz") hw.clock_hz = value.get<double>();
      else if (key == "weight_budget_bytes") hw.weight_budget_bytes = value.get<std::uint64_t>();
      else if (key == "fifo_overhead_cycles") hw.fifo_overhead_cycles = value.get<std::uint32_t>();
      else if (key == "cpu_macs_per_second") hw.cpu_macs_per_second = value.get<double>();
      else if (key == "auto_balance") hw.auto_balance = value.get<bool>();
      else if (key == "mac_budget") hw.mac_budget = value.get<std::uint64_t>();
      else if (key == "parallelism") {
        for (const auto& [kind, p] : value.items()) {
          const auto v = p.get<std::int64_t>();
          if (v <= 0) throw ConfigError("parallelism for " + kind + " must be positive");
          hw.set_parallelism(layer_kind_from_string(kind), static_cast<std::uint32_t>(v));
        }
      } else {
        throw ConfigError("unknown hardware config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("hardware config: ") + e.what());
  } catch (const LoadError& e) {
    throw ConfigError(std::string("hardware config: ") + e.what());
  }
  hw.validate();
  return hw;
}

std::vector<LayerGeometry> layer_geometries(const ModelSpec& spec) {
  const auto layers = spec.layers();
  std::vector<LayerGeometry> out;
  out.reserve(layers.size());
  Geometry g{spec.input.height, spec.input.width, spec.input.channels()};
  for (const LayerSpec& l : layers) {
    Geometry o{g.height, g.width, l.out_channels};
    if (is_strided(l.kind) || is_pool2x2(l.kind)) o = strided_geometry(g, l.out_channels);
    out.push_back({g, o});
    g = o;
  }
  return out;
}

void SparsityProfile::validate(const ModelSpec& spec) const {
  const auto geo = layer_geometries(spec);
  const auto ls = spec.layers();
  if (layers.size() != ls.size())
    throw ArgumentError("profile has " + std::to_string(layers.size()) + " entries for " + std::to_string(ls.size()) +
                        " layers");
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const LayerProfile& e = layers[i];
    const Geometry& g = ls[i].kind == LayerKind::global_avg_pool ? geo[i].in : geo[i].out;
    if (!(e.active_sites >= 0) || e.active_sites > static_cast<double>(g.plane()))
      throw ArgumentError("profile entry for '" + ls[i].name + "': active count outside the layer grid");
    if (!(e.mean_offsets >= 1.0 && e.mean_offsets <= 9.0))
      throw ArgumentError("profile entry for '" + ls[i].name + "': mean offsets outside [1, 9]");
  }
}

std::uint64_t work_per_offset(const LayerSpec& l) {
  const auto cin = static_cast<std::uint64_t>(l.in_channels);
  const auto cout = static_cast<std::uint64_t>(l.out_channels);
  if (l.kind == LayerKind::conv1x1 || l.kind == LayerKind::subm_conv3x3 || l.kind == LayerKind::strided_conv3x3)
    return cin * cout;
  return cout;  // depthwise and pooling touch one value per channel
}

std::uint64_t layer_cycles(const LayerSpec& layer, const LayerProfile& entry, std::uint64_t parallelism,
                           const HwConfig& hw) {
  if (parallelism == 0) throw ConfigError("layer '" + layer.name + "': parallelism must be positive");
  return ceil_work(layer_work(layer, entry), parallelism) + hw.fifo_overhead_cycles;
}

std::uint64_t layer_cycles(const LayerSpec& layer, const LayerProfile& entry, const HwConfig& hw) {
  return layer_cycles(layer, entry, hw.parallelism_for(layer.kind), hw);
}

std::vector<std::uint64_t> layer_parallelism(const ModelSpec& spec, const SparsityProfile& profile,
                                             const HwConfig& hw) {
  const auto ls = spec.layers();
  std::vector<std::uint64_t> par(ls.size());
  if (!hw.auto_balance) {
    for (std::size_t i = 0; i < ls.size(); ++i) par[i] = hw.parallelism_for(ls[i].kind);
    return par;
  }
  std::vector<double> work(ls.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ls.size(); ++i) total += work[i] = layer_work(ls[i], profile.layers.at(i));
  const auto budget = static_cast<double>(hw.mac_budget);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const double share = total > 0 ? budget * work[i] / total : budget / static_cast<double>(ls.size());
    par[i] = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(share)));
  }
  return par;
}

std::uint64_t head_mac_count(const ModelSpec& spec) {
  const auto d = static_cast<std::uint64_t>(spec.embedding_size());
  const auto hd = static_cast<std::uint64_t>(spec.gru_hidden);
  return 3 * (hd * d + hd * hd) + 2 * hd;
}

LatencyReport model_latency(const ModelSpec& spec, const SparsityProfile& profile, const HwConfig& hw) {
  hw.validate();
  profile.validate(spec);
  const auto ls = spec.layers();
  const auto par = layer_parallelism(spec, profile, hw);
  LatencyReport r;
  std::uint64_t worst = 0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const LayerProfile& e = profile.layers[i];
    const std::uint64_t c = layer_cycles(ls[i], e, par[i], hw);
    r.layers.push_back({ls[i].name, ls[i].kind, e.active_sites, e.mean_offsets, par[i], c});
    if (c > worst) {
      worst = c;
      r.bottleneck = i;
    }
    r.fill_cycles += hw.fifo_overhead_cycles;
  }
  r.total_cycles = worst + r.fill_cycles;
  r.scnn_latency_s = static_cast<double>(r.total_cycles) / hw.clock_hz;
  r.head_latency_s = static_cast<double>(head_mac_count(spec)) / hw.cpu_macs_per_second;
  r.total_latency_s = r.scnn_latency_s + r.head_latency_s;
  r.weight_bytes = weight_footprint(spec);
  return r;
}

std::uint64_t weight_footprint(std::span<const LayerSpec> layers) {
  std::uint64_t bytes = 0;
  for (const LayerSpec& l : layers)
    if (has_weights(l.kind)) bytes += l.weight_count() + 4 * l.bias_count() + 5;
  return bytes;
}

std::uint64_t weight_footprint(const ModelSpec& spec) {
  const auto ls = spec.layers();
  return weight_footprint(std::span<const LayerSpec>(ls));
}

SparsityProfile measure_profile(const Model& model, std::span<const SparseTensor<std::int32_t>> inputs) {
  if (inputs.empty()) throw ArgumentError("measure_profile needs at least one input");
  const auto ls = model.spec().layers();
  std::vector<double> active(ls.size(), 0.0);
  std::vector<double> offsets(ls.size(), 0.0);
  std::vector<LayerStats> stats;
  for (const auto& in : inputs) {
    embed(model, in, ExecMode::sparse, &stats);
    for (std::size_t i = 0; i < ls.size(); ++i) {
      active[i] += static_cast<double>(stats[i].active_out);
      offsets[i] += static_cast<double>(stats[i].ops.offsets);
    }
  }
  SparsityProfile p;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const double mean_offsets = active[i] > 0 ? offsets[i] / active[i] : 1.0;
    p.layers.push_back({active[i] / static_cast<double>(inputs.size()), std::clamp(mean_offsets, 1.0, 9.0)});
  }
  return p;
}

SparsityProfile analytic_profile(const ModelSpec& spec, double density) {
  if (!(density >= 0.0 && density <= 1.0)) throw ArgumentError("density must lie in [0, 1]");
  const auto ls = spec.layers();
  const auto geo = layer_geometries(spec);
  SparsityProfile p;
  double d = density;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const LayerKind k = ls[i].kind;
    LayerProfile e;
    if (is_strided(k) || is_pool2x2(k)) {
      // an output is active when any of its window taps is
      const double taps = is_strided(k) ? 9.0 : 4.0;
      const double out = 1.0 - std::pow(1.0 - d, taps);
      e.active_sites = out * static_cast<double>(geo[i].out.plane());
      e.mean_offsets = out > 0 ? std::clamp(taps * d / out, 1.0, 9.0) : 1.0;
      d = out;
    } else if (k == LayerKind::global_avg_pool) {
      e.active_sites = d * static_cast<double>(geo[i].in.plane());
    } else {
      e.active_sites = d * static_cast<double>(geo[i].out.plane());
      if (is_3x3(k)) e.mean_offsets = 1.0 + 8.0 * d;
    }
    p.layers.push_back(e);
  }
  return p;
}

nlohmann::json report_to_json(const ModelSpec& spec, const LatencyReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const LayerLatency& l = r.layers[i];
    rows.push_back({{"id", i},
                    {"name", l.name},
                    {"kind", to_string(l.kind)},
                    {"active", l.active_sites},
                    {"offsets", l.mean_offsets},
                    {"parallelism", l.parallelism},
                    {"cycles", l.cycles}});
  }
  return {{"spec_hash", spec.hash_hex()},
          {"layers", rows},
          {"bottleneck", r.bottleneck},
          {"bottleneck_name", r.layers.empty() ? "" : r.layers[r.bottleneck].name},
          {"fill_cycles", r.fill_cycles},
          {"total_cycles", r.total_cycles},
          {"scnn_latency_s", r.scnn_latency_s},
          {"head_latency_s", r.head_latency_s},
          {"total_latency_s", r.total_latency_s},
          {"weight_bytes", r.weight_bytes}};
}

double calibrate_cpu_macs_per_second(int input_size, int hidden_size, int iterations) {
  if (iterations <= 0) throw ArgumentError("iterations must be positive");
  const HeadWeights head = random_head(input_size, hidden_size, 1);
  std::vector<float> x(static_cast<std::size_t>(input_size), 0.25f);
  HeadState h = HeadState::zeros(hidden_size);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iterations; ++i) {
    h = gru_step(x, h, head.gru);
    const NormalizedPoint p = fc_regress(h.h, head.fc);
    x[0] = static_cast<float>(p.u);  // keep the loop from being optimised away
  }
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  return static_cast<double>(head.mac_count()) * iterations / std::max(dt.count(), 1e-9);
}

}  // namespace see

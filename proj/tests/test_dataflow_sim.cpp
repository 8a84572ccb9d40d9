#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "see/dataflow_sim.hpp"
#include "see/errors.hpp"

using namespace see;
using namespace see::testing;

TEST_CASE("layer cycle formula") {
  HwConfig hw;
  const LayerSpec l = make_layer(LayerKind::subm_conv3x3, 8, 8);
  CHECK(work_per_offset(l) == 64);
  CHECK(layer_cycles(l, {100, 3}, 64, hw) == 300 + hw.fifo_overhead_cycles);
  CHECK(layer_cycles(l, {100, 3}, 7, hw) == 2743 + hw.fifo_overhead_cycles);  // ceil(19200 / 7)
  CHECK(layer_cycles(l, {0, 1}, 64, hw) == hw.fifo_overhead_cycles);
  CHECK_THROWS_AS(layer_cycles(l, {100, 3}, 0, hw), ConfigError);
  CHECK(work_per_offset(make_layer(LayerKind::subm_dw3x3, 24, 24)) == 24);
  CHECK(work_per_offset(make_layer(LayerKind::conv1x1, 24, 40)) == 24 * 40);
}

TEST_CASE("weight footprint") {
  const LayerSpec l = make_layer(LayerKind::conv1x1, 8, 16);
  CHECK(weight_footprint(std::span(&l, 1)) == 8 * 16 + 16 * 4 + 5);
  const LayerSpec pool = make_layer(LayerKind::max_pool2x2, 8, 8);
  CHECK(weight_footprint(std::span(&pool, 1)) == 0);
}

TEST_CASE("model latency composition") {
  const ModelSpec s = small_spec();
  HwConfig hw;
  const auto prof = analytic_profile(s, 0.1);
  const auto r = model_latency(s, prof, hw);
  REQUIRE(r.layers.size() == s.layers().size());
  std::uint64_t mx = 0, fill = 0;
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    mx = std::max(mx, r.layers[i].cycles);
    fill += hw.fifo_overhead_cycles;
    CHECK(r.layers[i].cycles == layer_cycles(s.layers()[i], prof.layers[i], hw));
  }
  CHECK(r.layers[r.bottleneck].cycles == mx);
  CHECK(r.fill_cycles == fill);
  CHECK(r.total_cycles == mx + fill);
  CHECK(r.scnn_latency_s == doctest::Approx(static_cast<double>(r.total_cycles) / hw.clock_hz));
  CHECK(r.head_latency_s == doctest::Approx(static_cast<double>(head_mac_count(s)) / hw.cpu_macs_per_second));
  CHECK(r.total_latency_s == doctest::Approx(r.scnn_latency_s + r.head_latency_s));
  CHECK(r.weight_bytes == weight_footprint(s));
  const auto j = report_to_json(s, r);
  CHECK(j.at("layers").size() == r.layers.size());
}

TEST_CASE("latency is monotone in activity and parallelism") {
  const ModelSpec s = small_spec(LayerKind::strided_conv3x3, StemPool::max);
  HwConfig hw;
  double prev = 0.0;
  for (double d = 0.0; d <= 1.0; d += 0.05) {
    const double t = model_latency(s, analytic_profile(s, d), hw).total_latency_s;
    CHECK(t >= prev);
    prev = t;
  }
  const auto prof = analytic_profile(s, 0.3);
  double last = INFINITY;
  for (std::uint32_t p = 1; p <= 256; p *= 2) {
    HwConfig h2;
    h2.parallelism.fill(p);
    const double t = model_latency(s, prof, h2).total_latency_s;
    CHECK(t <= last);
    last = t;
  }
}

TEST_CASE("analytic profile") {
  const ModelSpec s = small_spec();
  const auto full = analytic_profile(s, 1.0);
  const auto geo = layer_geometries(s);
  const auto ls = s.layers();
  for (std::size_t i = 0; i + 1 < ls.size(); ++i) {
    CHECK(full.layers[i].active_sites == doctest::Approx(static_cast<double>(geo[i].out.plane())));
    if (ls[i].kind == LayerKind::subm_conv3x3 || ls[i].kind == LayerKind::subm_dw3x3)
      CHECK(full.layers[i].mean_offsets == doctest::Approx(9.0));
  }
  const auto empty = analytic_profile(s, 0.0);
  for (const auto& e : empty.layers) CHECK(e.active_sites == 0.0);
  const auto mid = analytic_profile(s, 0.2);
  CHECK(mid.layers[0].active_sites == doctest::Approx(0.2 * 256));
  CHECK(mid.layers[0].mean_offsets == doctest::Approx(1 + 8 * 0.2));
  CHECK_THROWS_AS(analytic_profile(s, 1.5), ArgumentError);
}

TEST_CASE("measured profile recounts the engine") {
  Rng rng(71);
  const ModelSpec s = small_spec();
  const Model m = int8_model(s, 30);
  const auto inputs = random_inputs(rng, s, 3);
  const auto prof = measure_profile(m, inputs);
  prof.validate(s);
  double stem_active = 0, stem_offsets = 0;
  for (const auto& in : inputs) {
    stem_active += static_cast<double>(in.size());
    for (const Coord c : in.sites()) {
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = c.y + dy, x = c.x + dx;
          if (y >= 0 && x >= 0 && y < 16 && x < 16 && in.active(y, x))
            stem_offsets += 1;
        }
    }
  }
  CHECK(prof.layers[0].active_sites == doctest::Approx(stem_active / 3));
  CHECK(prof.layers[0].mean_offsets == doctest::Approx(stem_offsets / stem_active));
  CHECK_THROWS_AS(measure_profile(m, {}), ArgumentError);
}

TEST_CASE("profile validation") {
  const ModelSpec s = small_spec();
  SparsityProfile p = analytic_profile(s, 0.1);
  p.layers.pop_back();
  CHECK_THROWS_AS(p.validate(s), ArgumentError);
  p = analytic_profile(s, 0.1);
  p.layers[0].active_sites = 1e6;
  CHECK_THROWS_AS(p.validate(s), ArgumentError);
}

TEST_CASE("auto balance splits the budget by work") {
  const ModelSpec s = small_spec();
  HwConfig hw;
  hw.auto_balance = true;
  hw.mac_budget = 4096;
  const auto prof = analytic_profile(s, 0.2);
  const auto par = layer_parallelism(s, prof, hw);
  REQUIRE(par.size() == s.layers().size());
  std::uint64_t total = 0;
  for (const auto p : par) {
    CHECK(p >= 1);
    total += p;
  }
  CHECK(total <= hw.mac_budget + par.size());
  const auto r = model_latency(s, prof, hw);
  for (std::size_t i = 0; i < par.size(); ++i) CHECK(r.layers[i].parallelism == par[i]);
}

TEST_CASE("hardware config json") {
  HwConfig hw;
  hw.clock_hz = 150e6;
  hw.set_parallelism(LayerKind::subm_dw3x3, 3);
  hw.auto_balance = true;
  const HwConfig back = hw_config_from_json(to_json(hw));
  CHECK(back.clock_hz == hw.clock_hz);
  CHECK(back.parallelism == hw.parallelism);
  CHECK(back.auto_balance);
  CHECK(hw_config_from_json(nlohmann::json::object()).fifo_overhead_cycles == HwConfig{}.fifo_overhead_cycles);
  CHECK_THROWS_AS(hw_config_from_json({{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(hw_config_from_json({{"clock_hz", -1}}), ConfigError);
  CHECK_THROWS_AS(hw_config_from_json({{"parallelism", {{"conv9x9", 4}}}}), ConfigError);
  CHECK_THROWS_AS(hw_config_from_json({{"parallelism", {{"conv1x1", 0}}}}), ConfigError);
}

// Regenerates the frozen end-to-end fixture: events.bin, model.seew, expected.csv, gt.csv.
// Usage: make_fixture <out-dir>
//
// The outputs are committed; rerun only when the container format or the engine changes on
// purpose, and review the diff.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "see/metrics.hpp"
#include "see/pipeline.hpp"
#include "see/rng.hpp"
#include "see/weight_container.hpp"

using namespace see;

namespace {

constexpr std::uint64_t kSeed = 20240617;
constexpr std::uint64_t kWindowUs = 5000;
constexpr int kClips = 6;

ModelSpec fixture_spec() {
  ModelSpec s;
  s.input = {32, 32, 2, PolarityMode::merged};
  s.stem_kind = LayerKind::subm_conv3x3;
  s.stem_channels = 8;
  s.blocks = {{2, 8, 8, 1}, {2, 8, 16, 2}, {1, 16, 16, 1}};
  s.gru_hidden = 8;
  return s;
}

// A ring of events around a centre drifting across the sensor, plus sparse noise.
std::vector<Event> fixture_events(std::vector<PixelPoint>& centres) {
  Rng rng(kSeed);
  std::vector<Event> ev;
  for (int c = 0; c < kClips; ++c) {
    const double cx = 10.0 + 2.0 * c, cy = 14.0 + std::sin(c * 0.7) * 4.0;
    centres.push_back({cx, cy});
    const std::uint64_t t0 = static_cast<std::uint64_t>(c) * kWindowUs;
    const int n = c == 3 ? 0 : 120;  // one silent clip
    for (int i = 0; i < n; ++i) {
      const std::uint64_t t = t0 + (kWindowUs * static_cast<std::uint64_t>(i)) / static_cast<std::uint64_t>(n);
      double x, y;
      if (i % 6 == 5) {
        x = uniform(rng, 0, 32);
        y = uniform(rng, 0, 32);
      } else {
        const double a = uniform(rng, 0, 2 * std::numbers::pi), r = 3.0 + uniform(rng, -0.7, 0.7);
        x = cx + r * std::cos(a);
        y = cy + r * std::sin(a);
      }
      const auto px = static_cast<std::uint16_t>(std::clamp(static_cast<int>(x), 0, 31));
      const auto py = static_cast<std::uint16_t>(std::clamp(static_cast<int>(y), 0, 31));
      ev.push_back({t, px, py, static_cast<std::uint8_t>(uniform_index(rng, 2))});
    }
  }
  return ev;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <out-dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);

  const ModelSpec spec = fixture_spec();
  std::vector<PixelPoint> centres;
  const auto events = fixture_events(centres);
  const SensorGeometry sensor{32, 32};
  const auto clips = make_clips(events, spec, sensor, {kWindowUs, 0, kClips});

  const FloatBackbone fb = random_backbone(spec, kSeed);
  Model model{quantize_model(fb, clips), random_head(spec.embedding_size(), spec.gru_hidden, kSeed + 1)};
  save_model(dir / "model.seew", model);
  write_file(dir / "events.bin", encode_native(events));

  // Round-trip through the files so the expectation is what a reader of them computes.
  const Model loaded = load_model(dir / "model.seew");
  const auto reread = load_events(dir / "events.bin", EventFormat::native_binary, sensor);
  const auto preds = run_sequence(loaded, make_clips(reread, loaded.spec(), sensor, {kWindowUs, 0, kClips}));
  std::ofstream expected(dir / "expected.csv", std::ios::binary);
  write_points_csv(expected, preds);
  std::ofstream gt(dir / "gt.csv", std::ios::binary);
  write_points_csv(gt, centres);
  std::cout << "wrote " << preds.size() << " predictions to " << (dir / "expected.csv").string() << '\n';
  return 0;
}

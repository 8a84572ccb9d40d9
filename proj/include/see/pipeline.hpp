#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "see/event_ingest.hpp"
#include "see/model.hpp"

namespace see {

struct ClipOptions {
  std::uint64_t window_us = 10000;
  std::uint64_t t0 = 0;
  std::optional<std::size_t> clip_count;
};

/// ".csv" selects text, anything else the native binary layout.
EventFormat format_for_path(const std::filesystem::path& path);

std::vector<Event> load_events(const std::filesystem::path& path, EventFormat format, SensorGeometry sensor);

/// Slices and voxelizes with the model's input configuration. Throws ArgumentError when the
/// sensor does not match the model input size.
std::vector<SparseTensor<std::int32_t>> make_clips(std::span<const Event> events, const ModelSpec& spec,
                                                   SensorGeometry sensor, const ClipOptions& opts);

}  // namespace see

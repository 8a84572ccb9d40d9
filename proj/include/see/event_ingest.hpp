#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "see/sparse_tensor.hpp"

namespace see {

/// One DVS event. Timestamps are microseconds.
struct Event {
  std::uint64_t t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t p = 0;
  friend bool operator==(const Event&, const Event&) = default;
};

/// Sensor size in pixels.
struct SensorGeometry {
  int height = 0;
  int width = 0;
  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

/// Events falling in [t_start, t_end).
struct EventClip {
  std::vector<Event> events;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;
  SensorGeometry geometry;
};

enum class EventFormat { native_binary, csv };
enum class PolarityMode { merged, split };

struct VoxelGridConfig {
  int height = 64;
  int width = 64;
  int bins = 3;
  PolarityMode polarity = PolarityMode::merged;

  int channels() const { return polarity == PolarityMode::split ? 2 * bins : bins; }
  /// Throws ArgumentError unless bins >= 1 and height, width >= 8.
  void validate() const;
  friend bool operator==(const VoxelGridConfig&, const VoxelGridConfig&) = default;
};

/// Size of one native record: u64 t, u16 x, u16 y, u8 p, little-endian, no padding.
inline constexpr std::size_t kNativeRecordBytes = 13;

/// Decodes an event file image. Errors: ParseError (with byte offset), GeometryError,
/// OrderingError.
std::vector<Event> parse_events(std::span<const std::uint8_t> bytes, EventFormat format, SensorGeometry geometry);
std::vector<Event> parse_events(std::string_view text, EventFormat format, SensorGeometry geometry);

/// Encodes events in the native binary layout.
std::vector<std::uint8_t> encode_native(std::span<const Event> events);

/// Buckets events into consecutive half-open windows starting at t0. Empty clips are kept.
/// With no clip count, clips run through the window holding the last event (zero clips when
/// there are no events).
std::vector<EventClip> slice_clips(std::span<const Event> events, std::uint64_t window_us, std::uint64_t t0,
                                   SensorGeometry geometry, std::optional<std::size_t> clip_count = std::nullopt);

/// Per-pixel event counts by temporal bin. Split mode puts polarity p at channels
/// [p * bins, (p + 1) * bins). Counts are exact (no saturation here).
SparseTensor<std::int32_t> voxelize(const EventClip& clip, const VoxelGridConfig& cfg);

}  // namespace see

#include "see/pipeline.hpp"

#include <string>
#include <string_view>

#include "see/errors.hpp"
#include "see/weight_container.hpp"

namespace see {

EventFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? EventFormat::csv : EventFormat::native_binary;
}

std::vector<Event> load_events(const std::filesystem::path& path, EventFormat format, SensorGeometry sensor) {
  const auto bytes = read_file(path);
  if (format == EventFormat::csv)
    return parse_events(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), format, sensor);
  return parse_events(std::span<const std::uint8_t>(bytes), format, sensor);
}

std::vector<SparseTensor<std::int32_t>> make_clips(std::span<const Event> events, const ModelSpec& spec,
                                                   SensorGeometry sensor, const ClipOptions& opts) {
  if (sensor.height != spec.input.height || sensor.width != spec.input.width)
    throw ArgumentError("sensor " + std::to_string(sensor.height) + "x" + std::to_string(sensor.width) +
                        " does not match model input " + std::to_string(spec.input.height) + "x" +
                        std::to_string(spec.input.width));
  std::vector<SparseTensor<std::int32_t>> out;
  for (const EventClip& c : slice_clips(events, opts.window_us, opts.t0, sensor, opts.clip_count))
    out.push_back(voxelize(c, spec.input));
  return out;
}

}  // namespace see

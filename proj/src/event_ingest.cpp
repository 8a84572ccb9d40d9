#include "see/event_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <string>

#include "see/errors.hpp"

namespace see {

void VoxelGridConfig::validate() const {
  if (bins < 1) throw ArgumentError("voxel grid needs at least one temporal bin");
  if (height < 8 || width < 8) throw ArgumentError("voxel grid must be at least 8x8");
}

namespace {

template <typename U>
U read_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <typename U>
void write_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void check_event(const Event& e, const SensorGeometry& g, std::size_t record, const Event* prev) {
  if (e.x >= g.width || e.y >= g.height)
    throw GeometryError("record " + std::to_string(record) + ": pixel (" + std::to_string(e.x) + "," +
                        std::to_string(e.y) + ") outside " + std::to_string(g.width) + "x" +
                        std::to_string(g.height) + " sensor");
  if (prev != nullptr && e.t < prev->t)
    throw OrderingError("record " + std::to_string(record) + ": timestamp " + std::to_string(e.t) +
                        " precedes " + std::to_string(prev->t));
}

std::vector<Event> parse_native(std::span<const std::uint8_t> bytes, SensorGeometry g) {
  if (bytes.size() % kNativeRecordBytes != 0)
    throw ParseError("truncated native record", bytes.size() - bytes.size() % kNativeRecordBytes);
  std::vector<Event> out;
  out.reserve(bytes.size() / kNativeRecordBytes);
  for (std::size_t off = 0; off < bytes.size(); off += kNativeRecordBytes) {
    const std::uint8_t* p = bytes.data() + off;
    Event e{read_le<std::uint64_t>(p), read_le<std::uint16_t>(p + 8), read_le<std::uint16_t>(p + 10), p[12]};
    if (e.p > 1) throw ParseError("polarity must be 0 or 1", off + 12);
    check_event(e, g, out.size() + 1, out.empty() ? nullptr : &out.back());
    out.push_back(e);
  }
  return out;
}

bool is_header(std::string_view line) {
  return !line.empty() && (line.front() < '0' || line.front() > '9');
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename U>
U parse_field(std::string_view field, std::size_t offset) {
  field = trim(field);
  U v{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError("bad numeric field '" + std::string(field) + "'", offset);
  return v;
}

std::vector<Event> parse_csv(std::string_view text, SensorGeometry g) {
  std::vector<Event> out;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    const std::string_view line = trim(text.substr(pos, end - pos));
    const std::size_t line_off = pos;
    pos = end + 1;
    if (line.empty()) continue;
    if (first && is_header(line)) {
      first = false;
      continue;
    }
    first = false;
    std::string_view fields[4];
    std::string_view rest = line;
    for (int i = 0; i < 4; ++i) {
      const std::size_t comma = rest.find(',');
      if ((i < 3) == (comma == std::string_view::npos))
        throw ParseError("expected 4 comma-separated fields", line_off);
      fields[i] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    Event e{parse_field<std::uint64_t>(fields[0], line_off), parse_field<std::uint16_t>(fields[1], line_off),
            parse_field<std::uint16_t>(fields[2], line_off), parse_field<std::uint8_t>(fields[3], line_off)};
    if (e.p > 1) throw ParseError("polarity must be 0 or 1", line_off);
    check_event(e, g, out.size() + 1, out.empty() ? nullptr : &out.back());
    out.push_back(e);
  }
  return out;
}

}  // namespace

std::vector<Event> parse_events(std::span<const std::uint8_t> bytes, EventFormat format, SensorGeometry geometry) {
  if (format == EventFormat::native_binary) return parse_native(bytes, geometry);
  return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), geometry);
}

std::vector<Event> parse_events(std::string_view text, EventFormat format, SensorGeometry geometry) {
  return parse_events(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), format, geometry);
}

std::vector<std::uint8_t> encode_native(std::span<const Event> events) {
  std::vector<std::uint8_t> out;
  out.reserve(events.size() * kNativeRecordBytes);
  for (const Event& e : events) {
    write_le(out, e.t);
    write_le(out, e.x);
    write_le(out, e.y);
    write_le(out, e.p);
  }
  return out;
}

std::vector<EventClip> slice_clips(std::span<const Event> events, std::uint64_t window_us, std::uint64_t t0,
                                   SensorGeometry geometry, std::optional<std::size_t> clip_count) {
  if (window_us == 0) throw ArgumentError("clip window must be positive");
  if (!events.empty() && events.front().t < t0)
    throw ArgumentError("event at t=" + std::to_string(events.front().t) + " precedes clip origin " +
                        std::to_string(t0));
  std::size_t n = 0;
  if (clip_count) {
    n = *clip_count;
  } else if (!events.empty()) {
    n = static_cast<std::size_t>((events.back().t - t0) / window_us) + 1;
  }
  std::vector<EventClip> clips(n);
  for (std::size_t i = 0; i < n; ++i) {
    clips[i].t_start = t0 + i * window_us;
    clips[i].t_end = clips[i].t_start + window_us;
    clips[i].geometry = geometry;
  }
  for (const Event& e : events) {
    if (e.t < t0) throw OrderingError("events are not sorted by timestamp");
    const std::size_t idx = static_cast<std::size_t>((e.t - t0) / window_us);
    if (idx >= n) break;
    clips[idx].events.push_back(e);
  }
  return clips;
}

SparseTensor<std::int32_t> voxelize(const EventClip& clip, const VoxelGridConfig& cfg) {
  cfg.validate();
  if (clip.geometry.height != cfg.height || clip.geometry.width != cfg.width)
    throw ArgumentError("clip geometry " + std::to_string(clip.geometry.width) + "x" +
                        std::to_string(clip.geometry.height) + " does not match voxel grid " +
                        std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
  const std::uint64_t window = clip.t_end - clip.t_start;
  if (window == 0) throw ArgumentError("clip has zero duration");

  struct Hit {
    std::int32_t pixel;
    std::int32_t channel;
  };
  std::vector<Hit> hits;
  hits.reserve(clip.events.size());
  for (const Event& e : clip.events) {
    if (e.t < clip.t_start || e.t >= clip.t_end) throw ArgumentError("event outside clip interval");
    if (e.x >= cfg.width || e.y >= cfg.height) throw GeometryError("event outside voxel grid");
    const auto bin = static_cast<std::int32_t>((e.t - clip.t_start) * static_cast<std::uint64_t>(cfg.bins) / window);
    const std::int32_t ch = cfg.polarity == PolarityMode::split ? e.p * cfg.bins + bin : bin;
    hits.push_back({static_cast<std::int32_t>(e.y) * cfg.width + e.x, ch});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pixel < b.pixel; });

  const Geometry g{cfg.height, cfg.width, cfg.channels()};
  SparseTensor<std::int32_t>::Builder b(g);
  std::span<std::int32_t> cur;
  std::int32_t cur_pixel = -1;
  for (const Hit& h : hits) {
    if (h.pixel != cur_pixel) {
      cur_pixel = h.pixel;
      cur = b.push({h.pixel / cfg.width, h.pixel % cfg.width});
    }
    ++cur[h.channel];
  }
  return std::move(b).build();
}

}  // namespace see

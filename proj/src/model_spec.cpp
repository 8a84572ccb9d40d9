#include "see/model_spec.hpp"

#include <array>
#include <cstdio>
#include <utility>

#include "see/errors.hpp"

namespace see {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 8> kKindNames{{
    {LayerKind::conv1x1, "conv1x1"},
    {LayerKind::subm_conv3x3, "subm_conv3x3"},
    {LayerKind::subm_dw3x3, "subm_dw3x3"},
    {LayerKind::strided_conv3x3, "strided_conv3x3"},
    {LayerKind::strided_dw3x3, "strided_dw3x3"},
    {LayerKind::max_pool2x2, "max_pool2x2"},
    {LayerKind::avg_pool2x2, "avg_pool2x2"},
    {LayerKind::global_avg_pool, "global_avg_pool"},
}};

}  // namespace

std::string_view to_string(StemPool p) {
  switch (p) {
    case StemPool::max: return "max";
    case StemPool::avg: return "avg";
    default: return "none";
  }
}

StemPool stem_pool_from_string(std::string_view s) {
  if (s == "none") return StemPool::none;
  if (s == "max") return StemPool::max;
  if (s == "avg") return StemPool::avg;
  throw LoadError("unknown stem pool '" + std::string(s) + "'");
}


std::string_view to_string(LayerKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "unknown";
}

std::string_view to_string(Activation a) { return a == Activation::relu6 ? "relu6" : "none"; }

LayerKind layer_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kKindNames)
    if (name == s) return kind;
  throw LoadError("unknown layer kind '" + std::string(s) + "'");
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu6") return Activation::relu6;
  if (s == "none") return Activation::none;
  throw LoadError("unknown activation '" + std::string(s) + "'");
}

bool is_3x3(LayerKind k) {
  return k == LayerKind::subm_conv3x3 || k == LayerKind::subm_dw3x3 || k == LayerKind::strided_conv3x3 ||
         k == LayerKind::strided_dw3x3;
}

bool is_depthwise(LayerKind k) { return k == LayerKind::subm_dw3x3 || k == LayerKind::strided_dw3x3; }

bool is_strided(LayerKind k) {
  return k == LayerKind::strided_conv3x3 || k == LayerKind::strided_dw3x3 || k == LayerKind::max_pool2x2 ||
         k == LayerKind::avg_pool2x2;
}

bool has_weights(LayerKind k) { return k == LayerKind::conv1x1 || is_3x3(k); }

std::size_t LayerSpec::weight_count() const {
  const auto in = static_cast<std::size_t>(in_channels);
  const auto out = static_cast<std::size_t>(out_channels);
  switch (kind) {
    case LayerKind::conv1x1: return in * out;
    case LayerKind::subm_conv3x3:
    case LayerKind::strided_conv3x3: return 9 * in * out;
    case LayerKind::subm_dw3x3:
    case LayerKind::strided_dw3x3: return 9 * in;
    default: return 0;
  }
}

void LayerSpec::validate() const {
  const std::string where = "layer '" + name + "': ";
  if (in_channels <= 0 || out_channels <= 0) throw ArgumentError(where + "channel counts must be positive");
  const int want_stride = is_strided(kind) ? 2 : 1;
  if (stride != want_stride)
    throw ArgumentError(where + std::string(to_string(kind)) + " requires stride " + std::to_string(want_stride));
  if ((is_depthwise(kind) || !has_weights(kind)) && in_channels != out_channels)
    throw ArgumentError(where + std::string(to_string(kind)) + " requires in_channels == out_channels");
}

std::vector<LayerSpec> ModelSpec::layers() const {
  std::vector<LayerSpec> out;
  const int in_ch = input.channels();
  out.push_back({"stem", stem_kind, in_ch, stem_channels, is_strided(stem_kind) ? 2 : 1, Activation::relu6,
                 LayerRole::stem, -1, false});
  if (stem_pool != StemPool::none) {
    out.push_back({"stem_pool", stem_pool == StemPool::max ? LayerKind::max_pool2x2 : LayerKind::avg_pool2x2,
                   stem_channels, stem_channels, 2, Activation::none, LayerRole::stem_pool, -1, false});
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& b = blocks[i];
    const std::string prefix = "b" + std::to_string(i) + ".";
    const int bi = static_cast<int>(i);
    const int hidden = b.hidden_channels();
    if (b.expansion > 1)
      out.push_back({prefix + "expand", LayerKind::conv1x1, b.in_channels, hidden, 1, Activation::relu6,
                     LayerRole::expand, bi, false});
    const LayerKind dw = b.stride == 2 ? LayerKind::strided_dw3x3 : LayerKind::subm_dw3x3;
    out.push_back({prefix + "dw", dw, hidden, hidden, b.stride, Activation::relu6, LayerRole::depthwise, bi, false});
    out.push_back({prefix + "project", LayerKind::conv1x1, hidden, b.out_channels, 1, Activation::none,
                   LayerRole::project, bi, b.has_residual()});
  }
  const int emb = embedding_size();
  out.push_back({"gap", LayerKind::global_avg_pool, emb, emb, 1, Activation::none, LayerRole::head_pool, -1, false});
  return out;
}

std::size_t ModelSpec::parameter_count() const {
  std::size_t n = 0;
  for (const LayerSpec& l : layers()) n += l.weight_count() + l.bias_count();
  return n;
}

void ModelSpec::validate() const {
  input.validate();
  if (stem_kind != LayerKind::subm_conv3x3 && stem_kind != LayerKind::strided_conv3x3)
    throw ArgumentError("stem must be subm_conv3x3 or strided_conv3x3");
  if (stem_channels <= 0) throw ArgumentError("stem channels must be positive");
  if (gru_hidden <= 0) throw ArgumentError("GRU hidden size must be positive");
  int prev = stem_channels;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& b = blocks[i];
    const std::string where = "block " + std::to_string(i) + ": ";
    if (b.in_channels != prev)
      throw ArgumentError(where + "input channels " + std::to_string(b.in_channels) + " do not chain from " +
                          std::to_string(prev));
    if (b.expansion < 1) throw ArgumentError(where + "expansion ratio must be >= 1");
    if (b.stride != 1 && b.stride != 2) throw ArgumentError(where + "stride must be 1 or 2");
    if (b.out_channels <= 0) throw ArgumentError(where + "output channels must be positive");
    prev = b.out_channels;
  }
  for (const LayerSpec& l : layers()) l.validate();
}

nlohmann::json to_json(const VoxelGridConfig& cfg) {
  return {{"height", cfg.height},
          {"width", cfg.width},
          {"bins", cfg.bins},
          {"polarity", cfg.polarity == PolarityMode::split ? "split" : "merged"}};
}

VoxelGridConfig voxel_config_from_json(const nlohmann::json& j) {
  VoxelGridConfig cfg;
  cfg.height = j.at("height").get<int>();
  cfg.width = j.at("width").get<int>();
  cfg.bins = j.at("bins").get<int>();
  const auto pol = j.value("polarity", std::string("merged"));
  if (pol != "merged" && pol != "split") throw LoadError("unknown polarity mode '" + pol + "'");
  cfg.polarity = pol == "split" ? PolarityMode::split : PolarityMode::merged;
  return cfg;
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const BlockSpec& b : spec.blocks)
    blocks.push_back({{"expansion", b.expansion}, {"in", b.in_channels}, {"out", b.out_channels}, {"stride", b.stride}});
  return {{"input", to_json(spec.input)},
          {"stem", {{"kind", to_string(spec.stem_kind)}, {"channels", spec.stem_channels}, {"pool", to_string(spec.stem_pool)}}},
          {"blocks", blocks},
          {"gru_hidden", spec.gru_hidden}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec s;
    s.input = voxel_config_from_json(j.at("input"));
    const auto& stem = j.at("stem");
    s.stem_kind = layer_kind_from_string(stem.at("kind").get<std::string>());
    s.stem_channels = stem.at("channels").get<int>();
    s.stem_pool = stem_pool_from_string(stem.value("pool", std::string("none")));
    for (const auto& b : j.at("blocks"))
      s.blocks.push_back({b.at("expansion").get<int>(), b.at("in").get<int>(), b.at("out").get<int>(),
                          b.at("stride").get<int>()});
    s.gru_hidden = j.at("gru_hidden").get<int>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("model spec: ") + e.what());
  } catch (const ArgumentError& e) {
    throw LoadError(std::string("model spec: ") + e.what());
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t ModelSpec::hash() const { return fnv1a64(to_json(*this).dump()); }
std::string ModelSpec::hash_hex() const { return see::hash_hex(hash()); }

}  // namespace see

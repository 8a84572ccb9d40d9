#include "see/weight_container.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <string>
#include <string_view>

#include "see/errors.hpp"

namespace see {

namespace {

constexpr std::string_view kMagic = "SEEW\n";

using json = nlohmann::json;

template <typename T>
std::string_view dtype_name() {
  if constexpr (std::is_same_v<T, std::int8_t>) return "int8";
  else if constexpr (std::is_same_v<T, std::int32_t>) return "int32";
  else return "float32";
}

std::size_t dtype_size(std::string_view dtype) {
  if (dtype == "int8") return 1;
  if (dtype == "int32" || dtype == "float32") return 4;
  if (dtype == "qparams") return 5;
  throw LoadError("unknown tensor dtype '" + std::string(dtype) + "'");
}

template <typename T>
void put(std::vector<std::uint8_t>& blob, T v) {
  std::uint32_t bits;
  if constexpr (std::is_same_v<T, float>) bits = std::bit_cast<std::uint32_t>(v);
  else bits = static_cast<std::uint32_t>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) blob.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  if constexpr (std::is_same_v<T, float>) return std::bit_cast<float>(bits);
  else return static_cast<T>(bits);
}

template <typename T>
json append_tensor(std::vector<std::uint8_t>& blob, const std::string& name, const std::vector<T>& data,
                   std::vector<std::size_t> shape) {
  const std::size_t offset = blob.size();
  for (const T v : data) put(blob, v);
  return {{"name", name}, {"dtype", dtype_name<T>()}, {"shape", shape}, {"offset", offset},
          {"bytes", blob.size() - offset}};
}

json append_qparams(std::vector<std::uint8_t>& blob, const QuantParams& q) {
  const std::size_t offset = blob.size();
  put(blob, q.multiplier);
  blob.push_back(q.shift);
  return {{"name", "qparams"}, {"dtype", "qparams"}, {"shape", json::array({1})}, {"offset", offset}, {"bytes", 5}};
}

json qparams_json(const QuantParams& q) { return {{"multiplier", q.multiplier}, {"shift", q.shift}}; }

QuantParams qparams_from(std::uint32_t m, std::uint32_t n, const std::string& where) {
  if (m == 0 || m >= (1u << 31) || n > 31) throw LoadError(where + ": dyadic parameters out of range");
  QuantParams q{m, static_cast<std::uint8_t>(n), 0.0};
  q.real_scale = q.value();
  return q;
}

QuantParams qparams_from_json(const json& j, const std::string& where) {
  return qparams_from(j.at("multiplier").get<std::uint32_t>(), j.at("shift").get<std::uint32_t>(), where);
}

std::vector<std::size_t> weight_shape(const LayerSpec& l) {
  const auto in = static_cast<std::size_t>(l.in_channels);
  const auto out = static_cast<std::size_t>(l.out_channels);
  if (l.kind == LayerKind::conv1x1) return {in, out};
  if (is_depthwise(l.kind)) return {3, 3, in};
  return {3, 3, in, out};
}

struct HeadTensor {
  const char* name;
  std::vector<float> GruWeights::*gru = nullptr;
  std::vector<float> FcWeights::*fc = nullptr;
  bool square = false;   // hidden x hidden
  bool vector = false;   // hidden
};

constexpr HeadTensor kHeadTensors[] = {
    {"gru.w_z", &GruWeights::w_z}, {"gru.w_r", &GruWeights::w_r}, {"gru.w_h", &GruWeights::w_h},
    {"gru.u_z", &GruWeights::u_z, nullptr, true}, {"gru.u_r", &GruWeights::u_r, nullptr, true},
    {"gru.u_h", &GruWeights::u_h, nullptr, true}, {"gru.b_z", &GruWeights::b_z, nullptr, false, true},
    {"gru.b_r", &GruWeights::b_r, nullptr, false, true}, {"gru.b_h", &GruWeights::b_h, nullptr, false, true},
    {"fc.w", nullptr, &FcWeights::w}, {"fc.b", nullptr, &FcWeights::b},
};

std::vector<std::size_t> head_shape(const HeadTensor& t, std::size_t d, std::size_t hd) {
  if (t.fc == &FcWeights::w) return {2, hd};
  if (t.fc == &FcWeights::b) return {2};
  if (t.square) return {hd, hd};
  if (t.vector) return {hd};
  return {hd, d};
}

/// Reads one tensor descriptor, checks it against the expected name/dtype/shape and that it
/// starts exactly at `cursor`; returns a pointer into the blob.
const std::uint8_t* tensor_at(const json& desc, std::string_view name, std::string_view dtype,
                              const std::vector<std::size_t>& shape, std::size_t& cursor,
                              std::span<const std::uint8_t> blob, const std::string& where) {
  if (desc.at("name").get<std::string>() != name)
    throw LoadError(where + ": expected tensor '" + std::string(name) + "'");
  if (desc.at("dtype").get<std::string>() != dtype)
    throw LoadError(where + ": tensor '" + std::string(name) + "' must be " + std::string(dtype));
  if (desc.at("shape").get<std::vector<std::size_t>>() != shape)
    throw LoadError(where + ": tensor '" + std::string(name) + "' has the wrong shape");
  const auto offset = desc.at("offset").get<std::size_t>();
  const auto bytes = desc.at("bytes").get<std::size_t>();
  std::size_t elems = 1;
  for (const auto s : shape) elems *= s;
  if (offset != cursor || bytes != elems * dtype_size(dtype) || offset + bytes > blob.size())
    throw LoadError(where + ": tensor '" + std::string(name) + "' byte range is inconsistent");
  cursor += bytes;
  return blob.data() + offset;
}

template <typename T>
std::vector<T> decode(const std::uint8_t* p, std::size_t n) {
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = get<T>(p + i * sizeof(T));
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
  model.validate();
  const ModelSpec& spec = model.spec();
  const auto layers = spec.layers();
  const auto* q = std::get_if<QuantBackbone>(&model.backbone);
  const auto* f = std::get_if<FloatBackbone>(&model.backbone);

  std::vector<std::uint8_t> blob;
  json jlayers = json::array();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    json entry = {{"name", l.name},           {"kind", to_string(l.kind)}, {"in", l.in_channels},
                  {"out", l.out_channels},    {"stride", l.stride},        {"activation", to_string(l.activation)}};
    json tensors = json::array();
    if (has_weights(l.kind)) {
      const std::vector<std::size_t> bshape{static_cast<std::size_t>(l.out_channels)};
      if (q != nullptr) {
        tensors.push_back(append_tensor(blob, "weights", q->layers[i].weights, weight_shape(l)));
        tensors.push_back(append_tensor(blob, "bias", q->layers[i].bias, bshape));
        tensors.push_back(append_qparams(blob, q->layers[i].q));
        entry["act_max"] = q->layers[i].act_max;
      } else {
        tensors.push_back(append_tensor(blob, "weights", f->layers[i].weights, weight_shape(l)));
        tensors.push_back(append_tensor(blob, "bias", f->layers[i].bias, bshape));
      }
    }
    if (q != nullptr) entry["output_scale"] = q->output_scales[i];
    entry["tensors"] = tensors;
    jlayers.push_back(entry);
  }
  const std::size_t backbone_bytes = blob.size();

  const auto d = static_cast<std::size_t>(model.head.gru.input_size);
  const auto hd = static_cast<std::size_t>(model.head.gru.hidden_size);
  json head_tensors = json::array();
  for (const HeadTensor& t : kHeadTensors) {
    const auto& data = t.gru != nullptr ? model.head.gru.*(t.gru) : model.head.fc.*(t.fc);
    head_tensors.push_back(append_tensor(blob, t.name, data, head_shape(t, d, hd)));
  }

  json manifest = {
      {"format_version", kContainerFormatVersion},
      {"mode", q != nullptr ? "int8" : "float32"},
      {"spec_hash", spec.hash_hex()},
      {"model", to_json(spec)},
      {"layers", jlayers},
      {"head", {{"input_size", d}, {"hidden_size", hd}, {"tensors", head_tensors}}},
      {"backbone_bytes", backbone_bytes},
      {"head_bytes", blob.size() - backbone_bytes},
      {"blob_bytes", blob.size()},
  };
  if (q != nullptr) {
    json blocks = json::array();
    for (std::size_t b = 0; b < spec.blocks.size(); ++b)
      if (spec.blocks[b].has_residual()) blocks.push_back({{"index", b}, {"skip_q", qparams_json(q->skip_q[b])}});
    manifest["quant"] = {{"input_scale", q->input_scale},
                         {"input_q", qparams_json(q->input_q)},
                         {"embedding_scale", q->embedding_scale},
                         {"residual", blocks}};
  }

  const std::string text = manifest.dump(2) + "\n";
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  const std::string len = std::to_string(text.size()) + "\n";
  out.insert(out.end(), len.begin(), len.end());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

ContainerLayout read_layout(std::span<const std::uint8_t> bytes) {
  const std::string_view view(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!view.starts_with(kMagic)) throw LoadError("not a weight container (bad magic)");
  const std::size_t nl = view.find('\n', kMagic.size());
  if (nl == std::string_view::npos) throw LoadError("weight container header is truncated");
  const std::string_view len_text = view.substr(kMagic.size(), nl - kMagic.size());
  std::size_t manifest_len = 0;
  const auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), manifest_len);
  if (len_text.empty() || ec != std::errc{} || ptr != len_text.data() + len_text.size())
    throw LoadError("weight container manifest length is not a number");
  const std::size_t manifest_start = nl + 1;
  if (manifest_len > bytes.size() - manifest_start) throw LoadError("manifest length exceeds file size");

  ContainerLayout layout;
  try {
    layout.manifest = json::parse(view.substr(manifest_start, manifest_len));
  } catch (const json::exception& e) {
    throw LoadError(std::string("manifest is not valid JSON: ") + e.what());
  }
  layout.blob_offset = manifest_start + manifest_len;
  const json& m = layout.manifest;
  try {
    if (m.at("format_version").get<int>() != kContainerFormatVersion)
      throw LoadError("unsupported container format_version " + m.at("format_version").dump());
    layout.backbone_bytes = m.at("backbone_bytes").get<std::size_t>();
    layout.head_bytes = m.at("head_bytes").get<std::size_t>();
    const auto blob_bytes = m.at("blob_bytes").get<std::size_t>();
    if (layout.backbone_bytes + layout.head_bytes != blob_bytes)
      throw LoadError("manifest section sizes do not sum to blob_bytes");
    if (blob_bytes != bytes.size() - layout.blob_offset)
      throw LoadError("blob is " + std::to_string(bytes.size() - layout.blob_offset) + " bytes, manifest declares " +
                      std::to_string(blob_bytes));
    std::size_t declared = 0;
    for (const auto& l : m.at("layers"))
      for (const auto& t : l.at("tensors")) declared += t.at("bytes").get<std::size_t>();
    if (declared != layout.backbone_bytes) throw LoadError("layer tensor lengths do not sum to backbone_bytes");
    declared = 0;
    for (const auto& t : m.at("head").at("tensors")) declared += t.at("bytes").get<std::size_t>();
    if (declared != layout.head_bytes) throw LoadError("head tensor lengths do not sum to head_bytes");
  } catch (const json::exception& e) {
    throw LoadError(std::string("manifest: ") + e.what());
  }
  return layout;
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  const ContainerLayout layout = read_layout(bytes);
  const json& m = layout.manifest;
  const auto blob = bytes.subspan(layout.blob_offset);
  try {
    const ModelSpec spec = model_spec_from_json(m.at("model"));
    if (m.at("spec_hash").get<std::string>() != spec.hash_hex())
      throw LoadError("spec hash " + m.at("spec_hash").get<std::string>() + " does not match model (" +
                      spec.hash_hex() + ")");
    const std::string mode = m.at("mode").get<std::string>();
    if (mode != "int8" && mode != "float32") throw LoadError("unknown numeric mode '" + mode + "'");
    const bool quant = mode == "int8";
    const auto layers = spec.layers();
    const json& jlayers = m.at("layers");
    if (jlayers.size() != layers.size())
      throw LoadError("manifest lists " + std::to_string(jlayers.size()) + " layers, model has " +
                      std::to_string(layers.size()));

    FloatBackbone fb{spec, {}};
    QuantBackbone qb;
    qb.spec = spec;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      const json& jl = jlayers[i];
      const std::string where = "layer '" + l.name + "'";
      if (jl.at("name").get<std::string>() != l.name || jl.at("kind").get<std::string>() != to_string(l.kind) ||
          jl.at("in").get<int>() != l.in_channels || jl.at("out").get<int>() != l.out_channels ||
          jl.at("stride").get<int>() != l.stride || jl.at("activation").get<std::string>() != to_string(l.activation))
        throw LoadError(where + ": manifest entry does not match the model spec");
      const json& jt = jl.at("tensors");
      const std::size_t want_tensors = has_weights(l.kind) ? (quant ? 3 : 2) : 0;
      if (jt.size() != want_tensors) throw LoadError(where + ": expected " + std::to_string(want_tensors) + " tensors");
      const std::vector<std::size_t> bshape{static_cast<std::size_t>(l.out_channels)};
      if (quant) {
        QuantLayerParams p;
        if (has_weights(l.kind)) {
          const auto* w = tensor_at(jt[0], "weights", "int8", weight_shape(l), cursor, blob, where);
          p.weights = decode<std::int8_t>(w, l.weight_count());
          const auto* b = tensor_at(jt[1], "bias", "int32", bshape, cursor, blob, where);
          p.bias = decode<std::int32_t>(b, l.bias_count());
          const auto* qp = tensor_at(jt[2], "qparams", "qparams", {1}, cursor, blob, where);
          p.q = qparams_from(get<std::uint32_t>(qp), qp[4], where);
          p.act_max = jl.at("act_max").get<std::int32_t>();
          if (p.act_max < 0 || p.act_max > kQuantMax) throw LoadError(where + ": act_max out of range");
        }
        qb.layers.push_back(std::move(p));
        qb.output_scales.push_back(jl.at("output_scale").get<double>());
      } else {
        FloatLayerParams p;
        if (has_weights(l.kind)) {
          const auto* w = tensor_at(jt[0], "weights", "float32", weight_shape(l), cursor, blob, where);
          p.weights = decode<float>(w, l.weight_count());
          const auto* b = tensor_at(jt[1], "bias", "float32", bshape, cursor, blob, where);
          p.bias = decode<float>(b, l.bias_count());
        }
        fb.layers.push_back(std::move(p));
      }
    }
    if (cursor != layout.backbone_bytes) throw LoadError("backbone tensors do not fill the backbone section");

    const json& jh = m.at("head");
    const auto d = jh.at("input_size").get<std::size_t>();
    const auto hd = jh.at("hidden_size").get<std::size_t>();
    HeadWeights head{GruWeights::zeros(static_cast<int>(d), static_cast<int>(hd)), FcWeights::zeros(static_cast<int>(hd))};
    const json& ht = jh.at("tensors");
    if (ht.size() != std::size(kHeadTensors)) throw LoadError("head: wrong number of tensors");
    for (std::size_t i = 0; i < std::size(kHeadTensors); ++i) {
      const HeadTensor& t = kHeadTensors[i];
      auto shape = head_shape(t, d, hd);
      std::size_t elems = 1;
      for (const auto s : shape) elems *= s;
      const auto* p = tensor_at(ht[i], t.name, "float32", shape, cursor, blob, "head");
      auto& dst = t.gru != nullptr ? head.gru.*(t.gru) : head.fc.*(t.fc);
      dst = decode<float>(p, elems);
    }

    Model model;
    model.head = std::move(head);
    if (quant) {
      const json& jq = m.at("quant");
      qb.input_scale = jq.at("input_scale").get<double>();
      qb.input_q = qparams_from_json(jq.at("input_q"), "input quantizer");
      qb.embedding_scale = jq.at("embedding_scale").get<double>();
      qb.skip_q.assign(spec.blocks.size(), QuantParams{});
      for (const auto& jb : jq.at("residual")) {
        const auto b = jb.at("index").get<std::size_t>();
        if (b >= spec.blocks.size() || !spec.blocks[b].has_residual())
          throw LoadError("residual rescale given for non-residual block " + std::to_string(b));
        qb.skip_q[b] = qparams_from_json(jb.at("skip_q"), "block " + std::to_string(b));
      }
      for (std::size_t b = 0; b < spec.blocks.size(); ++b)
        if (spec.blocks[b].has_residual() && qb.skip_q[b].multiplier == 0)
          throw LoadError("block " + std::to_string(b) + ": missing residual rescale");
      model.backbone = std::move(qb);
    } else {
      model.backbone = std::move(fb);
    }
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw LoadError(std::string("manifest: ") + e.what());
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void save_model(const std::filesystem::path& path, const Model& model) { write_file(path, serialize_model(model)); }

Model load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace see

#include "see/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "see/errors.hpp"
#include "see/rng.hpp"

namespace see {

namespace {

std::int64_t div_round_away(std::int64_t num, std::int64_t den) {
  return num >= 0 ? (2 * num + den) / (2 * den) : -((-2 * num + den) / (2 * den));
}

template <typename T>
using LayerHook = std::function<void(std::size_t, const SparseTensor<T>&)>;

template <typename Params>
void check_layers(const std::vector<LayerSpec>& layers, const std::vector<Params>& params) {
  if (params.size() != layers.size())
    throw LoadError("model has " + std::to_string(params.size()) + " parameter sets for " +
                    std::to_string(layers.size()) + " layers");
}

template <typename T, typename Params, typename Residual>
std::vector<T> run_sparse(const ModelSpec& spec, const std::vector<Params>& params, SparseTensor<T> x,
                          std::vector<LayerStats>* stats, Residual&& residual, const LayerHook<T>& hook = {}) {
  const auto layers = spec.layers();
  check_layers(layers, params);
  if (stats != nullptr) stats->clear();
  SparseTensor<T> block_in;
  int cur_block = -1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.block >= 0 && l.block != cur_block) {
      cur_block = l.block;
      if (spec.blocks[static_cast<std::size_t>(l.block)].has_residual()) block_in = x;
    }
    OpCounter ops;
    const std::size_t active_in = x.size();
    if (l.kind == LayerKind::global_avg_pool) {
      auto emb = global_avg_pool(x, &ops);
      if (stats != nullptr) stats->push_back({l.name, l.kind, active_in, active_in, ops});
      return emb;
    }
    if (l.role == LayerRole::project && l.has_residual)
      x = residual(x, block_in, l, params[i], static_cast<std::size_t>(l.block), &ops);
    else
      x = apply_layer(x, l, params[i], &ops);
    if (stats != nullptr) stats->push_back({l.name, l.kind, active_in, x.size(), ops});
    if (hook) hook(i, x);
  }
  throw LoadError("model has no global pooling layer");
}

template <typename T>
std::size_t mask_count(const std::vector<std::uint8_t>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

template <typename T>
void apply_mask(DenseTensor<T>& t, const std::vector<std::uint8_t>& mask) {
  const int ch = t.geometry.channels;
  for (std::size_t p = 0; p < mask.size(); ++p)
    if (!mask[p]) std::fill_n(t.data.begin() + static_cast<std::ptrdiff_t>(p * ch), ch, T{});
}

template <typename T>
DenseTensor<T> masked_pool(const DenseTensor<T>& in, const std::vector<std::uint8_t>& mask, PoolMode mode) {
  const Geometry& ig = in.geometry;
  const Geometry og{(ig.height + 1) / 2, (ig.width + 1) / 2, ig.channels};
  DenseTensor<T> out(og);
  for (int oy = 0; oy < og.height; ++oy)
    for (int ox = 0; ox < og.width; ++ox)
      for (int c = 0; c < og.channels; ++c) {
        int n = 0;
        T best{};
        double fsum = 0.0;
        std::int64_t isum = 0;
        for (int y = 2 * oy; y < std::min(2 * oy + 2, ig.height); ++y)
          for (int x = 2 * ox; x < std::min(2 * ox + 2, ig.width); ++x) {
            if (!mask[static_cast<std::size_t>(y) * ig.width + x]) continue;
            const T v = in.at(y, x, c);
            best = n == 0 ? v : std::max(best, v);
            if constexpr (std::is_floating_point_v<T>) fsum += v; else isum += v;
            ++n;
          }
        if (n == 0) continue;
        if (mode == PoolMode::max) {
          out.at(oy, ox, c) = best;
        } else if constexpr (std::is_floating_point_v<T>) {
          out.at(oy, ox, c) = static_cast<T>(fsum / n);
        } else {
          out.at(oy, ox, c) = static_cast<T>(div_round_away(isum, n));
        }
      }
  return out;
}

template <typename T>
std::vector<T> masked_mean(const DenseTensor<T>& in, const std::vector<std::uint8_t>& mask) {
  const int ch = in.geometry.channels;
  const std::size_t n = mask_count<T>(mask);
  std::vector<T> out(ch, T{});
  if (n == 0) return out;
  for (int c = 0; c < ch; ++c) {
    double fsum = 0.0;
    std::int64_t isum = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
      if (!mask[p]) continue;
      if constexpr (std::is_floating_point_v<T>) fsum += in.data[p * ch + c]; else isum += in.data[p * ch + c];
    }
    if constexpr (std::is_floating_point_v<T>)
      out[c] = static_cast<T>(fsum / static_cast<double>(n));
    else
      out[c] = static_cast<T>(div_round_away(isum, static_cast<std::int64_t>(n)));
  }
  return out;
}

template <typename T, typename Params, typename Residual>
std::vector<T> run_dense(const ModelSpec& spec, const std::vector<Params>& params, const SparseTensor<T>& input,
                         std::vector<LayerStats>* stats, Residual&& residual) {
  const auto layers = spec.layers();
  check_layers(layers, params);
  if (stats != nullptr) stats->clear();
  DenseTensor<T> x = to_dense(input);
  std::vector<std::uint8_t> mask(input.geometry().plane(), 0);
  for (const Coord s : input.sites()) mask[static_cast<std::size_t>(s.y) * input.geometry().width + s.x] = 1;

  DenseTensor<T> block_in;
  int cur_block = -1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.block >= 0 && l.block != cur_block) {
      cur_block = l.block;
      if (spec.blocks[static_cast<std::size_t>(l.block)].has_residual()) block_in = x;
    }
    OpCounter ops;
    const std::size_t active_in = mask_count<T>(mask);
    const Geometry ig = x.geometry;
    if (l.kind == LayerKind::global_avg_pool) {
      auto emb = masked_mean(x, mask);
      if (stats != nullptr) stats->push_back({l.name, l.kind, active_in, active_in, ops});
      return emb;
    }
    if (l.kind == LayerKind::max_pool2x2 || l.kind == LayerKind::avg_pool2x2) {
      x = masked_pool(x, mask, l.kind == LayerKind::max_pool2x2 ? PoolMode::max : PoolMode::avg);
    } else if (l.role == LayerRole::project && l.has_residual) {
      x = residual(x, block_in, l, params[i], static_cast<std::size_t>(l.block), &ops);
    } else {
      x = dense_oracle(l, x, params[i], &ops);
    }
    mask = propagate_mask(l, mask, ig.height, ig.width);
    apply_mask(x, mask);
    if (stats != nullptr) stats->push_back({l.name, l.kind, active_in, mask_count<T>(mask), ops});
  }
  throw LoadError("model has no global pooling layer");
}

auto float_residual() {
  return [](const auto& x, const auto& skip, const LayerSpec& l, const FloatLayerParams& p, std::size_t,
            OpCounter* ops) {
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, SparseTensor<float>>)
      return conv1x1_residual(x, skip, l, p, ops);
    else
      return dense_residual_project(l, x, skip, p, ops);
  };
}

auto quant_residual(const QuantBackbone& bb) {
  return [&bb](const auto& x, const auto& skip, const LayerSpec& l, const QuantLayerParams& p, std::size_t block,
               OpCounter* ops) {
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, SparseTensor<std::int8_t>>)
      return conv1x1_residual(x, skip, l, p, bb.skip_q.at(block), ops);
    else
      return dense_residual_project(l, x, skip, p, bb.skip_q.at(block), ops);
  };
}

void check_input(const ModelSpec& spec, const SparseTensor<std::int32_t>& counts) {
  const Geometry& g = counts.geometry();
  if (g.height != spec.input.height || g.width != spec.input.width || g.channels != spec.input.channels())
    throw ArgumentError("input tensor " + std::to_string(g.height) + "x" + std::to_string(g.width) + "x" +
                        std::to_string(g.channels) + " does not match model input " +
                        std::to_string(spec.input.height) + "x" + std::to_string(spec.input.width) + "x" +
                        std::to_string(spec.input.channels()));
}

void fill_uniform(std::vector<float>& v, std::size_t n, float bound, Rng& rng) {
  v.resize(n);
  for (float& x : v) x = static_cast<float>(uniform(rng, -bound, bound));
}

}  // namespace

const ModelSpec& Model::spec() const {
  return std::visit([](const auto& bb) -> const ModelSpec& { return bb.spec; }, backbone);
}

void Model::validate() const {
  const ModelSpec& s = spec();
  try {
    s.validate();
  } catch (const ArgumentError& e) {
    throw LoadError(e.what());
  }
  const auto layers = s.layers();
  auto check = [&](const auto& params) {
    if (params.size() != layers.size())
      throw LoadError("model has " + std::to_string(params.size()) + " parameter sets for " +
                      std::to_string(layers.size()) + " layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (params[i].weights.size() != layers[i].weight_count() || params[i].bias.size() != layers[i].bias_count())
        throw LoadError("layer '" + layers[i].name + "': tensor shapes do not match the model spec");
    }
  };
  std::visit([&](const auto& bb) { check(bb.layers); }, backbone);
  if (const auto* q = std::get_if<QuantBackbone>(&backbone)) {
    if (q->skip_q.size() != s.blocks.size()) throw LoadError("residual rescale table does not match block count");
    if (q->output_scales.size() != layers.size()) throw LoadError("output scale table does not match layer count");
  }
  try {
    head.gru.validate();
    head.fc.validate();
  } catch (const ArgumentError& e) {
    throw LoadError(std::string("head: ") + e.what());
  }
  if (head.gru.input_size != s.embedding_size())
    throw LoadError("head: GRU input size " + std::to_string(head.gru.input_size) + " differs from embedding size " +
                    std::to_string(s.embedding_size()));
  if (head.gru.hidden_size != s.gru_hidden || head.fc.hidden_size != s.gru_hidden)
    throw LoadError("head: hidden size does not match the model spec");
}

SparseTensor<float> prepare_input(const SparseTensor<std::int32_t>& counts) {
  return map_features<float>(counts, [](std::int32_t c) {
    return static_cast<float>(std::min(c, kCountSaturation));
  });
}

SparseTensor<std::int8_t> prepare_input(const SparseTensor<std::int32_t>& counts, const QuantParams& input_q) {
  return map_features<std::int8_t>(counts, [&](std::int32_t c) {
    return requantize(std::clamp(c, -kCountSaturation, kCountSaturation), input_q);
  });
}

std::vector<float> run_backbone(const FloatBackbone& bb, const SparseTensor<std::int32_t>& counts,
                                std::vector<LayerStats>* stats) {
  check_input(bb.spec, counts);
  return run_sparse<float>(bb.spec, bb.layers, prepare_input(counts), stats, float_residual());
}

std::vector<std::int8_t> run_backbone(const QuantBackbone& bb, const SparseTensor<std::int32_t>& counts,
                                      std::vector<LayerStats>* stats) {
  check_input(bb.spec, counts);
  return run_sparse<std::int8_t>(bb.spec, bb.layers, prepare_input(counts, bb.input_q), stats, quant_residual(bb));
}

std::vector<float> run_backbone_dense(const FloatBackbone& bb, const SparseTensor<std::int32_t>& counts,
                                      std::vector<LayerStats>* stats) {
  check_input(bb.spec, counts);
  return run_dense<float>(bb.spec, bb.layers, prepare_input(counts), stats, float_residual());
}

std::vector<std::int8_t> run_backbone_dense(const QuantBackbone& bb, const SparseTensor<std::int32_t>& counts,
                                            std::vector<LayerStats>* stats) {
  check_input(bb.spec, counts);
  return run_dense<std::int8_t>(bb.spec, bb.layers, prepare_input(counts, bb.input_q), stats, quant_residual(bb));
}

std::vector<float> embed(const Model& model, const SparseTensor<std::int32_t>& counts, ExecMode mode,
                         std::vector<LayerStats>* stats) {
  if (const auto* f = std::get_if<FloatBackbone>(&model.backbone))
    return mode == ExecMode::sparse ? run_backbone(*f, counts, stats) : run_backbone_dense(*f, counts, stats);
  const auto& q = std::get<QuantBackbone>(model.backbone);
  const auto e = mode == ExecMode::sparse ? run_backbone(q, counts, stats) : run_backbone_dense(q, counts, stats);
  std::vector<float> out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = static_cast<float>(dequantize(e[i], q.embedding_scale));
  return out;
}

std::vector<PixelPoint> run_sequence(const Model& model, std::span<const SparseTensor<std::int32_t>> clips,
                                     HeadState& state, ExecMode mode) {
  const ModelSpec& spec = model.spec();
  std::vector<PixelPoint> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) {
    const auto e = embed(model, clip, mode);
    state = gru_step(e, state, model.head.gru);
    out.push_back(denormalize(fc_regress(state.h, model.head.fc), spec.input.height, spec.input.width));
  }
  return out;
}

std::vector<PixelPoint> run_sequence(const Model& model, std::span<const SparseTensor<std::int32_t>> clips,
                                     ExecMode mode) {
  HeadState state = HeadState::zeros(model.head.gru.hidden_size);
  return run_sequence(model, clips, state, mode);
}

QuantBackbone quantize_model(const FloatBackbone& bb, std::span<const SparseTensor<std::int32_t>> calibration) {
  if (calibration.empty()) throw ArgumentError("quantization needs at least one calibration input");
  const ModelSpec& spec = bb.spec;
  const auto layers = spec.layers();
  check_layers(layers, bb.layers);

  double max_in = 0.0;
  std::vector<double> out_max(layers.size(), 0.0);
  for (const auto& counts : calibration) {
    check_input(spec, counts);
    const auto x = prepare_input(counts);
    for (const float v : x.features()) max_in = std::max(max_in, std::abs(static_cast<double>(v)));
    run_sparse<float>(spec, bb.layers, x, nullptr, float_residual(), [&](std::size_t i, const SparseTensor<float>& t) {
      for (const float v : t.features()) out_max[i] = std::max(out_max[i], std::abs(static_cast<double>(v)));
    });
  }

  QuantBackbone q;
  q.spec = spec;
  q.input_scale = calibrate_scale(std::span(&max_in, 1), TensorKind::activation);
  q.input_q = dyadic_approx(1.0 / q.input_scale);
  q.layers.resize(layers.size());
  q.output_scales.resize(layers.size());
  q.skip_q.resize(spec.blocks.size());

  double s_x = q.input_scale;
  double block_in_scale = s_x;
  int cur_block = -1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.block >= 0 && l.block != cur_block) {
      cur_block = l.block;
      block_in_scale = s_x;
    }
    if (!has_weights(l.kind)) {
      q.output_scales[i] = s_x;
      continue;
    }
    const FloatLayerParams& fp = bb.layers[i];
    QuantLayerParams& qp = q.layers[i];
    const double s_y = calibrate_scale(std::span(&out_max[i], 1), TensorKind::activation);
    const double s_w = calibrate_scale(fp.weights, TensorKind::weight);
    qp.weights.resize(fp.weights.size());
    for (std::size_t k = 0; k < fp.weights.size(); ++k) qp.weights[k] = quantize_weight(fp.weights[k], s_w);
    qp.bias.resize(fp.bias.size());
    constexpr double kI32 = static_cast<double>(std::numeric_limits<std::int32_t>::max());
    for (std::size_t k = 0; k < fp.bias.size(); ++k)
      qp.bias[k] = static_cast<std::int32_t>(std::clamp(std::round(fp.bias[k] / (s_w * s_x)), -kI32, kI32));
    qp.q = dyadic_approx(s_w * s_x / s_y);
    qp.act_max = l.activation == Activation::relu6
                     ? static_cast<std::int32_t>(std::min<long>(kQuantMax, std::lround(6.0 / s_y)))
                     : kQuantMax;
    if (l.has_residual) q.skip_q[static_cast<std::size_t>(l.block)] = dyadic_approx(block_in_scale / s_y);
    q.output_scales[i] = s_y;
    s_x = s_y;
  }
  q.embedding_scale = s_x;
  return q;
}

FloatBackbone random_backbone(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  FloatBackbone bb;
  bb.spec = spec;
  for (const LayerSpec& l : spec.layers()) {
    FloatLayerParams p;
    if (has_weights(l.kind)) {
      const int taps = is_3x3(l.kind) ? 9 : 1;
      const int fan_in = taps * (is_depthwise(l.kind) ? 1 : l.in_channels);
      const double gain = l.activation == Activation::relu6 ? 6.0 : 3.0;
      fill_uniform(p.weights, l.weight_count(), static_cast<float>(std::sqrt(gain / fan_in)), rng);
      fill_uniform(p.bias, l.bias_count(), 0.1f, rng);
    }
    bb.layers.push_back(std::move(p));
  }
  return bb;
}

HeadWeights random_head(int input_size, int hidden_size, std::uint64_t seed, float scale) {
  Rng rng(seed);
  HeadWeights h{GruWeights::zeros(input_size, hidden_size), FcWeights::zeros(hidden_size)};
  const auto in_bound = static_cast<float>(scale / std::sqrt(static_cast<double>(input_size)));
  const auto hid_bound = static_cast<float>(scale / std::sqrt(static_cast<double>(hidden_size)));
  auto& g = h.gru;
  for (auto* m : {&g.w_z, &g.w_r, &g.w_h}) fill_uniform(*m, m->size(), in_bound, rng);
  for (auto* m : {&g.u_z, &g.u_r, &g.u_h}) fill_uniform(*m, m->size(), hid_bound, rng);
  for (auto* b : {&g.b_z, &g.b_r, &g.b_h}) fill_uniform(*b, b->size(), 0.1f, rng);
  fill_uniform(h.fc.w, h.fc.w.size(), hid_bound, rng);
  fill_uniform(h.fc.b, h.fc.b.size(), 0.1f, rng);
  return h;
}

}  // namespace see

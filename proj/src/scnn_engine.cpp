#include "see/scnn_engine.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "see/errors.hpp"

namespace see {

namespace {

struct FloatMath {
  using Value = float;
  using Acc = float;
  using Weight = float;
  using Params = FloatLayerParams;
  static constexpr bool kFloat = true;

  static Value finish(Acc a, const LayerSpec& spec, const Params&) {
    if (spec.activation == Activation::relu6) return std::clamp(a, 0.0f, 6.0f);
    return a;
  }
};

struct QuantMath {
  using Value = std::int8_t;
  using Acc = std::int32_t;
  using Weight = std::int8_t;
  using Params = QuantLayerParams;
  static constexpr bool kFloat = false;

  static Value finish(Acc a, const LayerSpec& spec, const Params& p) {
    const std::int32_t lo = spec.activation == Activation::relu6 ? 0 : kQuantMin;
    const std::int32_t hi = spec.activation == Activation::relu6 ? p.act_max : kQuantMax;
    return static_cast<Value>(saturate(rescale(a, p.q), lo, hi));
  }
};

template <typename Params>
void check_params(const LayerSpec& spec, const Params& p, int input_channels) {
  const std::string where = "layer '" + spec.name + "': ";
  if (input_channels != spec.in_channels)
    throw ArgumentError(where + "input has " + std::to_string(input_channels) + " channels, expected " +
                        std::to_string(spec.in_channels));
  if (p.weights.size() != spec.weight_count())
    throw ArgumentError(where + "expected " + std::to_string(spec.weight_count()) + " weights, got " +
                        std::to_string(p.weights.size()));
  if (p.bias.size() != spec.bias_count())
    throw ArgumentError(where + "expected " + std::to_string(spec.bias_count()) + " biases, got " +
                        std::to_string(p.bias.size()));
}

void check_kind(const LayerSpec& spec, std::initializer_list<LayerKind> allowed, const char* op) {
  for (const LayerKind k : allowed)
    if (spec.kind == k) return;
  throw ArgumentError(std::string(op) + " cannot execute layer '" + spec.name + "' of kind " +
                      std::string(to_string(spec.kind)));
}

/// Site index per pixel, -1 where inactive.
template <typename T>
std::vector<std::int32_t> site_grid(const SparseTensor<T>& t) {
  const Geometry& g = t.geometry();
  std::vector<std::int32_t> grid(g.plane(), -1);
  const auto sites = t.sites();
  for (std::size_t i = 0; i < sites.size(); ++i)
    grid[static_cast<std::size_t>(sites[i].y) * g.width + sites[i].x] = static_cast<std::int32_t>(i);
  return grid;
}

template <typename M>
void init_acc(std::vector<typename M::Acc>& acc, const typename M::Params& p) {
  for (std::size_t c = 0; c < acc.size(); ++c) acc[c] = static_cast<typename M::Acc>(p.bias[c]);
}

template <typename M>
void record(OpCounter* counter, std::uint64_t macs, std::uint64_t offsets) {
  if (counter == nullptr) return;
  counter->macs += macs;
  counter->offsets += offsets;
  if constexpr (M::kFloat) counter->float_ops += 2 * macs;
}

// Accumulates one input position's contribution through tap k.
template <typename M>
inline void accumulate_tap(std::vector<typename M::Acc>& acc, std::span<const typename M::Value> x,
                           const typename M::Weight* w, int cin, int cout, bool depthwise) {
  using Acc = typename M::Acc;
  if (depthwise) {
    for (int c = 0; c < cin; ++c) acc[c] += static_cast<Acc>(x[c]) * static_cast<Acc>(w[c]);
    return;
  }
  for (int ci = 0; ci < cin; ++ci) {
    const Acc xv = static_cast<Acc>(x[ci]);
    if (xv == Acc{0}) continue;
    const typename M::Weight* row = w + static_cast<std::size_t>(ci) * cout;
    for (int co = 0; co < cout; ++co) acc[co] += xv * static_cast<Acc>(row[co]);
  }
}

template <typename M>
SparseTensor<typename M::Value> conv1x1_impl(const SparseTensor<typename M::Value>& in, const LayerSpec& spec,
                                             const typename M::Params& p, OpCounter* counter) {
  check_kind(spec, {LayerKind::conv1x1}, "conv1x1");
  check_params(spec, p, in.geometry().channels);
  const int cin = spec.in_channels;
  const int cout = spec.out_channels;
  const Geometry g{in.geometry().height, in.geometry().width, cout};
  typename SparseTensor<typename M::Value>::Builder b(g, in.size());
  std::vector<typename M::Acc> acc(cout);
  for (std::size_t i = 0; i < in.size(); ++i) {
    init_acc<M>(acc, p);
    accumulate_tap<M>(acc, in.feature(i), p.weights.data(), cin, cout, false);
    auto out = b.push(in.sites()[i]);
    for (int co = 0; co < cout; ++co) out[co] = M::finish(acc[co], spec, p);
  }
  record<M>(counter, static_cast<std::uint64_t>(in.size()) * cin * cout, in.size());
  return std::move(b).build();
}

template <typename M>
SparseTensor<typename M::Value> subm3x3_impl(const SparseTensor<typename M::Value>& in, const LayerSpec& spec,
                                             const typename M::Params& p, OpCounter* counter) {
  const bool dw = spec.kind == LayerKind::subm_dw3x3;
  check_params(spec, p, in.geometry().channels);
  const Geometry& ig = in.geometry();
  const int cin = spec.in_channels;
  const int cout = spec.out_channels;
  const std::size_t tap_stride = dw ? static_cast<std::size_t>(cin) : static_cast<std::size_t>(cin) * cout;
  const auto grid = site_grid(in);
  typename SparseTensor<typename M::Value>::Builder b({ig.height, ig.width, cout}, in.size());
  std::vector<typename M::Acc> acc(cout);
  std::uint64_t offsets = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Coord s = in.sites()[i];
    init_acc<M>(acc, p);
    for (int k = 0; k < 9; ++k) {
      const int y = s.y + k / 3 - 1;
      const int x = s.x + k % 3 - 1;
      if (y < 0 || x < 0 || y >= ig.height || x >= ig.width) continue;
      const std::int32_t j = grid[static_cast<std::size_t>(y) * ig.width + x];
      if (j < 0) continue;
      ++offsets;
      accumulate_tap<M>(acc, in.feature(static_cast<std::size_t>(j)), p.weights.data() + k * tap_stride, cin, cout, dw);
    }
    auto out = b.push(s);
    for (int co = 0; co < cout; ++co) out[co] = M::finish(acc[co], spec, p);
  }
  record<M>(counter, offsets * tap_stride, offsets);
  return std::move(b).build();
}

/// Output sites of a stride-2 window op, row-major. Output o covers inputs 2*o + lo .. 2*o + hi
/// per axis: (-1, 1) for 3x3 with padding 1, (0, 1) for 2x2.
template <typename T>
std::vector<Coord> strided_sites(const SparseTensor<T>& in, const Geometry& og, int lo, int hi) {
  std::vector<std::uint8_t> hit(og.plane(), 0);
  std::vector<std::int32_t> order;
  for (const Coord s : in.sites()) {
    // input row y feeds output rows oy with 2*oy + lo <= y <= 2*oy + hi
    for (int oy = (s.y - hi + 1) / 2; oy <= (s.y - lo) / 2; ++oy) {
      if (oy < 0 || oy >= og.height || 2 * oy + lo > s.y || 2 * oy + hi < s.y) continue;
      for (int ox = (s.x - hi + 1) / 2; ox <= (s.x - lo) / 2; ++ox) {
        if (ox < 0 || ox >= og.width || 2 * ox + lo > s.x || 2 * ox + hi < s.x) continue;
        const std::size_t idx = static_cast<std::size_t>(oy) * og.width + ox;
        if (!hit[idx]) {
          hit[idx] = 1;
          order.push_back(static_cast<std::int32_t>(idx));
        }
      }
    }
  }
  std::sort(order.begin(), order.end());
  std::vector<Coord> out;
  out.reserve(order.size());
  for (const std::int32_t idx : order) out.push_back({idx / og.width, idx % og.width});
  return out;
}

template <typename M>
SparseTensor<typename M::Value> strided_impl(const SparseTensor<typename M::Value>& in, const LayerSpec& spec,
                                             const typename M::Params& p, OpCounter* counter) {
  check_kind(spec, {LayerKind::strided_conv3x3, LayerKind::strided_dw3x3}, "strided_conv3x3");
  const bool dw = spec.kind == LayerKind::strided_dw3x3;
  check_params(spec, p, in.geometry().channels);
  const Geometry& ig = in.geometry();
  const int cin = spec.in_channels;
  const int cout = spec.out_channels;
  const std::size_t tap_stride = dw ? static_cast<std::size_t>(cin) : static_cast<std::size_t>(cin) * cout;
  const Geometry og = strided_geometry(ig, cout);
  const auto grid = site_grid(in);
  const auto out_sites = strided_sites(in, og, -1, 1);
  typename SparseTensor<typename M::Value>::Builder b(og, out_sites.size());
  std::vector<typename M::Acc> acc(cout);
  std::uint64_t offsets = 0;
  for (const Coord o : out_sites) {
    init_acc<M>(acc, p);
    for (int k = 0; k < 9; ++k) {
      const int y = 2 * o.y - 1 + k / 3;
      const int x = 2 * o.x - 1 + k % 3;
      if (y < 0 || x < 0 || y >= ig.height || x >= ig.width) continue;
      const std::int32_t j = grid[static_cast<std::size_t>(y) * ig.width + x];
      if (j < 0) continue;
      ++offsets;
      accumulate_tap<M>(acc, in.feature(static_cast<std::size_t>(j)), p.weights.data() + k * tap_stride, cin, cout, dw);
    }
    auto out = b.push(o);
    for (int co = 0; co < cout; ++co) out[co] = M::finish(acc[co], spec, p);
  }
  record<M>(counter, offsets * tap_stride, offsets);
  return std::move(b).build();
}

std::int64_t div_round_away(std::int64_t num, std::int64_t den) {
  return num >= 0 ? (2 * num + den) / (2 * den) : -((-2 * num + den) / (2 * den));
}

template <typename M, typename Skip>
SparseTensor<typename M::Value> residual_impl(const SparseTensor<typename M::Value>& in,
                                              const SparseTensor<typename M::Value>& skip, const LayerSpec& spec,
                                              const typename M::Params& p, OpCounter* counter, Skip&& combine) {
  check_kind(spec, {LayerKind::conv1x1}, "conv1x1_residual");
  check_params(spec, p, in.geometry().channels);
  if (skip.geometry().channels != spec.out_channels || !std::ranges::equal(skip.sites(), in.sites()))
    throw ArgumentError("layer '" + spec.name + "': residual branch does not match projection output");
  const int cin = spec.in_channels;
  const int cout = spec.out_channels;
  typename SparseTensor<typename M::Value>::Builder b({in.geometry().height, in.geometry().width, cout}, in.size());
  std::vector<typename M::Acc> acc(cout);
  for (std::size_t i = 0; i < in.size(); ++i) {
    init_acc<M>(acc, p);
    accumulate_tap<M>(acc, in.feature(i), p.weights.data(), cin, cout, false);
    const auto sk = skip.feature(i);
    auto out = b.push(in.sites()[i]);
    for (int co = 0; co < cout; ++co) out[co] = combine(acc[co], sk[co]);
  }
  record<M>(counter, static_cast<std::uint64_t>(in.size()) * cin * cout, in.size());
  if constexpr (M::kFloat) {
    if (counter != nullptr) counter->float_ops += static_cast<std::uint64_t>(in.size()) * cout;
  }
  return std::move(b).build();
}

template <typename M>
DenseTensor<typename M::Value> dense_impl(const LayerSpec& spec, const DenseTensor<typename M::Value>& in,
                                          const typename M::Params& p, OpCounter* counter) {
  using Acc = typename M::Acc;
  using Value = typename M::Value;
  const Geometry& ig = in.geometry;
  if (in.data.size() != ig.plane() * ig.channels) throw ArgumentError("dense input size does not match geometry");

  if (spec.kind == LayerKind::max_pool2x2 || spec.kind == LayerKind::avg_pool2x2) {
    if (ig.channels != spec.in_channels) throw ArgumentError("layer '" + spec.name + "': channel mismatch");
    const Geometry og{(ig.height + 1) / 2, (ig.width + 1) / 2, ig.channels};
    DenseTensor<Value> out(og);
    for (int oy = 0; oy < og.height; ++oy)
      for (int ox = 0; ox < og.width; ++ox)
        for (int c = 0; c < og.channels; ++c) {
          std::int64_t isum = 0;
          float fsum = 0.0f;
          Value best = std::numeric_limits<Value>::lowest();
          int n = 0;
          for (int y = 2 * oy; y < std::min(2 * oy + 2, ig.height); ++y)
            for (int x = 2 * ox; x < std::min(2 * ox + 2, ig.width); ++x) {
              const Value v = in.at(y, x, c);
              best = std::max(best, v);
              if constexpr (M::kFloat) fsum += v; else isum += v;
              ++n;
            }
          if (spec.kind == LayerKind::max_pool2x2) {
            out.at(oy, ox, c) = best;
          } else if constexpr (M::kFloat) {
            out.at(oy, ox, c) = fsum / static_cast<float>(n);
          } else {
            out.at(oy, ox, c) = static_cast<Value>(div_round_away(isum, n));
          }
        }
    return out;
  }
  if (spec.kind == LayerKind::global_avg_pool) {
    DenseTensor<Value> out({1, 1, ig.channels});
    const auto plane = static_cast<std::int64_t>(ig.plane());
    for (int c = 0; c < ig.channels; ++c) {
      std::int64_t isum = 0;
      double fsum = 0.0;
      for (int y = 0; y < ig.height; ++y)
        for (int x = 0; x < ig.width; ++x) {
          if constexpr (M::kFloat) fsum += in.at(y, x, c); else isum += in.at(y, x, c);
        }
      if (plane == 0) continue;
      if constexpr (M::kFloat)
        out.at(0, 0, c) = static_cast<float>(fsum / static_cast<double>(plane));
      else
        out.at(0, 0, c) = static_cast<Value>(div_round_away(isum, plane));
    }
    return out;
  }

  check_params(spec, p, ig.channels);
  const bool dw = is_depthwise(spec.kind);
  const int cin = spec.in_channels;
  const int cout = spec.out_channels;
  const Geometry og = is_strided(spec.kind) ? strided_geometry(ig, cout) : Geometry{ig.height, ig.width, cout};
  const int stride = is_strided(spec.kind) ? 2 : 1;
  const bool three = is_3x3(spec.kind);
  const std::size_t tap_stride = dw ? static_cast<std::size_t>(cin) : static_cast<std::size_t>(cin) * cout;
  DenseTensor<Value> out(og);
  std::vector<Acc> acc(cout);
  std::uint64_t taps = 0;
  for (int oy = 0; oy < og.height; ++oy) {
    for (int ox = 0; ox < og.width; ++ox) {
      for (int co = 0; co < cout; ++co) acc[co] = static_cast<Acc>(p.bias[co]);
      for (int k = 0; k < (three ? 9 : 1); ++k) {
        const int y = three ? stride * oy - 1 + k / 3 : oy;
        const int x = three ? stride * ox - 1 + k % 3 : ox;
        if (y < 0 || x < 0 || y >= ig.height || x >= ig.width) continue;
        ++taps;
        const Value* px = &in.at(y, x, 0);
        const auto* w = p.weights.data() + k * tap_stride;
        if (dw) {
          for (int c = 0; c < cin; ++c) acc[c] += static_cast<Acc>(px[c]) * static_cast<Acc>(w[c]);
        } else {
          for (int ci = 0; ci < cin; ++ci) {
            const Acc xv = static_cast<Acc>(px[ci]);
            const auto* row = w + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) acc[co] += xv * static_cast<Acc>(row[co]);
          }
        }
      }
      for (int co = 0; co < cout; ++co) out.at(oy, ox, co) = M::finish(acc[co], spec, p);
    }
  }
  record<M>(counter, taps * tap_stride, taps);
  return out;
}

}  // namespace

Geometry strided_geometry(const Geometry& in, int out_channels) {
  return {(in.height + 1) / 2, (in.width + 1) / 2, out_channels};
}

template <typename T>
KernelOffsets kernel_offsets(const SparseTensor<T>& input, Coord site) {
  if (!input.active(site.y, site.x))
    throw ContractError("kernel offsets requested for inactive site (" + std::to_string(site.y) + "," +
                        std::to_string(site.x) + ")");
  KernelOffsets out;
  for (int k = 0; k < 9; ++k)
    if (input.active(site.y + k / 3 - 1, site.x + k % 3 - 1)) out.push_back(static_cast<std::uint8_t>(k));
  return out;
}

template KernelOffsets kernel_offsets(const SparseTensor<std::int8_t>&, Coord);
template KernelOffsets kernel_offsets(const SparseTensor<std::int32_t>&, Coord);
template KernelOffsets kernel_offsets(const SparseTensor<float>&, Coord);

SparseTensor<float> conv1x1(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                            OpCounter* counter) {
  return conv1x1_impl<FloatMath>(in, spec, p, counter);
}
SparseTensor<std::int8_t> conv1x1(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                  const QuantLayerParams& p, OpCounter* counter) {
  return conv1x1_impl<QuantMath>(in, spec, p, counter);
}

SparseTensor<float> conv1x1_residual(const SparseTensor<float>& in, const SparseTensor<float>& skip,
                                     const LayerSpec& spec, const FloatLayerParams& p, OpCounter* counter) {
  return residual_impl<FloatMath>(in, skip, spec, p, counter,
                                  [&](float acc, float s) { return FloatMath::finish(acc + s, spec, p); });
}

SparseTensor<std::int8_t> conv1x1_residual(const SparseTensor<std::int8_t>& in, const SparseTensor<std::int8_t>& skip,
                                           const LayerSpec& spec, const QuantLayerParams& p, const QuantParams& skip_q,
                                           OpCounter* counter) {
  const std::int32_t lo = spec.activation == Activation::relu6 ? 0 : kQuantMin;
  const std::int32_t hi = spec.activation == Activation::relu6 ? p.act_max : kQuantMax;
  return residual_impl<QuantMath>(in, skip, spec, p, counter, [&](std::int32_t acc, std::int8_t s) {
    return static_cast<std::int8_t>(saturate(rescale(acc, p.q) + rescale(s, skip_q), lo, hi));
  });
}

SparseTensor<float> subm_conv3x3(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                                 OpCounter* counter) {
  check_kind(spec, {LayerKind::subm_conv3x3}, "subm_conv3x3");
  return subm3x3_impl<FloatMath>(in, spec, p, counter);
}
SparseTensor<std::int8_t> subm_conv3x3(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                       const QuantLayerParams& p, OpCounter* counter) {
  check_kind(spec, {LayerKind::subm_conv3x3}, "subm_conv3x3");
  return subm3x3_impl<QuantMath>(in, spec, p, counter);
}

SparseTensor<float> subm_dw3x3(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                               OpCounter* counter) {
  check_kind(spec, {LayerKind::subm_dw3x3}, "subm_dw3x3");
  return subm3x3_impl<FloatMath>(in, spec, p, counter);
}
SparseTensor<std::int8_t> subm_dw3x3(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                     const QuantLayerParams& p, OpCounter* counter) {
  check_kind(spec, {LayerKind::subm_dw3x3}, "subm_dw3x3");
  return subm3x3_impl<QuantMath>(in, spec, p, counter);
}

SparseTensor<float> strided_conv3x3(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                                    OpCounter* counter) {
  return strided_impl<FloatMath>(in, spec, p, counter);
}
SparseTensor<std::int8_t> strided_conv3x3(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                          const QuantLayerParams& p, OpCounter* counter) {
  return strided_impl<QuantMath>(in, spec, p, counter);
}

template <typename T>
SparseTensor<T> pool2x2(const SparseTensor<T>& in, PoolMode mode, OpCounter* counter) {
  const Geometry& ig = in.geometry();
  const Geometry og = strided_geometry(ig, ig.channels);
  const auto grid = site_grid(in);
  const auto out_sites = strided_sites(in, og, 0, 1);
  typename SparseTensor<T>::Builder b(og, out_sites.size());
  std::uint64_t offsets = 0;
  std::vector<double> fsum(ig.channels);
  std::vector<std::int64_t> isum(ig.channels);
  for (const Coord o : out_sites) {
    auto out = b.push(o);
    int n = 0;
    std::fill(fsum.begin(), fsum.end(), 0.0);
    std::fill(isum.begin(), isum.end(), 0);
    for (int y = 2 * o.y; y < std::min(2 * o.y + 2, ig.height); ++y) {
      for (int x = 2 * o.x; x < std::min(2 * o.x + 2, ig.width); ++x) {
        const std::int32_t j = grid[static_cast<std::size_t>(y) * ig.width + x];
        if (j < 0) continue;
        const auto f = in.feature(static_cast<std::size_t>(j));
        for (int c = 0; c < ig.channels; ++c) {
          if (mode == PoolMode::max) {
            out[c] = n == 0 ? f[c] : std::max(out[c], f[c]);
          } else if constexpr (std::is_floating_point_v<T>) {
            fsum[c] += f[c];
          } else {
            isum[c] += f[c];
          }
        }
        ++n;
      }
    }
    offsets += static_cast<std::uint64_t>(n);
    if (mode == PoolMode::avg) {
      for (int c = 0; c < ig.channels; ++c) {
        if constexpr (std::is_floating_point_v<T>)
          out[c] = static_cast<T>(fsum[c] / n);
        else
          out[c] = static_cast<T>(div_round_away(isum[c], n));
      }
    }
  }
  if (counter != nullptr) {
    counter->offsets += offsets;
    if constexpr (std::is_floating_point_v<T>)
      if (mode == PoolMode::avg) counter->float_ops += offsets * ig.channels;
  }
  return std::move(b).build();
}

template SparseTensor<float> pool2x2(const SparseTensor<float>&, PoolMode, OpCounter*);
template SparseTensor<std::int8_t> pool2x2(const SparseTensor<std::int8_t>&, PoolMode, OpCounter*);

std::vector<float> global_avg_pool(const SparseTensor<float>& in, OpCounter* counter) {
  const int ch = in.geometry().channels;
  std::vector<double> sum(ch, 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto f = in.feature(i);
    for (int c = 0; c < ch; ++c) sum[c] += f[c];
  }
  std::vector<float> out(ch, 0.0f);
  if (!in.empty())
    for (int c = 0; c < ch; ++c) out[c] = static_cast<float>(sum[c] / static_cast<double>(in.size()));
  if (counter != nullptr) {
    counter->offsets += in.size();
    counter->float_ops += static_cast<std::uint64_t>(in.size()) * ch;
  }
  return out;
}

std::vector<std::int8_t> global_avg_pool(const SparseTensor<std::int8_t>& in, OpCounter* counter) {
  const int ch = in.geometry().channels;
  std::vector<std::int64_t> sum(ch, 0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto f = in.feature(i);
    for (int c = 0; c < ch; ++c) sum[c] += f[c];
  }
  std::vector<std::int8_t> out(ch, 0);
  if (!in.empty()) {
    const auto n = static_cast<std::int64_t>(in.size());
    for (int c = 0; c < ch; ++c) out[c] = static_cast<std::int8_t>(div_round_away(sum[c], n));
  }
  if (counter != nullptr) counter->offsets += in.size();
  return out;
}

SparseTensor<float> apply_layer(const SparseTensor<float>& in, const LayerSpec& spec, const FloatLayerParams& p,
                                OpCounter* counter) {
  switch (spec.kind) {
    case LayerKind::conv1x1: return conv1x1(in, spec, p, counter);
    case LayerKind::subm_conv3x3: return subm_conv3x3(in, spec, p, counter);
    case LayerKind::subm_dw3x3: return subm_dw3x3(in, spec, p, counter);
    case LayerKind::strided_conv3x3:
    case LayerKind::strided_dw3x3: return strided_conv3x3(in, spec, p, counter);
    case LayerKind::max_pool2x2: return pool2x2(in, PoolMode::max, counter);
    case LayerKind::avg_pool2x2: return pool2x2(in, PoolMode::avg, counter);
    default: throw ArgumentError("apply_layer cannot run layer '" + spec.name + "'");
  }
}

SparseTensor<std::int8_t> apply_layer(const SparseTensor<std::int8_t>& in, const LayerSpec& spec,
                                      const QuantLayerParams& p, OpCounter* counter) {
  switch (spec.kind) {
    case LayerKind::conv1x1: return conv1x1(in, spec, p, counter);
    case LayerKind::subm_conv3x3: return subm_conv3x3(in, spec, p, counter);
    case LayerKind::subm_dw3x3: return subm_dw3x3(in, spec, p, counter);
    case LayerKind::strided_conv3x3:
    case LayerKind::strided_dw3x3: return strided_conv3x3(in, spec, p, counter);
    case LayerKind::max_pool2x2: return pool2x2(in, PoolMode::max, counter);
    case LayerKind::avg_pool2x2: return pool2x2(in, PoolMode::avg, counter);
    default: throw ArgumentError("apply_layer cannot run layer '" + spec.name + "'");
  }
}

DenseTensor<float> dense_oracle(const LayerSpec& spec, const DenseTensor<float>& in, const FloatLayerParams& p,
                                OpCounter* counter) {
  return dense_impl<FloatMath>(spec, in, p, counter);
}

DenseTensor<std::int8_t> dense_oracle(const LayerSpec& spec, const DenseTensor<std::int8_t>& in,
                                      const QuantLayerParams& p, OpCounter* counter) {
  return dense_impl<QuantMath>(spec, in, p, counter);
}

DenseTensor<float> dense_residual_project(const LayerSpec& spec, const DenseTensor<float>& in,
                                          const DenseTensor<float>& skip, const FloatLayerParams& p,
                                          OpCounter* counter) {
  check_kind(spec, {LayerKind::conv1x1}, "dense_residual_project");
  if (spec.activation != Activation::none)
    throw ArgumentError("layer '" + spec.name + "': residual projection must be linear");
  auto out = dense_impl<FloatMath>(spec, in, p, counter);
  if (skip.geometry != out.geometry) throw ArgumentError("layer '" + spec.name + "': residual shape mismatch");
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += skip.data[i];
  if (counter != nullptr) counter->float_ops += out.data.size();
  return out;
}

DenseTensor<std::int8_t> dense_residual_project(const LayerSpec& spec, const DenseTensor<std::int8_t>& in,
                                                const DenseTensor<std::int8_t>& skip, const QuantLayerParams& p,
                                                const QuantParams& skip_q, OpCounter* counter) {
  check_kind(spec, {LayerKind::conv1x1}, "dense_residual_project");
  check_params(spec, p, in.geometry.channels);
  const Geometry og{in.geometry.height, in.geometry.width, spec.out_channels};
  if (skip.geometry != og) throw ArgumentError("layer '" + spec.name + "': residual shape mismatch");
  const std::int32_t lo = spec.activation == Activation::relu6 ? 0 : kQuantMin;
  const std::int32_t hi = spec.activation == Activation::relu6 ? p.act_max : kQuantMax;
  DenseTensor<std::int8_t> out(og);
  const int cin = spec.in_channels;
  const int cout = spec.out_channels;
  std::vector<std::int32_t> acc(cout);
  for (int y = 0; y < og.height; ++y)
    for (int x = 0; x < og.width; ++x) {
      for (int co = 0; co < cout; ++co) acc[co] = p.bias[co];
      const std::int8_t* px = &in.at(y, x, 0);
      for (int ci = 0; ci < cin; ++ci)
        for (int co = 0; co < cout; ++co)
          acc[co] += static_cast<std::int32_t>(px[ci]) * p.weights[static_cast<std::size_t>(ci) * cout + co];
      for (int co = 0; co < cout; ++co)
        out.at(y, x, co) =
            static_cast<std::int8_t>(saturate(rescale(acc[co], p.q) + rescale(skip.at(y, x, co), skip_q), lo, hi));
    }
  record<QuantMath>(counter, og.plane() * cin * cout, og.plane());
  return out;
}

std::vector<std::uint8_t> propagate_mask(const LayerSpec& spec, const std::vector<std::uint8_t>& mask, int height,
                                         int width) {
  if (!is_strided(spec.kind)) return mask;
  const int lo = is_3x3(spec.kind) ? -1 : 0;
  const int hi = 1;
  const int oh = (height + 1) / 2;
  const int ow = (width + 1) / 2;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(oh) * ow, 0);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      std::uint8_t any = 0;
      for (int y = std::max(0, 2 * oy + lo); y <= std::min(height - 1, 2 * oy + hi); ++y)
        for (int x = std::max(0, 2 * ox + lo); x <= std::min(width - 1, 2 * ox + hi); ++x)
          any |= mask[static_cast<std::size_t>(y) * width + x];
      out[static_cast<std::size_t>(oy) * ow + ox] = any;
    }
  return out;
}

}  // namespace see

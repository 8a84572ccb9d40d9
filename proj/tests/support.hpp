#pragma once

// Generators and brute-force reference implementations shared by the test binaries. The
// references deliberately avoid the library's kernels: they loop over every pixel and tap
// in wide arithmetic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "see/model.hpp"
#include "see/rng.hpp"
#include "see/scnn_engine.hpp"
#include "see/sparse_tensor.hpp"

namespace see::testing {

inline int rand_int(Rng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

template <typename T, typename Gen>
SparseTensor<T> random_sparse(Rng& rng, Geometry g, double density, Gen gen) {
  typename SparseTensor<T>::Builder b(g);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x)
      if (uniform01(rng) < density) {
        auto f = b.push({y, x});
        for (auto& v : f) v = gen();
      }
  return std::move(b).build();
}

inline SparseTensor<float> random_float_sparse(Rng& rng, Geometry g, double density) {
  return random_sparse<float>(rng, g, density, [&] { return static_cast<float>(uniform(rng, -1.0, 1.0)); });
}

inline SparseTensor<std::int8_t> random_int8_sparse(Rng& rng, Geometry g, double density) {
  return random_sparse<std::int8_t>(rng, g, density, [&] { return static_cast<std::int8_t>(rand_int(rng, -128, 127)); });
}

inline SparseTensor<std::int32_t> random_counts(Rng& rng, Geometry g, double density, int max_count = 6) {
  return random_sparse<std::int32_t>(rng, g, density, [&] { return rand_int(rng, 0, max_count); });
}

inline FloatLayerParams random_float_params(Rng& rng, const LayerSpec& l) {
  FloatLayerParams p;
  for (std::size_t i = 0; i < l.weight_count(); ++i) p.weights.push_back(static_cast<float>(uniform(rng, -0.5, 0.5)));
  for (std::size_t i = 0; i < l.bias_count(); ++i) p.bias.push_back(static_cast<float>(uniform(rng, -0.2, 0.2)));
  return p;
}

inline QuantParams random_dyadic(Rng& rng) {
  QuantParams q;
  q.shift = static_cast<std::uint8_t>(rand_int(rng, 8, 31));
  q.multiplier = static_cast<std::uint32_t>(1 + uniform_index(rng, (1ull << 31) - 1));
  return q;
}

inline QuantLayerParams random_quant_params(Rng& rng, const LayerSpec& l) {
  QuantLayerParams p;
  for (std::size_t i = 0; i < l.weight_count(); ++i) p.weights.push_back(static_cast<std::int8_t>(rand_int(rng, -127, 127)));
  for (std::size_t i = 0; i < l.bias_count(); ++i) p.bias.push_back(rand_int(rng, -3000, 3000));
  // scale so typical accumulators land inside the int8 range
  p.q.shift = 31;
  p.q.multiplier = static_cast<std::uint32_t>(uniform(rng, 2e-4, 5e-3) * 2147483648.0);
  p.act_max = rand_int(rng, 1, 127);
  return p;
}

inline LayerSpec make_layer(LayerKind kind, int cin, int cout, Activation act = Activation::none) {
  LayerSpec l;
  l.name = "t";
  l.kind = kind;
  l.in_channels = cin;
  l.out_channels = is_depthwise(kind) ? cin : cout;
  l.stride = is_strided(kind) ? 2 : 1;
  l.activation = act;
  return l;
}

/// Exact round-half-away-from-zero of acc * m / 2^n.
inline std::int64_t exact_round_dyadic(std::int64_t acc, std::uint32_t m, int n) {
  const __int128 v = static_cast<__int128>(acc) * m;
  const __int128 mag = v < 0 ? -v : v;
  const __int128 one = static_cast<__int128>(1) << n;
  __int128 q = mag / one;
  const __int128 rem = mag - q * one;
  if (2 * rem >= one) ++q;
  return static_cast<std::int64_t>(v < 0 ? -q : q);
}

/// Pre-activation output of a layer at every output pixel, in wide arithmetic.
/// `tap(y, x, c)` returns the input value (0 outside the grid or at inactive pixels).
template <typename Acc, typename In, typename W, typename B>
std::vector<Acc> brute_conv(const LayerSpec& l, const DenseTensor<In>& in, const std::vector<W>& w,
                            const std::vector<B>& bias, int& oh, int& ow) {
  const int h = in.geometry.height, wd = in.geometry.width;
  const int cin = l.in_channels, cout = l.out_channels;
  const int s = is_strided(l.kind) ? 2 : 1;
  oh = s == 2 ? (h + 1) / 2 : h;
  ow = s == 2 ? (wd + 1) / 2 : wd;
  std::vector<Acc> out(static_cast<std::size_t>(oh) * ow * cout);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int co = 0; co < cout; ++co) {
        Acc acc = static_cast<Acc>(bias[co]);
        if (l.kind == LayerKind::conv1x1) {
          for (int ci = 0; ci < cin; ++ci)
            acc += static_cast<Acc>(in.at(oy, ox, ci)) * static_cast<Acc>(w[static_cast<std::size_t>(ci) * cout + co]);
        } else {
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int y = s * oy + ky - 1, x = s * ox + kx - 1;
              if (y < 0 || x < 0 || y >= h || x >= wd) continue;
              const int k = ky * 3 + kx;
              if (is_depthwise(l.kind)) {
                acc += static_cast<Acc>(in.at(y, x, co)) * static_cast<Acc>(w[static_cast<std::size_t>(k) * cin + co]);
              } else {
                for (int ci = 0; ci < cin; ++ci)
                  acc += static_cast<Acc>(in.at(y, x, ci)) *
                         static_cast<Acc>(w[(static_cast<std::size_t>(k) * cin + ci) * cout + co]);
              }
            }
        }
        out[(static_cast<std::size_t>(oy) * ow + ox) * cout + co] = acc;
      }
  return out;
}

/// Active outputs of a stride-2 3x3 window by enumerating every input site's footprint.
inline std::vector<Coord> receptive_union(std::span<const Coord> in_sites, int h, int w) {
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(oh) * ow, 0);
  for (const Coord c : in_sites)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        if (std::abs(c.y - 2 * oy) <= 1 && std::abs(c.x - 2 * ox) <= 1) hit[static_cast<std::size_t>(oy) * ow + ox] = 1;
  std::vector<Coord> out;
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      if (hit[static_cast<std::size_t>(oy) * ow + ox]) out.push_back({oy, ox});
  return out;
}

/// Direct GRU gate equations in double precision.
inline std::vector<double> gru_reference(const std::vector<float>& x, const std::vector<float>& h, const GruWeights& w) {
  const std::size_t d = x.size(), hd = h.size();
  auto dot = [](const std::vector<float>& m, std::size_t row, const std::vector<float>& v) {
    double s = 0;
    for (std::size_t j = 0; j < v.size(); ++j) s += static_cast<double>(m[row * v.size() + j]) * v[j];
    return s;
  };
  (void)d;
  std::vector<double> out(hd);
  for (std::size_t i = 0; i < hd; ++i) {
    const double z = 1.0 / (1.0 + std::exp(-(dot(w.w_z, i, x) + dot(w.u_z, i, h) + w.b_z[i])));
    const double r = 1.0 / (1.0 + std::exp(-(dot(w.w_r, i, x) + dot(w.u_r, i, h) + w.b_r[i])));
    const double c = std::tanh(dot(w.w_h, i, x) + r * dot(w.u_h, i, h) + w.b_h[i]);
    out[i] = (1.0 - z) * h[i] + z * c;
  }
  return out;
}

inline GruWeights random_gru(Rng& rng, int d, int hd, double scale) {
  GruWeights w = GruWeights::zeros(d, hd);
  for (auto* v : {&w.w_z, &w.w_r, &w.w_h, &w.u_z, &w.u_r, &w.u_h, &w.b_z, &w.b_r, &w.b_h})
    for (auto& e : *v) e = static_cast<float>(uniform(rng, -scale, scale));
  return w;
}

/// MobileNetV2-style stack; `width` scales every channel count (rounded to multiples of 8).
inline ModelSpec mobilenet_like(double width, int height = 64, int wd = 64) {
  auto ch = [&](int c) { return std::max(8, static_cast<int>(std::lround(c * width / 8.0)) * 8); };
  ModelSpec s;
  s.input = {height, wd, 3, PolarityMode::merged};
  s.stem_kind = LayerKind::strided_conv3x3;
  s.stem_channels = ch(32);
  const int table[][4] = {{1, 16, 1, 1}, {6, 24, 2, 2}, {6, 32, 3, 2}, {6, 64, 4, 2}, {6, 96, 3, 1}, {6, 160, 3, 2}, {6, 320, 1, 1}};
  int in = s.stem_channels;
  for (const auto& r : table)
    for (int i = 0; i < r[2]; ++i) {
      const int out = ch(r[1]);
      s.blocks.push_back({r[0], in, out, i == 0 ? r[3] : 1});
      in = out;
    }
  s.gru_hidden = 64;
  return s;
}

/// Width multiplier giving the parameter count closest to `target`.
inline ModelSpec mobilenet_with_params(double target) {
  ModelSpec best = mobilenet_like(0.1);
  double best_err = INFINITY;
  for (double wm = 0.1; wm <= 2.0; wm += 0.005) {
    ModelSpec s = mobilenet_like(wm);
    const double err = std::abs(static_cast<double>(s.parameter_count()) - target);
    if (err < best_err) {
      best_err = err;
      best = s;
    }
  }
  return best;
}

}  // namespace see::testing

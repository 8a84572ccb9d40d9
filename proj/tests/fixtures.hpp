#pragma once

// Small models and inputs shared by the unit tests.

#include "see/model.hpp"
#include "support.hpp"

namespace see::testing {

inline ModelSpec small_spec(LayerKind stem = LayerKind::subm_conv3x3, StemPool pool = StemPool::none) {
  ModelSpec s;
  s.input = {16, 16, 2, PolarityMode::merged};
  s.stem_kind = stem;
  s.stem_channels = 8;
  s.stem_pool = pool;
  s.blocks = {{2, 8, 8, 1}, {1, 8, 16, 2}, {2, 16, 16, 1}};
  s.gru_hidden = 8;
  return s;
}

inline std::vector<SparseTensor<std::int32_t>> random_inputs(Rng& rng, const ModelSpec& s, int n, double density = 0.15) {
  std::vector<SparseTensor<std::int32_t>> out;
  for (int i = 0; i < n; ++i)
    out.push_back(random_counts(rng, {s.input.height, s.input.width, s.input.channels()}, density, 8));
  return out;
}

inline Model float_model(const ModelSpec& s, std::uint64_t seed) {
  return {random_backbone(s, seed), random_head(s.embedding_size(), s.gru_hidden, seed + 1)};
}

inline Model int8_model(const ModelSpec& s, std::uint64_t seed) {
  Rng rng(seed);
  const auto calib = random_inputs(rng, s, 4);
  return {quantize_model(random_backbone(s, seed), calib), random_head(s.embedding_size(), s.gru_hidden, seed + 1)};
}

}  // namespace see::testing

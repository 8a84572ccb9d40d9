#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "see/dataflow_sim.hpp"
#include "see/model_spec.hpp"

namespace see {

/// Supernet description. Per-block lists are indexed by block position; a block beyond the
/// end of a list reuses the last entry.
struct SearchSpace {
  VoxelGridConfig input;
  LayerKind stem_kind = LayerKind::subm_conv3x3;
  std::vector<int> stem_channels{16};
  StemPool stem_pool = StemPool::none;
  int min_blocks = 1;
  int max_blocks = 5;
  std::vector<std::vector<int>> channels{{16, 24, 32}};
  std::vector<std::vector<int>> expansions{{1, 4, 6}};
  std::vector<int> strides{1};
  std::vector<int> gru_hidden{16, 32, 64};
  int granularity = 8;

  const std::vector<int>& channel_choices(int block) const;
  const std::vector<int>& expansion_choices(int block) const;
  int stride_for(int block) const;
  /// Throws ConfigError on an empty list, a bad range, or a channel not a multiple of granularity.
  void validate() const;
};

nlohmann::json to_json(const SearchSpace& space);
SearchSpace search_space_from_json(const nlohmann::json& j);

struct Candidate {
  ModelSpec spec;
  std::string hash;
  double latency_s = 0.0;
  std::uint64_t weight_bytes = 0;
  std::optional<double> accuracy;
};

/// Uniform draw over every axis, deterministic per seed; block i+1 takes block i's output width.
ModelSpec sample_subnet(const SearchSpace& space, std::uint64_t seed);

struct Feasibility {
  bool ok = false;
  Candidate candidate;
};

/// ok iff weight_footprint <= budget and model latency <= cap.
Feasibility feasible(const ModelSpec& spec, const HwConfig& hw, double latency_cap_s, const SparsityProfile& profile);

/// Non-dominated set under (latency down, accuracy up), sorted by latency; exact ties all kept.
/// Throws ArgumentError naming the first candidate without an accuracy.
std::vector<Candidate> pareto_front(const std::vector<Candidate>& cands);

using ProfileFn = std::function<SparsityProfile(const ModelSpec&)>;

/// Samples n subnets (seed derived per index), drops repeated hashes, and returns the feasible
/// ones in first-sample order. `threads` = 0 reads SEE_THREADS, falling back to the core count.
std::vector<Candidate> search_run(const SearchSpace& space, const HwConfig& hw, double latency_cap_s,
                                  const ProfileFn& profile, std::size_t n_samples, std::uint64_t seed,
                                  unsigned threads = 0);

/// Worker count from SEE_THREADS (at least 1).
unsigned worker_count();

/// Stand-in for trained accuracy: saturating in parameter count plus a small hash-seeded jitter.
double synthetic_accuracy(const ModelSpec& spec, std::uint64_t seed);

/// Header "spec_hash,latency_s,weight_bytes,accuracy"; accuracy left blank when unknown.
void write_candidates_csv(std::ostream& os, const std::vector<Candidate>& cands);
/// Reads "spec_hash,accuracy" rows (extra columns ignored when the header names them).
std::vector<std::pair<std::string, double>> read_accuracy_csv(std::istream& is);
/// Sets accuracy on candidates whose hash appears in `table`.
void join_accuracy(std::vector<Candidate>& cands, const std::vector<std::pair<std::string, double>>& table);

}  // namespace see

#include "see/arch_search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "see/errors.hpp"
#include "see/rng.hpp"

namespace see {

namespace {

template <typename T>
const T& pick(const std::vector<T>& v, int i) {
  return v[std::min(static_cast<std::size_t>(i), v.size() - 1)];
}

std::vector<std::vector<int>> nested_choices(const nlohmann::json& j, const char* key) {
  // accepts one shared list or one list per block
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(key) + " must be a nonempty array");
  if (j.front().is_array()) return j.get<std::vector<std::vector<int>>>();
  return {j.get<std::vector<int>>()};
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

const std::vector<int>& SearchSpace::channel_choices(int block) const { return pick(channels, block); }
const std::vector<int>& SearchSpace::expansion_choices(int block) const { return pick(expansions, block); }
int SearchSpace::stride_for(int block) const { return pick(strides, block); }

void SearchSpace::validate() const {
  try {
    input.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("search space input: ") + e.what());
  }
  if (stem_kind != LayerKind::subm_conv3x3 && stem_kind != LayerKind::strided_conv3x3)
    throw ConfigError("stem kind must be subm_conv3x3 or strided_conv3x3");
  if (granularity <= 0) throw ConfigError("granularity must be positive");
  if (min_blocks < 0 || max_blocks < min_blocks) throw ConfigError("block count range is empty");
  auto check_channels = [&](const std::vector<int>& v, const std::string& what) {
    if (v.empty()) throw ConfigError(what + " has no choices");
    for (const int c : v)
      if (c <= 0 || c % granularity != 0)
        throw ConfigError(what + ": " + std::to_string(c) + " is not a positive multiple of " +
                          std::to_string(granularity));
  };
  check_channels(stem_channels, "stem channels");
  if (channels.empty() || expansions.empty() || strides.empty() || gru_hidden.empty())
    throw ConfigError("search space lists must be nonempty");
  for (std::size_t i = 0; i < channels.size(); ++i) check_channels(channels[i], "block " + std::to_string(i) + " channels");
  for (std::size_t i = 0; i < expansions.size(); ++i) {
    if (expansions[i].empty()) throw ConfigError("block " + std::to_string(i) + " expansions has no choices");
    for (const int e : expansions[i])
      if (e < 1) throw ConfigError("expansion ratios must be >= 1");
  }
  for (const int s : strides)
    if (s != 1 && s != 2) throw ConfigError("strides must be 1 or 2");
  for (const int h : gru_hidden)
    if (h <= 0) throw ConfigError("GRU hidden sizes must be positive");
}

nlohmann::json to_json(const SearchSpace& s) {
  return {{"input", to_json(s.input)},
          {"stem", {{"kind", to_string(s.stem_kind)}, {"channels", s.stem_channels}, {"pool", to_string(s.stem_pool)}}},
          {"blocks", {{"min", s.min_blocks}, {"max", s.max_blocks}}},
          {"channels", s.channels},
          {"expansions", s.expansions},
          {"strides", s.strides},
          {"gru_hidden", s.gru_hidden},
          {"granularity", s.granularity}};
}

SearchSpace search_space_from_json(const nlohmann::json& j) {
  SearchSpace s;
  try {
    if (!j.is_object()) throw ConfigError("search space must be a JSON object");
    static const std::set<std::string> known{"input",      "stem",    "blocks",     "channels",
                                             "expansions", "strides", "gru_hidden", "granularity"};
    for (const auto& [key, _] : j.items())
      if (!known.contains(key)) throw ConfigError("search space: unknown key '" + key + "'");
    if (j.contains("input")) s.input = voxel_config_from_json(j.at("input"));
    if (j.contains("stem")) {
      const auto& st = j.at("stem");
      if (st.contains("kind")) s.stem_kind = layer_kind_from_string(st.at("kind").get<std::string>());
      if (st.contains("channels"))
        s.stem_channels = st.at("channels").is_array() ? st.at("channels").get<std::vector<int>>()
                                                       : std::vector<int>{st.at("channels").get<int>()};
      if (st.contains("pool")) s.stem_pool = stem_pool_from_string(st.at("pool").get<std::string>());
    }
    if (j.contains("blocks")) {
      s.min_blocks = j.at("blocks").at("min").get<int>();
      s.max_blocks = j.at("blocks").at("max").get<int>();
    }
    if (j.contains("channels")) s.channels = nested_choices(j.at("channels"), "channels");
    if (j.contains("expansions")) s.expansions = nested_choices(j.at("expansions"), "expansions");
    if (j.contains("strides")) s.strides = j.at("strides").get<std::vector<int>>();
    if (j.contains("gru_hidden")) s.gru_hidden = j.at("gru_hidden").get<std::vector<int>>();
    if (j.contains("granularity")) s.granularity = j.at("granularity").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  } catch (const LoadError& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  s.validate();
  return s;
}

ModelSpec sample_subnet(const SearchSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  auto choose = [&](const std::vector<int>& v) { return v[uniform_index(rng, v.size())]; };
  ModelSpec spec;
  spec.input = space.input;
  spec.stem_kind = space.stem_kind;
  spec.stem_pool = space.stem_pool;
  spec.stem_channels = choose(space.stem_channels);
  const auto span = static_cast<std::uint64_t>(space.max_blocks - space.min_blocks + 1);
  const int n = space.min_blocks + static_cast<int>(uniform_index(rng, span));
  int in = spec.stem_channels;
  for (int i = 0; i < n; ++i) {
    BlockSpec b;
    b.in_channels = in;
    b.out_channels = choose(space.channel_choices(i));
    b.expansion = choose(space.expansion_choices(i));
    b.stride = space.stride_for(i);
    spec.blocks.push_back(b);
    in = b.out_channels;
  }
  spec.gru_hidden = choose(space.gru_hidden);
  return spec;
}

Feasibility feasible(const ModelSpec& spec, const HwConfig& hw, double latency_cap_s, const SparsityProfile& profile) {
  const LatencyReport r = model_latency(spec, profile, hw);
  Feasibility f;
  f.candidate = {spec, spec.hash_hex(), r.total_latency_s, r.weight_bytes, std::nullopt};
  f.ok = r.weight_bytes <= hw.weight_budget_bytes && r.total_latency_s <= latency_cap_s;
  return f;
}

std::vector<Candidate> pareto_front(const std::vector<Candidate>& cands) {
  for (const Candidate& c : cands) {
    if (!c.accuracy) throw ArgumentError("candidate " + c.hash + " has no accuracy");
    if (!std::isfinite(*c.accuracy) || !std::isfinite(c.latency_s))
      throw ArgumentError("candidate " + c.hash + " has a non-finite latency or accuracy");
  }
  std::vector<std::size_t> order(cands.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cands[a].latency_s < cands[b].latency_s; });

  // Sweep groups of equal latency. A member survives iff it has the group's best accuracy and
  // beats everything strictly faster.
  std::vector<Candidate> front;
  double best_faster = -INFINITY;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    double group_best = -INFINITY;
    while (end < order.size() && cands[order[end]].latency_s == cands[order[g]].latency_s)
      group_best = std::max(group_best, *cands[order[end++]].accuracy);
    if (group_best > best_faster)
      for (std::size_t i = g; i < end; ++i)
        if (*cands[order[i]].accuracy == group_best) front.push_back(cands[order[i]]);
    best_faster = std::max(best_faster, group_best);
    g = end;
  }
  return front;
}

unsigned worker_count() {
  if (const char* env = std::getenv("SEE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<Candidate> search_run(const SearchSpace& space, const HwConfig& hw, double latency_cap_s,
                                  const ProfileFn& profile, std::size_t n_samples, std::uint64_t seed,
                                  unsigned threads) {
  space.validate();
  hw.validate();
  std::vector<ModelSpec> unique;
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < n_samples; ++i) {
    ModelSpec s = sample_subnet(space, derive_seed(seed, i));
    if (seen.insert(s.hash()).second) unique.push_back(std::move(s));
  }

  std::vector<Feasibility> results(unique.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i; (i = next++) < unique.size() && !failed;) {
      try {
        results[i] = feasible(unique[i], hw, latency_cap_s, profile(unique[i]));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(threads == 0 ? worker_count() : threads,
                                                             static_cast<unsigned>(std::max<std::size_t>(1, unique.size()))));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<Candidate> out;
  for (auto& r : results)
    if (r.ok) out.push_back(std::move(r.candidate));
  return out;
}

double synthetic_accuracy(const ModelSpec& spec, std::uint64_t seed) {
  const double params = static_cast<double>(spec.parameter_count());
  const double jitter = (static_cast<double>(splitmix64(spec.hash() ^ splitmix64(seed)) >> 11) * 0x1.0p-53 - 0.5) * 0.02;
  return std::clamp(0.5 + 0.45 * (1.0 - std::exp(-params / 2e5)) + jitter, 0.0, 1.0);
}

void write_candidates_csv(std::ostream& os, const std::vector<Candidate>& cands) {
  os << "spec_hash,latency_s,weight_bytes,accuracy\n";
  char buf[64];
  for (const Candidate& c : cands) {
    std::snprintf(buf, sizeof buf, "%.9e", c.latency_s);
    os << c.hash << ',' << buf << ',' << c.weight_bytes << ',';
    if (c.accuracy) {
      std::snprintf(buf, sizeof buf, "%.6f", *c.accuracy);
      os << buf;
    }
    os << '\n';
  }
}

std::vector<std::pair<std::string, double>> read_accuracy_csv(std::istream& is) {
  std::vector<std::pair<std::string, double>> out;
  std::string line;
  const std::size_t hash_col = 0;
  std::size_t acc_col = 1;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (line_no == 1 && !fields.empty() && fields[0] == "spec_hash") {
      const auto it = std::find(fields.begin(), fields.end(), "accuracy");
      if (it == fields.end()) throw ArgumentError("accuracy file header has no 'accuracy' column");
      acc_col = static_cast<std::size_t>(it - fields.begin());
      continue;
    }
    if (fields.size() <= std::max(hash_col, acc_col))
      throw ArgumentError("accuracy file line " + std::to_string(line_no) + ": missing columns");
    char* end = nullptr;
    const double acc = std::strtod(fields[acc_col].c_str(), &end);
    if (fields[acc_col].empty() || *end != '\0' || !(acc >= 0.0 && acc <= 1.0))
      throw ArgumentError("accuracy file line " + std::to_string(line_no) + ": accuracy must be a number in [0, 1]");
    out.emplace_back(fields[hash_col], acc);
  }
  return out;
}

void join_accuracy(std::vector<Candidate>& cands, const std::vector<std::pair<std::string, double>>& table) {
  std::unordered_map<std::string, double> by_hash(table.begin(), table.end());
  for (Candidate& c : cands)
    if (const auto it = by_hash.find(c.hash); it != by_hash.end()) c.accuracy = it->second;
}

}  // namespace see

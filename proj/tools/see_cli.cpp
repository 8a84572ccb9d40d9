// see: inference, benchmarking, architecture search and evaluation from the command line.
//
// Exit codes: 0 ok, 1 I/O failure, 2 invalid input (message names the layer or record).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "see/arch_search.hpp"
#include "see/dataflow_sim.hpp"
#include "see/errors.hpp"
#include "see/metrics.hpp"
#include "see/pipeline.hpp"
#include "see/weight_container.hpp"

namespace {

using namespace see;

struct InputArgs {
  std::string events;
  std::string weights;
  std::string format = "auto";
  int height = 0;  // 0: take the model input size
  int width = 0;
  std::uint64_t window_us = 10000;
  std::uint64_t t0 = 0;
  std::size_t clips = 0;  // 0: through the last event
};

void add_input_options(CLI::App* cmd, InputArgs& a) {
  cmd->add_option("events", a.events, "Event file (.csv text or native binary)")->required();
  cmd->add_option("weights", a.weights, "Weight container")->required();
  cmd->add_option("--format", a.format, "Event format")->check(CLI::IsMember({"auto", "csv", "native"}));
  cmd->add_option("--height", a.height, "Sensor height in pixels (default: model input)");
  cmd->add_option("--width", a.width, "Sensor width in pixels (default: model input)");
  cmd->add_option("--window-us", a.window_us, "Clip length in microseconds")->check(CLI::PositiveNumber);
  cmd->add_option("--t0", a.t0, "Start of the first clip");
  cmd->add_option("--clips", a.clips, "Number of clips (default: through the last event)");
}

struct Loaded {
  Model model;
  std::vector<SparseTensor<std::int32_t>> clips;
};

Loaded load_inputs(const InputArgs& a) {
  Loaded l{load_model(a.weights), {}};
  const ModelSpec& spec = l.model.spec();
  const SensorGeometry sensor{a.height > 0 ? a.height : spec.input.height, a.width > 0 ? a.width : spec.input.width};
  const EventFormat fmt = a.format == "auto"  ? format_for_path(a.events)
                          : a.format == "csv" ? EventFormat::csv
                                              : EventFormat::native_binary;
  const auto events = load_events(a.events, fmt, sensor);
  ClipOptions opts{a.window_us, a.t0, std::nullopt};
  if (a.clips > 0) opts.clip_count = a.clips;
  l.clips = make_clips(events, spec, sensor, opts);
  return l;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

nlohmann::json read_json(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ExecMode exec_mode(const std::string& s) { return s == "dense" ? ExecMode::dense : ExecMode::sparse; }

int cmd_run(const InputArgs& a, const std::string& mode, const std::string& out_path) {
  const Loaded l = load_inputs(a);
  const auto preds = run_sequence(l.model, l.clips, exec_mode(mode));
  if (out_path.empty() || out_path == "-") {
    write_points_csv(std::cout, preds);
  } else {
    auto out = open_out(out_path);
    write_points_csv(out, preds);
    if (!out) throw IoError("failed writing " + out_path);
  }
  return 0;
}

int cmd_bench(const InputArgs& a, const std::string& mode, int repeats) {
  const Loaded l = load_inputs(a);
  const ExecMode m = exec_mode(mode);
  std::vector<double> per_clip_ms;
  std::vector<PixelPoint> preds;
  for (int r = 0; r < repeats; ++r) {
    HeadState state = HeadState::zeros(l.model.head.gru.hidden_size);
    preds.clear();
    for (const auto& clip : l.clips) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto p = run_sequence(l.model, std::span(&clip, 1), state, m);
      per_clip_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      preds.push_back(p.front());
    }
  }
  std::uint64_t macs = 0;
  std::vector<LayerStats> stats;
  for (const auto& clip : l.clips) {
    embed(l.model, clip, m, &stats);
    for (const auto& s : stats) macs += s.ops.macs;
  }
  // cross-check against the other execution mode
  const auto other = run_sequence(l.model, l.clips, m == ExecMode::sparse ? ExecMode::dense : ExecMode::sparse);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    max_diff = std::max({max_diff, std::abs(preds[i].x - other[i].x), std::abs(preds[i].y - other[i].y)});

  double mean = 0.0, median = 0.0;
  if (!per_clip_ms.empty()) {
    for (const double v : per_clip_ms) mean += v;
    mean /= static_cast<double>(per_clip_ms.size());
    std::sort(per_clip_ms.begin(), per_clip_ms.end());
    const std::size_t n = per_clip_ms.size();
    median = n % 2 ? per_clip_ms[n / 2] : 0.5 * (per_clip_ms[n / 2 - 1] + per_clip_ms[n / 2]);
  }
  const double macs_per_clip = l.clips.empty() ? 0.0 : static_cast<double>(macs) / static_cast<double>(l.clips.size());
  std::printf("mode=%s clips=%zu repeats=%d mean_ms=%.6f median_ms=%.6f macs=%llu macs_per_clip=%.1f max_mode_diff_px=%.6f\n",
              mode.c_str(), l.clips.size(), repeats, mean, median, static_cast<unsigned long long>(macs), macs_per_clip,
              max_diff);
  return 0;
}

struct SearchArgs {
  std::string space;
  std::string hw;
  std::size_t n = 100;
  std::uint64_t seed = 0;
  double cap = std::numeric_limits<double>::infinity();
  double density = 0.05;
  std::string out = "-";
  std::string accuracy;
  std::string frontier;
  std::string specs;
  std::string synthetic;
};

int cmd_search(const SearchArgs& a) {
  const SearchSpace space = search_space_from_json(read_json(a.space));
  const HwConfig hw = a.hw.empty() ? HwConfig{} : hw_config_from_json(read_json(a.hw));
  const double density = a.density;
  auto cands = search_run(space, hw, a.cap, [density](const ModelSpec& s) { return analytic_profile(s, density); },
                          a.n, a.seed);
  if (!a.accuracy.empty()) {
    std::ifstream in(a.accuracy);
    if (!in) throw IoError("cannot open " + a.accuracy);
    join_accuracy(cands, read_accuracy_csv(in));
  }
  if (a.out == "-") {
    write_candidates_csv(std::cout, cands);
  } else {
    auto out = open_out(a.out);
    write_candidates_csv(out, cands);
  }
  if (!a.specs.empty()) {
    auto out = open_out(a.specs);
    for (const auto& c : cands) out << nlohmann::json{{"spec_hash", c.hash}, {"model", to_json(c.spec)}}.dump() << '\n';
  }
  if (!a.synthetic.empty()) {
    auto out = open_out(a.synthetic);
    out << "spec_hash,accuracy\n";
    char buf[32];
    for (const auto& c : cands) {
      std::snprintf(buf, sizeof buf, "%.6f", synthetic_accuracy(c.spec, a.seed));
      out << c.hash << ',' << buf << '\n';
    }
  }
  if (!a.frontier.empty()) {
    if (a.accuracy.empty()) throw ArgumentError("--frontier requires --accuracy");
    std::vector<Candidate> scored;
    for (const auto& c : cands)
      if (c.accuracy) scored.push_back(c);
    auto out = open_out(a.frontier);
    write_candidates_csv(out, pareto_front(scored));
  }
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::vector<double>& ks) {
  std::ifstream pf(pred_path), gf(gt_path);
  if (!pf) throw IoError("cannot open " + pred_path);
  if (!gf) throw IoError("cannot open " + gt_path);
  const auto pred = read_points_csv(pf);
  const auto gt = read_points_csv(gf);
  const auto samples = join_by_index(pred, gt);
  std::cout << metric_report(samples, ks) << '\n';
  return 0;
}

int cmd_sim(const std::string& weights, const std::string& spec_path, const std::string& hw_path, double density) {
  ModelSpec spec;
  if (!weights.empty())
    spec = load_model(weights).spec();
  else
    spec = model_spec_from_json(read_json(spec_path));
  const HwConfig hw = hw_path.empty() ? HwConfig{} : hw_config_from_json(read_json(hw_path));
  std::cout << report_to_json(spec, model_latency(spec, analytic_profile(spec, density), hw)).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse event-based eye tracking toolkit"};
  app.require_subcommand(1);

  InputArgs run_in;
  std::string run_mode = "sparse";
  std::string run_out = "-";
  auto* run = app.add_subcommand("run", "Predict one eye centre per clip");
  add_input_options(run, run_in);
  run->add_option("--mode", run_mode, "Execution path")->check(CLI::IsMember({"sparse", "dense"}));
  run->add_option("-o,--out", run_out, "Prediction CSV (default stdout)");

  InputArgs bench_in;
  std::string bench_mode = "sparse";
  int repeats = 5;
  auto* bench = app.add_subcommand("bench", "Time the backbone and head per clip");
  add_input_options(bench, bench_in);
  bench->add_option("--mode", bench_mode, "Execution path")->check(CLI::IsMember({"sparse", "dense"}));
  bench->add_option("--repeats", repeats, "Passes over the clip sequence")->check(CLI::PositiveNumber);

  SearchArgs sa;
  auto* search = app.add_subcommand("search", "Sample subnets and keep those under the latency and weight limits");
  search->add_option("--space", sa.space, "Search space JSON")->required();
  search->add_option("--hw", sa.hw, "Hardware config JSON (default built-in)");
  search->add_option("-n,--samples", sa.n, "Number of samples");
  search->add_option("--seed", sa.seed, "Random seed");
  search->add_option("--cap", sa.cap, "Latency cap in seconds");
  search->add_option("--density", sa.density, "Input occupancy assumed by the latency model")
      ->check(CLI::Range(0.0, 1.0));
  search->add_option("-o,--out", sa.out, "Candidate CSV (default stdout)");
  search->add_option("--accuracy", sa.accuracy, "CSV of spec_hash,accuracy to join");
  search->add_option("--frontier", sa.frontier, "Write the Pareto frontier here (needs --accuracy)");
  search->add_option("--specs", sa.specs, "Write one JSON model spec per candidate here");
  search->add_option("--synthetic-accuracy", sa.synthetic, "Write synthetic accuracies for the candidates here");

  std::string pred_path, gt_path;
  std::vector<double> ks{5, 10};
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("pred", pred_path, "Prediction CSV")->required();
  eval->add_option("gt", gt_path, "Ground-truth CSV")->required();
  eval->add_option("-k,--k", ks, "Pixel thresholds")->delimiter(',');

  std::string sim_weights, sim_spec, sim_hw;
  double sim_density = 0.05;
  auto* sim = app.add_subcommand("sim", "Print the accelerator latency report for a model");
  auto* w = sim->add_option("--weights", sim_weights, "Weight container");
  sim->add_option("--spec", sim_spec, "Model spec JSON")->excludes(w);
  sim->add_option("--hw", sim_hw, "Hardware config JSON");
  sim->add_option("--density", sim_density, "Input occupancy")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_in, run_mode, run_out);
    if (*bench) return cmd_bench(bench_in, bench_mode, repeats);
    if (*search) return cmd_search(sa);
    if (*eval) return cmd_eval(pred_path, gt_path, ks);
    if (*sim) {
      if (sim_weights.empty() && sim_spec.empty()) throw ArgumentError("sim needs --weights or --spec");
      return cmd_sim(sim_weights, sim_spec, sim_hw, sim_density);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

// Python bindings: event loading, inference, quantization helpers, the latency model, search
// and metrics. JSON-shaped values cross the boundary as Python dicts via the json module.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "see/arch_search.hpp"
#include "see/dataflow_sim.hpp"
#include "see/errors.hpp"
#include "see/metrics.hpp"
#include "see/pipeline.hpp"
#include "see/quantizer.hpp"
#include "see/weight_container.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

see::HwConfig hw_from(const py::object& o) { return o.is_none() ? see::HwConfig{} : see::hw_config_from_json(from_py(o)); }

using EventArray = py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>;

EventArray events_to_array(const std::vector<see::Event>& ev) {
  EventArray a({static_cast<py::ssize_t>(ev.size()), py::ssize_t{4}});
  auto r = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto k = static_cast<py::ssize_t>(i);
    r(k, 0) = ev[i].t;
    r(k, 1) = ev[i].x;
    r(k, 2) = ev[i].y;
    r(k, 3) = ev[i].p;
  }
  return a;
}

// Routes the array through the native decoder so validation matches file input.
std::vector<see::Event> events_from_array(const EventArray& a, see::SensorGeometry sensor) {
  if (a.ndim() != 2 || a.shape(1) != 4) throw see::ArgumentError("events must have shape (n, 4): t, x, y, p");
  auto r = a.unchecked<2>();
  std::vector<see::Event> ev(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    if (r(i, 1) > 0xffff || r(i, 2) > 0xffff || r(i, 3) > 0xff) throw see::ArgumentError("event field out of range");
    ev[static_cast<std::size_t>(i)] = {r(i, 0), static_cast<std::uint16_t>(r(i, 1)), static_cast<std::uint16_t>(r(i, 2)),
                                       static_cast<std::uint8_t>(r(i, 3))};
  }
  const auto bytes = see::encode_native(ev);
  return see::parse_events(std::span<const std::uint8_t>(bytes), see::EventFormat::native_binary, sensor);
}

see::ExecMode exec_mode(const std::string& s) {
  if (s == "sparse") return see::ExecMode::sparse;
  if (s == "dense") return see::ExecMode::dense;
  throw see::ArgumentError("mode must be 'sparse' or 'dense'");
}

std::vector<see::SparseTensor<std::int32_t>> clips_for(const see::Model& m, const EventArray& events, std::uint64_t window_us,
                                                       std::uint64_t t0, std::optional<std::size_t> clips) {
  const auto& spec = m.spec();
  const see::SensorGeometry sensor{spec.input.height, spec.input.width};
  return see::make_clips(events_from_array(events, sensor), spec, sensor, {window_us, t0, clips});
}

py::array_t<double> points_to_array(const std::vector<see::PixelPoint>& pts) {
  py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto r = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    r(static_cast<py::ssize_t>(i), 0) = pts[i].x;
    r(static_cast<py::ssize_t>(i), 1) = pts[i].y;
  }
  return a;
}

std::vector<see::LabeledPrediction> labeled(const py::array_t<double, py::array::c_style | py::array::forcecast>& gt,
                                            const py::array_t<double, py::array::c_style | py::array::forcecast>& pred) {
  if (gt.ndim() != 2 || gt.shape(1) != 2 || pred.ndim() != 2 || pred.shape(1) != 2 || gt.shape(0) != pred.shape(0))
    throw see::ArgumentError("gt and pred must both have shape (n, 2)");
  auto g = gt.unchecked<2>();
  auto p = pred.unchecked<2>();
  std::vector<see::LabeledPrediction> out;
  for (py::ssize_t i = 0; i < gt.shape(0); ++i) out.push_back({{g(i, 0), g(i, 1)}, {p(i, 0), p(i, 1)}, true});
  return out;
}

py::dict candidate_dict(const see::Candidate& c) {
  py::dict d("spec_hash"_a = c.hash, "latency_s"_a = c.latency_s, "weight_bytes"_a = c.weight_bytes,
             "model"_a = to_py(see::to_json(c.spec)));
  d["accuracy"] = c.accuracy ? py::object(py::float_(*c.accuracy)) : py::object(py::none());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse event-based eye tracking core";

  auto base = py::register_exception<see::Error>(m, "SeeError", PyExc_RuntimeError);
  py::register_exception<see::ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<see::ParseError>(m, "ParseError", base.ptr());
  py::register_exception<see::GeometryError>(m, "GeometryError", base.ptr());
  py::register_exception<see::OrderingError>(m, "OrderingError", base.ptr());
  py::register_exception<see::ContractError>(m, "ContractError", base.ptr());
  py::register_exception<see::RangeError>(m, "RangeError", base.ptr());
  py::register_exception<see::NumericError>(m, "NumericError", base.ptr());
  py::register_exception<see::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<see::LoadError>(m, "LoadError", base.ptr());
  py::register_exception<see::IoError>(m, "IoError", base.ptr());

  m.def(
      "load_events",
      [](const std::filesystem::path& path, int height, int width, std::optional<std::string> format) {
        see::EventFormat fmt = see::format_for_path(path);
        if (format) fmt = *format == "csv" ? see::EventFormat::csv : see::EventFormat::native_binary;
        return events_to_array(see::load_events(path, fmt, {height, width}));
      },
      "path"_a, "height"_a, "width"_a, "format"_a = py::none(),
      "Reads an event file into a uint64 array of rows (t, x, y, p).");
  m.def(
      "encode_events",
      [](const EventArray& events, int height, int width) {
        const auto bytes = see::encode_native(events_from_array(events, {height, width}));
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      "events"_a, "height"_a, "width"_a, "Native binary encoding of validated events.");
  m.def(
      "voxelize",
      [](const EventArray& events, int height, int width, int bins, bool split, std::uint64_t t_start,
         std::uint64_t t_end) {
        const see::SensorGeometry g{height, width};
        const see::EventClip clip{events_from_array(events, g), t_start, t_end, g};
        const auto v = see::voxelize(clip, {height, width, bins, split ? see::PolarityMode::split : see::PolarityMode::merged});
        const auto d = see::to_dense(v);
        py::array_t<std::int32_t> a({height, width, v.geometry().channels});
        std::copy(d.data.begin(), d.data.end(), a.mutable_data());
        return a;
      },
      "events"_a, "height"_a, "width"_a, "bins"_a, "split"_a = false, "t_start"_a, "t_end"_a,
      "Dense (H, W, C) count grid of one clip.");

  m.def(
      "dyadic_approx",
      [](double scale) {
        const auto q = see::dyadic_approx(scale);
        return py::make_tuple(q.multiplier, q.shift);
      },
      "scale"_a, "(multiplier, shift) with multiplier / 2**shift close to scale.");
  m.def(
      "requantize",
      [](std::int32_t acc, std::uint32_t multiplier, int shift) {
        if (shift < 0 || shift > 31) throw see::ArgumentError("shift must lie in [0, 31]");
        return static_cast<int>(see::requantize(acc, {multiplier, static_cast<std::uint8_t>(shift), 0.0}));
      },
      "acc"_a, "multiplier"_a, "shift"_a);

  py::class_<see::Model>(m, "Model")
      .def_property_readonly("spec", [](const see::Model& self) { return to_py(see::to_json(self.spec())); })
      .def_property_readonly("spec_hash", [](const see::Model& self) { return self.spec().hash_hex(); })
      .def_property_readonly("mode",
                             [](const see::Model& self) { return self.mode() == see::NumericMode::int8 ? "int8" : "float32"; })
      .def_property_readonly("parameter_count", [](const see::Model& self) { return self.spec().parameter_count(); })
      .def(
          "predict",
          [](const see::Model& self, const EventArray& events, std::uint64_t window_us, std::uint64_t t0,
             std::optional<std::size_t> clips, const std::string& mode) {
            const auto c = clips_for(self, events, window_us, t0, clips);
            return points_to_array(see::run_sequence(self, c, exec_mode(mode)));
          },
          "events"_a, "window_us"_a = 10000, "t0"_a = 0, "clips"_a = py::none(), "mode"_a = "sparse",
          "One (px, py) row per clip, head state carried across clips.")
      .def(
          "quantized",
          [](const see::Model& self, const EventArray& events, std::uint64_t window_us) {
            const auto* fb = std::get_if<see::FloatBackbone>(&self.backbone);
            if (!fb) throw see::ArgumentError("model is already int8");
            return see::Model{see::quantize_model(*fb, clips_for(self, events, window_us, 0, std::nullopt)), self.head};
          },
          "calibration_events"_a, "window_us"_a = 10000, "Int8 copy calibrated on the given events.")
      .def("save", [](const see::Model& self, const std::filesystem::path& p) { see::save_model(p, self); }, "path"_a)
      .def("to_bytes", [](const see::Model& self) {
        const auto b = see::serialize_model(self);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      });

  m.def("load_model", [](const std::filesystem::path& p) { return see::load_model(p); }, "path"_a);
  m.def(
      "model_from_bytes",
      [](const py::bytes& b) {
        const std::string s = b;
        return see::deserialize_model(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      },
      "data"_a);
  m.def(
      "random_model",
      [](const py::object& spec, std::uint64_t seed) {
        const see::ModelSpec s = see::model_spec_from_json(from_py(spec));
        return see::Model{see::random_backbone(s, seed), see::random_head(s.embedding_size(), s.gru_hidden, seed + 1)};
      },
      "spec"_a, "seed"_a = 0, "Float model with seeded random weights.");

  m.def(
      "simulate",
      [](const py::object& spec, double density, const py::object& hw) {
        const see::ModelSpec s = see::model_spec_from_json(from_py(spec));
        return to_py(see::report_to_json(s, see::model_latency(s, see::analytic_profile(s, density), hw_from(hw))));
      },
      "spec"_a, "density"_a = 0.05, "hw"_a = py::none(), "Accelerator latency report for a model spec.");
  m.def(
      "search",
      [](const py::object& space, std::size_t n, std::uint64_t seed, double cap, double density, const py::object& hw,
         unsigned threads) {
        const auto sp = see::search_space_from_json(from_py(space));
        const see::HwConfig h = hw_from(hw);
        std::vector<see::Candidate> cands;
        {
          py::gil_scoped_release release;
          cands = see::search_run(sp, h, cap, [density](const see::ModelSpec& s) { return see::analytic_profile(s, density); },
                                  n, seed, threads);
        }
        py::list out;
        for (const auto& c : cands) out.append(candidate_dict(c));
        return out;
      },
      "space"_a, "n"_a, "seed"_a = 0, "cap"_a = std::numeric_limits<double>::infinity(), "density"_a = 0.05,
      "hw"_a = py::none(), "threads"_a = 0u, "Feasible sampled subnets in first-sample order.");
  m.def(
      "pareto_front",
      [](const std::vector<std::tuple<std::string, double, double>>& rows) {
        std::vector<see::Candidate> cs;
        for (const auto& [h, lat, acc] : rows) {
          see::Candidate c;
          c.hash = h;
          c.latency_s = lat;
          c.accuracy = acc;
          cs.push_back(std::move(c));
        }
        std::vector<std::string> out;
        for (const auto& c : see::pareto_front(cs)) out.push_back(c.hash);
        return out;
      },
      "rows"_a, "Hashes on the front of (hash, latency_s, accuracy) rows, by latency.");

  m.def(
      "pk_accuracy", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& gt,
                        const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
                        double k) { return see::pk_accuracy(labeled(gt, pred), k); },
      "gt"_a, "pred"_a, "k"_a);
  m.def(
      "mean_distance", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& gt,
                          const py::array_t<double, py::array::c_style | py::array::forcecast>& pred) {
        return see::mean_distance(labeled(gt, pred));
      },
      "gt"_a, "pred"_a);
}

#include <pybind11/pybind11.h>
#include <pybind11/operators.h>
#include <pybind11/stl.h>

#include "motionbrush/analysis.hpp"
#include "motionbrush/calibration.hpp"
#include "motionbrush/codec.hpp"
#include "motionbrush/energy.hpp"
#include "motionbrush/error.hpp"
#include "motionbrush/instrument.hpp"
#include "motionbrush/pipeline.hpp"
#include "motionbrush/profile_io.hpp"
#include "motionbrush/recording.hpp"
#include "motionbrush/service.hpp"
#include "motionbrush/simulator.hpp"

namespace py = pybind11;
using namespace motionbrush;

namespace {

Placement placement_of(const std::string& name) {
  const auto p = parse_placement(name);
  if (!p) throw Error(ErrorCode::unknown_placement, "unknown placement '" + name + "'");
  return *p;
}

// JSON crosses the boundary as text; the Python side parses it.
py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict histogram_dict(const SphereHistogram& h) {
  py::dict d;
  d["n_lat"] = h.n_lat;
  d["n_lon"] = h.n_lon;
  d["total"] = h.total;
  d["counts"] = h.counts;
  d["solid_angle"] = h.solid_angle;
  d["density"] = h.density;
  return d;
}

py::dict bounds_dict(const RangeBounds& b) {
  py::dict d;
  d["placement"] = std::string(to_string(b.placement));
  d["pitch_lo"] = b.pitch_lo;
  d["pitch_hi"] = b.pitch_hi;
  d["energy_lo"] = b.energy_lo;
  d["energy_hi"] = b.energy_hi;
  d["samples"] = b.samples;
  return d;
}

class PyEngine {
 public:
  PyEngine(const std::string& profiles_dir, const std::string& scenes_path, std::uint64_t seed)
      : engine_(make_config(seed),
                load_profiles(profiles_dir, SessionHeader::with_default_placements("", 0).placements),
                load_scenes(scenes_path)) {}

  py::list tick(std::uint64_t t_us, const std::vector<SensorFrame>& frames) {
    const auto state = engine_.tick(t_us, frames);
    py::list out;
    out.append(py::module_::import("json").attr("loads")(frame_message(state)));
    for (const auto& m : event_messages(state)) out.append(py::module_::import("json").attr("loads")(m));
    return out;
  }

  py::object command(const py::object& msg) { return to_py(engine_.handle_command(from_py(msg))); }

 private:
  static EngineConfig make_config(std::uint64_t seed) {
    EngineConfig c;
    c.seed = seed;
    return c;
  }
  Engine engine_;
};

}  // namespace

PYBIND11_MODULE(_motionbrush, m) {
  m.doc() = "Motion-to-brush core";

  static py::handle error_type = py::exception<Error>(m, "MotionbrushError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<SensorFrame>(m, "Frame")
      .def(py::init<>())
      .def(py::init([](int dev, std::uint32_t seq, std::uint64_t t_us, std::array<float, 4> quat,
                       std::array<float, 3> acc) {
             SensorFrame f;
             if (dev < 0 || dev > 255) throw Error(ErrorCode::invalid_frame, "device id out of range");
             f.device_id = static_cast<std::uint8_t>(dev);
             f.seq = seq;
             f.t_us = t_us;
             f.quat = quat;
             f.acc = acc;
             return f;
           }),
           py::arg("dev"), py::arg("seq"), py::arg("t_us"), py::arg("quat"), py::arg("acc"))
      .def_readwrite("dev", &SensorFrame::device_id)
      .def_readwrite("seq", &SensorFrame::seq)
      .def_readwrite("t_us", &SensorFrame::t_us)
      .def_readwrite("quat", &SensorFrame::quat)
      .def_readwrite("acc", &SensorFrame::acc)
      .def("acc_l1", &SensorFrame::acc_l1)
      .def(py::self == py::self)
      .def("__repr__", [](const SensorFrame& f) { return frame_to_line(f); });

  m.def("encode_frame", [](const SensorFrame& f) {
    const WireFrame w = encode_frame(f);
    return py::bytes(reinterpret_cast<const char*>(w.data()), w.size());
  });
  m.def("decode_frame", [](const py::bytes& b) -> py::tuple {
    const std::string s = b;
    const auto r = decode_frame(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    if (!r.ok()) return py::make_tuple(std::string(to_string(r.status)), py::none());
    return py::make_tuple("ok", r.frame);
  });
  m.def("crc32", [](const py::bytes& b) {
    const std::string s = b;
    return crc32_ieee(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  });

  m.def("energy_series",
        [](const std::vector<std::uint64_t>& t_us, const std::vector<double>& acc_l1, double window_s,
           double nominal_period_s) {
          if (t_us.size() != acc_l1.size()) throw Error(ErrorCode::config, "t_us and acc_l1 differ in length");
          EnergyTracker tracker(window_s, nominal_period_s);
          std::vector<double> out;
          out.reserve(t_us.size());
          for (std::size_t i = 0; i < t_us.size(); ++i) out.push_back(tracker.update(t_us[i], acc_l1[i]));
          return out;
        },
        py::arg("t_us"), py::arg("acc_l1"), py::arg("window_s") = 0.5, py::arg("nominal_period_s") = 0.01);

  m.def("folded_sin", &folded_sin);
  m.def("canvas_position",
        [](std::array<double, 4> quat, std::array<double, 4> q_ref, double pitch_lo, double pitch_hi) {
          CalibrationProfile p;
          p.q_ref = {q_ref[0], q_ref[1], q_ref[2], q_ref[3]};
          p.pitch_lo = pitch_lo;
          p.pitch_hi = pitch_hi;
          const auto a = yaw_pitch(pointing_direction({quat[0], quat[1], quat[2], quat[3]}, p.q_ref));
          const auto c = map_to_canvas(a.yaw, a.pitch, p);
          return py::make_tuple(c.x, c.y);
        },
        py::arg("quat"), py::arg("q_ref") = std::array<double, 4>{1, 0, 0, 0},
        py::arg("pitch_lo") = -kPi / 4, py::arg("pitch_hi") = kPi / 4);

  m.def("simulate",
        [](const std::string& kind, std::uint64_t seed, double duration_s, const std::string& placement) {
          GestureScript g;
          if (kind == "smooth") g.kind = GestureKind::smooth;
          else if (kind == "staccato") g.kind = GestureKind::staccato;
          else if (kind == "still") g.kind = GestureKind::still;
          else throw Error(ErrorCode::config, "unknown gesture '" + kind + "'");
          g.seed = seed;
          g.duration_s = duration_s;
          g.placement = placement_of(placement);
          return sim_generate(g);
        },
        py::arg("kind"), py::arg("seed") = 0, py::arg("duration_s") = 10.0,
        py::arg("placement") = "right_upper_arm");
  m.def("simulate_performance", &simulate_performance, py::arg("seed"), py::arg("duration_s"),
        py::arg("sample_rate_hz") = 100.0);

  m.def("write_session",
        [](const std::string& path, const std::vector<SensorFrame>& frames, const std::string& session_id) {
          SessionRecording s;
          s.header = SessionHeader::with_default_placements(session_id, 0);
          s.frames = frames;
          write_session_file(s, path);
        },
        py::arg("path"), py::arg("frames"), py::arg("session_id") = "python");
  m.def("read_session", [](const std::string& path, bool lenient) {
    const auto s = read_session_file(path, lenient ? ReadMode::lenient : ReadMode::strict);
    return py::make_tuple(to_py(nlohmann::ordered_json::parse(header_to_line(s.header))), s.frames);
  }, py::arg("path"), py::arg("lenient") = false);

  m.def("energy_trace", [](const std::string& path, const std::string& placement, double window_s) {
    std::vector<std::pair<std::uint64_t, double>> out;
    for (const auto& p : energy_trace(read_session_file(path), placement_of(placement), window_s))
      out.emplace_back(p.t_us, p.energy);
    return out;
  }, py::arg("path"), py::arg("placement"), py::arg("window_s") = 0.5);
  m.def("heatmap",
        [](const std::vector<std::array<double, 3>>& dirs, int n_lat, int n_lon) {
          std::vector<Vec3> v;
          v.reserve(dirs.size());
          for (const auto& d : dirs) v.push_back({d[0], d[1], d[2]});
          return histogram_dict(sphere_heatmap(v, n_lat, n_lon));
        },
        py::arg("directions"), py::arg("n_lat") = 18, py::arg("n_lon") = 36);
  m.def("range_bounds", [](const std::string& path, const std::string& placement) {
    return bounds_dict(range_bounds(read_session_file(path), placement_of(placement)));
  });
  m.def("build_profile", [](const std::string& path, const std::string& placement) {
    return to_py(profile_to_json(build_profile(read_session_file(path), placement_of(placement))));
  });

  py::class_<PyEngine>(m, "Engine")
      .def(py::init<const std::string&, const std::string&, std::uint64_t>(), py::arg("profiles_dir"),
           py::arg("scenes_path"), py::arg("seed") = 0)
      .def("tick", &PyEngine::tick, py::arg("t_us"), py::arg("frames"))
      .def("command", &PyEngine::command);

  m.attr("FEED_PORT") = kDefaultFeedPort;
}

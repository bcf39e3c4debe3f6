// motionbrush command-line entry point.
//
// Exit codes: 0 ok, 2 usage or configuration, 3 data quality, 4 I/O.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>

#include "motionbrush/analysis.hpp"
#include "motionbrush/calibration.hpp"
#include "motionbrush/error.hpp"
#include "motionbrush/pipeline.hpp"
#include "motionbrush/profile_io.hpp"
#include "motionbrush/recording.hpp"
#include "motionbrush/simulator.hpp"

namespace mb = motionbrush;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

int exit_code_for(mb::ErrorCode code) {
  switch (code) {
    case mb::ErrorCode::io:
      return kExitIo;
    case mb::ErrorCode::insufficient_data:
    case mb::ErrorCode::no_stillness:
    case mb::ErrorCode::degenerate_range:
    case mb::ErrorCode::empty_input:
      return kExitData;
    default:
      return kExitUsage;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("motionbrush");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("MOTIONBRUSH_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("MOTIONBRUSH_LOG: unknown level '{}', using info", env);
    else
      spdlog::set_level(level);
  }
}

mb::Placement placement_or_throw(const std::string& name) {
  auto p = mb::parse_placement(name);
  if (!p)
    throw mb::Error(mb::ErrorCode::unknown_placement,
                    "unknown placement '" + name +
                        "' (expected right_upper_arm, left_wrist, left_ankle or right_ankle)");
  return *p;
}

template <class Fn>
void write_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw mb::Error(mb::ErrorCode::io, "cannot open " + path + " for writing");
  fn(out);
  out.flush();
  if (!out) throw mb::Error(mb::ErrorCode::io, "write failed: " + path);
}

struct AnalyzeArgs {
  std::string kind;
  std::string input;
  std::string placement;
  double window_s = 0.5;
  std::string out = "-";
  std::string format = "csv";
  std::string profile;
  int n_lat = 18;
  int n_lon = 36;
};

int run_analyze(const AnalyzeArgs& a) {
  const mb::Placement placement = placement_or_throw(a.placement);
  const mb::ExportFormat format = a.format == "json" ? mb::ExportFormat::json : mb::ExportFormat::csv;
  const mb::SessionRecording session = mb::read_session_file(a.input);
  mb::Quat q_ref = mb::Quat::identity();
  if (!a.profile.empty()) q_ref = mb::load_profile(a.profile).q_ref;

  if (a.kind == "energy") {
    const auto trace = mb::energy_trace(session, placement, a.window_s);
    write_output(a.out, [&](std::ostream& os) { mb::export_trace(trace, format, os); });
  } else if (a.kind == "path") {
    const auto path = mb::orientation_path(session, placement, q_ref);
    write_output(a.out, [&](std::ostream& os) { mb::export_path(path, format, os); });
  } else if (a.kind == "heatmap") {
    std::vector<mb::Vec3> dirs;
    for (const auto& p : mb::orientation_path(session, placement, q_ref)) dirs.push_back(p.direction);
    const auto h = mb::sphere_heatmap(dirs, a.n_lat, a.n_lon);
    write_output(a.out, [&](std::ostream& os) { mb::export_histogram(h, format, os); });
  } else {
    mb::RangeOptions opts;
    opts.window_s = a.window_s;
    opts.q_ref = q_ref;
    const auto b = mb::range_bounds(session, placement, opts);
    write_output(a.out, [&](std::ostream& os) { mb::export_bounds(b, format, os); });
  }
  return kExitOk;
}

int run_calibrate(const std::string& input, const std::string& placement_name,
                  const std::string& out) {
  const mb::Placement placement = placement_or_throw(placement_name);
  const mb::SessionRecording session = mb::read_session_file(input);
  mb::CalibrationProfile profile;
  try {
    profile = mb::build_profile(session, placement);
  } catch (const mb::Error& e) {
    switch (e.code()) {
      case mb::ErrorCode::no_stillness:
        spdlog::error("{}", e.what());
        spdlog::error(
            "record a reference pose: hold the limb still, facing the screen, for at least 2 s "
            "(after the first half second of the session)");
        return kExitData;
      case mb::ErrorCode::insufficient_data:
        spdlog::error("{}", e.what());
        spdlog::error("the calibration session needs at least 10 s of data for this placement");
        return kExitData;
      case mb::ErrorCode::degenerate_range:
        spdlog::error("{}", e.what());
        spdlog::error("sweep the limb through its full range of motion during the session");
        return kExitData;
      default:
        throw;
    }
  }
  mb::save_profile(profile, out);
  spdlog::info("wrote {} profile to {}", placement_name, out);
  return kExitOk;
}

int run_simulate(std::uint64_t seed, double duration_s, const std::string& out) {
  mb::SessionRecording session;
  session.header = mb::SessionHeader::with_default_placements("sim-" + std::to_string(seed), 0);
  session.frames = mb::simulate_performance(seed, duration_s);
  mb::write_session_file(session, out);
  spdlog::info("wrote {} frames to {}", session.frames.size(), out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"motionbrush: movement-to-brush instrument engine and toolchain"};
  app.require_subcommand(1);

  mb::PerformOptions perform;
  std::string source_text = "sim";
  auto* perform_cmd = app.add_subcommand("perform", "run the live engine");
  perform_cmd->add_option("--source", source_text, "sim | udp:<port> | tcp:<port> | replay:<file>");
  perform_cmd->add_option("--profiles", perform.profiles_dir, "directory of <placement>.json profiles")
      ->required();
  perform_cmd->add_option("--scenes", perform.scenes_path, "scene timeline JSON")->required();
  perform_cmd->add_option("--seed", perform.seed, "seed for simulation and texture draws");
  perform_cmd->add_option("--feed-port", perform.feed_port, "WebSocket port, 0 for headless")
      ->capture_default_str();
  std::string record_path, feed_log_path;
  perform_cmd->add_option("--record", record_path, "write the incoming session to this file");
  perform_cmd->add_option("--feed-log", feed_log_path, "append every feed message to this file");
  perform_cmd->add_option("--duration", perform.duration_s,
                          "seconds of simulated input, or live run length (0 = until SIGINT)");
  std::string speed_text = "1";
  perform_cmd->add_option("--speed", speed_text, "pacing for sim/replay sources, or 'max'");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "offline analysis of a recorded session");
  analyze_cmd->add_option("kind", analyze.kind, "energy | path | heatmap | bounds")
      ->required()
      ->check(CLI::IsMember({"energy", "path", "heatmap", "bounds"}));
  analyze_cmd->add_option("--input", analyze.input, "session file")->required();
  analyze_cmd->add_option("--placement", analyze.placement, "limb placement")->required();
  analyze_cmd->add_option("--window", analyze.window_s, "energy window in seconds")
      ->check(CLI::Range(0.05, 10.0));
  analyze_cmd->add_option("--out", analyze.out, "output file, - for stdout");
  analyze_cmd->add_option("--format", analyze.format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  analyze_cmd->add_option("--profile", analyze.profile, "profile whose reference pose is used");
  analyze_cmd->add_option("--n-lat", analyze.n_lat, "heat-map latitude bands")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--n-lon", analyze.n_lon, "heat-map longitude bands")->check(CLI::PositiveNumber);

  std::string cal_input, cal_placement, cal_out;
  auto* cal_cmd = app.add_subcommand("calibrate", "derive a calibration profile from a session");
  cal_cmd->add_option("--input", cal_input, "session file")->required();
  cal_cmd->add_option("--placement", cal_placement, "limb placement")->required();
  cal_cmd->add_option("--out", cal_out, "profile output file")->required();

  std::uint64_t sim_seed = 0;
  double sim_duration = 60.0;
  std::string sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "write a simulated four-device session");
  sim_cmd->add_option("--seed", sim_seed);
  sim_cmd->add_option("--duration", sim_duration)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", sim_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*perform_cmd) {
      perform.source = mb::SourceSpec::parse(source_text);
      if (!record_path.empty()) perform.record_path = record_path;
      if (!feed_log_path.empty()) perform.feed_log_path = feed_log_path;
      if (speed_text == "max") {
        perform.speed = mb::kAsFastAsPossible;
      } else {
        perform.speed = std::stod(speed_text);
        if (!(perform.speed > 0.0)) throw mb::Error(mb::ErrorCode::config, "--speed must be positive");
      }
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      return mb::run_perform(perform, g_stop);
    }
    if (*analyze_cmd) return run_analyze(analyze);
    if (*cal_cmd) return run_calibrate(cal_input, cal_placement, cal_out);
    if (*sim_cmd) return run_simulate(sim_seed, sim_duration, sim_out);
  } catch (const mb::Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::invalid_argument& e) {
    spdlog::error("invalid number: {}", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motionbrush/instrument.hpp"
#include "motionbrush/recording.hpp"
#include "motionbrush/sequencer.hpp"

namespace motionbrush {

struct SourceSpec {
  enum class Kind { sim, udp, tcp, replay };
  Kind kind = Kind::sim;
  std::uint16_t port = 0;
  std::string path;

  /// "sim", "udp:<port>", "tcp:<port>" or "replay:<file>". Throws Error(config).
  static SourceSpec parse(const std::string& text);
};

struct PerformOptions {
  SourceSpec source;
  std::string profiles_dir;
  std::string scenes_path;
  std::uint64_t seed = 0;
  std::uint16_t feed_port = 7402;  // 0 runs headless
  std::optional<std::string> record_path;
  std::optional<std::string> feed_log_path;
  /// Length of the simulated performance, or of a live run (0 = until stopped).
  double duration_s = 0.0;
  /// Pacing of sim and replay sources relative to real time; infinity runs
  /// as fast as possible.
  double speed = 1.0;
  double tick_hz = 60.0;
  double reorder_ms = 20.0;
};

struct TickStats {
  std::size_t ticks = 0;
  std::uint64_t frames_in = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t messages = 0;
  double median_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
};

/// Loads `<dir>/<placement>.json` for every device in the placement map.
/// Throws Error(io) naming the missing file.
std::map<int, CalibrationProfile> load_profiles(const std::string& dir,
                                                const std::map<int, Placement>& placements);

/// Sink for everything the engine publishes.
class FeedSink {
 public:
  virtual ~FeedSink() = default;
  virtual void publish(const std::string& msg) = 0;
};

/// Deterministic driver for time-stamped frame streams: ticks are placed on
/// the data clock at first_frame + k * tick_period, frames pass through the
/// reorder stage, and every tick's messages go to the sink. Pacing uses the
/// clock at the given speed.
TickStats run_on_data_clock(Engine& engine, const std::vector<SensorFrame>& frames,
                            FeedSink& sink, Clock& clock, double speed,
                            double reorder_ms = 20.0,
                            const std::function<void(const SensorFrame&)>& on_frame = {},
                            const std::function<void()>& between_ticks = {},
                            const std::atomic<bool>* stop = nullptr);

/// Runs the `perform` command. Returns the CLI exit code.
int run_perform(const PerformOptions& options, const std::atomic<bool>& stop,
                TickStats* stats = nullptr);

TickStats summarize(std::vector<double> tick_compute_us);

}  // namespace motionbrush

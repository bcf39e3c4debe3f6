#include "motionbrush/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "motionbrush/error.hpp"
#include "motionbrush/ingest.hpp"
#include "motionbrush/profile_io.hpp"
#include "motionbrush/service.hpp"
#include "motionbrush/simulator.hpp"

namespace motionbrush {
namespace {

double elapsed_us(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - since)
      .count();
}

std::uint16_t parse_port(const std::string& text) {
  try {
    std::size_t used = 0;
    const int port = std::stoi(text, &used);
    if (used == text.size() && port >= 0 && port <= 65535) return static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::config, "invalid port '" + text + "'");
}

class MultiSink final : public FeedSink {
 public:
  MultiSink(FeedHub* hub, std::ostream* log) : hub_(hub), log_(log) {}
  void publish(const std::string& msg) override {
    if (hub_) hub_->publish(msg);
    if (log_) *log_ << msg << '\n';
  }

 private:
  FeedHub* hub_;
  std::ostream* log_;
};

std::uint64_t unix_now_us() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

// Owns the optional live recorder and answers "record" commands.
class RecordControl {
 public:
  RecordControl(std::optional<std::string> default_path, SessionHeader header)
      : default_path_(std::move(default_path)), header_(std::move(header)) {}

  void start(const std::string& path) {
    recorder_.emplace(path, header_);
    spdlog::info("recording to {}", path);
  }

  void on_frame(const SensorFrame& f) {
    if (recorder_) recorder_->append(f);
  }

  void stop() {
    if (!recorder_) return;
    recorder_->close();
    spdlog::info("recording closed: {}", recorder_->path());
    recorder_.reset();
  }

  CommandReply handle(const nlohmann::json& msg) {
    CommandReply r;
    if (msg.is_object() && msg.contains("id")) r["id"] = msg.at("id");
    const std::string action = msg.value("action", "");
    try {
      if (action == "start") {
        if (recorder_) return error(r, "already_recording", "a recording is already running");
        const std::string path = msg.contains("path") && msg.at("path").is_string()
                                     ? msg.at("path").get<std::string>()
                                     : default_path_.value_or("session-" + std::to_string(unix_now_us()) +
                                                              kSessionExtension);
        header_.start_unix_us = unix_now_us();
        start(path);
        r["type"] = "ack";
        r["cmd"] = "record";
        r["action"] = "start";
        r["path"] = path;
        return r;
      }
      if (action == "stop") {
        if (!recorder_) return error(r, "not_recording", "no recording is running");
        const std::string path = recorder_->path();
        stop();
        r["type"] = "ack";
        r["cmd"] = "record";
        r["action"] = "stop";
        r["path"] = path;
        return r;
      }
    } catch (const Error& e) {
      return error(r, "record_failed", e.what());
    }
    return error(r, "bad_request", "record needs action 'start' or 'stop'");
  }

 private:
  static CommandReply error(CommandReply r, const std::string& code, const std::string& text) {
    r["type"] = "error";
    r["code"] = code;
    r["msg"] = text;
    return r;
  }

  std::optional<std::string> default_path_;
  SessionHeader header_;
  std::optional<SessionFileRecorder> recorder_;
};

}  // namespace

SourceSpec SourceSpec::parse(const std::string& text) {
  SourceSpec s;
  if (text == "sim") return s;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::config, "unknown source '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string arg = text.substr(colon + 1);
  if (kind == "udp" || kind == "tcp") {
    s.kind = kind == "udp" ? Kind::udp : Kind::tcp;
    s.port = parse_port(arg);
    return s;
  }
  if (kind == "replay" && !arg.empty()) {
    s.kind = Kind::replay;
    s.path = arg;
    return s;
  }
  throw Error(ErrorCode::config, "unknown source '" + text + "'");
}

std::map<int, CalibrationProfile> load_profiles(const std::string& dir,
                                                const std::map<int, Placement>& placements) {
  std::map<int, CalibrationProfile> out;
  for (const auto& [dev, placement] : placements) {
    const auto path = (std::filesystem::path(dir) / (std::string(to_string(placement)) + ".json")).string();
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::io, "missing profile file " + path);
    CalibrationProfile p = load_profile(path);
    if (p.placement != placement)
      throw Error(ErrorCode::config, path + ": profile is for placement '" +
                                         std::string(to_string(p.placement)) + "'");
    out.emplace(dev, p);
  }
  return out;
}

TickStats summarize(std::vector<double> samples) {
  TickStats s;
  s.ticks = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  auto rank = [&](double p) {
    auto r = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(r, 1, samples.size()) - 1];
  };
  s.median_us = rank(50);
  s.p99_us = rank(99);
  s.max_us = samples.back();
  return s;
}

TickStats run_on_data_clock(Engine& engine, const std::vector<SensorFrame>& frames,
                            FeedSink& sink, Clock& clock, double speed, double reorder_ms,
                            const std::function<void(const SensorFrame&)>& on_frame,
                            const std::function<void()>& between_ticks,
                            const std::atomic<bool>* stop) {
  std::vector<double> compute_us;
  TickStats totals;
  if (frames.empty()) return summarize({});

  const auto tick_us = static_cast<std::uint64_t>(std::llround(1e6 / engine.config().tick_hz));
  ReorderBuffer reorder(static_cast<std::uint64_t>(std::llround(reorder_ms * 1000.0)));
  const std::uint64_t t0 = frames.front().t_us;
  const std::uint64_t wall0 = clock.now_us();
  const bool paced = std::isfinite(speed);
  std::size_t next = 0;
  bool flushed = false;

  for (std::uint64_t k = 0; !flushed; ++k) {
    if (stop && stop->load()) break;
    const std::uint64_t t = t0 + k * tick_us;
    if (paced)
      clock.sleep_until_us(wall0 + static_cast<std::uint64_t>(
                                       std::llround(static_cast<double>(t - t0) / speed)));

    std::vector<SensorFrame> ready;
    for (; next < frames.size() && frames[next].t_us <= t; ++next) {
      ++totals.frames_in;
      for (const auto& f : reorder.push(frames[next])) ready.push_back(f);
    }
    if (next == frames.size()) {
      for (const auto& f : reorder.flush()) ready.push_back(f);
      flushed = true;
    }
    if (on_frame)
      for (const auto& f : ready) on_frame(f);
    if (between_ticks) between_ticks();

    const auto started = std::chrono::steady_clock::now();
    const CanvasFrameState state = engine.tick(t, ready);
    sink.publish(frame_message(state));
    for (const auto& msg : event_messages(state)) sink.publish(msg);
    compute_us.push_back(elapsed_us(started));
    totals.messages += 1 + state.events.size();
  }

  TickStats s = summarize(std::move(compute_us));
  s.frames_in = totals.frames_in;
  s.frames_dropped = reorder.total_dropped() + engine.rejected_frames();
  s.messages = totals.messages;
  return s;
}

int run_perform(const PerformOptions& options, const std::atomic<bool>& stop, TickStats* stats) {
  SceneConfig scenes;
  SessionRecording replay_session;
  std::map<int, Placement> placements;
  std::map<int, CalibrationProfile> profiles;
  try {
    scenes = load_scenes(options.scenes_path);
    if (options.source.kind == SourceSpec::Kind::replay) {
      replay_session = read_session_file(options.source.path);
      placements = replay_session.header.placements;
    } else {
      placements = SessionHeader::with_default_placements("", 0).placements;
    }
    profiles = load_profiles(options.profiles_dir, placements);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    if (e.code() == ErrorCode::io && options.source.kind == SourceSpec::Kind::replay &&
        std::string(e.what()).find(options.source.path) != std::string::npos)
      return 4;
    return 2;
  }

  EngineConfig config;
  config.seed = options.seed;
  config.tick_hz = options.tick_hz;
  std::optional<Engine> engine;
  try {
    engine.emplace(config, profiles, scenes);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  }

  FeedHub hub;
  CommandQueue commands;
  std::optional<FeedServer> server;
  if (options.feed_port != 0) {
    try {
      server.emplace(hub, commands, scenes.texture_root, options.feed_port);
      spdlog::info("feed on ws://0.0.0.0:{}/feed, control on /control", server->port());
    } catch (const std::exception& e) {
      spdlog::error("cannot listen on port {}: {}", options.feed_port, e.what());
      return 4;
    }
  }

  std::ofstream feed_log;
  if (options.feed_log_path) {
    feed_log.open(*options.feed_log_path);
    if (!feed_log) {
      spdlog::error("cannot open feed log {}", *options.feed_log_path);
      return 4;
    }
  }
  MultiSink sink(&hub, options.feed_log_path ? &feed_log : nullptr);

  SessionHeader header = options.source.kind == SourceSpec::Kind::replay
                             ? replay_session.header
                             : SessionHeader::with_default_placements("", 0);
  header.session_id = "perform-" + std::to_string(unix_now_us());
  header.start_unix_us = unix_now_us();
  header.profiles.clear();
  for (const auto& [dev, p] : profiles) header.profiles[p.placement] = p;
  RecordControl record(options.record_path, header);

  auto apply_commands = [&] {
    commands.apply([&](const nlohmann::json& msg) -> CommandReply {
      if (msg.is_object() && msg.value("type", "") == "record") return record.handle(msg);
      return engine->handle_command(msg);
    });
  };

  TickStats result;
  try {
    if (options.record_path) record.start(*options.record_path);

    if (options.source.kind == SourceSpec::Kind::sim ||
        options.source.kind == SourceSpec::Kind::replay) {
      std::vector<SensorFrame> frames;
      if (options.source.kind == SourceSpec::Kind::sim) {
        const double duration = options.duration_s > 0.0 ? options.duration_s : 60.0;
        frames = simulate_performance(options.seed, duration);
      } else {
        frames = std::move(replay_session.frames);
      }
      SteadyClock clock;
      result = run_on_data_clock(
          *engine, frames, sink, clock, options.speed, options.reorder_ms,
          [&](const SensorFrame& f) { record.on_frame(f); }, apply_commands, &stop);
    } else {
      NetworkSource source(options.source.kind == SourceSpec::Kind::udp
                               ? NetworkSource::Transport::udp
                               : NetworkSource::Transport::tcp,
                           options.source.port);
      spdlog::info("listening for frames on port {}", source.port());
      ReorderBuffer reorder(static_cast<std::uint64_t>(std::llround(options.reorder_ms * 1000.0)));
      SteadyClock clock;
      const auto tick_us = static_cast<std::uint64_t>(std::llround(1e6 / options.tick_hz));
      const std::uint64_t start = clock.now_us();
      const std::uint64_t limit = options.duration_s > 0 ? seconds_to_us(options.duration_s) : 0;
      std::vector<double> compute_us;
      for (std::uint64_t k = 1; !stop.load(); ++k) {
        const std::uint64_t t = k * tick_us;
        if (limit && t > limit) break;
        clock.sleep_until_us(start + t);
        std::vector<SensorFrame> ready;
        for (const auto& f : source.drain()) {
          ++result.frames_in;
          for (const auto& r : reorder.push(f)) ready.push_back(r);
        }
        for (const auto& f : ready) record.on_frame(f);
        apply_commands();
        const auto started = std::chrono::steady_clock::now();
        const CanvasFrameState state = engine->tick(t, ready);
        sink.publish(frame_message(state));
        for (const auto& msg : event_messages(state)) sink.publish(msg);
        compute_us.push_back(elapsed_us(started));
      }
      const auto frames_in = result.frames_in;
      result = summarize(std::move(compute_us));
      result.frames_in = frames_in;
      result.frames_dropped = reorder.total_dropped() + engine->rejected_frames() +
                              source.counters().rejected.load();
    }
    record.stop();
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.code() == ErrorCode::io ? 4 : 2;
  }

  if (server) server->stop();
  spdlog::info("{} ticks, {} frames in, {} dropped, tick compute median {:.1f} us, p99 {:.1f} us",
               result.ticks, result.frames_in, result.frames_dropped, result.median_us,
               result.p99_us);
  if (stats) *stats = result;
  return 0;
}

}  // namespace motionbrush

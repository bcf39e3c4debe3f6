#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motionbrush/motion.hpp"

namespace motionbrush {

inline constexpr const char* kSessionExtension = ".mbsession.jsonl";

struct SessionHeader {
  std::string session_id;
  std::uint64_t start_unix_us = 0;
  std::map<int, Placement> placements;  // device id -> placement
  std::optional<std::string> video;     // external video file, by path
  std::map<Placement, CalibrationProfile> profiles;

  static SessionHeader with_default_placements(std::string session_id,
                                               std::uint64_t start_unix_us);
  friend bool operator==(const SessionHeader&, const SessionHeader&) = default;
};

struct SessionRecording {
  SessionHeader header;
  std::vector<SensorFrame> frames;

  /// Device bound to a placement, if the header maps one.
  std::optional<int> device_for(Placement p) const;
  /// Frames of one device in file order.
  std::vector<SensorFrame> frames_for(int device) const;

  friend bool operator==(const SessionRecording&, const SessionRecording&) = default;
};

std::string header_to_line(const SessionHeader& header);
std::string frame_to_line(const SensorFrame& frame);

/// Incremental writer used for live recording. Enforces global timestamp
/// order and strictly increasing per-device timestamps; throws
/// Error(ordering) and writes nothing for a frame that violates either.
class SessionWriter {
 public:
  SessionWriter(std::ostream& out, const SessionHeader& header);

  void append(const SensorFrame& frame);
  void flush();
  std::uint64_t bytes_written() const { return bytes_; }
  std::size_t frames_written() const { return frames_; }

 private:
  void write_line(const std::string& line);

  std::ostream& out_;
  std::uint64_t bytes_ = 0;
  std::size_t frames_ = 0;
  std::uint64_t last_t_ = 0;
  std::map<int, std::uint64_t> last_per_device_;
};

/// File-backed recorder that owns its stream.
class SessionFileRecorder {
 public:
  SessionFileRecorder(const std::string& path, const SessionHeader& header);
  void append(const SensorFrame& frame) { writer_->append(frame); }
  void close();
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream file_;
  std::optional<SessionWriter> writer_;
};

/// Throws Error(ordering) for unordered frames before writing anything, and
/// Error(io) reporting the byte offset reached when the sink fails.
void write_session(const SessionRecording& session, std::ostream& out);
void write_session_file(const SessionRecording& session, const std::string& path);

enum class ReadMode { strict, lenient };

struct ReadReport {
  std::size_t skipped = 0;
  std::vector<std::string> problems;  // "line N: reason"
};

/// Strict mode throws on the first malformed, invalid or out-of-order frame
/// line (Error(schema) / Error(ordering)); lenient mode skips and reports
/// them. A missing or malformed header always throws Error(missing_header).
SessionRecording read_session(std::istream& in, ReadMode mode = ReadMode::strict,
                              ReadReport* report = nullptr);
SessionRecording read_session_file(const std::string& path,
                                   ReadMode mode = ReadMode::strict,
                                   ReadReport* report = nullptr);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::uint64_t now_us() = 0;
  virtual void sleep_until_us(std::uint64_t t_us) = 0;
};

class SteadyClock final : public Clock {
 public:
  std::uint64_t now_us() override;
  void sleep_until_us(std::uint64_t t_us) override;
};

/// Time only moves when someone sleeps.
class FakeClock final : public Clock {
 public:
  explicit FakeClock(std::uint64_t start_us = 0) : now_(start_us) {}
  std::uint64_t now_us() override { return now_; }
  void sleep_until_us(std::uint64_t t_us) override {
    if (t_us > now_) now_ = t_us;
  }

 private:
  std::uint64_t now_;
};

inline constexpr double kAsFastAsPossible = std::numeric_limits<double>::infinity();

/// Emits each frame at start + (t - t_first) / speed on the given clock.
/// With speed == kAsFastAsPossible nothing sleeps. Throws Error(config) for
/// speed <= 0. `emit` receives the frame and the clock time of emission;
/// returning false stops the replay early.
void replay(const SessionRecording& session, double speed, Clock& clock,
            const std::function<bool(const SensorFrame&, std::uint64_t)>& emit);

}  // namespace motionbrush

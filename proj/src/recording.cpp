#include "motionbrush/recording.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <thread>
#include <variant>

#include "motionbrush/error.hpp"
#include "motionbrush/profile_io.hpp"

namespace motionbrush {
namespace {

using ojson = nlohmann::ordered_json;

SessionHeader header_from_json(const nlohmann::json& j) {
  SessionHeader h;
  if (!j.is_object() || j.value("type", "") != "header")
    throw Error(ErrorCode::missing_header, "first line is not a session header");
  try {
    h.session_id = j.at("session").get<std::string>();
    h.start_unix_us = j.at("start_unix_us").get<std::uint64_t>();
    for (const auto& [key, value] : j.at("placements").items()) {
      const int dev = std::stoi(key);
      const auto p = parse_placement(value.get<std::string>());
      if (!p || dev < 0 || dev >= kMaxDevices)
        throw Error(ErrorCode::missing_header, "bad placement entry '" + key + "'");
      h.placements[dev] = *p;
    }
    if (j.contains("video") && !j.at("video").is_null())
      h.video = j.at("video").get<std::string>();
    if (j.contains("profiles")) {
      for (const auto& [key, value] : j.at("profiles").items()) {
        const auto profile = profile_from_json(value);
        h.profiles[profile.placement] = profile;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::missing_header, std::string("malformed session header: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::missing_header) throw;
    throw Error(ErrorCode::missing_header, std::string("malformed session header: ") + e.what());
  }
  return h;
}

// Returns the parsed frame or the reason it is unusable.
std::variant<SensorFrame, std::string> frame_from_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    return std::string("not valid JSON");
  }
  try {
    if (!j.is_object() || j.value("type", "") != "frame") return std::string("not a frame record");
    SensorFrame f;
    const int dev = j.at("dev").get<int>();
    if (dev < 0 || dev >= kMaxDevices) return std::string("dev out of range");
    f.device_id = static_cast<std::uint8_t>(dev);
    f.seq = j.at("seq").get<std::uint32_t>();
    f.t_us = j.at("t_us").get<std::uint64_t>();
    const auto& q = j.at("quat");
    const auto& a = j.at("acc");
    if (!q.is_array() || q.size() != 4) return std::string("quat must have 4 components");
    if (!a.is_array() || a.size() != 3) return std::string("acc must have 3 components");
    for (std::size_t i = 0; i < 4; ++i) f.quat[i] = static_cast<float>(q[i].get<double>());
    for (std::size_t i = 0; i < 3; ++i) f.acc[i] = static_cast<float>(a[i].get<double>());
    if (auto why = validate_frame(f)) return *why;
    return f;
  } catch (const nlohmann::json::exception& e) {
    return std::string("schema violation: ") + e.what();
  }
}

}  // namespace

SessionHeader SessionHeader::with_default_placements(std::string session_id,
                                                     std::uint64_t start_unix_us) {
  SessionHeader h;
  h.session_id = std::move(session_id);
  h.start_unix_us = start_unix_us;
  for (int d = 0; d < kMaxDevices; ++d) h.placements[d] = default_placement(d);
  return h;
}

std::optional<int> SessionRecording::device_for(Placement p) const {
  for (const auto& [dev, placement] : header.placements)
    if (placement == p) return dev;
  return std::nullopt;
}

std::vector<SensorFrame> SessionRecording::frames_for(int device) const {
  std::vector<SensorFrame> out;
  for (const auto& f : frames)
    if (f.device_id == device) out.push_back(f);
  return out;
}

std::string header_to_line(const SessionHeader& h) {
  ojson j;
  j["type"] = "header";
  j["session"] = h.session_id;
  j["start_unix_us"] = h.start_unix_us;
  ojson placements = ojson::object();
  for (const auto& [dev, p] : h.placements) placements[std::to_string(dev)] = std::string(to_string(p));
  j["placements"] = placements;
  j["video"] = h.video ? ojson(*h.video) : ojson(nullptr);
  if (!h.profiles.empty()) {
    ojson profiles = ojson::object();
    for (const auto& [p, profile] : h.profiles)
      profiles[std::string(to_string(p))] = profile_to_json(profile);
    j["profiles"] = profiles;
  }
  return j.dump();
}

std::string frame_to_line(const SensorFrame& f) {
  // Components are widened to double; the shortest decimal form of that
  // double parses back to the identical f32.
  ojson j;
  j["type"] = "frame";
  j["dev"] = static_cast<int>(f.device_id);
  j["seq"] = f.seq;
  j["t_us"] = f.t_us;
  j["quat"] = {static_cast<double>(f.quat[0]), static_cast<double>(f.quat[1]),
               static_cast<double>(f.quat[2]), static_cast<double>(f.quat[3])};
  j["acc"] = {static_cast<double>(f.acc[0]), static_cast<double>(f.acc[1]),
              static_cast<double>(f.acc[2])};
  return j.dump();
}

SessionWriter::SessionWriter(std::ostream& out, const SessionHeader& header) : out_(out) {
  write_line(header_to_line(header));
}

void SessionWriter::write_line(const std::string& line) {
  out_ << line << '\n';
  if (!out_)
    throw Error(ErrorCode::io, "write failed at byte offset " + std::to_string(bytes_));
  bytes_ += line.size() + 1;
}

void SessionWriter::append(const SensorFrame& frame) {
  if (frames_ > 0 && frame.t_us < last_t_)
    throw Error(ErrorCode::ordering, "frame at t_us=" + std::to_string(frame.t_us) +
                                         " precedes t_us=" + std::to_string(last_t_));
  const auto it = last_per_device_.find(frame.device_id);
  if (it != last_per_device_.end() && frame.t_us <= it->second)
    throw Error(ErrorCode::ordering, "device " + std::to_string(frame.device_id) +
                                         " timestamps not strictly increasing at t_us=" +
                                         std::to_string(frame.t_us));
  write_line(frame_to_line(frame));
  last_t_ = frame.t_us;
  last_per_device_[frame.device_id] = frame.t_us;
  ++frames_;
}

void SessionWriter::flush() {
  out_.flush();
  if (!out_) throw Error(ErrorCode::io, "flush failed at byte offset " + std::to_string(bytes_));
}

SessionFileRecorder::SessionFileRecorder(const std::string& path, const SessionHeader& header)
    : path_(path), file_(path) {
  if (!file_) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  writer_.emplace(file_, header);
}

void SessionFileRecorder::close() {
  if (!writer_) return;
  writer_->flush();
  writer_.reset();
  file_.close();
}

void write_session(const SessionRecording& session, std::ostream& out) {
  std::map<int, std::uint64_t> last;
  for (std::size_t i = 0; i < session.frames.size(); ++i) {
    const auto& f = session.frames[i];
    if (i > 0 && f.t_us < session.frames[i - 1].t_us)
      throw Error(ErrorCode::ordering, "frames not in timestamp order at index " + std::to_string(i));
    const auto it = last.find(f.device_id);
    if (it != last.end() && f.t_us <= it->second)
      throw Error(ErrorCode::ordering,
                  "device timestamps not strictly increasing at index " + std::to_string(i));
    last[f.device_id] = f.t_us;
  }
  SessionWriter writer(out, session.header);
  for (const auto& f : session.frames) writer.append(f);
  writer.flush();
}

void write_session_file(const SessionRecording& session, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  write_session(session, out);
}

SessionRecording read_session(std::istream& in, ReadMode mode, ReadReport* report) {
  SessionRecording session;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty()) break;
  }
  if (line.empty()) throw Error(ErrorCode::missing_header, "session has no header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::missing_header,
                "line " + std::to_string(line_no) + ": header is not valid JSON");
  }
  session.header = header_from_json(header);

  std::map<int, std::uint64_t> last;
  std::uint64_t last_t = 0;
  auto reject = [&](ErrorCode code, const std::string& why) {
    const std::string msg = "line " + std::to_string(line_no) + ": " + why;
    if (mode == ReadMode::strict) throw Error(code, msg);
    if (report) {
      ++report->skipped;
      report->problems.push_back(msg);
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto parsed = frame_from_line(line);
    if (auto* why = std::get_if<std::string>(&parsed)) {
      reject(ErrorCode::schema, *why);
      continue;
    }
    const auto& f = std::get<SensorFrame>(parsed);
    const auto it = last.find(f.device_id);
    if ((!session.frames.empty() && f.t_us < last_t) ||
        (it != last.end() && f.t_us <= it->second)) {
      reject(ErrorCode::ordering, "frame out of timestamp order");
      continue;
    }
    last[f.device_id] = f.t_us;
    last_t = f.t_us;
    session.frames.push_back(f);
  }
  return session;
}

SessionRecording read_session_file(const std::string& path, ReadMode mode, ReadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open session " + path);
  return read_session(in, mode, report);
}

std::uint64_t SteadyClock::now_us() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

void SteadyClock::sleep_until_us(std::uint64_t t_us) {
  const auto now = now_us();
  if (t_us > now) std::this_thread::sleep_for(std::chrono::microseconds(t_us - now));
}

void replay(const SessionRecording& session, double speed, Clock& clock,
            const std::function<bool(const SensorFrame&, std::uint64_t)>& emit) {
  if (!(speed > 0.0)) throw Error(ErrorCode::config, "replay speed must be positive");
  if (session.frames.empty()) return;
  const bool immediate = std::isinf(speed);
  const std::uint64_t start = clock.now_us();
  const std::uint64_t t_first = session.frames.front().t_us;
  for (const auto& f : session.frames) {
    if (!immediate) {
      const double offset = static_cast<double>(f.t_us - t_first) / speed;
      clock.sleep_until_us(start + static_cast<std::uint64_t>(std::llround(offset)));
    }
    if (!emit(f, clock.now_us())) return;
  }
}

}  // namespace motionbrush

#include "motionbrush/instrument.hpp"

#include <algorithm>
#include <cmath>

#include "motionbrush/error.hpp"

namespace motionbrush {

bool StillnessDetector::update(double energy, std::uint64_t t_us) {
  const double eps = config_.epsilon;
  bool fire = false;

  if (energy >= eps) still_ = false;

  if (phase_ == Phase::cooldown && t_us >= cooldown_until_) {
    if (energy < eps) {
      phase_ = Phase::candidate;
      since_us_ = static_cast<double>(cooldown_until_);
    } else {
      phase_ = Phase::moving;
    }
  }

  switch (phase_) {
    case Phase::moving:
      if (energy < eps) {
        phase_ = Phase::candidate;
        if (have_prev_ && prev_energy_ >= eps) {
          const double frac = (prev_energy_ - eps) / (prev_energy_ - energy);
          since_us_ = static_cast<double>(prev_t_) +
                      frac * static_cast<double>(t_us - prev_t_);
        } else {
          since_us_ = static_cast<double>(t_us);
        }
      }
      break;
    case Phase::candidate:
      if (energy >= eps) phase_ = Phase::moving;
      break;
    case Phase::cooldown:
      break;
  }

  if (phase_ == Phase::candidate &&
      static_cast<double>(t_us) >= since_us_ + config_.hold_s * 1e6) {
    fire = true;
    still_ = true;
    phase_ = Phase::cooldown;
    cooldown_until_ = t_us + seconds_to_us(config_.cooldown_s);
  }

  have_prev_ = true;
  prev_energy_ = energy;
  prev_t_ = t_us;
  return fire;
}

void StillnessDetector::reset() {
  phase_ = Phase::moving;
  still_ = false;
  have_prev_ = false;
}

Engine::Engine(EngineConfig config, std::map<int, CalibrationProfile> profiles,
               SceneConfig scenes)
    : config_(config), sequencer_(std::move(scenes)), rng_(config.seed) {
  if (!(config_.tick_hz > 0.0)) throw Error(ErrorCode::config, "tick_hz must be positive");
  if (!(config_.w_min >= 0.0 && config_.w_min < config_.w_max && config_.w_max <= 1.0))
    throw Error(ErrorCode::config, "stroke widths need 0 <= w_min < w_max <= 1");
  if (profiles.empty()) throw Error(ErrorCode::config, "at least one device profile is required");
  for (auto& [dev, profile] : profiles) {
    if (dev < 0 || dev >= kMaxDevices)
      throw Error(ErrorCode::config, "device id " + std::to_string(dev) + " out of range");
    if (auto why = profile.validate())
      throw Error(ErrorCode::config, std::string(to_string(profile.placement)) + ": " + *why);
    Device d{profile, EnergyTracker(profile.window_s, config_.nominal_period_s),
             StillnessDetector(config_.stillness), BrushState{}, std::nullopt, 0};
    d.brush.id = dev;
    d.brush.width = config_.w_min;
    devices_.emplace(dev, std::move(d));
  }
  assign_pool_textures();
}

void Engine::assign_pool_textures() {
  const auto& pool = sequencer_.scene().textures;
  for (auto& [dev, d] : devices_) d.brush.texture = cycle_texture(d.brush.texture, pool, rng_);
}

CanvasFrameState Engine::tick(std::uint64_t t_us, std::span<const SensorFrame> frames) {
  if (start_us_ && t_us <= last_tick_us_)
    throw Error(ErrorCode::ordering, "tick time must increase");
  if (!start_us_) start_us_ = t_us;
  last_tick_us_ = t_us;

  CanvasFrameState state;
  state.t_us = t_us;
  state.events = std::move(pending_events_);
  pending_events_.clear();

  const double t_s = static_cast<double>(t_us - *start_us_) * 1e-6;
  const auto update = sequencer_.advance(t_s);
  if (update.scene_changed) {
    state.events.push_back({CanvasEvent::Kind::scene_change, -1, sequencer_.scene().id, 0.0});
    if (!sequencer_.takeover_active()) assign_pool_textures();
  }
  if (update.key_moment) {
    for (auto& [dev, d] : devices_) d.brush.texture = *update.key_moment;
    state.events.push_back({CanvasEvent::Kind::key_moment, -1, *update.key_moment, 0.0});
  } else if (update.takeover_ended) {
    assign_pool_textures();
  }

  for (const auto& f : frames) {
    auto it = devices_.find(f.device_id);
    if (it == devices_.end()) continue;
    Device& d = it->second;
    try {
      d.tracker.update(f);
    } catch (const Error&) {
      ++rejected_frames_;
      continue;
    }
    d.latest = f;
    d.last_arrival_tick_us = t_us;
  }

  const std::uint64_t stale_us = seconds_to_us(config_.stale_after_s);
  for (auto& [dev, d] : devices_) {
    BrushState& b = d.brush;
    b.stale = !d.latest || t_us - d.last_arrival_tick_us > stale_us;
    if (!d.latest) {
      b.energy = 0.0;
    } else if (d.last_arrival_tick_us == t_us) {
      b.energy = d.tracker.energy();
    } else {
      // Advance the device clock by the tick time that passed in silence.
      b.energy = d.tracker.energy_at(d.latest->t_us + (t_us - d.last_arrival_tick_us));
    }
    if (d.latest) {
      const auto angles = yaw_pitch(pointing_direction(d.latest->orientation(), d.profile.q_ref));
      b.position = map_to_canvas(angles.yaw, angles.pitch, d.profile);
    }
    b.e = normalize_energy(b.energy, d.profile);
    b.width = config_.w_min + b.e * (config_.w_max - config_.w_min);

    if (b.stale) {
      d.stillness.reset();
    } else if (d.stillness.update(b.energy, t_us) && !sequencer_.takeover_active()) {
      b.texture = cycle_texture(b.texture, sequencer_.scene().textures, rng_);
      b.last_cycle_t_us = t_us;
      state.events.push_back({CanvasEvent::Kind::texture_cycle, dev, b.texture, 0.0});
    }
    b.still = d.stillness.still();
    state.brushes.push_back(b);
  }
  state.scene_id = sequencer_.scene().id;
  return state;
}

namespace {

CommandReply error_reply(const nlohmann::json& msg, const std::string& code,
                         const std::string& text) {
  CommandReply r;
  r["type"] = "error";
  r["code"] = code;
  r["msg"] = text;
  if (msg.is_object() && msg.contains("id")) r["id"] = msg.at("id");
  return r;
}

CommandReply ack_reply(const nlohmann::json& msg, const std::string& cmd) {
  CommandReply r;
  r["type"] = "ack";
  r["cmd"] = cmd;
  if (msg.is_object() && msg.contains("id")) r["id"] = msg.at("id");
  return r;
}

struct Range {
  double lo;
  double hi;
  bool lo_open;
};

}  // namespace

CommandReply Engine::set_param(const nlohmann::json& msg) {
  if (!msg.contains("name") || !msg.at("name").is_string())
    return error_reply(msg, "bad_request", "set_param needs a string 'name'");
  const std::string name = msg.at("name").get<std::string>();
  if (!msg.contains("value") || !msg.at("value").is_number())
    return error_reply(msg, "bad_request", "set_param needs a numeric 'value'");
  const double value = msg.at("value").get<double>();

  std::optional<int> dev;
  if (msg.contains("dev") && !msg.at("dev").is_null()) {
    if (!msg.at("dev").is_number_integer())
      return error_reply(msg, "invalid_device", "'dev' must be null or a device id");
    dev = msg.at("dev").get<int>();
    if (!devices_.contains(*dev))
      return error_reply(msg, "invalid_device", "no device " + std::to_string(*dev));
  }

  static const std::map<std::string, Range> kRanges = {
      {"epsilon", {0.0, 50.0, true}},      {"hold_s", {0.0, 60.0, true}},
      {"cooldown_s", {0.0, 60.0, false}},  {"window_s", {0.05, 10.0, false}},
      {"w_min", {0.0, 1.0, false}},        {"w_max", {0.0, 1.0, true}},
      {"fade_half_life", {0.0, 600.0, true}},
      {"key_moment_duration_s", {0.0, 600.0, true}},
  };
  const auto range = kRanges.find(name);
  if (range == kRanges.end()) return error_reply(msg, "unknown_param", "unknown parameter '" + name + "'");
  const Range& r = range->second;
  if (!std::isfinite(value) || value > r.hi || value < r.lo || (r.lo_open && value == r.lo))
    return error_reply(msg, "out_of_range",
                       name + " must lie in " + (r.lo_open ? "(" : "[") + std::to_string(r.lo) +
                           ", " + std::to_string(r.hi) + "]");
  if (dev && name != "window_s")
    return error_reply(msg, "invalid_device", name + " is not a per-device parameter");

  if (name == "w_min" && !(value < config_.w_max))
    return error_reply(msg, "out_of_range", "w_min must stay below w_max");
  if (name == "w_max" && !(value > config_.w_min))
    return error_reply(msg, "out_of_range", "w_max must stay above w_min");

  if (name == "epsilon") config_.stillness.epsilon = value;
  if (name == "hold_s") config_.stillness.hold_s = value;
  if (name == "cooldown_s") config_.stillness.cooldown_s = value;
  if (name == "epsilon" || name == "hold_s" || name == "cooldown_s")
    for (auto& [id, d] : devices_) d.stillness.set_config(config_.stillness);
  if (name == "w_min") config_.w_min = value;
  if (name == "w_max") config_.w_max = value;
  if (name == "key_moment_duration_s") sequencer_.set_key_moment_duration(value);
  if (name == "fade_half_life") {
    config_.fade_half_life_s = value;
    pending_events_.push_back({CanvasEvent::Kind::param, -1, name, value});
  }
  if (name == "window_s") {
    for (auto& [id, d] : devices_) {
      if (dev && id != *dev) continue;
      d.profile.window_s = value;
      d.tracker.set_window(value);
    }
  }

  CommandReply ack = ack_reply(msg, "set_param");
  ack["name"] = name;
  ack["dev"] = dev ? nlohmann::ordered_json(*dev) : nlohmann::ordered_json(nullptr);
  ack["value"] = value;
  return ack;
}

CommandReply Engine::handle_command(const nlohmann::json& msg) {
  if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string())
    return error_reply(msg, "bad_request", "command must be an object with a string 'type'");
  const std::string type = msg.at("type").get<std::string>();
  if (type == "set_param") return set_param(msg);
  if (type == "trigger_key_moment") {
    if (!msg.contains("tex") || !msg.at("tex").is_string())
      return error_reply(msg, "bad_request", "trigger_key_moment needs a string 'tex'");
    const std::string tex = msg.at("tex").get<std::string>();
    if (!sequencer_.config().in_catalog(tex))
      return error_reply(msg, "unknown_texture", "texture '" + tex + "' is not in the catalog");
    sequencer_.trigger_key_moment(tex);
    CommandReply ack = ack_reply(msg, "trigger_key_moment");
    ack["tex"] = tex;
    return ack;
  }
  if (type == "advance_scene") {
    const auto target = sequencer_.advance_scene();
    if (!target) return error_reply(msg, "out_of_range", "already at the last scene");
    CommandReply ack = ack_reply(msg, "advance_scene");
    ack["scene"] = sequencer_.config().scenes[*target].id;
    return ack;
  }
  return error_reply(msg, "unknown_command", "unknown command '" + type + "'");
}

}  // namespace motionbrush

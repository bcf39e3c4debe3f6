#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "motionbrush/energy.hpp"
#include "motionbrush/motion.hpp"
#include "motionbrush/sequencer.hpp"

namespace motionbrush {

struct StillnessConfig {
  double epsilon = 0.15;   // m/s
  double hold_s = 1.5;
  double cooldown_s = 1.0;
};

/// Fires once the energy has stayed below epsilon for hold_s, then ignores
/// input for cooldown_s. If the energy is still low when the cooldown ends,
/// a new hold period starts from that instant, so events are never closer
/// than hold_s + cooldown_s.
///
/// The start of a hold is the linearly interpolated crossing time between
/// the last sample at or above epsilon and the first sample below it.
class StillnessDetector {
 public:
  explicit StillnessDetector(StillnessConfig config = {}) : config_(config) {}

  /// Returns true when a texture cycle should happen at t_us.
  bool update(double energy, std::uint64_t t_us);
  void reset();

  /// Energy has been below epsilon for at least hold_s and still is.
  bool still() const { return still_; }
  const StillnessConfig& config() const { return config_; }
  void set_config(const StillnessConfig& c) { config_ = c; }

 private:
  enum class Phase { moving, candidate, cooldown };

  StillnessConfig config_;
  Phase phase_ = Phase::moving;
  double since_us_ = 0.0;
  std::uint64_t cooldown_until_ = 0;
  bool still_ = false;
  bool have_prev_ = false;
  double prev_energy_ = 0.0;
  std::uint64_t prev_t_ = 0;
};

struct BrushState {
  int id = 0;
  CanvasPoint position;
  double energy = 0.0;  // m/s, raw
  double e = 0.0;       // normalized [0, 1]
  double width = 0.0;   // fraction of canvas height
  std::string texture;
  bool still = false;
  bool stale = true;
  std::uint64_t last_cycle_t_us = 0;

  friend bool operator==(const BrushState&, const BrushState&) = default;
};

struct CanvasEvent {
  enum class Kind { texture_cycle, scene_change, key_moment, param };
  Kind kind = Kind::texture_cycle;
  int brush_id = -1;   // texture_cycle only
  std::string value;   // texture, scene id, or parameter name
  double number = 0.0;  // param value

  friend bool operator==(const CanvasEvent&, const CanvasEvent&) = default;
};

struct CanvasFrameState {
  std::uint64_t t_us = 0;
  std::string scene_id;
  std::vector<BrushState> brushes;
  std::vector<CanvasEvent> events;
};

struct EngineConfig {
  double tick_hz = 60.0;
  StillnessConfig stillness;
  double w_min = 0.02;
  double w_max = 0.15;
  double stale_after_s = 0.5;
  double nominal_period_s = 0.01;
  double fade_half_life_s = 8.0;
  std::uint64_t seed = 0;
};

/// Reply to an operator command: an "ack" or "error" JSON object.
using CommandReply = nlohmann::ordered_json;

/// Live brush engine. Single owner; call tick() at a fixed cadence with the
/// ordered frames that arrived since the previous tick, and apply commands
/// between ticks.
class Engine {
 public:
  /// `profiles` maps each configured device id to its calibration profile.
  Engine(EngineConfig config, std::map<int, CalibrationProfile> profiles, SceneConfig scenes);

  /// Throws Error(ordering) if t_us does not increase.
  CanvasFrameState tick(std::uint64_t t_us, std::span<const SensorFrame> frames);

  /// set_param, trigger_key_moment and advance_scene. Never throws; invalid
  /// commands leave the engine untouched and produce an error reply.
  CommandReply handle_command(const nlohmann::json& msg);

  const EngineConfig& config() const { return config_; }
  const Sequencer& sequencer() const { return sequencer_; }
  const CalibrationProfile& profile(int device) const { return devices_.at(device).profile; }
  std::uint64_t rejected_frames() const { return rejected_frames_; }
  std::size_t device_count() const { return devices_.size(); }

 private:
  struct Device {
    CalibrationProfile profile;
    EnergyTracker tracker;
    StillnessDetector stillness;
    BrushState brush;
    std::optional<SensorFrame> latest;
    std::uint64_t last_arrival_tick_us = 0;
  };

  void assign_pool_textures();
  CommandReply set_param(const nlohmann::json& msg);

  EngineConfig config_;
  Sequencer sequencer_;
  std::map<int, Device> devices_;
  std::mt19937_64 rng_;
  std::optional<std::uint64_t> start_us_;
  std::uint64_t last_tick_us_ = 0;
  std::uint64_t rejected_frames_ = 0;
  std::vector<CanvasEvent> pending_events_;
};

}  // namespace motionbrush

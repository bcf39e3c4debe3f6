#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace motionbrush {

struct Scene {
  std::string id;
  double start_s = 0.0;  // offset from performance start
  std::vector<std::string> textures;
  std::string cue;  // operator-facing label, e.g. the section of the score
};

struct KeyMoment {
  double time_s = 0.0;
  std::string texture;
};

/// Timeline of scenes and key moments. Textures are relative asset paths
/// served to the renderer; the catalog is every pool texture plus the
/// paintings list.
struct SceneConfig {
  std::vector<Scene> scenes;
  std::vector<KeyMoment> key_moments;
  std::vector<std::string> paintings;
  double key_moment_duration_s = 30.0;
  std::string texture_root;  // directory holding the assets, may be empty

  bool in_catalog(const std::string& texture) const;
  std::size_t catalog_size() const;
  /// Every invariant violation, each prefixed with its location.
  std::vector<std::string> problems() const;
};

/// Throws Error(config) listing every problem found.
SceneConfig parse_scenes(const nlohmann::json& j, const std::string& source = "scenes");
/// A relative texture_root is taken relative to the file's directory.
SceneConfig load_scenes(const std::string& path);

/// Index of the scene with the greatest start_s <= t_s (the first scene
/// before the timeline starts).
std::size_t current_scene_index(double t_s, const SceneConfig& config);
const std::string& current_scene(double t_s, const SceneConfig& config);

/// Uniform draw from the pool, excluding `current` unless the pool has a
/// single entry.
std::string cycle_texture(const std::string& current, std::span<const std::string> pool,
                          std::mt19937_64& rng);

/// Stateful timeline driven by performance time.
class Sequencer {
 public:
  struct Update {
    bool scene_changed = false;
    std::optional<std::string> key_moment;  // painting that just took over
    bool takeover_ended = false;
  };

  explicit Sequencer(SceneConfig config);

  Update advance(double t_s);

  /// Operator override: jump to the next scene now. The clock can still
  /// move the timeline further ahead, never back. Returns the index the
  /// next advance() will show, or nothing at the last scene.
  std::optional<std::size_t> advance_scene();
  /// Starts a takeover at the next advance(). Throws Error(config) if the
  /// texture is not in the catalog.
  void trigger_key_moment(const std::string& texture);

  const Scene& scene() const { return config_.scenes[scene_index_]; }
  std::size_t scene_index() const { return scene_index_; }
  bool takeover_active() const { return takeover_texture_.has_value(); }
  const std::optional<std::string>& takeover_texture() const { return takeover_texture_; }
  const SceneConfig& config() const { return config_; }
  void set_key_moment_duration(double seconds) { config_.key_moment_duration_s = seconds; }

 private:
  SceneConfig config_;
  std::size_t scene_index_ = 0;
  std::size_t manual_floor_ = 0;
  std::size_t next_key_moment_ = 0;
  std::optional<std::string> pending_key_moment_;
  std::optional<std::string> takeover_texture_;
  double takeover_end_s_ = 0.0;
  bool started_ = false;
};

}  // namespace motionbrush

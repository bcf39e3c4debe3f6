#include "motionbrush/sequencer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "motionbrush/error.hpp"

namespace motionbrush {

bool SceneConfig::in_catalog(const std::string& texture) const {
  if (std::find(paintings.begin(), paintings.end(), texture) != paintings.end()) return true;
  return std::any_of(scenes.begin(), scenes.end(), [&](const Scene& s) {
    return std::find(s.textures.begin(), s.textures.end(), texture) != s.textures.end();
  });
}

std::size_t SceneConfig::catalog_size() const {
  std::set<std::string> all(paintings.begin(), paintings.end());
  for (const auto& s : scenes) all.insert(s.textures.begin(), s.textures.end());
  return all.size();
}

std::vector<std::string> SceneConfig::problems() const {
  std::vector<std::string> out;
  if (scenes.empty()) out.push_back("scenes: at least one scene is required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    const std::string where = "scenes[" + std::to_string(i) + "] '" + s.id + "'";
    if (s.id.empty()) out.push_back(where + ": missing id");
    if (!ids.insert(s.id).second) out.push_back(where + ": duplicate id");
    if (s.textures.empty()) out.push_back(where + ": texture pool is empty");
    if (s.start_s < 0.0) out.push_back(where + ": start_s is negative");
    if (i > 0 && !(s.start_s > scenes[i - 1].start_s))
      out.push_back(where + ": start_s must be greater than the previous scene's");
  }
  for (std::size_t i = 0; i < key_moments.size(); ++i) {
    const auto& k = key_moments[i];
    const std::string where = "key_moments[" + std::to_string(i) + "]";
    if (!in_catalog(k.texture)) out.push_back(where + ": texture '" + k.texture + "' is not in the catalog");
    if (k.time_s < 0.0) out.push_back(where + ": time_s is negative");
    if (i > 0 && !(k.time_s > key_moments[i - 1].time_s))
      out.push_back(where + ": time_s must be greater than the previous key moment's");
  }
  if (!(key_moment_duration_s > 0.0)) out.push_back("key_moment_duration_s must be positive");
  return out;
}

SceneConfig parse_scenes(const nlohmann::json& j, const std::string& source) {
  SceneConfig c;
  std::vector<std::string> problems;
  try {
    if (!j.is_object()) throw Error(ErrorCode::config, source + ": expected a JSON object");
    for (std::size_t i = 0; i < j.at("scenes").size(); ++i) {
      const auto& s = j.at("scenes")[i];
      Scene scene;
      scene.id = s.at("id").get<std::string>();
      scene.start_s = s.at("start_s").get<double>();
      scene.textures = s.value("textures", std::vector<std::string>{});
      scene.cue = s.value("cue", "");
      c.scenes.push_back(std::move(scene));
    }
    if (j.contains("key_moments")) {
      for (const auto& k : j.at("key_moments"))
        c.key_moments.push_back({k.at("time_s").get<double>(), k.at("texture").get<std::string>()});
    }
    c.paintings = j.value("paintings", std::vector<std::string>{});
    c.key_moment_duration_s = j.value("key_moment_duration_s", 30.0);
    c.texture_root = j.value("texture_root", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config, source + ": " + e.what());
  }
  problems = c.problems();
  if (!problems.empty()) {
    std::string msg = source + ": invalid scene config";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(ErrorCode::config, msg);
  }
  return c;
}

SceneConfig load_scenes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open scene config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::config, path + ": " + e.what());
  }
  SceneConfig c = parse_scenes(j, path);
  const std::filesystem::path root(c.texture_root);
  if (!c.texture_root.empty() && root.is_relative())
    c.texture_root = (std::filesystem::path(path).parent_path() / root).lexically_normal().string();
  return c;
}

std::size_t current_scene_index(double t_s, const SceneConfig& config) {
  const auto it = std::upper_bound(
      config.scenes.begin(), config.scenes.end(), t_s,
      [](double t, const Scene& s) { return t < s.start_s; });
  if (it == config.scenes.begin()) return 0;
  return static_cast<std::size_t>(it - config.scenes.begin()) - 1;
}

const std::string& current_scene(double t_s, const SceneConfig& config) {
  return config.scenes.at(current_scene_index(t_s, config)).id;
}

std::string cycle_texture(const std::string& current, std::span<const std::string> pool,
                          std::mt19937_64& rng) {
  if (pool.empty()) throw Error(ErrorCode::config, "texture pool is empty");
  if (pool.size() == 1) return pool[0];
  const auto pos = std::find(pool.begin(), pool.end(), current);
  if (pos == pool.end()) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
  }
  const auto excluded = static_cast<std::size_t>(pos - pool.begin());
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 2);
  std::size_t k = pick(rng);
  if (k >= excluded) ++k;
  return pool[k];
}

Sequencer::Sequencer(SceneConfig config) : config_(std::move(config)) {
  const auto problems = config_.problems();
  if (!problems.empty()) throw Error(ErrorCode::config, problems.front());
}

Sequencer::Update Sequencer::advance(double t_s) {
  Update u;
  const std::size_t idx = std::max(current_scene_index(t_s, config_), manual_floor_);
  if (started_ && idx != scene_index_) u.scene_changed = true;
  scene_index_ = idx;
  started_ = true;

  if (takeover_texture_ && t_s >= takeover_end_s_) {
    takeover_texture_.reset();
    u.takeover_ended = true;
  }

  while (next_key_moment_ < config_.key_moments.size() &&
         config_.key_moments[next_key_moment_].time_s <= t_s) {
    pending_key_moment_ = config_.key_moments[next_key_moment_].texture;
    ++next_key_moment_;
  }
  if (pending_key_moment_) {
    takeover_texture_ = std::move(pending_key_moment_);
    pending_key_moment_.reset();
    takeover_end_s_ = t_s + config_.key_moment_duration_s;
    u.key_moment = takeover_texture_;
    u.takeover_ended = false;
  }
  return u;
}

std::optional<std::size_t> Sequencer::advance_scene() {
  const std::size_t target = std::max(scene_index_, manual_floor_) + 1;
  if (target >= config_.scenes.size()) return std::nullopt;
  manual_floor_ = target;
  return target;
}

void Sequencer::trigger_key_moment(const std::string& texture) {
  if (!config_.in_catalog(texture))
    throw Error(ErrorCode::config, "texture '" + texture + "' is not in the catalog");
  pending_key_moment_ = texture;
}

}  // namespace motionbrush

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "motionbrush/error.hpp"
#include "motionbrush/sequencer.hpp"
#include "oracles.hpp"

using namespace motionbrush;

namespace {

SceneConfig three_scenes() {
  SceneConfig c;
  for (const auto& [id, start] : std::vector<std::pair<std::string, double>>{{"concrete", 0}, {"city", 60}, {"forest", 120}}) {
    Scene s;
    s.id = id;
    s.start_s = start;
    for (int i = 1; i <= 20; ++i) s.textures.push_back(id + "/" + std::to_string(i) + ".jpg");
    c.scenes.push_back(s);
  }
  c.paintings = {"paintings/a.jpg", "paintings/b.jpg"};
  c.key_moments = {{90, "paintings/a.jpg"}};
  c.key_moment_duration_s = 30;
  return c;
}

}  // namespace

TEST_SUITE("sequencer") {

TEST_CASE("current scene follows the timeline, boundaries belong to the later scene") {
  const auto c = three_scenes();
  CHECK(current_scene(0, c) == "concrete");
  CHECK(current_scene(59.999, c) == "concrete");
  CHECK(current_scene(60, c) == "city");
  CHECK(current_scene(119.9, c) == "city");
  CHECK(current_scene(120, c) == "forest");
  CHECK(current_scene(1e6, c) == "forest");
  CHECK(current_scene(-5, c) == "concrete");
}

TEST_CASE("cycle_texture never repeats the current texture and is uniform") {
  const auto c = three_scenes();
  const auto& pool = c.scenes[0].textures;
  std::mt19937_64 rng(5);
  std::map<std::string, int> hist;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const std::string next = cycle_texture(pool[3], pool, rng);
    CHECK(next != pool[3]);
    ++hist[next];
  }
  CHECK(hist.size() == pool.size() - 1);
  // Chi-square with 18 degrees of freedom; 42.3 is the 0.1% critical value.
  const double expect = static_cast<double>(draws) / static_cast<double>(pool.size() - 1);
  double chi2 = 0.0;
  for (const auto& [tex, n] : hist) chi2 += std::pow(n - expect, 2) / expect;
  CHECK(chi2 < 42.3);
}

TEST_CASE("cycle_texture edge cases") {
  std::mt19937_64 rng(1);
  const std::vector<std::string> one{"only.jpg"};
  CHECK(cycle_texture("only.jpg", one, rng) == "only.jpg");
  const std::vector<std::string> two{"a", "b"};
  for (int i = 0; i < 20; ++i) CHECK(cycle_texture("a", two, rng) == "b");
  CHECK_THROWS_AS(cycle_texture("a", std::vector<std::string>{}, rng), Error);
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) seen.insert(cycle_texture("elsewhere", two, rng));
  CHECK(seen.size() == 2);
}

TEST_CASE("scene changes are reported once") {
  Sequencer seq(three_scenes());
  CHECK_FALSE(seq.advance(0).scene_changed);
  CHECK_FALSE(seq.advance(30).scene_changed);
  CHECK(seq.advance(60).scene_changed);
  CHECK(seq.scene().id == "city");
  CHECK_FALSE(seq.advance(61).scene_changed);
}

TEST_CASE("key moment takes over for its duration") {
  Sequencer seq(three_scenes());
  seq.advance(0);
  CHECK_FALSE(seq.advance(89.9).key_moment);
  const auto u = seq.advance(90.0);
  REQUIRE(u.key_moment);
  CHECK(*u.key_moment == "paintings/a.jpg");
  CHECK(seq.takeover_active());
  CHECK_FALSE(seq.advance(119.9).takeover_ended);
  const auto end = seq.advance(120.0);
  CHECK(end.takeover_ended);
  CHECK(end.scene_changed);
  CHECK_FALSE(seq.takeover_active());
}

TEST_CASE("operator key moment and scene override") {
  Sequencer seq(three_scenes());
  seq.advance(0);
  seq.trigger_key_moment("paintings/b.jpg");
  CHECK_FALSE(seq.takeover_active());
  const auto u = seq.advance(1);
  REQUIRE(u.key_moment);
  CHECK(*u.key_moment == "paintings/b.jpg");
  CHECK_THROWS_AS(seq.trigger_key_moment("not/there.jpg"), Error);

  CHECK(seq.advance_scene() == 1u);
  CHECK(seq.advance(2).scene_changed);
  CHECK(seq.scene().id == "city");
  // The clock reaching the overridden scene's start changes nothing.
  CHECK_FALSE(seq.advance(60).scene_changed);
  CHECK(seq.advance_scene() == 2u);
  CHECK_FALSE(seq.advance_scene());
  CHECK(seq.advance(61).scene_changed);
  CHECK(seq.scene().id == "forest");
}

TEST_CASE("scene config validation lists every problem") {
  SceneConfig c = three_scenes();
  c.scenes[1].textures.clear();
  c.scenes[2].start_s = 10;
  c.key_moments.push_back({5, "missing.jpg"});
  const auto problems = c.problems();
  CHECK(problems.size() >= 3);
  CHECK_THROWS_AS(Sequencer{c}, Error);
}

TEST_CASE("parse scenes from JSON") {
  const auto j = nlohmann::json::parse(R"({
    "texture_root": "assets",
    "key_moment_duration_s": 12,
    "paintings": ["p/1.jpg"],
    "scenes": [{"id": "a", "start_s": 0, "textures": ["a/1.jpg", "a/2.jpg"], "cue": "intro"},
               {"id": "b", "start_s": 30, "textures": ["b/1.jpg"]}],
    "key_moments": [{"time_s": 40, "texture": "p/1.jpg"}]
  })");
  const auto c = parse_scenes(j);
  CHECK(c.scenes.size() == 2);
  CHECK(c.scenes[0].cue == "intro");
  CHECK(c.key_moment_duration_s == 12);
  CHECK(c.catalog_size() == 4);
  CHECK(c.texture_root == "assets");

  auto bad = j;
  bad["scenes"][1].erase("start_s");
  try {
    parse_scenes(bad, "show.json");
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    CHECK(std::string(e.what()).find("show.json") != std::string::npos);
  }
}

TEST_CASE("the shipped scene file loads") {
  const auto c = load_scenes(std::string(CONFIG_DIR) + "/scenes.json");
  CHECK(c.problems().empty());
  for (const auto& s : c.scenes) CHECK(s.textures.size() == 20);
  CHECK(c.catalog_size() == 303);
  CHECK(c.paintings.size() == 3);
  CHECK_THROWS_AS(load_scenes(std::string(CONFIG_DIR) + "/nope.json"), Error);
}

}  // TEST_SUITE

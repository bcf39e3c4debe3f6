#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "motionbrush/error.hpp"
#include "motionbrush/instrument.hpp"
#include "motionbrush/profile_io.hpp"
#include "motionbrush/simulator.hpp"
#include "oracles.hpp"

using namespace motionbrush;

namespace {

constexpr std::uint64_t kTickUs = 16'667;

std::map<int, CalibrationProfile> shipped_profiles() {
  std::map<int, CalibrationProfile> out;
  for (int d = 0; d < 4; ++d)
    out[d] = load_profile(std::string(CONFIG_DIR) + "/profiles/" +
                          std::string(to_string(default_placement(d))) + ".json");
  return out;
}

SceneConfig small_scenes() {
  SceneConfig c;
  for (const auto& [id, start] : std::vector<std::pair<std::string, double>>{{"city", 0}, {"forest", 600}}) {
    Scene s;
    s.id = id;
    s.start_s = start;
    for (int i = 0; i < 20; ++i) s.textures.push_back(id + "/" + std::to_string(i) + ".jpg");
    c.scenes.push_back(s);
  }
  c.paintings = {"paintings/1.jpg"};
  return c;
}

// Ticks the engine on the data clock, feeding frames with t <= tick time.
std::vector<CanvasFrameState> drive(Engine& engine, const std::vector<SensorFrame>& frames,
                                    std::uint64_t t_start, std::uint64_t t_end) {
  std::vector<CanvasFrameState> out;
  std::size_t next = 0;
  for (std::uint64_t t = t_start; t <= t_end; t += kTickUs) {
    std::vector<SensorFrame> batch;
    while (next < frames.size() && frames[next].t_us <= t) batch.push_back(frames[next++]);
    out.push_back(engine.tick(t, batch));
  }
  return out;
}

std::vector<SensorFrame> gesture(GestureKind k, std::uint64_t seed, double duration = 10.0,
                                 Placement p = Placement::right_upper_arm) {
  GestureScript g;
  g.kind = k;
  g.seed = seed;
  g.duration_s = duration;
  g.placement = p;
  g.start_t_us = 1'000'000;
  return sim_generate(g);
}

std::vector<std::uint64_t> run_detector(StillnessDetector& det, const std::function<double(double)>& energy,
                                        std::uint64_t t0, std::uint64_t t1) {
  std::vector<std::uint64_t> fires;
  for (std::uint64_t t = t0; t <= t1; t += kTickUs)
    if (det.update(energy(static_cast<double>(t) * 1e-6), t)) fires.push_back(t);
  return fires;
}

}  // namespace

TEST_SUITE("instrument") {

TEST_CASE("stillness: energy always above epsilon never fires") {
  StillnessDetector det;
  oracle::Rng rng(81);
  for (std::uint64_t t = 0; t < 600'000'000; t += kTickUs) CHECK_FALSE(det.update(0.15 + rng.uniform(0, 3), t));
}

TEST_CASE("stillness: a linear drop fires hold_s after the crossing, within one tick") {
  oracle::Rng rng(82);
  for (int trial = 0; trial < 500; ++trial) {
    StillnessConfig cfg{rng.uniform(0.05, 1.0), rng.uniform(0.2, 5.0), rng.uniform(0.0, 3.0)};
    StillnessDetector det(cfg);
    const double t_drop = rng.uniform(1.0, 3.0);
    // Slow enough that the ramp spans several ticks on both sides of epsilon.
    const double slope = cfg.epsilon * rng.uniform(0.3, 10.0);
    const double top = cfg.epsilon + slope * rng.uniform(0.05, 1.0);
    const double floor = cfg.epsilon / 2;
    auto energy = [&](double t) { return t < t_drop ? top : std::max(floor, top - slope * (t - t_drop)); };
    const double t_cross = t_drop + (top - cfg.epsilon) / slope;
    const std::uint64_t offset = rng.below(kTickUs);
    const auto fires = run_detector(det, energy, offset, static_cast<std::uint64_t>((t_cross + cfg.hold_s) * 1e6) + 100'000);
    REQUIRE(fires.size() >= 1);
    const double lag = static_cast<double>(fires[0]) * 1e-6 - (t_cross + cfg.hold_s);
    CHECK(lag >= -1e-6);
    CHECK(lag <= kTickUs * 1e-6);
  }
}

TEST_CASE("stillness: a dip one tick shorter than hold_s fires nothing") {
  for (double hold : {0.5, 1.5, 3.0}) {
    StillnessDetector det({0.15, hold, 1.0});
    const std::uint64_t start = 1'000'000;
    const auto ticks = static_cast<std::uint64_t>(std::floor(hold * 1e6 / kTickUs)) - 1;
    std::uint64_t t = 0;
    for (; t < start; t += kTickUs) CHECK_FALSE(det.update(1.0, t));
    for (std::uint64_t k = 0; k < ticks; ++k, t += kTickUs) CHECK_FALSE(det.update(0.01, t));
    for (int k = 0; k < 600; ++k, t += kTickUs) CHECK_FALSE(det.update(1.0, t));
  }
}

TEST_CASE("stillness: events stay at least hold + cooldown apart on a fuzzed 10-minute trace") {
  oracle::Rng rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    const StillnessConfig cfg{0.15, rng.uniform(0.3, 2.0), rng.uniform(0.0, 2.0)};
    StillnessDetector det(cfg);
    std::vector<std::pair<std::uint64_t, double>> trace;
    double level = 0.0;
    std::uint64_t seg_end = 0;
    for (std::uint64_t t = 0; t < 600'000'000; t += kTickUs) {
      if (t >= seg_end) {
        seg_end = t + static_cast<std::uint64_t>(rng.uniform(0.01, 4.0) * 1e6);
        level = rng.uniform() < 0.5 ? rng.uniform(0, 0.3) : rng.uniform(0.1, 0.2);
      }
      trace.push_back({t, std::max(0.0, level + 0.02 * rng.normal())});
    }
    std::vector<std::size_t> fired;
    for (std::size_t i = 0; i < trace.size(); ++i)
      if (det.update(trace[i].second, trace[i].first)) fired.push_back(i);
    CHECK(fired.size() > 5);
    for (std::size_t k = 1; k < fired.size(); ++k)
      CHECK(trace[fired[k]].first - trace[fired[k - 1]].first >=
            seconds_to_us(cfg.hold_s) + seconds_to_us(cfg.cooldown_s) - 1);
    // Every event is preceded by hold_s of sub-threshold samples.
    for (std::size_t i : fired) {
      const std::uint64_t t = trace[i].first;
      for (std::size_t j = i; j > 0 && trace[j].first + seconds_to_us(cfg.hold_s) > t + kTickUs; --j)
        CHECK(trace[j].second < cfg.epsilon);
    }
  }
}

TEST_CASE("stillness: continuous stillness repeats every hold + cooldown") {
  StillnessDetector det({0.15, 1.5, 1.0});
  std::vector<std::uint64_t> fires;
  for (std::uint64_t t = 0; t < 20'000'000; t += 10'000)
    if (det.update(0.0, t)) fires.push_back(t);
  REQUIRE(fires.size() == 8);
  CHECK(fires[0] == 1'500'000);
  for (std::size_t k = 1; k < fires.size(); ++k) CHECK(fires[k] - fires[k - 1] == 2'500'000);
  CHECK(det.still());
  det.update(1.0, 20'000'000);
  CHECK_FALSE(det.still());
}

TEST_CASE("engine: smooth input draws thin strokes, staccato broad ones") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Engine smooth(EngineConfig{}, shipped_profiles(), small_scenes());
    double sum = 0.0;
    int n = 0;
    for (const auto& s : drive(smooth, gesture(GestureKind::smooth, seed), 1'000'000, 11'000'000)) {
      const auto& b = s.brushes[0];
      CHECK(b.width == doctest::Approx(0.02 + b.e * 0.13));
      if (s.t_us >= 1'500'000) {
        sum += (b.width - 0.02) / (0.15 - 0.02);
        ++n;
      }
    }
    CHECK(sum / n < 0.3);

    Engine staccato(EngineConfig{}, shipped_profiles(), small_scenes());
    double peak = 0.0;
    for (const auto& s : drive(staccato, gesture(GestureKind::staccato, seed), 1'000'000, 11'000'000))
      peak = std::max(peak, (s.brushes[0].width - 0.02) / (0.15 - 0.02));
    CHECK(peak >= 0.9);
  }
}

TEST_CASE("engine: no input at all") {
  Engine engine(EngineConfig{}, shipped_profiles(), small_scenes());
  const auto states = drive(engine, {}, 0, 5'000'000);
  for (const auto& s : states) {
    REQUIRE(s.brushes.size() == 4);
    CHECK(s.events.empty());
    for (const auto& b : s.brushes) {
      CHECK(b.position == CanvasPoint{});
      CHECK(b.e == 0.0);
      CHECK(b.stale);
      CHECK_FALSE(b.still);
    }
  }
}

TEST_CASE("engine: a device that goes silent keeps its position, decays and turns stale") {
  Engine engine(EngineConfig{}, shipped_profiles(), small_scenes());
  const auto frames = gesture(GestureKind::staccato, 3, 3.0, Placement::left_wrist);
  const auto states = drive(engine, frames, 1'000'000, 6'000'000);
  const std::uint64_t last = frames.back().t_us;
  CanvasPoint at_stop;
  for (const auto& s : states) {
    const auto& b = s.brushes[1];
    if (s.t_us <= last + kTickUs && s.t_us >= last) at_stop = b.position;
    if (s.t_us > last + kTickUs) CHECK(b.position == at_stop);
    if (s.t_us >= last + 520'000) {
      CHECK(b.stale);
      CHECK(b.e == 0.0);
      CHECK(s.events.empty());
    }
    if (s.t_us < last) CHECK_FALSE(b.stale);
  }
}

TEST_CASE("engine: brush state invariants and determinism over a mixed performance") {
  const auto frames = simulate_performance(21, 60.0);
  EngineConfig cfg;
  cfg.seed = 99;
  Engine a(cfg, shipped_profiles(), small_scenes());
  Engine b(cfg, shipped_profiles(), small_scenes());
  const auto sa = drive(a, frames, frames.front().t_us, frames.back().t_us);
  const auto sb = drive(b, frames, frames.front().t_us, frames.back().t_us);
  REQUIRE(sa.size() == sb.size());
  std::size_t cycles = 0;
  std::map<int, std::uint64_t> last_cycle;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i].brushes == sb[i].brushes);
    CHECK(sa[i].events == sb[i].events);
    for (const auto& br : sa[i].brushes) {
      CHECK(br.position.x >= 0.0);
      CHECK(br.position.x <= 1.0);
      CHECK(br.position.y >= 0.0);
      CHECK(br.position.y <= 1.0);
      CHECK(br.e >= 0.0);
      CHECK(br.e <= 1.0);
      const auto& pool = a.sequencer().config().scenes[0].textures;
      CHECK(std::find(pool.begin(), pool.end(), br.texture) != pool.end());
    }
    for (const auto& ev : sa[i].events) {
      if (ev.kind != CanvasEvent::Kind::texture_cycle) continue;
      ++cycles;
      if (last_cycle.count(ev.brush_id))
        CHECK(sa[i].t_us - last_cycle[ev.brush_id] >= 2'500'000);
      last_cycle[ev.brush_id] = sa[i].t_us;
    }
  }
  CHECK(cycles > 0);
  EngineConfig other = cfg;
  other.seed = 100;
  Engine c(other, shipped_profiles(), small_scenes());
  const auto sc = drive(c, frames, frames.front().t_us, frames.back().t_us);
  bool differs = false;
  for (std::size_t i = 0; i < sa.size(); ++i) differs |= sa[i].brushes != sc[i].brushes;
  CHECK(differs);
}

TEST_CASE("engine: tick time must increase") {
  Engine engine(EngineConfig{}, shipped_profiles(), small_scenes());
  engine.tick(100, {});
  CHECK_THROWS_AS(engine.tick(100, {}), Error);
  CHECK_THROWS_AS(engine.tick(50, {}), Error);
}

TEST_CASE("engine: set_param acks carry the applied value and take effect next tick") {
  Engine engine(EngineConfig{}, shipped_profiles(), small_scenes());
  auto r = engine.handle_command({{"type", "set_param"}, {"name", "window_s"}, {"dev", 1}, {"value", 0.3}, {"id", 7}});
  CHECK(r["type"] == "ack");
  CHECK(r["value"] == 0.3);
  CHECK(r["dev"] == 1);
  CHECK(r["id"] == 7);
  CHECK(engine.profile(1).window_s == 0.3);
  CHECK(engine.profile(0).window_s == 0.5);

  const auto before = engine.config().stillness.epsilon;
  r = engine.handle_command({{"type", "set_param"}, {"name", "epsilon"}, {"dev", nullptr}, {"value", -1}});
  CHECK(r["type"] == "error");
  CHECK(r["code"] == "out_of_range");
  CHECK(engine.config().stillness.epsilon == before);

  r = engine.handle_command({{"type", "set_param"}, {"name", "epsilon"}, {"value", 0.3}});
  CHECK(r["type"] == "ack");
  CHECK(engine.config().stillness.epsilon == 0.3);

  CHECK(engine.handle_command({{"type", "set_param"}, {"name", "gain"}, {"value", 1}})["code"] == "unknown_param");
  CHECK(engine.handle_command({{"type", "set_param"}, {"name", "w_min"}, {"value", 0.2}})["code"] == "out_of_range");
  CHECK(engine.handle_command({{"type", "set_param"}, {"name", "window_s"}, {"dev", 9}, {"value", 0.2}})["code"] ==
        "invalid_device");
  CHECK(engine.handle_command({{"type", "set_param"}, {"name", "hold_s"}, {"dev", 0}, {"value", 0.2}})["code"] ==
        "invalid_device");
  CHECK(engine.handle_command({{"type", "set_param"}, {"name", "hold_s"}, {"value", "x"}})["code"] == "bad_request");
  CHECK(engine.handle_command({{"type", "dance"}})["code"] == "unknown_command");
  CHECK(engine.handle_command(nlohmann::json::array())["code"] == "bad_request");

  r = engine.handle_command({{"type", "set_param"}, {"name", "w_max"}, {"value", 0.5}});
  CHECK(r["type"] == "ack");
  const auto s = engine.tick(1, {});
  CHECK(s.brushes[0].width == 0.02);
  CHECK(engine.config().w_max == 0.5);
}

TEST_CASE("engine: fade half-life changes are announced on the feed") {
  Engine engine(EngineConfig{}, shipped_profiles(), small_scenes());
  CHECK(engine.handle_command({{"type", "set_param"}, {"name", "fade_half_life"}, {"value", 4}})["type"] == "ack");
  const auto s = engine.tick(1, {});
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].kind == CanvasEvent::Kind::param);
  CHECK(s.events[0].value == "fade_half_life");
  CHECK(s.events[0].number == 4);
}

TEST_CASE("engine: key moment takeover end to end") {
  SceneConfig scenes = small_scenes();
  scenes.key_moment_duration_s = 5;
  Engine engine(EngineConfig{}, shipped_profiles(), scenes);
  // All four devices hold still, so stillness fires repeatedly.
  std::vector<SensorFrame> frames;
  for (int d = 0; d < 4; ++d) {
    auto fs = gesture(GestureKind::still, static_cast<std::uint64_t>(d), 20.0, default_placement(d));
    frames.insert(frames.end(), fs.begin(), fs.end());
  }
  std::sort(frames.begin(), frames.end(), [](auto& a, auto& b) {
    return a.t_us != b.t_us ? a.t_us < b.t_us : a.device_id < b.device_id;
  });

  std::size_t next = 0;
  std::uint64_t t = 1'000'000;
  auto step = [&] {
    std::vector<SensorFrame> batch;
    while (next < frames.size() && frames[next].t_us <= t) batch.push_back(frames[next++]);
    auto s = engine.tick(t, batch);
    t += kTickUs;
    return s;
  };
  for (int i = 0; i < 120; ++i) step();

  const auto reply = engine.handle_command({{"type", "trigger_key_moment"}, {"tex", "paintings/1.jpg"}});
  CHECK(reply["type"] == "ack");
  CHECK(engine.handle_command({{"type", "trigger_key_moment"}, {"tex", "nope.jpg"}})["code"] == "unknown_texture");

  auto s = step();
  REQUIRE_FALSE(s.events.empty());
  CHECK(s.events[0].kind == CanvasEvent::Kind::key_moment);
  for (const auto& b : s.brushes) CHECK(b.texture == "paintings/1.jpg");

  // During the takeover stillness does not change textures or emit cycles.
  const std::uint64_t end = s.t_us + 5'000'000;
  while (t < end - kTickUs) {
    s = step();
    for (const auto& b : s.brushes) CHECK(b.texture == "paintings/1.jpg");
    for (const auto& e : s.events) CHECK(e.kind != CanvasEvent::Kind::texture_cycle);
  }
  // Afterwards textures come from the scene pool again.
  bool cycled = false;
  for (int i = 0; i < 400; ++i) {
    s = step();
    const auto& pool = scenes.scenes[0].textures;
    if (s.t_us >= end)
      for (const auto& b : s.brushes) CHECK(std::find(pool.begin(), pool.end(), b.texture) != pool.end());
    for (const auto& e : s.events) cycled |= e.kind == CanvasEvent::Kind::texture_cycle;
  }
  CHECK(cycled);
}

TEST_CASE("engine: operator scene advance") {
  Engine engine(EngineConfig{}, shipped_profiles(), small_scenes());
  engine.tick(1, {});
  auto r = engine.handle_command({{"type", "advance_scene"}, {"id", "x"}});
  CHECK(r["type"] == "ack");
  CHECK(r["scene"] == "forest");
  CHECK(r["id"] == "x");
  const auto s = engine.tick(2, {});
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].kind == CanvasEvent::Kind::scene_change);
  CHECK(s.scene_id == "forest");
  for (const auto& b : s.brushes) CHECK(b.texture.rfind("forest/", 0) == 0);
  CHECK(engine.handle_command({{"type", "advance_scene"}})["type"] == "error");
}

TEST_CASE("engine: frames for unconfigured devices are ignored") {
  std::map<int, CalibrationProfile> one{{2, CalibrationProfile{}}};
  one[2].placement = Placement::left_ankle;
  Engine engine(EngineConfig{}, one, small_scenes());
  CHECK(engine.device_count() == 1);
  SensorFrame f;
  f.device_id = 0;
  f.t_us = 10;
  const auto s = engine.tick(100, std::vector<SensorFrame>{f});
  REQUIRE(s.brushes.size() == 1);
  CHECK(s.brushes[0].id == 2);
}

TEST_CASE("engine: construction errors") {
  CHECK_THROWS_AS(Engine(EngineConfig{}, {}, small_scenes()), Error);
  EngineConfig bad;
  bad.w_min = 0.5;
  bad.w_max = 0.4;
  CHECK_THROWS_AS(Engine(bad, shipped_profiles(), small_scenes()), Error);
}

}  // TEST_SUITE

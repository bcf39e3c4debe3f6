#include <doctest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "motionbrush/error.hpp"
#include "motionbrush/pipeline.hpp"
#include "motionbrush/profile_io.hpp"
#include "motionbrush/simulator.hpp"

using namespace motionbrush;
namespace fs = std::filesystem;

namespace {

const std::string kConfig = CONFIG_DIR;
const std::string kCli = MOTIONBRUSH_CLI;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mb_pipeline_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI with stderr captured; returns the exit code.
int cli(const std::string& args, std::string* err = nullptr) {
  const auto err_path = scratch("stderr.txt");
  const std::string cmd = "\"" + kCli + "\" " + args + " >/dev/null 2>\"" + err_path.string() + "\"";
  const int status = std::system(cmd.c_str());
  if (err) *err = slurp(err_path);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string perform_args(const std::string& source) {
  return "perform --source " + source + " --profiles \"" + kConfig + "/profiles\" --scenes \"" + kConfig +
         "/scenes.json\" --feed-port 0 --speed max";
}

class CollectSink final : public FeedSink {
 public:
  void publish(const std::string& msg) override { messages.push_back(msg); }
  std::vector<std::string> messages;
};

std::map<int, CalibrationProfile> shipped() {
  return load_profiles(kConfig + "/profiles", SessionHeader::with_default_placements("", 0).placements);
}

std::uint16_t free_port() {
  boost::asio::io_context io;
  boost::asio::ip::tcp::acceptor a(io, {boost::asio::ip::tcp::v4(), 0});
  return a.local_endpoint().port();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("source specs") {
  CHECK(SourceSpec::parse("sim").kind == SourceSpec::Kind::sim);
  const auto udp = SourceSpec::parse("udp:9000");
  CHECK(udp.kind == SourceSpec::Kind::udp);
  CHECK(udp.port == 9000);
  CHECK(SourceSpec::parse("tcp:0").kind == SourceSpec::Kind::tcp);
  const auto replay = SourceSpec::parse("replay:/tmp/a:b.jsonl");
  CHECK(replay.kind == SourceSpec::Kind::replay);
  CHECK(replay.path == "/tmp/a:b.jsonl");
  for (const char* bad : {"", "udp", "udp:", "udp:70000", "udp:12x", "replay:", "serial:1"})
    CHECK_THROWS_AS(SourceSpec::parse(bad), Error);
}

TEST_CASE("profiles load per placement") {
  const auto profiles = shipped();
  REQUIRE(profiles.size() == 4);
  CHECK(profiles.at(0).placement == Placement::right_upper_arm);
  CHECK(profiles.at(3).placement == Placement::right_ankle);
  try {
    load_profiles("/nonexistent", {{0, Placement::left_wrist}});
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
    CHECK(std::string(e.what()).find("/nonexistent/left_wrist.json") != std::string::npos);
  }
  const auto dir = scratch("mismatch");
  fs::create_directories(dir);
  CalibrationProfile p;
  p.placement = Placement::left_ankle;
  save_profile(p, (dir / "left_wrist.json").string());
  CHECK_THROWS_AS(load_profiles(dir.string(), {{1, Placement::left_wrist}}), Error);
}

TEST_CASE("tick statistics use nearest rank") {
  std::vector<double> xs;
  for (int i = 100; i >= 1; --i) xs.push_back(i);
  const auto s = summarize(xs);
  CHECK(s.ticks == 100);
  CHECK(s.median_us == 50);
  CHECK(s.p99_us == 99);
  CHECK(s.max_us == 100);
  CHECK(summarize({}).ticks == 0);
}

TEST_CASE("data-clock driver ticks at 60 Hz, loses nothing and paces by speed") {
  const auto frames = simulate_performance(4, 10.0);
  Engine engine(EngineConfig{}, shipped(), load_scenes(kConfig + "/scenes.json"));
  CollectSink sink;
  FakeClock clock(5'000'000);
  std::size_t seen = 0;
  int between = 0;
  const auto stats = run_on_data_clock(engine, frames, sink, clock, 2.0, 20.0,
                                       [&](const SensorFrame&) { ++seen; }, [&] { ++between; });
  const std::uint64_t span = frames.back().t_us - frames.front().t_us;
  const auto expected_ticks = static_cast<std::size_t>(span / 16'667) + 1;
  CHECK(stats.ticks >= expected_ticks);
  CHECK(stats.ticks <= expected_ticks + 1);
  CHECK(between == static_cast<int>(stats.ticks));
  CHECK(stats.frames_in == frames.size());
  CHECK(seen == frames.size());
  CHECK(stats.frames_dropped == 0);
  CHECK(stats.messages == sink.messages.size());
  CHECK(clock.now_us() - 5'000'000 >= span / 2);
  CHECK(clock.now_us() - 5'000'000 <= span / 2 + 16'667);
  std::size_t frames_msgs = 0;
  for (const auto& m : sink.messages) frames_msgs += nlohmann::json::parse(m)["type"] == "frame";
  CHECK(frames_msgs == stats.ticks);
}

TEST_CASE("data-clock driver output depends only on the input and the seed") {
  const auto frames = simulate_performance(8, 20.0);
  auto run = [&](std::uint64_t seed) {
    EngineConfig cfg;
    cfg.seed = seed;
    Engine engine(cfg, shipped(), load_scenes(kConfig + "/scenes.json"));
    CollectSink sink;
    FakeClock clock;
    run_on_data_clock(engine, frames, sink, clock, std::numeric_limits<double>::infinity());
    return sink.messages;
  };
  CHECK(run(1) == run(1));
  CHECK(run(1) != run(2));
}

TEST_CASE("headless simulated performance") {
  PerformOptions o;
  o.source = SourceSpec::parse("sim");
  o.profiles_dir = kConfig + "/profiles";
  o.scenes_path = kConfig + "/scenes.json";
  o.feed_port = 0;
  o.duration_s = 10;
  o.speed = std::numeric_limits<double>::infinity();
  std::atomic<bool> stop{false};
  TickStats stats;
  CHECK(run_perform(o, stop, &stats) == 0);
  CHECK(stats.frames_in == 4000);
  CHECK(stats.frames_dropped == 0);
  CHECK(stats.ticks >= 600);

  o.profiles_dir = "/nonexistent";
  CHECK(run_perform(o, stop) == 2);
  o.profiles_dir = kConfig + "/profiles";
  o.source = SourceSpec::parse("replay:/nonexistent/session.jsonl");
  CHECK(run_perform(o, stop) == 4);
}

TEST_CASE("record command over /control") {
  namespace asio = boost::asio;
  namespace websocket = boost::beast::websocket;
  const auto port = free_port();
  const auto rec_path = scratch("live.mbsession.jsonl");
  fs::remove(rec_path);
  PerformOptions o;
  o.source = SourceSpec::parse("sim");
  o.profiles_dir = kConfig + "/profiles";
  o.scenes_path = kConfig + "/scenes.json";
  o.feed_port = port;
  o.duration_s = 4;
  std::atomic<bool> stop{false};
  int rc = -1;
  std::thread perform([&] { rc = run_perform(o, stop); });

  asio::io_context io;
  websocket::stream<asio::ip::tcp::socket> ws(io);
  bool connected = false;
  for (int attempt = 0; attempt < 200 && !connected; ++attempt) {
    try {
      ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), port});
      ws.handshake("127.0.0.1", "/control");
      connected = true;
    } catch (const std::exception&) {
      boost::system::error_code ignored;
      ws.next_layer().close(ignored);
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  REQUIRE(connected);
  auto roundtrip = [&](const nlohmann::json& msg) {
    ws.text(true);
    ws.write(asio::buffer(msg.dump()));
    boost::beast::flat_buffer buf;
    ws.read(buf);
    return nlohmann::json::parse(boost::beast::buffers_to_string(buf.data()));
  };
  auto r = roundtrip({{"type", "record"}, {"action", "start"}, {"path", rec_path.string()}, {"id", 1}});
  CHECK(r["type"] == "ack");
  CHECK(r["id"] == 1);
  CHECK(roundtrip({{"type", "record"}, {"action", "start"}})["code"] == "already_recording");
  std::this_thread::sleep_for(std::chrono::milliseconds(700));
  r = roundtrip({{"type", "record"}, {"action", "stop"}});
  CHECK(r["type"] == "ack");
  CHECK(r["path"] == rec_path.string());
  CHECK(roundtrip({{"type", "record"}, {"action", "stop"}})["code"] == "not_recording");
  CHECK(roundtrip({{"type", "record"}, {"action", "pause"}})["code"] == "bad_request");
  CHECK(roundtrip({{"type", "advance_scene"}})["type"] == "ack");
  perform.join();
  CHECK(rc == 0);

  const auto session = read_session_file(rec_path.string());
  CHECK(session.frames.size() > 100);
  CHECK(session.frames.size() < 4 * 400);
  CHECK(session.header.profiles.size() == 4);
}

TEST_CASE("cli: exit codes") {
  std::string err;
  CHECK(cli("", &err) == 2);
  CHECK(cli("--help") == 0);
  CHECK(cli("frobnicate") == 2);

  const auto missing_profiles = "perform --source sim --profiles /nonexistent/profiles --scenes \"" + kConfig +
                                "/scenes.json\" --feed-port 0 --speed max --duration 1";
  CHECK(cli(missing_profiles, &err) == 2);
  CHECK(err.find("/nonexistent/profiles/right_upper_arm.json") != std::string::npos);
  CHECK(cli(perform_args("serial:3"), &err) == 2);

  const auto session = scratch("cli.mbsession.jsonl");
  CHECK(cli("simulate --seed 3 --duration 12 --out \"" + session.string() + "\"") == 0);
  CHECK(cli("analyze energy --input \"" + session.string() + "\" --placement nose", &err) == 2);
  CHECK(err.find("nose") != std::string::npos);
  CHECK(cli("analyze energy --input \"" + session.string() + "\" --placement left_wrist --window 20") == 2);
  CHECK(cli("analyze energy --input /nonexistent.jsonl --placement left_wrist", &err) == 4);
  CHECK(cli("analyze energy --input \"" + session.string() + "\" --placement left_wrist --out /nonexistent/x.csv") ==
        4);

  for (const char* kind : {"energy", "path", "heatmap", "bounds"}) {
    const auto out = scratch(std::string(kind) + ".out");
    CHECK(cli("analyze " + std::string(kind) + " --input \"" + session.string() +
              "\" --placement right_ankle --out \"" + out.string() + "\"") == 0);
    CHECK(fs::file_size(out) > 0);
  }
  const auto json_out = scratch("heatmap.json");
  CHECK(cli("analyze heatmap --format json --n-lat 6 --n-lon 12 --input \"" + session.string() +
            "\" --placement right_ankle --out \"" + json_out.string() + "\"") == 0);
  CHECK(nlohmann::json::parse(slurp(json_out))["counts"].size() == 72);

  // Nothing but staccato: no stillness to anchor the reference pose.
  SessionRecording staccato;
  staccato.header = SessionHeader::with_default_placements("staccato", 0);
  GestureScript g;
  g.kind = GestureKind::staccato;
  g.duration_s = 15;
  staccato.frames = sim_generate(g);
  const auto staccato_path = scratch("staccato.mbsession.jsonl");
  write_session_file(staccato, staccato_path.string());
  const auto prof_out = scratch("profile.json");
  CHECK(cli("calibrate --input \"" + staccato_path.string() + "\" --placement right_upper_arm --out \"" +
                prof_out.string() + "\"",
            &err) == 3);
  CHECK_FALSE(err.empty());
  CHECK(cli("calibrate --input /nonexistent.jsonl --placement right_upper_arm --out \"" + prof_out.string() +
            "\"") == 4);
  CHECK(cli(perform_args("replay:/nonexistent.jsonl")) == 4);
}

TEST_CASE("cli: replay through the engine is reproducible") {
  const auto session = scratch("replay.mbsession.jsonl");
  REQUIRE(cli("simulate --seed 11 --duration 20 --out \"" + session.string() + "\"") == 0);
  const auto log_a = scratch("feed_a.jsonl");
  const auto log_b = scratch("feed_b.jsonl");
  CHECK(cli(perform_args("replay:\"" + session.string() + "\"") + " --seed 5 --feed-log \"" + log_a.string() + "\"") ==
        0);
  CHECK(cli(perform_args("replay:\"" + session.string() + "\"") + " --seed 5 --feed-log \"" + log_b.string() + "\"") ==
        0);
  const auto a = slurp(log_a);
  CHECK(a.size() > 0);
  CHECK(a == slurp(log_b));
  CHECK(cli(perform_args("sim") + " --duration 10") == 0);
}

}  // TEST_SUITE

#include <cmath>

#include "ccity/digest.hpp"
#include "ccity/engine.hpp"
#include "ccity/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ccity;

namespace {

VehicleSpec vehicle(std::string id, std::string spline, double offset,
                    std::vector<Action> actions = {}) {
  VehicleSpec v;
  v.id = std::move(id);
  v.spawn_spline = std::move(spline);
  v.spawn_offset = offset;
  v.actions = std::move(actions);
  return v;
}

ScenarioConfig toy_pair(std::vector<Action> actions) {
  ScenarioConfig c;
  c.scenario_id = "pair";
  c.mode = Mode::kToy;
  c.vehicles = {vehicle("lead", "h1_1_E0", 40.0, actions), vehicle("tail", "h1_1_E0", 10.0, actions)};
  c.causal_edges = {{"lead", "tail"}};
  return c;
}

ErrorKind corrupt_kind(const std::string& text) {
  try {
    parse_log(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("log parsed");
  return ErrorKind::kIoError;
}

}  // namespace

TEST_CASE("runs are deterministic and have the configured frame count") {
  const auto net = build_grid(GridParams{});
  ScenarioConfig c = toy_pair({Action::kLeft});
  c.mode = Mode::kAgency;
  c.signal_schedule = default_schedule();
  const auto a = run(c, net);
  const auto b = run(c, net);
  CHECK(serialize_log(a) == serialize_log(b));
  REQUIRE(a.frames.size() == 150);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].frame_index == static_cast<int>(i));
    CHECK(a.frames[i].t == doctest::Approx(static_cast<double>(i)));
    CHECK(a.frames[i].vehicles.size() == 2);
    CHECK(a.frames[i].lights.size() == net.intersections().size());
  }
  CHECK(a.config_digest == sha256_hex(serialize_scenario(c)));
  CHECK(a.ground_truth == c.ground_truth());
}

TEST_CASE("logged numbers are rounded to six decimals") {
  const auto net = build_grid(GridParams{});
  ScenarioConfig c = toy_pair({Action::kRight});
  c.mode = Mode::kAgency;
  const auto log = run(c, net);
  for (const auto& f : log.frames) {
    for (const auto& [id, v] : f.vehicles) {
      for (double x : {v.x, v.y, v.yaw, v.v}) {
        CHECK(std::abs(x * 1e6 - std::round(x * 1e6)) < 1e-3);
        CHECK_FALSE((std::signbit(x) && x == 0.0));
      }
    }
  }
  CHECK(round_for_log(-1e-9) == 0.0);
  CHECK_FALSE(std::signbit(round_for_log(-1e-9)));
  CHECK(round_for_log(1.23456749) == 1.234567);
}

TEST_CASE("toy pair on a straight road keeps 30 units of separation") {
  const auto net = build_grid(GridParams{});
  const auto log = run(toy_pair({}), net);
  int both = 0;
  for (const auto& f : log.frames) {
    const auto& l = f.vehicles.at("lead");
    const auto& t = f.vehicles.at("tail");
    if (l.done || t.done) continue;
    ++both;
    CHECK(std::hypot(l.x - t.x, l.y - t.y) == doctest::Approx(30.0).epsilon(1e-7));
  }
  CHECK(both > 100);
}

TEST_CASE("toy follower replays the leader 15 frames later through turns") {
  const auto net = build_grid(GridParams{});
  const auto log = run(toy_pair({Action::kLeft, Action::kRight}), net);
  int compared = 0;
  for (std::size_t f = 0; f + 15 < log.frames.size(); ++f) {
    const auto& l = log.frames[f].vehicles.at("lead");
    const auto& t = log.frames[f + 15].vehicles.at("tail");
    if (l.done || t.done) continue;
    ++compared;
    CHECK(std::abs(l.x - t.x) <= 2e-6);
    CHECK(std::abs(l.y - t.y) <= 2e-6);
  }
  CHECK(compared > 50);
}

TEST_CASE("toy vehicles do not interact") {
  const auto net = build_grid(GridParams{});
  ScenarioConfig both = toy_pair({Action::kLeft});
  both.vehicles.push_back(vehicle("cross", "v1_1_N0", 0.0, {Action::kRight}));
  const auto together = run(both, net);
  for (const auto& v : both.vehicles) {
    ScenarioConfig alone = both;
    alone.causal_edges.clear();
    alone.vehicles = {v};
    const auto solo = run(alone, net);
    for (std::size_t f = 0; f < solo.frames.size(); ++f) {
      CHECK(solo.frames[f].vehicles.at(v.id) == together.frames[f].vehicles.at(v.id));
    }
  }
}

TEST_CASE("finished vehicles freeze") {
  const auto net = build_grid(3, 3, 100, 3);
  ScenarioConfig c = toy_pair({});
  c.network = {3, 3, 100, 3, 1};
  const auto log = run(c, net);
  bool seen = false;
  VehicleFrame last;
  for (const auto& f : log.frames) {
    const auto& v = f.vehicles.at("lead");
    if (seen) {
      CHECK(v == last);
    } else if (v.done) {
      seen = true;
      last = v;
      CHECK(v.x == doctest::Approx(net.extent().x));
    }
  }
  CHECK(seen);
}

TEST_CASE("single agency vehicle reaches target speed on schedule") {
  const auto net = build_grid(GridParams{});
  ScenarioConfig c;
  c.scenario_id = "solo";
  c.mode = Mode::kAgency;
  c.frame_period = 0.1;
  c.duration_frames = 100;
  c.vehicles = {vehicle("a", "h1_1_E0", 0.0)};
  c.vehicles[0].target_speed = 6.0;
  const auto log = run(c, net);
  int first = -1;
  for (const auto& f : log.frames) {
    if (f.vehicles.at("a").v >= 6.0 - 1e-9) {
      if (first < 0) first = f.frame_index;
      CHECK(f.vehicles.at("a").v == 6.0);
    }
  }
  // v / a_max = 3 s, within one tick.
  REQUIRE(first >= 0);
  CHECK(std::abs(first * 0.1 - 3.0) <= 0.1 + 1e-9);
}

TEST_CASE("overlapping spawns collide and stall for five seconds") {
  const auto net = build_grid(GridParams{});
  ScenarioConfig c;
  c.scenario_id = "crash";
  c.mode = Mode::kAgency;
  c.vehicles = {vehicle("a", "h1_1_E0", 10.0), vehicle("b", "h1_1_E0", 12.0)};
  const auto log = run(c, net);
  REQUIRE(log.collisions.size() == 1);
  CHECK(log.collisions[0].id_a == "a");
  CHECK(log.collisions[0].id_b == "b");
  CHECK(log.collisions[0].t == doctest::Approx(0.1));
  // The contact happens on the first tick, so frame 1 holds the stalled pose.
  for (int f = 1; f <= 5; ++f) {
    for (const char* id : {"a", "b"}) {
      CHECK(log.frames[f].vehicles.at(id).x == log.frames[1].vehicles.at(id).x);
      CHECK(log.frames[f].vehicles.at(id).v == 0.0);
    }
  }
  CHECK(log.frames[7].vehicles.at("b").x > log.frames[1].vehicles.at("b").x);
}

TEST_CASE("agency pair separation varies under signals") {
  const auto net = build_grid(GridParams{});
  ScenarioConfig c = toy_pair({Action::kStraight, Action::kLeft});
  c.mode = Mode::kAgency;
  c.signal_schedule = default_schedule();
  for (auto& v : c.vehicles) v.target_speed = 5.0;
  const auto log = run(c, net);
  double lo = 1e9, hi = 0;
  for (const auto& f : log.frames) {
    const auto& l = f.vehicles.at("lead");
    const auto& t = f.vehicles.at("tail");
    if (l.done || t.done) continue;
    const double d = std::hypot(l.x - t.x, l.y - t.y);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  CHECK(hi - lo > 1.0);
}

TEST_CASE("configs that do not fit the network are rejected") {
  const auto net = build_grid(GridParams{});
  ScenarioConfig c = toy_pair({});
  c.vehicles[0].spawn_spline = "nowhere";
  try {
    run(c, net);
    FAIL("ran");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidationFailed);
  }
}

TEST_CASE("log container round trip and corruption") {
  const auto net = build_grid(GridParams{});
  ScenarioConfig c = toy_pair({Action::kLeft});
  c.mode = Mode::kAgency;
  c.signal_schedule = default_schedule();
  c.vehicles.push_back(vehicle("crash", "h1_1_E0", 11.0));
  const auto log = run(c, net);
  REQUIRE_FALSE(log.collisions.empty());
  const auto text = serialize_log(log);
  CHECK(parse_log(text) == log);
  CHECK(serialize_log(parse_log(text)) == text);

  ccity::testing::TempDir dir;
  write_log(log, dir.path() / "x.simlog.jsonl");
  CHECK(read_log(dir.path() / "x.simlog.jsonl") == log);

  CHECK(corrupt_kind(text.substr(0, text.size() - 1)) == ErrorKind::kCorruptLog);
  CHECK(corrupt_kind(text.substr(0, text.size() / 2)) == ErrorKind::kCorruptLog);
  // Drop the second frame line.
  const auto l1 = text.find('\n');
  const auto l2 = text.find('\n', l1 + 1);
  CHECK(corrupt_kind(text.substr(0, l1 + 1) + text.substr(l2 + 1)) == ErrorKind::kCorruptLog);
  // Edit one coordinate.
  std::string edited = text;
  const auto x = edited.find("\"x\":", l1);
  edited[x + 5] = edited[x + 5] == '1' ? '2' : '1';
  CHECK(corrupt_kind(edited) == ErrorKind::kCorruptLog);
  CHECK(corrupt_kind("") == ErrorKind::kCorruptLog);
  CHECK(corrupt_kind("not json\n{}\n") == ErrorKind::kCorruptLog);

  try {
    read_log(dir.path() / "missing.simlog.jsonl");
    FAIL("read a missing file");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIoError);
  }
}

TEST_CASE("header carries the ground truth") {
  const auto net = build_grid(GridParams{});
  const auto log = run(toy_pair({}), net);
  const auto text = serialize_log(log);
  const auto header = text.substr(0, text.find('\n'));
  CHECK(header.find("\"edges\":[[\"lead\",\"tail\"]]") != std::string::npos);
  CHECK(header.find("\"nodes\":[\"lead\",\"tail\"]") != std::string::npos);
}

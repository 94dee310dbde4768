#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "ccity/rng.hpp"
#include "ccity/road_network.hpp"
#include "ccity/scenario.hpp"

namespace ccity::testing {

// Lane coordinates recovered from a lane spline id, e.g. "h1_2_E0".
struct LaneRef {
  char dir = 'E';  // E, W, N, S
  int road = 0;    // row for E/W, column for N/S
  int seg = 0;
};

inline std::optional<LaneRef> parse_lane(const std::string& id) {
  char kind = 0, dir = 0;
  int a = 0, b = 0, k = 0;
  if (std::sscanf(id.c_str(), "%c%d_%d_%c%d", &kind, &a, &b, &dir, &k) != 5) return std::nullopt;
  if (kind != 'h' && kind != 'v') return std::nullopt;
  return LaneRef{dir, a, b};
}

struct Cell {
  int r = 0;
  int c = 0;
};

inline Cell step(Cell p, char dir) {
  switch (dir) {
    case 'E': return {p.r, p.c + 1};
    case 'W': return {p.r, p.c - 1};
    case 'N': return {p.r + 1, p.c};
    default: return {p.r - 1, p.c};
  }
}

inline char turn(char dir, Action a) {
  const std::string ring = "ENWS";  // counter-clockwise
  const auto i = ring.find(dir);
  if (a == Action::kLeft) return ring[(i + 1) % 4];
  if (a == Action::kRight) return ring[(i + 3) % 4];
  return dir;
}

struct WalkResult {
  int crossings = 0;
  char final_dir = 'E';
};

// Integer-lattice walk of a turn-only action list. nullopt when a turn is
// requested with no intersection ahead.
inline std::optional<WalkResult> lattice_walk(const LaneRef& lane, int rows, int cols,
                                              const std::vector<Action>& actions) {
  Cell p;
  switch (lane.dir) {
    case 'E': p = {lane.road, lane.seg}; break;
    case 'W': p = {lane.road, lane.seg - 1}; break;
    case 'N': p = {lane.seg, lane.road}; break;
    default: p = {lane.seg - 1, lane.road}; break;
  }
  const auto inside = [&](Cell q) { return q.r >= 0 && q.r < rows && q.c >= 0 && q.c < cols; };
  WalkResult w;
  w.final_dir = lane.dir;
  for (Action a : actions) {
    if (!inside(p)) return std::nullopt;
    w.final_dir = turn(w.final_dir, a);
    p = step(p, w.final_dir);
    ++w.crossings;
  }
  while (inside(p)) {
    p = step(p, w.final_dir);
    ++w.crossings;
  }
  return w;
}

inline Direction direction_of(char dir) {
  switch (dir) {
    case 'E': return Direction::kEW;
    case 'W': return Direction::kWE;
    case 'N': return Direction::kNS;
    default: return Direction::kSN;
  }
}

// Random config satisfying every invariant; spawn splines are arbitrary text.
inline ScenarioConfig random_valid_config(Rng& rng) {
  ScenarioConfig c;
  c.scenario_id = "s" + std::to_string(rng.below(1000000));
  c.mode = rng.below(2) ? Mode::kAgency : Mode::kToy;
  c.seed = rng.next_u64();
  c.duration_frames = 1 + static_cast<int>(rng.below(500));
  const double ticks[] = {0.1, 0.05, 0.25, 0.5, 1.0};
  c.tick_dt = ticks[rng.below(5)];
  c.frame_period = c.tick_dt * static_cast<double>(1 + rng.below(10));
  const int n = static_cast<int>(rng.below(7));
  for (int i = 0; i < n; ++i) {
    VehicleSpec v;
    v.id = "car" + std::to_string(i) + (rng.below(2) ? "x" : "");
    v.spawn_spline = "h" + std::to_string(rng.below(4)) + "_" + std::to_string(rng.below(5)) + "_E0";
    v.spawn_offset = rng.uniform(0.0, 80.0);
    const auto na = rng.below(kMaxActions + 1);
    for (std::uint64_t k = 0; k < na; ++k) v.actions.push_back(static_cast<Action>(rng.below(5)));
    v.target_speed = rng.uniform(0.1, 30.0);
    v.stop_gap = rng.uniform(0.1, 5.0);
    v.run_red_lights = rng.below(2) == 1;
    c.vehicles.push_back(std::move(v));
  }
  for (int f = 0; f < n; ++f) {
    if (rng.below(3) != 0) continue;
    const int l = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (l == f) continue;
    c.causal_edges.push_back({c.vehicles[l].id, c.vehicles[f].id});
  }
  if (c.mode == Mode::kAgency) {
    if (rng.below(2)) {
      SignalSchedule s = default_schedule();
      s.offset = rng.uniform(-50.0, 50.0);
      if (rng.below(2)) s.intersection_offsets["i0_1"] = rng.uniform(0.0, 33.0);
      if (rng.below(2)) s.phases[2].duration = rng.uniform(1.0, 20.0);
      c.signal_schedule = s;
    }
    c.confounders.road_wetness = rng.uniform(0.01, 1.0);
    c.confounders.weather = static_cast<Weather>(rng.below(4));
  }
  c.confounders.time_of_day = rng.uniform(0.0, 23.9);
  c.dynamics.accel_max = rng.uniform(0.5, 4.0);
  c.network.rows = 2 + static_cast<int>(rng.below(5));
  c.network.cols = 2 + static_cast<int>(rng.below(5));
  return c;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "ccity-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace ccity::testing

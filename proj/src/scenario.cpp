#include "ccity/scenario.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "ccity/error.hpp"
#include "json.hpp"

namespace ccity {

using nlohmann::json;

std::string_view to_string(Mode mode) {
  return mode == Mode::kToy ? "toy" : "agency";
}

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "toy") return Mode::kToy;
  if (text == "agency") return Mode::kAgency;
  return std::nullopt;
}

std::string_view to_string(Weather weather) {
  switch (weather) {
    case Weather::kClear: return "clear";
    case Weather::kRain: return "rain";
    case Weather::kFog: return "fog";
    case Weather::kSnow: return "snow";
  }
  return "?";
}

namespace {

std::optional<Weather> parse_weather(std::string_view text) {
  if (text == "clear") return Weather::kClear;
  if (text == "rain") return Weather::kRain;
  if (text == "fog") return Weather::kFog;
  if (text == "snow") return Weather::kSnow;
  return std::nullopt;
}

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kSchemaViolation, (path.empty() ? "/" : path) + ": " + what);
}

[[noreturn]] void invariant_error(const std::string& what) {
  throw Error(ErrorKind::kInvariantViolation, what);
}

// Cursor over one JSON object that records which keys were consumed so the
// remainder can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& value, std::string path) : value_(value), path_(std::move(path)) {
    if (!value_.is_object()) schema_error(path_, "expected object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = value_.find(key);
    return it == value_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) schema_error(path_ + "/" + key, "missing required field");
    return *v;
  }

  std::string child(const std::string& key) const { return path_ + "/" + key; }

  void reject_unknown() const {
    for (const auto& [key, _] : value_.items()) {
      if (!seen_.contains(key)) schema_error(path_ + "/" + key, "unknown field");
    }
  }

 private:
  const json& value_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) schema_error(path, "expected string");
  return v.get<std::string>();
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(path, "expected finite number");
  return d;
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) schema_error(path, "expected boolean");
  return v.get<bool>();
}

std::int64_t as_int(const json& v, const std::string& path, std::int64_t lo,
                    std::int64_t hi) {
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(hi)) schema_error(path, "integer out of range");
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) schema_error(path, "expected integer");
  const auto i = v.get<std::int64_t>();
  if (i < lo || i > hi) schema_error(path, "integer out of range");
  return i;
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i >= 0) return static_cast<std::uint64_t>(i);
  }
  schema_error(path, "expected unsigned 64-bit integer");
}

const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected array");
  return v;
}

VehicleSpec read_vehicle(const json& v, const std::string& path) {
  ObjectReader r(v, path);
  VehicleSpec spec;
  spec.id = as_string(r.require("id"), r.child("id"));
  spec.spawn_spline = as_string(r.require("spawn_spline"), r.child("spawn_spline"));
  if (auto* x = r.get("spawn_offset")) spec.spawn_offset = as_number(*x, r.child("spawn_offset"));
  if (auto* x = r.get("actions")) {
    const auto& arr = as_array(*x, r.child("actions"));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = r.child("actions") + "/" + std::to_string(i);
      auto action = parse_action(as_string(arr[i], p));
      if (!action) schema_error(p, "unknown action");
      spec.actions.push_back(*action);
    }
  }
  if (auto* x = r.get("target_speed")) spec.target_speed = as_number(*x, r.child("target_speed"));
  if (auto* x = r.get("stop_gap")) spec.stop_gap = as_number(*x, r.child("stop_gap"));
  if (auto* x = r.get("run_red_lights")) {
    spec.run_red_lights = as_bool(*x, r.child("run_red_lights"));
  }
  r.reject_unknown();
  return spec;
}

SignalSchedule read_schedule(const json& v, const std::string& path) {
  ObjectReader r(v, path);
  SignalSchedule s = default_schedule();
  if (auto* x = r.get("id")) s.id = as_string(*x, r.child("id"));
  if (auto* x = r.get("offset")) s.offset = as_number(*x, r.child("offset"));
  if (auto* x = r.get("intersection_offsets")) {
    const std::string p = r.child("intersection_offsets");
    if (!x->is_object()) schema_error(p, "expected object");
    for (const auto& [key, val] : x->items()) {
      s.intersection_offsets[key] = as_number(val, p + "/" + key);
    }
  }
  if (auto* x = r.get("phases")) {
    s.phases.clear();
    const auto& arr = as_array(*x, r.child("phases"));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = r.child("phases") + "/" + std::to_string(i);
      ObjectReader pr(arr[i], p);
      Phase phase;
      for (auto [key, slot] : {std::pair{"ew", &phase.ew}, std::pair{"ns", &phase.ns}}) {
        auto color = parse_light_color(as_string(pr.require(key), pr.child(key)));
        if (!color) schema_error(pr.child(key), "unknown colour");
        *slot = *color;
      }
      phase.duration = as_number(pr.require("duration"), pr.child("duration"));
      pr.reject_unknown();
      s.phases.push_back(phase);
    }
  }
  r.reject_unknown();
  return s;
}

ConfounderSettings read_confounders(const json& v, const std::string& path) {
  ObjectReader r(v, path);
  ConfounderSettings c;
  if (auto* x = r.get("road_wetness")) c.road_wetness = as_number(*x, r.child("road_wetness"));
  if (auto* x = r.get("time_of_day")) c.time_of_day = as_number(*x, r.child("time_of_day"));
  if (auto* x = r.get("weather")) {
    auto w = parse_weather(as_string(*x, r.child("weather")));
    if (!w) schema_error(r.child("weather"), "unknown weather");
    c.weather = *w;
  }
  r.reject_unknown();
  return c;
}

DynamicsParams read_dynamics(const json& v, const std::string& path) {
  ObjectReader r(v, path);
  DynamicsParams d;
  if (auto* x = r.get("accel_max")) d.accel_max = as_number(*x, r.child("accel_max"));
  if (auto* x = r.get("brake_max")) d.brake_max = as_number(*x, r.child("brake_max"));
  if (auto* x = r.get("vehicle_length")) d.vehicle_length = as_number(*x, r.child("vehicle_length"));
  if (auto* x = r.get("speed_cap_factor")) {
    d.speed_cap_factor = as_number(*x, r.child("speed_cap_factor"));
  }
  r.reject_unknown();
  return d;
}

GridParams read_network(const json& v, const std::string& path) {
  ObjectReader r(v, path);
  GridParams g;
  constexpr std::int64_t kMaxInt = std::numeric_limits<int>::max();
  if (auto* x = r.get("rows")) g.rows = static_cast<int>(as_int(*x, r.child("rows"), 0, kMaxInt));
  if (auto* x = r.get("cols")) g.cols = static_cast<int>(as_int(*x, r.child("cols"), 0, kMaxInt));
  if (auto* x = r.get("block_size")) g.block_size = as_number(*x, r.child("block_size"));
  if (auto* x = r.get("lane_offset")) g.lane_offset = as_number(*x, r.child("lane_offset"));
  if (auto* x = r.get("lanes_per_direction")) {
    g.lanes_per_direction =
        static_cast<int>(as_int(*x, r.child("lanes_per_direction"), 0, kMaxInt));
  }
  r.reject_unknown();
  return g;
}

json phases_json(const std::vector<Phase>& phases) {
  json arr = json::array();
  for (const auto& p : phases) {
    arr.push_back({{"ew", to_string(p.ew)}, {"ns", to_string(p.ns)}, {"duration", p.duration}});
  }
  return arr;
}

}  // namespace

int ScenarioConfig::ticks_per_frame() const {
  return static_cast<int>(std::llround(frame_period / tick_dt));
}

const VehicleSpec* ScenarioConfig::find_vehicle(std::string_view id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

CausalGraph ScenarioConfig::ground_truth() const {
  CausalGraph g;
  for (const auto& v : vehicles) g.nodes.push_back(v.id);
  std::sort(g.nodes.begin(), g.nodes.end());
  g.edges.insert(causal_edges.begin(), causal_edges.end());
  return g;
}

void check_invariants(const ScenarioConfig& c) {
  if (c.schema_version != kSchemaVersion) {
    invariant_error("unsupported schema_version " + std::to_string(c.schema_version));
  }
  if (c.scenario_id.empty()) invariant_error("scenario_id must be non-empty");
  if (c.duration_frames < 1) invariant_error("duration_frames must be >= 1");
  if (!(c.tick_dt > 0.0)) invariant_error("tick_dt must be > 0");
  if (!(c.frame_period > 0.0)) invariant_error("frame_period must be > 0");
  const double ratio = c.frame_period / c.tick_dt;
  if (!(ratio >= 1.0 - 1e-9) || ratio > 1e6 ||
      std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    invariant_error("frame_period must be an integer multiple of tick_dt");
  }
  if (static_cast<double>(c.duration_frames) * std::round(ratio) > 1e8) {
    invariant_error("scenario too long");
  }
  std::set<std::string> ids;
  for (const auto& v : c.vehicles) {
    if (v.id.empty()) invariant_error("vehicle id must be non-empty");
    if (!ids.insert(v.id).second) invariant_error("duplicate vehicle id '" + v.id + "'");
    if (v.actions.size() > kMaxActions) {
      invariant_error("vehicle '" + v.id + "' has more than 5 actions");
    }
    if (!(v.spawn_offset >= 0.0)) invariant_error("vehicle '" + v.id + "': spawn_offset < 0");
    if (!(v.target_speed > 0.0)) invariant_error("vehicle '" + v.id + "': target_speed <= 0");
    if (!(v.stop_gap > 0.0)) invariant_error("vehicle '" + v.id + "': stop_gap <= 0");
  }
  std::set<std::string> followers;
  for (const auto& e : c.causal_edges) {
    if (!ids.contains(e.leader) || !ids.contains(e.follower)) {
      invariant_error("causal edge " + e.leader + "->" + e.follower +
                      " references an undeclared vehicle");
    }
    if (e.leader == e.follower) invariant_error("self edge on '" + e.leader + "'");
    if (!followers.insert(e.follower).second) {
      invariant_error("vehicle '" + e.follower + "' follows more than one leader");
    }
  }
  const auto& cf = c.confounders;
  if (!(cf.road_wetness >= 0.0 && cf.road_wetness <= 1.0)) {
    invariant_error("road_wetness must be in [0, 1]");
  }
  if (!(cf.time_of_day >= 0.0 && cf.time_of_day < 24.0)) {
    invariant_error("time_of_day must be in [0, 24)");
  }
  if (cf.weather == Weather::kRain && !(cf.road_wetness > 0.0)) {
    invariant_error("rain requires road_wetness > 0");
  }
  if (c.mode == Mode::kToy) {
    if (c.signal_schedule) invariant_error("toy mode forbids a signal_schedule");
    if (cf.road_wetness != 0.0 || cf.weather != Weather::kClear) {
      invariant_error("toy mode requires confounders disabled");
    }
  }
  if (c.signal_schedule) {
    if (auto why = check_schedule(*c.signal_schedule); !why.empty()) invariant_error(why);
  }
  const auto& d = c.dynamics;
  if (!(d.accel_max > 0.0) || !(d.brake_max > 0.0) || !(d.vehicle_length > 0.0) ||
      !(d.speed_cap_factor >= 1.0)) {
    invariant_error("dynamics constants must be positive (speed_cap_factor >= 1)");
  }
  if (auto why = check_grid_params(c.network); !why.empty()) invariant_error(why);
}

ScenarioConfig parse_scenario(std::string_view text) {
  json doc = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw Error(ErrorKind::kMalformedJson, "input is not valid JSON");

  ObjectReader r(doc, "");
  ScenarioConfig c;
  c.schema_version = static_cast<int>(
      as_int(r.require("schema_version"), "/schema_version", 0, 1 << 20));
  c.scenario_id = as_string(r.require("scenario_id"), "/scenario_id");
  auto mode = parse_mode(as_string(r.require("mode"), "/mode"));
  if (!mode) schema_error("/mode", "expected \"toy\" or \"agency\"");
  c.mode = *mode;
  if (auto* x = r.get("seed")) c.seed = as_u64(*x, "/seed");
  if (auto* x = r.get("duration_frames")) {
    c.duration_frames = static_cast<int>(
        as_int(*x, "/duration_frames", std::numeric_limits<int>::min(),
               std::numeric_limits<int>::max()));
  }
  if (auto* x = r.get("frame_period")) c.frame_period = as_number(*x, "/frame_period");
  if (auto* x = r.get("tick_dt")) c.tick_dt = as_number(*x, "/tick_dt");
  const auto& vehicles = as_array(r.require("vehicles"), "/vehicles");
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    c.vehicles.push_back(read_vehicle(vehicles[i], "/vehicles/" + std::to_string(i)));
  }
  if (auto* x = r.get("causal_edges")) {
    const auto& arr = as_array(*x, "/causal_edges");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "/causal_edges/" + std::to_string(i);
      if (!arr[i].is_array() || arr[i].size() != 2) {
        schema_error(p, "expected [leader_id, follower_id]");
      }
      c.causal_edges.push_back({as_string(arr[i][0], p + "/0"), as_string(arr[i][1], p + "/1")});
    }
  }
  if (auto* x = r.get("signal_schedule")) c.signal_schedule = read_schedule(*x, "/signal_schedule");
  if (auto* x = r.get("confounders")) c.confounders = read_confounders(*x, "/confounders");
  if (auto* x = r.get("dynamics")) c.dynamics = read_dynamics(*x, "/dynamics");
  if (auto* x = r.get("network")) c.network = read_network(*x, "/network");
  r.reject_unknown();

  check_invariants(c);
  return c;
}

std::string serialize_scenario(const ScenarioConfig& c) {
  json vehicles = json::array();
  for (const auto& v : c.vehicles) {
    json actions = json::array();
    for (Action a : v.actions) actions.push_back(to_string(a));
    vehicles.push_back({{"id", v.id},
                        {"spawn_spline", v.spawn_spline},
                        {"spawn_offset", v.spawn_offset},
                        {"actions", actions},
                        {"target_speed", v.target_speed},
                        {"stop_gap", v.stop_gap},
                        {"run_red_lights", v.run_red_lights}});
  }
  json edges = json::array();
  for (const auto& e : c.causal_edges) edges.push_back({e.leader, e.follower});
  json doc = {
      {"schema_version", c.schema_version},
      {"scenario_id", c.scenario_id},
      {"mode", to_string(c.mode)},
      {"seed", c.seed},
      {"duration_frames", c.duration_frames},
      {"frame_period", c.frame_period},
      {"tick_dt", c.tick_dt},
      {"vehicles", vehicles},
      {"causal_edges", edges},
      {"confounders",
       {{"road_wetness", c.confounders.road_wetness},
        {"time_of_day", c.confounders.time_of_day},
        {"weather", to_string(c.confounders.weather)}}},
      {"dynamics",
       {{"accel_max", c.dynamics.accel_max},
        {"brake_max", c.dynamics.brake_max},
        {"vehicle_length", c.dynamics.vehicle_length},
        {"speed_cap_factor", c.dynamics.speed_cap_factor}}},
      {"network",
       {{"rows", c.network.rows},
        {"cols", c.network.cols},
        {"block_size", c.network.block_size},
        {"lane_offset", c.network.lane_offset},
        {"lanes_per_direction", c.network.lanes_per_direction}}},
  };
  if (c.signal_schedule) {
    const auto& s = *c.signal_schedule;
    json offsets = json::object();
    for (const auto& [id, off] : s.intersection_offsets) offsets[id] = off;
    doc["signal_schedule"] = {{"id", s.id},
                              {"offset", s.offset},
                              {"intersection_offsets", offsets},
                              {"phases", phases_json(s.phases)}};
  }
  return doc.dump();
}

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::kUnknownSpline: return "UnknownSpline";
    case IssueKind::kOffsetOutOfRange: return "OffsetOutOfRange";
    case IssueKind::kRouteUnresolvable: return "RouteUnresolvable";
  }
  return "?";
}

std::vector<ValidationIssue> validate_against_network(const ScenarioConfig& config,
                                                      const RoadNetwork& network) {
  std::vector<ValidationIssue> issues;
  for (const auto& v : config.vehicles) {
    auto spline = network.find_spline(v.spawn_spline);
    if (!spline) {
      issues.push_back({IssueKind::kUnknownSpline, v.id,
                        "spawn spline '" + v.spawn_spline + "' does not exist"});
      continue;
    }
    if (v.spawn_offset > spline->length()) {
      issues.push_back({IssueKind::kOffsetOutOfRange, v.id,
                        "spawn_offset beyond spline length " +
                            std::to_string(spline->length())});
      continue;
    }
    try {
      (void)resolve_route(network, v.spawn_spline, v.actions, v.spawn_offset);
    } catch (const Error& e) {
      issues.push_back({IssueKind::kRouteUnresolvable, v.id, e.what()});
    }
  }
  return issues;
}

}  // namespace ccity

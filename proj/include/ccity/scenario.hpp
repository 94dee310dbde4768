#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccity/causal_graph.hpp"
#include "ccity/road_network.hpp"
#include "ccity/signals.hpp"

namespace ccity {

enum class Mode { kToy, kAgency };
enum class Weather { kClear, kRain, kFog, kSnow };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);
std::string_view to_string(Weather weather);

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kMaxActions = 5;

struct VehicleSpec {
  std::string id;
  std::string spawn_spline;
  double spawn_offset = 0.0;
  std::vector<Action> actions;
  double target_speed = 10.0;
  double stop_gap = 2.0;
  bool run_red_lights = false;

  friend bool operator==(const VehicleSpec&, const VehicleSpec&) = default;
};

struct ConfounderSettings {
  double road_wetness = 0.0;  // scales braking down
  double time_of_day = 12.0;  // metadata only
  Weather weather = Weather::kClear;

  friend bool operator==(const ConfounderSettings&, const ConfounderSettings&) = default;
};

// Longitudinal model constants shared by all vehicles of a scenario.
struct DynamicsParams {
  double accel_max = 2.0;
  double brake_max = 4.0;
  double vehicle_length = 4.0;
  double speed_cap_factor = 1.5;

  friend bool operator==(const DynamicsParams&, const DynamicsParams&) = default;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string scenario_id;
  Mode mode = Mode::kToy;
  std::uint64_t seed = 0;
  int duration_frames = 150;
  double frame_period = 1.0;
  double tick_dt = 0.1;
  std::vector<VehicleSpec> vehicles;
  std::vector<CausalEdge> causal_edges;
  std::optional<SignalSchedule> signal_schedule;
  ConfounderSettings confounders;
  DynamicsParams dynamics;
  GridParams network;

  // Integration substeps per logged frame.
  int ticks_per_frame() const;
  const VehicleSpec* find_vehicle(std::string_view id) const;
  CausalGraph ground_truth() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

// Strict parse: unknown keys and ill-typed values are rejected, missing
// optional fields take their defaults. Throws Error with kind MalformedJson,
// SchemaViolation (message carries the JSON pointer) or InvariantViolation.
ScenarioConfig parse_scenario(std::string_view text);

// Canonical compact JSON with sorted keys; byte-equal iff configs are equal.
std::string serialize_scenario(const ScenarioConfig& config);

// Throws InvariantViolation naming the first broken invariant.
void check_invariants(const ScenarioConfig& config);

enum class IssueKind { kUnknownSpline, kOffsetOutOfRange, kRouteUnresolvable };

std::string_view to_string(IssueKind kind);

struct ValidationIssue {
  IssueKind kind;
  std::string vehicle_id;
  std::string message;
};

std::vector<ValidationIssue> validate_against_network(const ScenarioConfig& config,
                                                      const RoadNetwork& network);

}  // namespace ccity

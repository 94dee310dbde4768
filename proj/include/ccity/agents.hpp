#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccity/road_network.hpp"
#include "ccity/scenario.hpp"
#include "ccity/signals.hpp"

namespace ccity {

struct VehicleState {
  std::string id;
  std::shared_ptr<const Route> route;
  double s = 0.0;  // front bumper, metres along the route
  double v = 0.0;
  double a = 0.0;
  bool finished = false;
  bool collided = false;
  int stall_ticks = 0;  // remaining post-collision standstill
};

struct SignalAhead {
  double distance = 0.0;
  LightColor color = LightColor::kRed;
};

struct DrivingContext {
  std::optional<double> gap_ahead;  // bumper to bumper
  std::optional<double> leader_speed;
  std::optional<SignalAhead> signal;
  double wetness = 0.0;
};

// Toy vehicles advance this many map units per logged frame.
inline constexpr double kToyUnitsPerFrame = 2.0;
// Other vehicles further ahead than this are ignored by gap keeping.
inline constexpr double kGapLookahead = 50.0;
// Post-collision standstill.
inline constexpr double kCollisionStallSeconds = 5.0;

double effective_brake(const DynamicsParams& dyn, double wetness);
double braking_distance(double v, double brake, double stop_gap);

// One agency integration step: brake for a stopping target, else accelerate
// towards target_speed, else hold.
VehicleState step_agency(const VehicleState& state, const DrivingContext& ctx,
                         const VehicleSpec& spec, const DynamicsParams& dyn,
                         double dt);

// Fixed-velocity toy motion; no interaction with anything.
VehicleState step_toy(const VehicleState& state, double dt, double frame_period);

// Bumper gap and speed of the nearest vehicle ahead on the same path within
// the lookahead window. Finished vehicles have left the map and are ignored.
struct GapInfo {
  double gap = 0.0;
  double leader_speed = 0.0;
  std::string leader_id;
};

std::vector<std::optional<GapInfo>> compute_gaps(std::span<const VehicleState> states,
                                                 double vehicle_length,
                                                 double lookahead = kGapLookahead);

struct CollisionEvent {
  double t = 0.0;
  std::string id_a;  // id_a < id_b
  std::string id_b;

  friend bool operator==(const CollisionEvent&, const CollisionEvent&) = default;
};

// Pairs (indices into `states`, first < second) whose along-path footprints
// [s - length, s] overlap.
std::vector<std::pair<std::size_t, std::size_t>> overlapping_pairs(
    std::span<const VehicleState> states, double vehicle_length);

std::vector<CollisionEvent> detect_collisions(std::span<const VehicleState> states,
                                              double vehicle_length, double t);

}  // namespace ccity

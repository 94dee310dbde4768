#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccity/road_network.hpp"

namespace ccity {

enum class LightColor { kGreen, kYellow, kRed };

std::string_view to_string(LightColor color);
std::optional<LightColor> parse_light_color(std::string_view text);

struct Phase {
  LightColor ew = LightColor::kRed;
  LightColor ns = LightColor::kRed;
  double duration = 0.0;  // seconds

  friend bool operator==(const Phase&, const Phase&) = default;
};

// Fixed-time cycle shared by every intersection. `offset` shifts the whole
// schedule; `intersection_offsets` adds a further per-intersection shift.
struct SignalSchedule {
  std::string id = "default";
  std::vector<Phase> phases;
  double offset = 0.0;
  std::map<std::string, double> intersection_offsets;

  double cycle_period() const;
  // Total shift applied at one intersection.
  double offset_for(std::string_view intersection_id) const;

  friend bool operator==(const SignalSchedule&, const SignalSchedule&) = default;
};

struct LightState {
  LightColor ew = LightColor::kRed;
  LightColor ns = LightColor::kRed;
  double time_since_change = 0.0;

  friend bool operator==(const LightState&, const LightState&) = default;
};

// EW green 15 s, EW yellow 4 s, NS green 10 s, NS yellow 4 s.
SignalSchedule default_schedule();

// Empty string when the phase table is valid, else the first problem found.
std::string check_schedule(const SignalSchedule& schedule);

LightState light_state_at(const SignalSchedule& schedule,
                          double intersection_offset, double t);

struct StopLine {
  double distance = 0.0;  // from the vehicle front to the line, metres
  LightColor color = LightColor::kRed;
  std::string intersection_id;
};

// Next signalised stop line on the vehicle's current route segment.
std::optional<StopLine> stopline_query(const RoadNetwork& network,
                                       const Route& route, double s,
                                       const SignalSchedule& schedule, double t);

}  // namespace ccity

#include "ccity/signals.hpp"

#include <cmath>

namespace ccity {

std::string_view to_string(LightColor color) {
  switch (color) {
    case LightColor::kGreen: return "green";
    case LightColor::kYellow: return "yellow";
    case LightColor::kRed: return "red";
  }
  return "?";
}

std::optional<LightColor> parse_light_color(std::string_view text) {
  if (text == "green") return LightColor::kGreen;
  if (text == "yellow") return LightColor::kYellow;
  if (text == "red") return LightColor::kRed;
  return std::nullopt;
}

double SignalSchedule::cycle_period() const {
  double total = 0.0;
  for (const auto& p : phases) total += p.duration;
  return total;
}

double SignalSchedule::offset_for(std::string_view intersection_id) const {
  auto it = intersection_offsets.find(std::string(intersection_id));
  return offset + (it == intersection_offsets.end() ? 0.0 : it->second);
}

SignalSchedule default_schedule() {
  SignalSchedule s;
  s.id = "default";
  s.phases = {
      {LightColor::kGreen, LightColor::kRed, 15.0},
      {LightColor::kYellow, LightColor::kRed, 4.0},
      {LightColor::kRed, LightColor::kGreen, 10.0},
      {LightColor::kRed, LightColor::kYellow, 4.0},
  };
  return s;
}

std::string check_schedule(const SignalSchedule& schedule) {
  if (schedule.phases.empty()) return "schedule has no phases";
  for (std::size_t i = 0; i < schedule.phases.size(); ++i) {
    const auto& p = schedule.phases[i];
    const std::string where = "phase " + std::to_string(i);
    if (!(p.duration > 0.0) || !std::isfinite(p.duration)) {
      return where + ": duration must be positive";
    }
    // One direction may show anything other than red only while the other
    // is red.
    if (p.ew != LightColor::kRed && p.ns != LightColor::kRed) {
      return where + ": conflicting EW and NS permissive colours";
    }
  }
  if (!std::isfinite(schedule.offset)) return "offset must be finite";
  for (const auto& [id, off] : schedule.intersection_offsets) {
    if (!std::isfinite(off)) return "offset for " + id + " must be finite";
  }
  return {};
}

LightState light_state_at(const SignalSchedule& schedule,
                          double intersection_offset, double t) {
  const double cycle = schedule.cycle_period();
  double local = std::fmod(t + intersection_offset, cycle);
  if (local < 0.0) local += cycle;
  // Accumulating phase ends keeps boundaries exact for integer-valued
  // durations (15, 19, 29, 33 on the default table).
  double phase_start = 0.0;
  for (const auto& p : schedule.phases) {
    const double phase_end = phase_start + p.duration;
    if (local < phase_end) return {p.ew, p.ns, local - phase_start};
    phase_start = phase_end;
  }
  const auto& first = schedule.phases.front();
  return {first.ew, first.ns, 0.0};
}

std::optional<StopLine> stopline_query(const RoadNetwork& network,
                                       const Route& route, double s,
                                       const SignalSchedule& schedule, double t) {
  const auto& seg = route.segments()[route.segment_index_at(s)];
  const Spline& spline = *seg.spline;
  if (spline.kind != SplineKind::kLane || !spline.end_intersection) return std::nullopt;
  // The route must actually carry on into the intersection at the end of
  // this segment.
  if (seg.s_end < spline.length()) return std::nullopt;
  const std::size_t idx = route.segment_index_at(s);
  if (idx + 1 >= route.segments().size()) return std::nullopt;
  const double line = seg.route_start + (spline.length() - seg.s_begin) - kStopLineSetback;
  const double dist = line - s;
  if (dist < 0.0) return std::nullopt;
  const std::string& iid = *spline.end_intersection;
  if (!network.find_intersection(iid)) return std::nullopt;
  const LightState st = light_state_at(schedule, schedule.offset_for(iid), t);
  return StopLine{dist, is_ew_family(spline.direction) ? st.ew : st.ns, iid};
}

}  // namespace ccity

#include "ccity/agents.hpp"

#include <algorithm>
#include <cmath>

namespace ccity {

double effective_brake(const DynamicsParams& dyn, double wetness) {
  return dyn.brake_max * (1.0 - 0.5 * wetness);
}

double braking_distance(double v, double brake, double stop_gap) {
  return v * v / (2.0 * brake) + stop_gap;
}

VehicleState step_agency(const VehicleState& state, const DrivingContext& ctx,
                         const VehicleSpec& spec, const DynamicsParams& dyn,
                         double dt) {
  VehicleState next = state;
  if (state.finished) return next;
  if (state.stall_ticks > 0) {
    next.stall_ticks = state.stall_ticks - 1;
    next.v = 0.0;
    next.a = 0.0;
    return next;
  }
  const double brake = effective_brake(dyn, ctx.wetness);
  const double v = state.v;
  const double stop_dist = braking_distance(v, brake, spec.stop_gap);

  bool must_stop = false;
  if (ctx.signal && !spec.run_red_lights) {
    const double d = ctx.signal->distance;
    switch (ctx.signal->color) {
      case LightColor::kRed:
        must_stop = d <= stop_dist;
        break;
      case LightColor::kYellow:
        // Dilemma zone: once the line cannot be reached at rest, carry on.
        must_stop = v * v / (2.0 * brake) <= d && d <= stop_dist;
        break;
      case LightColor::kGreen:
        break;
    }
  }
  if (ctx.gap_ahead && *ctx.gap_ahead < stop_dist) must_stop = true;

  double a = 0.0;
  if (must_stop) {
    a = std::max(-brake, -v / dt);
  } else if (v < spec.target_speed) {
    a = std::min(dyn.accel_max, (spec.target_speed - v) / dt);
  }
  const double v_cap = dyn.speed_cap_factor * spec.target_speed;
  next.a = a;
  next.v = std::clamp(v + a * dt, 0.0, v_cap);
  const double total = state.route->total_length();
  next.s = std::min(state.s + next.v * dt, total);
  if (next.s >= total) next.finished = true;
  return next;
}

VehicleState step_toy(const VehicleState& state, double dt, double frame_period) {
  VehicleState next = state;
  if (state.finished) return next;
  next.v = kToyUnitsPerFrame / frame_period;
  next.a = 0.0;
  const double total = state.route->total_length();
  next.s = std::min(state.s + next.v * dt, total);
  if (next.s >= total) next.finished = true;
  return next;
}

namespace {

// Spline coordinates of a vehicle's front bumper.
struct SplinePoint {
  const std::string* spline_id;
  double spline_s;
};

SplinePoint locate(const VehicleState& st) {
  const auto& route = *st.route;
  const auto& seg = route.segments()[route.segment_index_at(st.s)];
  return {&seg.spline->id, seg.s_begin + (st.s - seg.route_start)};
}

}  // namespace

std::vector<std::optional<GapInfo>> compute_gaps(std::span<const VehicleState> states,
                                                 double vehicle_length,
                                                 double lookahead) {
  std::vector<std::optional<GapInfo>> out(states.size());
  std::vector<SplinePoint> fronts;
  fronts.reserve(states.size());
  for (const auto& st : states) fronts.push_back(locate(st));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& me = states[i];
    if (me.finished) continue;
    for (std::size_t j = 0; j < states.size(); ++j) {
      if (j == i || states[j].finished) continue;
      auto p = me.route->route_position_of(*fronts[j].spline_id, fronts[j].spline_s, me.s,
                                           me.s + lookahead + vehicle_length);
      if (!p || *p <= me.s) continue;
      const double gap = std::max(0.0, *p - me.s - vehicle_length);
      if (!out[i] || gap < out[i]->gap) {
        out[i] = GapInfo{gap, states[j].v, states[j].id};
      }
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> overlapping_pairs(
    std::span<const VehicleState> states, double vehicle_length) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<SplinePoint> fronts;
  fronts.reserve(states.size());
  for (const auto& st : states) fronts.push_back(locate(st));
  const auto overlaps_from = [&](std::size_t a, std::size_t b) {
    const auto& me = states[a];
    auto p = me.route->route_position_of(*fronts[b].spline_id, fronts[b].spline_s,
                                         me.s - vehicle_length, me.s + vehicle_length);
    return p && std::abs(*p - me.s) < vehicle_length;
  };
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].finished) continue;
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      if (states[j].finished) continue;
      if (overlaps_from(i, j) || overlaps_from(j, i)) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

std::vector<CollisionEvent> detect_collisions(std::span<const VehicleState> states,
                                              double vehicle_length, double t) {
  std::vector<CollisionEvent> events;
  for (auto [i, j] : overlapping_pairs(states, vehicle_length)) {
    auto a = states[i].id;
    auto b = states[j].id;
    if (b < a) std::swap(a, b);
    events.push_back({t, std::move(a), std::move(b)});
  }
  return events;
}

}  // namespace ccity

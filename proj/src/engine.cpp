#include "ccity/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ccity/digest.hpp"
#include "ccity/error.hpp"

namespace ccity {

double round_for_log(double value) {
  const double r = std::round(value * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // no negative zero
}

std::string config_digest(const ScenarioConfig& config) {
  return sha256_hex(serialize_scenario(config));
}

namespace {

FrameLog snapshot(const ScenarioConfig& config, const RoadNetwork& network,
                  const std::vector<VehicleState>& states, int frame_index) {
  FrameLog frame;
  frame.frame_index = frame_index;
  const double t = frame_index * config.frame_period;
  frame.t = round_for_log(t);
  for (const auto& st : states) {
    const Pose pose = st.route->pose_at(st.s);
    frame.vehicles[st.id] = {round_for_log(pose.x), round_for_log(pose.y),
                             round_for_log(pose.heading), round_for_log(st.v), st.finished};
  }
  if (config.signal_schedule) {
    const auto& sched = *config.signal_schedule;
    for (const auto& in : network.intersections()) {
      LightState ls = light_state_at(sched, sched.offset_for(in.id), t);
      ls.time_since_change = round_for_log(ls.time_since_change);
      frame.lights[in.id] = ls;
    }
  }
  return frame;
}

}  // namespace

SimLog run(const ScenarioConfig& config, const RoadNetwork& network) {
  if (auto issues = validate_against_network(config, network); !issues.empty()) {
    std::string msg;
    for (const auto& is : issues) {
      msg += std::string(to_string(is.kind)) + "(" + is.vehicle_id + ") ";
    }
    throw Error(ErrorKind::kValidationFailed, msg);
  }

  std::vector<const VehicleSpec*> specs;
  for (const auto& v : config.vehicles) specs.push_back(&v);
  std::sort(specs.begin(), specs.end(),
            [](const VehicleSpec* a, const VehicleSpec* b) { return a->id < b->id; });

  std::vector<VehicleState> states;
  states.reserve(specs.size());
  for (const VehicleSpec* spec : specs) {
    VehicleState st;
    st.id = spec->id;
    st.route = std::make_shared<const Route>(
        resolve_route(network, spec->spawn_spline, spec->actions, spec->spawn_offset));
    st.finished = st.route->total_length() <= 0.0;
    states.push_back(std::move(st));
  }

  SimLog log;
  log.scenario_id = config.scenario_id;
  log.config_digest = config_digest(config);
  log.mode = config.mode;
  log.frame_period = config.frame_period;
  log.extent = network.extent();
  log.ground_truth = config.ground_truth();
  log.frames.reserve(static_cast<std::size_t>(config.duration_frames));
  log.frames.push_back(snapshot(config, network, states, 0));

  const double dt = config.tick_dt;
  const int ticks_per_frame = config.ticks_per_frame();
  const int stall_ticks =
      static_cast<int>(std::llround(kCollisionStallSeconds / dt));
  const double length = config.dynamics.vehicle_length;
  std::set<std::pair<std::size_t, std::size_t>> contacts;
  std::vector<VehicleState> next(states.size());
  long long tick = 0;

  for (int frame = 1; frame < config.duration_frames; ++frame) {
    for (int k = 0; k < ticks_per_frame; ++k, ++tick) {
      const double t = static_cast<double>(tick) * dt;
      if (config.mode == Mode::kToy) {
        for (std::size_t i = 0; i < states.size(); ++i) {
          next[i] = step_toy(states[i], dt, config.frame_period);
        }
        states.swap(next);
        continue;
      }
      // Contexts come from the pre-step snapshot so the update is order
      // independent.
      const auto gaps = compute_gaps(states, length);
      for (std::size_t i = 0; i < states.size(); ++i) {
        const auto& st = states[i];
        DrivingContext ctx;
        ctx.wetness = config.confounders.road_wetness;
        if (gaps[i]) {
          ctx.gap_ahead = gaps[i]->gap;
          ctx.leader_speed = gaps[i]->leader_speed;
        }
        if (config.signal_schedule && !st.finished) {
          if (auto line = stopline_query(network, *st.route, st.s, *config.signal_schedule, t)) {
            ctx.signal = SignalAhead{line->distance, line->color};
          }
        }
        next[i] = step_agency(st, ctx, *specs[i], config.dynamics, dt);
      }
      states.swap(next);

      const double t_after = static_cast<double>(tick + 1) * dt;
      std::set<std::pair<std::size_t, std::size_t>> now;
      for (auto pair : overlapping_pairs(states, length)) {
        now.insert(pair);
        if (contacts.contains(pair)) continue;
        auto& a = states[pair.first];
        auto& b = states[pair.second];
        log.collisions.push_back({round_for_log(t_after), a.id, b.id});
        for (VehicleState* st : {&a, &b}) {
          st->collided = true;
          st->stall_ticks = stall_ticks;
          st->v = 0.0;
          st->a = 0.0;
        }
      }
      contacts.swap(now);
    }
    log.frames.push_back(snapshot(config, network, states, frame));
  }
  return log;
}

}  // namespace ccity

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ccity/geometry.hpp"

namespace ccity {

// High-level manoeuvres a vehicle executes after spawning. Turns are consumed
// at intersections, merges along lane splines.
enum class Action { kLeft, kRight, kStraight, kMergeLeft, kMergeRight };

std::string_view to_string(Action action);
std::optional<Action> parse_action(std::string_view text);

// Travel direction of a lane. The first letter is the destination side:
// EW runs west to east (heading 0), WE east to west, NS south to north,
// SN north to south. Intersection connectors are kTurn.
enum class Direction { kEW, kWE, kNS, kSN, kTurn };

std::string_view to_string(Direction direction);

// True for lanes governed by the east-west signal head.
inline bool is_ew_family(Direction d) {
  return d == Direction::kEW || d == Direction::kWE;
}

enum class SplineKind { kLane, kConnector };

// Polyline lane centreline parameterised by arc length.
struct Spline {
  std::string id;
  SplineKind kind = SplineKind::kLane;
  Direction direction = Direction::kTurn;
  std::vector<Vec2> points;
  std::vector<double> cumulative_arclength;
  std::optional<std::string> adjacent_left;
  std::optional<std::string> adjacent_right;
  // Lanes: connector taken for each turn action at the downstream
  // intersection. Empty for lanes that leave the map.
  std::map<Action, std::string> successors;
  // Lanes: intersection entered at the end of the lane, if any.
  std::optional<std::string> end_intersection;
  // Connectors: the lane the connector feeds into.
  std::optional<std::string> exit_spline;

  double length() const { return cumulative_arclength.back(); }
  Pose pose_at(double s) const;
};

// Builds a spline from points, filling cumulative arc length.
Spline make_spline(std::string id, SplineKind kind, Direction direction,
                   std::vector<Vec2> points);

struct Intersection {
  std::string id;
  Vec2 center;
  std::map<Direction, std::vector<std::string>> approaches;
  std::map<std::pair<std::string, Action>, std::string> connectors;
  std::optional<std::string> signal_group;
};

struct GridParams {
  int rows = 4;
  int cols = 4;
  double block_size = 100.0;
  double lane_offset = 3.0;
  int lanes_per_direction = 1;

  friend bool operator==(const GridParams&, const GridParams&) = default;
};

class RoadNetwork {
 public:
  RoadNetwork(GridParams params, Vec2 extent,
              std::map<std::string, std::shared_ptr<const Spline>> splines,
              std::vector<Intersection> intersections);

  const GridParams& params() const { return params_; }
  Vec2 extent() const { return extent_; }
  const std::map<std::string, std::shared_ptr<const Spline>>& splines() const {
    return splines_;
  }
  const std::vector<Intersection>& intersections() const {
    return intersections_;
  }

  // nullptr when absent.
  std::shared_ptr<const Spline> find_spline(std::string_view id) const;
  const Intersection* find_intersection(std::string_view id) const;

  // Ids of all lane (non-connector) splines in sorted order.
  std::vector<std::string> lane_ids() const;

  // Half-width of the square intersection box.
  double box_half_size() const;

 private:
  GridParams params_;
  Vec2 extent_;
  std::map<std::string, std::shared_ptr<const Spline>> splines_;
  std::vector<Intersection> intersections_;
};

// Empty string when build_grid would accept the parameters.
std::string check_grid_params(const GridParams& params);

// Right-hand-drive grid: `rows` east-west roads crossing `cols` north-south
// roads, every crossing a four-way intersection. Roads run half a block past
// the outer intersections to the map edge.
RoadNetwork build_grid(const GridParams& params);
RoadNetwork build_grid(int rows, int cols, double block_size,
                       double lane_offset);

struct RouteSegment {
  std::shared_ptr<const Spline> spline;
  double s_begin = 0.0;  // on the spline
  double s_end = 0.0;
  double route_start = 0.0;  // arc length along the route at s_begin

  double length() const { return s_end - s_begin; }
};

class Route {
 public:
  Route() = default;
  Route(std::vector<RouteSegment> segments, std::vector<Action> consumed);

  std::span<const RouteSegment> segments() const { return segments_; }
  std::vector<std::string> segment_ids() const;
  const std::vector<Action>& consumed_actions() const { return consumed_; }
  double total_length() const { return total_length_; }

  // Segment index containing route arc length s (s clamped to the route).
  std::size_t segment_index_at(double s) const;

  // Position along the route of a point given in spline coordinates, searched
  // among segments overlapping [s_from, s_to]. nullopt if the spline point is
  // not on that part of the route.
  std::optional<double> route_position_of(std::string_view spline_id,
                                          double spline_s, double s_from,
                                          double s_to) const;

  Pose pose_at(double s) const;

 private:
  std::vector<RouteSegment> segments_;
  std::vector<Action> consumed_;
  double total_length_ = 0.0;
};

// Lane-change connectors span this much along-lane distance.
inline constexpr double kMergeLength = 10.0;
// Stop lines sit this far before the intersection box.
inline constexpr double kStopLineSetback = 2.0;

// Walks forward from `spawn_spline` at `spawn_offset`, consuming `actions`,
// then continues straight to the map edge.
Route resolve_route(const RoadNetwork& network, std::string_view spawn_spline,
                    std::span<const Action> actions, double spawn_offset = 0.0);

// GeoJSON-like dump of the network geometry.
std::string network_to_json(const RoadNetwork& network);

}  // namespace ccity

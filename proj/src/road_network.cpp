#include "ccity/road_network.hpp"

#include <algorithm>
#include <cmath>

#include "ccity/error.hpp"
#include "json.hpp"

namespace ccity {

std::string_view to_string(Action action) {
  switch (action) {
    case Action::kLeft: return "left";
    case Action::kRight: return "right";
    case Action::kStraight: return "straight";
    case Action::kMergeLeft: return "mergeL";
    case Action::kMergeRight: return "mergeR";
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view text) {
  if (text == "left") return Action::kLeft;
  if (text == "right") return Action::kRight;
  if (text == "straight") return Action::kStraight;
  if (text == "mergeL") return Action::kMergeLeft;
  if (text == "mergeR") return Action::kMergeRight;
  return std::nullopt;
}

std::string_view to_string(Direction direction) {
  switch (direction) {
    case Direction::kEW: return "EW";
    case Direction::kWE: return "WE";
    case Direction::kNS: return "NS";
    case Direction::kSN: return "SN";
    case Direction::kTurn: return "turn";
  }
  return "?";
}

Spline make_spline(std::string id, SplineKind kind, Direction direction,
                   std::vector<Vec2> points) {
  Spline spline;
  spline.id = std::move(id);
  spline.kind = kind;
  spline.direction = direction;
  spline.points = std::move(points);
  spline.cumulative_arclength.reserve(spline.points.size());
  double acc = 0.0;
  spline.cumulative_arclength.push_back(0.0);
  for (std::size_t i = 1; i < spline.points.size(); ++i) {
    acc += distance(spline.points[i - 1], spline.points[i]);
    spline.cumulative_arclength.push_back(acc);
  }
  return spline;
}

Pose Spline::pose_at(double s) const {
  const auto& cum = cumulative_arclength;
  s = std::clamp(s, 0.0, cum.back());
  // Index of the segment [i, i+1] containing s; the final point belongs to
  // the last segment.
  auto it = std::upper_bound(cum.begin(), cum.end(), s);
  std::size_t i = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
  if (i + 1 >= points.size()) i = points.size() - 2;
  const Vec2 a = points[i];
  const Vec2 b = points[i + 1];
  const double seg = cum[i + 1] - cum[i];
  const double u = seg > 0.0 ? (s - cum[i]) / seg : 0.0;
  const Vec2 p = a + u * (b - a);
  return {p.x, p.y, std::atan2(b.y - a.y, b.x - a.x)};
}

RoadNetwork::RoadNetwork(GridParams params, Vec2 extent,
                         std::map<std::string, std::shared_ptr<const Spline>> splines,
                         std::vector<Intersection> intersections)
    : params_(params),
      extent_(extent),
      splines_(std::move(splines)),
      intersections_(std::move(intersections)) {}

std::shared_ptr<const Spline> RoadNetwork::find_spline(std::string_view id) const {
  auto it = splines_.find(std::string(id));
  return it == splines_.end() ? nullptr : it->second;
}

const Intersection* RoadNetwork::find_intersection(std::string_view id) const {
  for (const auto& in : intersections_) {
    if (in.id == id) return &in;
  }
  return nullptr;
}

std::vector<std::string> RoadNetwork::lane_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, spline] : splines_) {
    if (spline->kind == SplineKind::kLane) ids.push_back(id);
  }
  return ids;
}

double RoadNetwork::box_half_size() const {
  return 2.0 * params_.lane_offset * params_.lanes_per_direction;
}

namespace {

std::string intersection_id(int r, int c) {
  return "i" + std::to_string(r) + "_" + std::to_string(c);
}

// Horizontal road r, segment c (c = 0 is the stub west of column 0).
std::string h_lane(int r, int c, char dir, int k) {
  return "h" + std::to_string(r) + "_" + std::to_string(c) + "_" + dir +
         std::to_string(k);
}

// Vertical road c, segment r (r = 0 is the stub south of row 0).
std::string v_lane(int c, int r, char dir, int k) {
  return "v" + std::to_string(c) + "_" + std::to_string(r) + "_" + dir +
         std::to_string(k);
}

Vec2 heading_vec(double h) { return {std::cos(h), std::sin(h)}; }

constexpr int kArcSegments = 16;

// Quarter-circle (or straight) connector between the end of `in` and the
// start of `out`.
std::vector<Vec2> connector_points(const Spline& in, const Spline& out,
                                   Action action) {
  const Vec2 p0 = in.points.back();
  const Vec2 p1 = out.points.front();
  if (action == Action::kStraight) return {p0, p1};
  const double h0 = in.pose_at(in.length()).heading;
  const Vec2 fwd = heading_vec(h0);
  const Vec2 d = p1 - p0;
  const double radius = std::abs(d.x * fwd.x + d.y * fwd.y);
  const double side = action == Action::kLeft ? 1.0 : -1.0;
  const Vec2 normal{-fwd.y * side, fwd.x * side};
  const Vec2 center = p0 + radius * normal;
  const double a0 = std::atan2(p0.y - center.y, p0.x - center.x);
  std::vector<Vec2> pts;
  pts.reserve(kArcSegments + 1);
  for (int i = 0; i <= kArcSegments; ++i) {
    const double a = a0 + side * (kPi / 2.0) * i / kArcSegments;
    pts.push_back(center + radius * Vec2{std::cos(a), std::sin(a)});
  }
  pts.front() = p0;
  pts.back() = p1;
  return pts;
}

char action_code(Action a) {
  switch (a) {
    case Action::kLeft: return 'L';
    case Action::kRight: return 'R';
    default: return 'S';
  }
}

}  // namespace

std::string check_grid_params(const GridParams& p) {
  if (p.rows < 2 || p.cols < 2) return "rows and cols must be >= 2";
  if (p.rows > 64 || p.cols > 64) return "rows and cols must be <= 64";
  if (p.lanes_per_direction < 1 || p.lanes_per_direction > 4) {
    return "lanes_per_direction must be in [1, 4]";
  }
  if (!(p.lane_offset > 0.0) || !std::isfinite(p.lane_offset)) {
    return "lane_offset must be positive";
  }
  if (!std::isfinite(p.block_size) || p.block_size > 1e5) return "block_size too large";
  const double half_box = 2.0 * p.lane_offset * p.lanes_per_direction;
  if (!(p.block_size > 2.0 * half_box + 2.0 * kStopLineSetback)) {
    return "block_size must exceed the intersection box plus stop lines";
  }
  return {};
}

RoadNetwork build_grid(const GridParams& p) {
  if (auto why = check_grid_params(p); !why.empty()) {
    throw Error(ErrorKind::kInvalidGridParams, why);
  }
  const double half_box = 2.0 * p.lane_offset * p.lanes_per_direction;
  const int rows = p.rows;
  const int cols = p.cols;
  const double block = p.block_size;
  const double margin = block / 2.0;
  const Vec2 extent{cols * block, rows * block};
  const auto xc = [&](int c) { return margin + c * block; };
  const auto yc = [&](int r) { return margin + r * block; };
  const auto offset = [&](int k) { return p.lane_offset * (2 * k + 1); };

  std::map<std::string, Spline> lanes;
  const int nl = p.lanes_per_direction;
  for (int k = 0; k < nl; ++k) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c <= cols; ++c) {
        const double x0 = c == 0 ? 0.0 : xc(c - 1) + half_box;
        const double x1 = c == cols ? extent.x : xc(c) - half_box;
        Spline east = make_spline(h_lane(r, c, 'E', k), SplineKind::kLane,
                                  Direction::kEW,
                                  {{x0, yc(r) - offset(k)}, {x1, yc(r) - offset(k)}});
        if (c < cols) east.end_intersection = intersection_id(r, c);
        Spline west = make_spline(h_lane(r, c, 'W', k), SplineKind::kLane,
                                  Direction::kWE,
                                  {{x1, yc(r) + offset(k)}, {x0, yc(r) + offset(k)}});
        if (c > 0) west.end_intersection = intersection_id(r, c - 1);
        if (k > 0) {
          east.adjacent_left = h_lane(r, c, 'E', k - 1);
          west.adjacent_left = h_lane(r, c, 'W', k - 1);
        }
        if (k + 1 < nl) {
          east.adjacent_right = h_lane(r, c, 'E', k + 1);
          west.adjacent_right = h_lane(r, c, 'W', k + 1);
        }
        lanes.emplace(east.id, std::move(east));
        lanes.emplace(west.id, std::move(west));
      }
    }
    for (int c = 0; c < cols; ++c) {
      for (int r = 0; r <= rows; ++r) {
        const double y0 = r == 0 ? 0.0 : yc(r - 1) + half_box;
        const double y1 = r == rows ? extent.y : yc(r) - half_box;
        Spline north = make_spline(v_lane(c, r, 'N', k), SplineKind::kLane,
                                   Direction::kNS,
                                   {{xc(c) + offset(k), y0}, {xc(c) + offset(k), y1}});
        if (r < rows) north.end_intersection = intersection_id(r, c);
        Spline south = make_spline(v_lane(c, r, 'S', k), SplineKind::kLane,
                                   Direction::kSN,
                                   {{xc(c) - offset(k), y1}, {xc(c) - offset(k), y0}});
        if (r > 0) south.end_intersection = intersection_id(r - 1, c);
        if (k > 0) {
          north.adjacent_left = v_lane(c, r, 'N', k - 1);
          south.adjacent_left = v_lane(c, r, 'S', k - 1);
        }
        if (k + 1 < nl) {
          north.adjacent_right = v_lane(c, r, 'N', k + 1);
          south.adjacent_right = v_lane(c, r, 'S', k + 1);
        }
        lanes.emplace(north.id, std::move(north));
        lanes.emplace(south.id, std::move(south));
      }
    }
  }

  std::map<std::string, Spline> connectors;
  std::vector<Intersection> intersections;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Intersection in;
      in.id = intersection_id(r, c);
      in.center = {xc(c), yc(r)};
      for (int k = 0; k < nl; ++k) {
        struct Approach {
          char code;
          Direction dir;
          std::string incoming, straight, left, right;
        };
        const Approach approaches[] = {
            {'E', Direction::kEW, h_lane(r, c, 'E', k), h_lane(r, c + 1, 'E', k),
             v_lane(c, r + 1, 'N', k), v_lane(c, r, 'S', k)},
            {'W', Direction::kWE, h_lane(r, c + 1, 'W', k), h_lane(r, c, 'W', k),
             v_lane(c, r, 'S', k), v_lane(c, r + 1, 'N', k)},
            {'N', Direction::kNS, v_lane(c, r, 'N', k), v_lane(c, r + 1, 'N', k),
             h_lane(r, c, 'W', k), h_lane(r, c + 1, 'E', k)},
            {'S', Direction::kSN, v_lane(c, r + 1, 'S', k), v_lane(c, r, 'S', k),
             h_lane(r, c + 1, 'E', k), h_lane(r, c, 'W', k)},
        };
        for (const auto& ap : approaches) {
          in.approaches[ap.dir].push_back(ap.incoming);
          Spline& incoming = lanes.at(ap.incoming);
          for (auto [action, target] :
               {std::pair{Action::kLeft, ap.left}, std::pair{Action::kRight, ap.right},
                std::pair{Action::kStraight, ap.straight}}) {
            const std::string cid = in.id + ":" + ap.code + std::to_string(k) +
                                    action_code(action);
            Spline conn = make_spline(cid, SplineKind::kConnector, Direction::kTurn,
                                      connector_points(incoming, lanes.at(target), action));
            conn.exit_spline = target;
            incoming.successors[action] = cid;
            in.connectors[{ap.incoming, action}] = cid;
            connectors.emplace(cid, std::move(conn));
          }
        }
      }
      intersections.push_back(std::move(in));
    }
  }

  std::map<std::string, std::shared_ptr<const Spline>> all;
  for (auto& [id, s] : lanes) all.emplace(id, std::make_shared<const Spline>(std::move(s)));
  for (auto& [id, s] : connectors) all.emplace(id, std::make_shared<const Spline>(std::move(s)));
  return RoadNetwork(p, extent, std::move(all), std::move(intersections));
}

RoadNetwork build_grid(int rows, int cols, double block_size, double lane_offset) {
  GridParams p;
  p.rows = rows;
  p.cols = cols;
  p.block_size = block_size;
  p.lane_offset = lane_offset;
  return build_grid(p);
}

Route::Route(std::vector<RouteSegment> segments, std::vector<Action> consumed)
    : segments_(std::move(segments)), consumed_(std::move(consumed)) {
  double acc = 0.0;
  for (auto& seg : segments_) {
    seg.route_start = acc;
    acc += seg.length();
  }
  total_length_ = acc;
}

std::vector<std::string> Route::segment_ids() const {
  std::vector<std::string> ids;
  ids.reserve(segments_.size());
  for (const auto& seg : segments_) ids.push_back(seg.spline->id);
  return ids;
}

std::size_t Route::segment_index_at(double s) const {
  auto it = std::upper_bound(segments_.begin(), segments_.end(), s,
                             [](double v, const RouteSegment& seg) {
                               return v < seg.route_start;
                             });
  if (it == segments_.begin()) return 0;
  return static_cast<std::size_t>(it - segments_.begin()) - 1;
}

std::optional<double> Route::route_position_of(std::string_view spline_id,
                                               double spline_s, double s_from,
                                               double s_to) const {
  if (segments_.empty()) return std::nullopt;
  for (std::size_t i = segment_index_at(std::max(s_from, 0.0)); i < segments_.size(); ++i) {
    const auto& seg = segments_[i];
    if (seg.route_start > s_to) break;
    if (seg.spline->id != spline_id) continue;
    if (spline_s < seg.s_begin || spline_s > seg.s_end) continue;
    const double pos = seg.route_start + (spline_s - seg.s_begin);
    if (pos >= s_from && pos <= s_to) return pos;
  }
  return std::nullopt;
}

Pose Route::pose_at(double s) const {
  constexpr double kSlack = 1e-9;
  if (segments_.empty() || s < -kSlack || s > total_length_ + kSlack) {
    throw Error(ErrorKind::kOutOfRange,
                "arc length " + std::to_string(s) + " outside route of length " +
                    std::to_string(total_length_));
  }
  s = std::clamp(s, 0.0, total_length_);
  const auto& seg = segments_[segment_index_at(s)];
  return seg.spline->pose_at(seg.s_begin + (s - seg.route_start));
}

Route resolve_route(const RoadNetwork& network, std::string_view spawn_spline,
                    std::span<const Action> actions, double spawn_offset) {
  auto current = network.find_spline(spawn_spline);
  if (!current) {
    throw Error(ErrorKind::kRouteUnresolvable,
                "unknown spawn spline '" + std::string(spawn_spline) + "'");
  }
  if (spawn_offset < 0.0 || spawn_offset > current->length()) {
    throw Error(ErrorKind::kRouteUnresolvable, "spawn offset outside spline");
  }
  std::vector<RouteSegment> segments;
  std::vector<Action> consumed;
  double pos = spawn_offset;

  const auto push = [&](std::shared_ptr<const Spline> spline, double from, double to) {
    if (to - from > 0.0) segments.push_back({std::move(spline), from, to, 0.0});
  };
  const auto fail = [&](const std::string& why) {
    return Error(ErrorKind::kRouteUnresolvable,
                 "from '" + std::string(spawn_spline) + "': " + why);
  };
  // Leaves a connector onto its exit lane.
  const auto leave_connector = [&] {
    push(current, pos, current->length());
    current = network.find_spline(*current->exit_spline);
    pos = 0.0;
  };
  // Crosses the downstream intersection with `action`; false at the map edge.
  const auto cross = [&](Action action) {
    auto it = current->successors.find(action);
    if (it == current->successors.end()) return false;
    push(current, pos, current->length());
    auto conn = network.find_spline(it->second);
    push(conn, 0.0, conn->length());
    current = network.find_spline(*conn->exit_spline);
    pos = 0.0;
    return true;
  };

  for (Action action : actions) {
    if (current->kind == SplineKind::kConnector) leave_connector();
    if (action == Action::kMergeLeft || action == Action::kMergeRight) {
      const auto& adjacent = action == Action::kMergeLeft ? current->adjacent_left
                                                          : current->adjacent_right;
      if (!adjacent) {
        throw fail(std::string("no adjacent lane for ") + std::string(to_string(action)) +
                   " on '" + current->id + "'");
      }
      auto target = network.find_spline(*adjacent);
      const double land = pos + kMergeLength;
      if (land > target->length() - kStopLineSetback) {
        throw fail("no room to merge on '" + current->id + "'");
      }
      const Vec2 a = current->pose_at(pos).position();
      const Vec2 b = target->pose_at(land).position();
      auto conn = std::make_shared<const Spline>(
          make_spline("merge:" + current->id + "->" + target->id + "@" +
                          std::to_string(pos),
                      SplineKind::kConnector, current->direction, {a, b}));
      push(conn, 0.0, conn->length());
      current = target;
      pos = land;
    } else {
      if (!cross(action)) {
        throw fail(std::string("'") + std::string(to_string(action)) +
                   "' unavailable: '" + current->id + "' leaves the map");
      }
    }
    consumed.push_back(action);
  }
  for (;;) {
    if (current->kind == SplineKind::kConnector) {
      leave_connector();
      continue;
    }
    if (!cross(Action::kStraight)) break;
  }
  push(current, pos, current->length());
  if (segments.empty()) {
    // Spawned at the very end of a boundary lane.
    segments.push_back({current, pos, pos, 0.0});
  }
  return Route(std::move(segments), std::move(consumed));
}

std::string network_to_json(const RoadNetwork& network) {
  using nlohmann::json;
  json features = json::array();
  for (const auto& [id, spline] : network.splines()) {
    json coords = json::array();
    for (const auto& p : spline->points) coords.push_back({p.x, p.y});
    json props = {{"id", id},
                  {"kind", spline->kind == SplineKind::kLane ? "lane" : "connector"},
                  {"direction", to_string(spline->direction)},
                  {"length", spline->length()}};
    if (spline->end_intersection) props["end_intersection"] = *spline->end_intersection;
    if (spline->exit_spline) props["exit_spline"] = *spline->exit_spline;
    if (spline->adjacent_left) props["adjacent_left"] = *spline->adjacent_left;
    if (spline->adjacent_right) props["adjacent_right"] = *spline->adjacent_right;
    if (!spline->successors.empty()) {
      json succ = json::object();
      for (const auto& [a, sid] : spline->successors) succ[std::string(to_string(a))] = sid;
      props["successors"] = succ;
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
                        {"properties", props}});
  }
  for (const auto& in : network.intersections()) {
    features.push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "Point"}, {"coordinates", {in.center.x, in.center.y}}}},
         {"properties", {{"id", in.id}, {"kind", "intersection"}}}});
  }
  const auto& p = network.params();
  json doc = {{"type", "FeatureCollection"},
              {"extent", {network.extent().x, network.extent().y}},
              {"grid",
               {{"rows", p.rows},
                {"cols", p.cols},
                {"block_size", p.block_size},
                {"lane_offset", p.lane_offset},
                {"lanes_per_direction", p.lanes_per_direction}}},
              {"features", features}};
  return doc.dump(2) + "\n";
}

}  // namespace ccity

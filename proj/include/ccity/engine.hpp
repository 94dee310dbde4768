#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ccity/agents.hpp"
#include "ccity/causal_graph.hpp"
#include "ccity/road_network.hpp"
#include "ccity/scenario.hpp"
#include "ccity/signals.hpp"

namespace ccity {

// Logged pose of one vehicle. z, roll and pitch are always zero in this
// planar model but keep their slots in the file format.
struct VehicleFrame {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double v = 0.0;
  bool done = false;  // reached the end of its route; pose frozen

  friend bool operator==(const VehicleFrame&, const VehicleFrame&) = default;
};

struct FrameLog {
  int frame_index = 0;
  double t = 0.0;
  std::map<std::string, VehicleFrame> vehicles;
  std::map<std::string, LightState> lights;

  friend bool operator==(const FrameLog&, const FrameLog&) = default;
};

struct SimLog {
  std::string scenario_id;
  std::string config_digest;
  Mode mode = Mode::kToy;
  double frame_period = 1.0;
  Vec2 extent;
  std::vector<FrameLog> frames;
  std::vector<CollisionEvent> collisions;
  CausalGraph ground_truth;

  friend bool operator==(const SimLog&, const SimLog&) = default;
};

// Values are rounded to this many decimals before they enter a log.
inline constexpr int kLogDecimals = 6;
double round_for_log(double value);

std::string config_digest(const ScenarioConfig& config);

// Runs one scenario to completion. Throws ValidationFailed when the config
// does not fit the network.
SimLog run(const ScenarioConfig& config, const RoadNetwork& network);

// Exact text of the .simlog.jsonl container.
std::string serialize_log(const SimLog& log);
SimLog parse_log(std::string_view text);

void write_log(const SimLog& log, const std::filesystem::path& path);
SimLog read_log(const std::filesystem::path& path);

// Whole-file read/write helpers raising IoError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace ccity

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ccity/engine.hpp"
#include "ccity/rng.hpp"
#include "ccity/scenario.hpp"

namespace ccity {

enum class Split { kTrain, kVal, kTest };

inline constexpr std::array<Split, 3> kAllSplits = {Split::kTrain, Split::kVal, Split::kTest};

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct SplitCounts {
  int train = 4000;
  int val = 500;
  int test = 500;

  int of(Split split) const;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

// Named split sizes: smoke, desk, paper.
std::optional<SplitCounts> preset_counts(std::string_view name);

struct DatasetParams {
  int n_cars = 8;
  double causal_fraction = 0.5;
  Mode mode = Mode::kAgency;
  SplitCounts counts;
  std::uint64_t seed = 42;
  int duration_frames = 150;
  GridParams network;

  friend bool operator==(const DatasetParams&, const DatasetParams&) = default;
};

// Leader sits this far ahead of its follower on the shared route.
inline constexpr double kPairSeparation = 30.0;
// Shortest route any sampled vehicle may take.
inline constexpr double kMinRouteLength = 60.0;
// Vehicles spawned on the same lane are at least this far apart.
inline constexpr double kMinSpawnSpacing = 8.0;
// Unrelated vehicles whose nominal trajectories align this closely under
// some lag are resampled.
inline constexpr double kMinUnrelatedLagScore = 5.0;
inline constexpr int kPlacementRetries = 100;
inline constexpr int kRouteAttempts = 1000;
// Agency target speeds, m/s.
inline constexpr double kAgencySpeedMin = 2.0;
inline constexpr double kAgencySpeedMax = 3.0;

// floor(n_cars * fraction / 2).
int pair_count(int n_cars, double causal_fraction);

// Empty string when the params are usable.
std::string check_dataset_params(const DatasetParams& params);

// One scenario with `pair_count` leader-follower pairs and independent
// fillers. Throws SamplingExhausted.
ScenarioConfig sample_scenario(Rng& rng, const DatasetParams& params,
                               const RoadNetwork& network, std::string scenario_id);

std::string scenario_id_for(Mode mode, Split split, int index);
std::uint64_t scenario_seed(std::uint64_t seed, Split split, int index);

struct GeneratedScenario {
  ScenarioConfig config;
  SimLog log;
};

// Samples and runs one split in memory, ordered by index.
std::vector<GeneratedScenario> generate_split(const DatasetParams& params, Split split,
                                              int workers = 1);

struct ManifestEntry {
  std::string id;
  std::string scenario_file;  // relative to the dataset root
  std::string log_file;
  std::string scenario_sha256;
  std::string log_sha256;
  int edges = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  DatasetParams params;
  std::array<std::vector<ManifestEntry>, 3> splits;  // indexed by Split

  const std::vector<ManifestEntry>& entries(Split split) const {
    return splits[static_cast<std::size_t>(split)];
  }
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);

// Writes {train,val,test}/<id>.scenario.json and .simlog.jsonl plus
// manifest.json under out_dir. Throws IoError.
DatasetManifest generate_dataset(const DatasetParams& params,
                                 const std::filesystem::path& out_dir, int workers = 1);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);

// Logs of one split in manifest order. Throws CorruptLog when a file does
// not match its recorded digest.
std::vector<SimLog> load_split_logs(const std::filesystem::path& dataset_dir, Split split,
                                    int workers = 1);

struct ToggleRunRedLights {
  std::string vehicle;
};
struct ChangeAction {
  std::string vehicle;
  std::size_t index = 0;
  Action action = Action::kStraight;
};
// Adds `seconds` to the global offset, or to one intersection's offset.
struct ShiftSignalOffset {
  double seconds = 0.0;
  std::optional<std::string> intersection;
};
using CounterfactualEdit = std::variant<ToggleRunRedLights, ChangeAction, ShiftSignalOffset>;

// Copy of `config` with a single edit applied and "-cf" appended to the id.
// Throws UnknownVehicle, OutOfRange (action index) or InvariantViolation
// (offset shift without a schedule).
ScenarioConfig counterfactual_variant(const ScenarioConfig& config,
                                      const CounterfactualEdit& edit);

}  // namespace ccity

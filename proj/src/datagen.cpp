#include "ccity/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "ccity/analysis.hpp"
#include "ccity/digest.hpp"
#include "ccity/error.hpp"
#include "ccity/parallel.hpp"
#include "json.hpp"

namespace ccity {

using nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view text) {
  for (Split s : kAllSplits) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

int SplitCounts::of(Split split) const {
  switch (split) {
    case Split::kTrain:
      return train;
    case Split::kVal:
      return val;
    case Split::kTest:
      return test;
  }
  return 0;
}

std::optional<SplitCounts> preset_counts(std::string_view name) {
  if (name == "smoke") return SplitCounts{40, 5, 5};
  if (name == "desk") return SplitCounts{400, 50, 50};
  if (name == "paper") return SplitCounts{4000, 500, 500};
  return std::nullopt;
}

int pair_count(int n_cars, double causal_fraction) {
  return static_cast<int>(std::floor(n_cars * causal_fraction / 2.0 + 1e-9));
}

std::string check_dataset_params(const DatasetParams& p) {
  if (p.n_cars < 1 || p.n_cars > 99) return "n_cars must be in [1, 99]";
  if (!(p.causal_fraction >= 0.0 && p.causal_fraction <= 1.0)) {
    return "causal_fraction must be in [0, 1]";
  }
  if (p.counts.train < 0 || p.counts.val < 0 || p.counts.test < 0) {
    return "split counts must be non-negative";
  }
  if (p.duration_frames < 1 || p.duration_frames > 100000) {
    return "duration_frames must be in [1, 100000]";
  }
  return check_grid_params(p.network);
}

std::string scenario_id_for(Mode mode, Split split, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%s-%05d", std::string(to_string(mode)).c_str(),
                std::string(to_string(split)).c_str(), index);
  return buf;
}

std::uint64_t scenario_seed(std::uint64_t seed, Split split, int index) {
  return derive_seed({seed, static_cast<std::uint64_t>(split) + 1,
                      static_cast<std::uint64_t>(index)});
}

namespace {

constexpr std::array<Action, 5> kActions = {Action::kLeft, Action::kRight, Action::kStraight,
                                            Action::kMergeLeft, Action::kMergeRight};

struct Placed {
  std::string spline;
  double offset = 0.0;
  std::vector<Action> actions;
  double speed = 0.0;
  Trajectory nominal;
  int partner = -1;
};

struct Draw {
  std::string spline;
  double offset = 0.0;
  std::vector<Action> actions;
  std::shared_ptr<const Route> route;
};

// Constant-speed track along a route, sampled per frame.
Trajectory nominal_track(const Route& route, double step, int frames) {
  Trajectory tr;
  const double total = route.total_length();
  for (int k = 0; k < frames; ++k) {
    const double s = std::min(k * step, total);
    tr.points.push_back(route.pose_at(s).position());
    tr.en_route.push_back(s < total);
  }
  return tr;
}

class Sampler {
 public:
  Sampler(Rng& rng, const DatasetParams& params, const RoadNetwork& network)
      : rng_(rng), params_(params), network_(network), lanes_(network.lane_ids()) {}

  // All cars in placement order: pairs (leader, follower) first.
  std::optional<std::vector<Placed>> place_all(int pairs, int singles) {
    placed_.clear();
    for (int p = 0; p < pairs; ++p) {
      if (!place_pair()) return std::nullopt;
    }
    for (int i = 0; i < singles; ++i) {
      if (!place_single()) return std::nullopt;
    }
    return placed_;
  }

 private:
  double draw_speed() {
    if (params_.mode == Mode::kToy) return kToyUnitsPerFrame;
    return rng_.uniform(kAgencySpeedMin, kAgencySpeedMax);
  }

  std::optional<Draw> draw_route(double lead_room) {
    Draw d;
    d.spline = lanes_[rng_.below(lanes_.size())];
    const double len = network_.find_spline(d.spline)->length();
    if (len < lead_room) return std::nullopt;
    d.offset = rng_.uniform(0.0, len - lead_room);
    const auto n = 1 + rng_.below(kMaxActions);
    for (std::uint64_t i = 0; i < n; ++i) d.actions.push_back(kActions[rng_.below(kActions.size())]);
    try {
      d.route = std::make_shared<const Route>(
          resolve_route(network_, d.spline, d.actions, d.offset));
    } catch (const Error&) {
      return std::nullopt;
    }
    if (d.route->total_length() < kMinRouteLength) return std::nullopt;
    return d;
  }

  bool spacing_ok(const std::string& spline, double offset) const {
    for (const auto& p : placed_) {
      if (p.spline == spline && std::abs(p.offset - offset) < kMinSpawnSpacing) return false;
    }
    return true;
  }

  bool unrelated_ok(const Trajectory& track, int skip) const {
    for (std::size_t i = 0; i < placed_.size(); ++i) {
      if (static_cast<int>(i) == skip) continue;
      const auto& other = placed_[i].nominal;
      if (lag_similarity(other, track, kDefaultMaxLag).score < kMinUnrelatedLagScore ||
          lag_similarity(track, other, kDefaultMaxLag).score < kMinUnrelatedLagScore) {
        return false;
      }
    }
    return true;
  }

  double frame_step(double speed) const {
    return params_.mode == Mode::kToy ? kToyUnitsPerFrame : speed;
  }

  bool place_pair() {
    for (int attempt = 0; attempt < kRouteAttempts; ++attempt) {
      auto d = draw_route(kPairSeparation);
      if (!d) continue;
      const double lead_offset = d->offset + kPairSeparation;
      Route lead;
      try {
        lead = resolve_route(network_, d->spline, d->actions, lead_offset);
      } catch (const Error&) {
        continue;
      }
      // Same geometry beyond the leader's spawn point.
      if (lead.segment_ids() != d->route->segment_ids()) continue;
      if (lead.total_length() < kMinRouteLength) continue;
      if (!spacing_ok(d->spline, d->offset) || !spacing_ok(d->spline, lead_offset)) continue;
      const double speed = draw_speed();
      const double step = frame_step(speed);
      Trajectory lead_track = nominal_track(lead, step, params_.duration_frames);
      Trajectory follow_track = nominal_track(*d->route, step, params_.duration_frames);
      if (!unrelated_ok(lead_track, -1) || !unrelated_ok(follow_track, -1)) continue;
      const int base = static_cast<int>(placed_.size());
      placed_.push_back({d->spline, lead_offset, d->actions, speed, std::move(lead_track),
                         base + 1});
      placed_.push_back({d->spline, d->offset, d->actions, speed, std::move(follow_track),
                         base});
      return true;
    }
    return false;
  }

  bool place_single() {
    for (int attempt = 0; attempt < kRouteAttempts; ++attempt) {
      auto d = draw_route(0.0);
      if (!d) continue;
      if (!spacing_ok(d->spline, d->offset)) continue;
      const bool twin = std::any_of(placed_.begin(), placed_.end(), [&](const Placed& p) {
        return p.spline == d->spline && p.actions == d->actions;
      });
      if (twin) continue;
      const double speed = draw_speed();
      Trajectory track = nominal_track(*d->route, frame_step(speed), params_.duration_frames);
      if (!unrelated_ok(track, -1)) continue;
      placed_.push_back({d->spline, d->offset, d->actions, speed, std::move(track), -1});
      return true;
    }
    return false;
  }

  Rng& rng_;
  const DatasetParams& params_;
  const RoadNetwork& network_;
  std::vector<std::string> lanes_;
  std::vector<Placed> placed_;
};

std::string vehicle_name(int index, int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "v%0*d", n > 100 ? 3 : 2, index);
  return buf;
}

}  // namespace

ScenarioConfig sample_scenario(Rng& rng, const DatasetParams& params,
                               const RoadNetwork& network, std::string scenario_id) {
  if (auto why = check_dataset_params(params); !why.empty()) {
    throw Error(ErrorKind::kInvariantViolation, why);
  }
  const int pairs = pair_count(params.n_cars, params.causal_fraction);
  const int singles = params.n_cars - 2 * pairs;

  Sampler sampler(rng, params, network);
  std::optional<std::vector<Placed>> cars;
  for (int retry = 0; retry < kPlacementRetries && !cars; ++retry) {
    cars = sampler.place_all(pairs, singles);
  }
  if (!cars) {
    throw Error(ErrorKind::kSamplingExhausted,
                "could not place " + std::to_string(params.n_cars) + " vehicles");
  }

  // Shuffle names so ids carry no hint of the role.
  std::vector<int> names(cars->size());
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = static_cast<int>(i);
  for (std::size_t i = names.size(); i > 1; --i) {
    std::swap(names[i - 1], names[rng.below(i)]);
  }

  ScenarioConfig config;
  config.scenario_id = std::move(scenario_id);
  config.mode = params.mode;
  config.duration_frames = params.duration_frames;
  config.network = params.network;
  if (params.mode == Mode::kAgency) {
    SignalSchedule sched = default_schedule();
    sched.offset = rng.uniform(0.0, sched.cycle_period());
    config.signal_schedule = sched;
  }
  for (std::size_t i = 0; i < cars->size(); ++i) {
    const auto& car = (*cars)[i];
    VehicleSpec spec;
    spec.id = vehicle_name(names[i], params.n_cars);
    spec.spawn_spline = car.spline;
    spec.spawn_offset = car.offset;
    spec.actions = car.actions;
    if (params.mode == Mode::kAgency) spec.target_speed = car.speed;
    config.vehicles.push_back(std::move(spec));
  }
  for (std::size_t i = 0; i < cars->size(); ++i) {
    const int partner = (*cars)[i].partner;
    // Leaders are placed first in each pair.
    if (partner > static_cast<int>(i)) {
      config.causal_edges.push_back({config.vehicles[i].id,
                                     config.vehicles[static_cast<std::size_t>(partner)].id});
    }
  }
  std::sort(config.vehicles.begin(), config.vehicles.end(),
            [](const VehicleSpec& a, const VehicleSpec& b) { return a.id < b.id; });
  std::sort(config.causal_edges.begin(), config.causal_edges.end());
  return config;
}

std::vector<GeneratedScenario> generate_split(const DatasetParams& params, Split split,
                                              int workers) {
  if (auto why = check_dataset_params(params); !why.empty()) {
    throw Error(ErrorKind::kInvariantViolation, why);
  }
  const RoadNetwork network = build_grid(params.network);
  const auto n = static_cast<std::size_t>(params.counts.of(split));
  std::vector<GeneratedScenario> out(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const int index = static_cast<int>(i);
    const std::uint64_t seed = scenario_seed(params.seed, split, index);
    Rng rng(seed);
    ScenarioConfig config =
        sample_scenario(rng, params, network, scenario_id_for(params.mode, split, index));
    config.seed = seed;
    out[i].log = run(config, network);
    out[i].config = std::move(config);
  });
  return out;
}

namespace {

json params_to_json(const DatasetParams& p) {
  return {{"n_cars", p.n_cars},
          {"causal_fraction", p.causal_fraction},
          {"mode", std::string(to_string(p.mode))},
          {"counts", {{"train", p.counts.train}, {"val", p.counts.val}, {"test", p.counts.test}}},
          {"seed", p.seed},
          {"duration_frames", p.duration_frames},
          {"network",
           {{"rows", p.network.rows},
            {"cols", p.network.cols},
            {"block_size", p.network.block_size},
            {"lane_offset", p.network.lane_offset},
            {"lanes_per_direction", p.network.lanes_per_direction}}}};
}

[[noreturn]] void bad_manifest(const std::string& why) {
  throw Error(ErrorKind::kCorruptLog, "manifest: " + why);
}

DatasetParams params_from_json(const json& j) {
  DatasetParams p;
  auto mode = parse_mode(j.at("mode").get<std::string>());
  if (!mode) bad_manifest("bad mode");
  p.n_cars = j.at("n_cars").get<int>();
  p.causal_fraction = j.at("causal_fraction").get<double>();
  p.mode = *mode;
  const json& c = j.at("counts");
  p.counts = {c.at("train").get<int>(), c.at("val").get<int>(), c.at("test").get<int>()};
  p.seed = j.at("seed").get<std::uint64_t>();
  p.duration_frames = j.at("duration_frames").get<int>();
  const json& n = j.at("network");
  p.network = {n.at("rows").get<int>(), n.at("cols").get<int>(),
               n.at("block_size").get<double>(), n.at("lane_offset").get<double>(),
               n.at("lanes_per_direction").get<int>()};
  return p;
}

}  // namespace

std::string serialize_manifest(const DatasetManifest& m) {
  json splits = json::object();
  for (Split s : kAllSplits) {
    json arr = json::array();
    for (const auto& e : m.entries(s)) {
      arr.push_back({{"id", e.id},
                     {"scenario", e.scenario_file},
                     {"log", e.log_file},
                     {"scenario_sha256", e.scenario_sha256},
                     {"log_sha256", e.log_sha256},
                     {"edges", e.edges}});
    }
    splits[std::string(to_string(s))] = std::move(arr);
  }
  json root = {{"format", "ccity-dataset"},
               {"version", 1},
               {"params", params_to_json(m.params)},
               {"splits", std::move(splits)}};
  return root.dump(2) + "\n";
}

DatasetManifest parse_manifest(std::string_view text) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) bad_manifest("not a JSON object");
  DatasetManifest m;
  try {
    if (root.at("format") != "ccity-dataset") bad_manifest("unknown format");
    m.params = params_from_json(root.at("params"));
    for (Split s : kAllSplits) {
      for (const auto& e : root.at("splits").at(std::string(to_string(s)))) {
        m.splits[static_cast<std::size_t>(s)].push_back(
            {e.at("id").get<std::string>(), e.at("scenario").get<std::string>(),
             e.at("log").get<std::string>(), e.at("scenario_sha256").get<std::string>(),
             e.at("log_sha256").get<std::string>(), e.at("edges").get<int>()});
      }
    }
  } catch (const json::exception& ex) {
    bad_manifest(ex.what());
  }
  return m;
}

DatasetManifest generate_dataset(const DatasetParams& params,
                                 const std::filesystem::path& out_dir, int workers) {
  if (auto why = check_dataset_params(params); !why.empty()) {
    throw Error(ErrorKind::kInvariantViolation, why);
  }
  const RoadNetwork network = build_grid(params.network);
  DatasetManifest manifest;
  manifest.params = params;
  for (Split split : kAllSplits) {
    const std::string dir(to_string(split));
    std::error_code ec;
    std::filesystem::create_directories(out_dir / dir, ec);
    if (ec) throw Error(ErrorKind::kIoError, "cannot create " + (out_dir / dir).string());

    const auto n = static_cast<std::size_t>(params.counts.of(split));
    auto& entries = manifest.splits[static_cast<std::size_t>(split)];
    entries.resize(n);
    parallel_for(n, workers, [&](std::size_t i) {
      const int index = static_cast<int>(i);
      const std::uint64_t seed = scenario_seed(params.seed, split, index);
      Rng rng(seed);
      ScenarioConfig config =
          sample_scenario(rng, params, network, scenario_id_for(params.mode, split, index));
      config.seed = seed;
      const std::string scenario_text = serialize_scenario(config);
      const std::string log_text = serialize_log(run(config, network));
      ManifestEntry& e = entries[i];
      e.id = config.scenario_id;
      e.scenario_file = dir + "/" + e.id + ".scenario.json";
      e.log_file = dir + "/" + e.id + ".simlog.jsonl";
      e.scenario_sha256 = sha256_hex(scenario_text);
      e.log_sha256 = sha256_hex(log_text);
      e.edges = static_cast<int>(config.causal_edges.size());
      write_text_file(out_dir / e.scenario_file, scenario_text);
      write_text_file(out_dir / e.log_file, log_text);
    });
  }
  write_text_file(out_dir / kManifestFile, serialize_manifest(manifest));
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir) {
  return parse_manifest(read_text_file(dataset_dir / kManifestFile));
}

std::vector<SimLog> load_split_logs(const std::filesystem::path& dataset_dir, Split split,
                                    int workers) {
  const DatasetManifest manifest = read_manifest(dataset_dir);
  const auto& entries = manifest.entries(split);
  std::vector<SimLog> logs(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    const std::string text = read_text_file(dataset_dir / entries[i].log_file);
    if (sha256_hex(text) != entries[i].log_sha256) {
      throw Error(ErrorKind::kCorruptLog, entries[i].log_file + " does not match its digest");
    }
    logs[i] = parse_log(text);
  });
  return logs;
}

namespace {

VehicleSpec& vehicle_or_throw(ScenarioConfig& config, const std::string& id) {
  for (auto& v : config.vehicles) {
    if (v.id == id) return v;
  }
  throw Error(ErrorKind::kUnknownVehicle, "no vehicle '" + id + "'");
}

}  // namespace

ScenarioConfig counterfactual_variant(const ScenarioConfig& config,
                                      const CounterfactualEdit& edit) {
  ScenarioConfig out = config;
  out.scenario_id += "-cf";
  if (const auto* e = std::get_if<ToggleRunRedLights>(&edit)) {
    auto& v = vehicle_or_throw(out, e->vehicle);
    v.run_red_lights = !v.run_red_lights;
  } else if (const auto* e = std::get_if<ChangeAction>(&edit)) {
    auto& v = vehicle_or_throw(out, e->vehicle);
    if (e->index >= v.actions.size()) {
      throw Error(ErrorKind::kOutOfRange, "vehicle '" + e->vehicle + "' has no action " +
                                              std::to_string(e->index));
    }
    v.actions[e->index] = e->action;
  } else if (const auto* e = std::get_if<ShiftSignalOffset>(&edit)) {
    if (!out.signal_schedule) {
      throw Error(ErrorKind::kInvariantViolation, "scenario has no signal schedule");
    }
    if (e->intersection) {
      out.signal_schedule->intersection_offsets[*e->intersection] += e->seconds;
    } else {
      out.signal_schedule->offset += e->seconds;
    }
  }
  return out;
}

}  // namespace ccity

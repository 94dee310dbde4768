#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "ccity/datagen.hpp"
#include "ccity/digest.hpp"
#include "ccity/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ccity;

namespace {

DatasetParams small(Mode mode, int n_cars = 8, double frac = 0.5) {
  DatasetParams p;
  p.mode = mode;
  p.n_cars = n_cars;
  p.causal_fraction = frac;
  p.counts = {6, 2, 2};
  return p;
}

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no ccity::Error thrown");
  return ErrorKind::kIoError;
}

std::map<std::string, std::string> tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    out[std::filesystem::relative(e.path(), root).string()] = read_text_file(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("pair count") {
  CHECK(pair_count(6, 1.0) == 3);
  CHECK(pair_count(8, 0.5) == 2);
  CHECK(pair_count(8, 0.0) == 0);
  CHECK(pair_count(8, 0.2) == 0);
  CHECK(pair_count(12, 0.5) == 3);
  CHECK(pair_count(4, 0.5) == 1);
  CHECK(pair_count(7, 1.0) == 3);
  // 10 * 0.3 / 2 is 1.4999999999999998 in binary.
  CHECK(pair_count(10, 0.3) == 1);
  CHECK(pair_count(10, 0.6) == 3);
}

TEST_CASE("dataset params") {
  CHECK(check_dataset_params(DatasetParams{}).empty());
  DatasetParams p;
  p.n_cars = 0;
  CHECK_FALSE(check_dataset_params(p).empty());
  p = {};
  p.causal_fraction = 1.5;
  CHECK_FALSE(check_dataset_params(p).empty());
  p = {};
  p.counts.test = -1;
  CHECK_FALSE(check_dataset_params(p).empty());
  CHECK(preset_counts("smoke") == SplitCounts{40, 5, 5});
  CHECK(preset_counts("desk") == SplitCounts{400, 50, 50});
  CHECK(preset_counts("paper") == SplitCounts{4000, 500, 500});
  CHECK_FALSE(preset_counts("huge"));
  CHECK(parse_split("val") == Split::kVal);
  CHECK_FALSE(parse_split("dev"));
  CHECK(scenario_id_for(Mode::kToy, Split::kTest, 7) == "toy-test-00007");
}

TEST_CASE("sampled scenarios honour the pair layout") {
  const auto net = build_grid(GridParams{});
  for (Mode mode : {Mode::kToy, Mode::kAgency}) {
    for (auto [n, frac] : {std::pair{8, 0.5}, std::pair{6, 1.0}, std::pair{12, 0.5}, std::pair{5, 0.0}}) {
      auto params = small(mode, n, frac);
      for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        Rng rng(seed);
        const auto c = sample_scenario(rng, params, net, "s");
        REQUIRE_NOTHROW(check_invariants(c));
        CHECK(validate_against_network(c, net).empty());
        CHECK(c.mode == mode);
        REQUIRE(c.vehicles.size() == static_cast<std::size_t>(n));
        CHECK(c.causal_edges.size() == static_cast<std::size_t>(pair_count(n, frac)));
        CHECK(static_cast<bool>(c.signal_schedule) == (mode == Mode::kAgency));

        std::set<std::string> in_pair;
        for (const auto& e : c.causal_edges) {
          const auto* l = c.find_vehicle(e.leader);
          const auto* f = c.find_vehicle(e.follower);
          REQUIRE(l);
          REQUIRE(f);
          CHECK(in_pair.insert(e.leader).second);
          CHECK(in_pair.insert(e.follower).second);
          CHECK(l->spawn_spline == f->spawn_spline);
          CHECK(l->actions == f->actions);
          CHECK(l->target_speed == f->target_speed);
          CHECK(l->spawn_offset - f->spawn_offset == doctest::Approx(kPairSeparation));
        }
        for (std::size_t i = 0; i < c.vehicles.size(); ++i) {
          const auto& a = c.vehicles[i];
          const Route r = resolve_route(net, a.spawn_spline, a.actions, a.spawn_offset);
          CHECK(r.total_length() >= kMinRouteLength);
          if (mode == Mode::kAgency) {
            CHECK(a.target_speed >= kAgencySpeedMin);
            CHECK(a.target_speed <= kAgencySpeedMax);
          }
          for (std::size_t j = i + 1; j < c.vehicles.size(); ++j) {
            const auto& b = c.vehicles[j];
            if (a.spawn_spline == b.spawn_spline) {
              CHECK(std::abs(a.spawn_offset - b.spawn_offset) >= kMinSpawnSpacing);
            }
            const bool paired = c.ground_truth().has_edge(a.id, b.id) ||
                                c.ground_truth().has_edge(b.id, a.id);
            if (!paired && a.spawn_spline == b.spawn_spline) CHECK(a.actions != b.actions);
          }
        }
      }
    }
  }
}

TEST_CASE("generation is deterministic and independent of worker count") {
  auto params = small(Mode::kAgency);
  const auto one = generate_split(params, Split::kVal, 1);
  const auto three = generate_split(params, Split::kVal, 3);
  REQUIRE(one.size() == 2);
  REQUIRE(three.size() == 2);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].config == three[i].config);
    CHECK(serialize_log(one[i].log) == serialize_log(three[i].log));
    CHECK(one[i].config.scenario_id == scenario_id_for(Mode::kAgency, Split::kVal, static_cast<int>(i)));
    CHECK(one[i].config.seed == scenario_seed(params.seed, Split::kVal, static_cast<int>(i)));
  }
  params.seed = 43;
  CHECK(generate_split(params, Split::kVal, 1)[0].config.vehicles != one[0].config.vehicles);
}

TEST_CASE("splits draw from disjoint seed streams") {
  std::set<std::uint64_t> seen;
  for (Split s : kAllSplits) {
    for (int i = 0; i < 200; ++i) CHECK(seen.insert(scenario_seed(42, s, i)).second);
  }
}

TEST_CASE("dataset on disk: manifest, digests and tamper detection") {
  ccity::testing::TempDir a, b;
  const auto params = small(Mode::kToy);
  const auto m = generate_dataset(params, a.path(), 1);
  generate_dataset(params, b.path(), 4);
  CHECK(tree(a.path()) == tree(b.path()));

  CHECK(read_manifest(a.path()) == m);
  CHECK(parse_manifest(serialize_manifest(m)) == m);
  CHECK(m.params == params);
  for (Split s : kAllSplits) {
    REQUIRE(m.entries(s).size() == static_cast<std::size_t>(params.counts.of(s)));
    for (const auto& e : m.entries(s)) {
      const auto scen = read_text_file(a.path() / e.scenario_file);
      const auto log = read_text_file(a.path() / e.log_file);
      CHECK(sha256_hex(scen) == e.scenario_sha256);
      CHECK(sha256_hex(log) == e.log_sha256);
      CHECK(e.edges == pair_count(params.n_cars, params.causal_fraction));
      CHECK(parse_scenario(scen).scenario_id == e.id);
    }
  }
  const auto logs = load_split_logs(a.path(), Split::kTest, 2);
  REQUIRE(logs.size() == 2);
  CHECK(logs[0].scenario_id == m.entries(Split::kTest)[0].id);

  const auto victim = a.path() / m.entries(Split::kTest)[1].log_file;
  std::string text = read_text_file(victim);
  text[text.size() / 2] = text[text.size() / 2] == '1' ? '2' : '1';
  write_text_file(victim, text);
  CHECK(kind_of([&] { load_split_logs(a.path(), Split::kTest, 1); }) == ErrorKind::kCorruptLog);

  CHECK(kind_of([&] { parse_manifest("{}"); }) == ErrorKind::kCorruptLog);
  CHECK(kind_of([&] { parse_manifest("nope"); }) == ErrorKind::kCorruptLog);
  CHECK(kind_of([&] { read_manifest(a.path() / "missing"); }) == ErrorKind::kIoError);
}

TEST_CASE("counterfactual variants") {
  const auto net = build_grid(GridParams{});
  Rng rng(11);
  const auto base = sample_scenario(rng, small(Mode::kAgency), net, "base");
  const std::string who = base.vehicles[0].id;

  const auto toggled = counterfactual_variant(base, ToggleRunRedLights{who});
  CHECK(toggled.scenario_id == "base-cf");
  CHECK(toggled.vehicles[0].run_red_lights != base.vehicles[0].run_red_lights);
  auto rest = toggled;
  rest.scenario_id = base.scenario_id;
  rest.vehicles[0].run_red_lights = base.vehicles[0].run_red_lights;
  CHECK(rest == base);

  const auto same = counterfactual_variant(base, ShiftSignalOffset{0.0, std::nullopt});
  auto renamed = same;
  renamed.scenario_id = base.scenario_id;
  CHECK(renamed == base);
  CHECK(run(renamed, net).frames == run(base, net).frames);

  // From a zero offset, +15 s lands on the east-west yellow and +19 s on the
  // north-south green.
  auto zero = base;
  zero.signal_schedule->offset = 0;
  zero.signal_schedule->intersection_offsets.clear();
  const auto plus15 = counterfactual_variant(zero, ShiftSignalOffset{15.0, std::nullopt});
  const auto s15 = light_state_at(*plus15.signal_schedule, plus15.signal_schedule->offset_for("i0_0"), 0);
  CHECK(s15.ew == LightColor::kYellow);
  CHECK(s15.ns == LightColor::kRed);
  const auto plus19 = counterfactual_variant(zero, ShiftSignalOffset{19.0, std::nullopt});
  const auto s19 = light_state_at(*plus19.signal_schedule, plus19.signal_schedule->offset_for("i2_2"), 0);
  CHECK(s19.ew == LightColor::kRed);
  CHECK(s19.ns == LightColor::kGreen);
  const auto local = counterfactual_variant(zero, ShiftSignalOffset{19.0, std::string("i1_1")});
  CHECK(local.signal_schedule->offset_for("i1_1") == 19.0);
  CHECK(local.signal_schedule->offset_for("i0_0") == 0.0);

  if (!base.vehicles[0].actions.empty()) {
    const Action other = base.vehicles[0].actions[0] == Action::kLeft ? Action::kRight : Action::kLeft;
    const auto changed = counterfactual_variant(base, ChangeAction{who, 0, other});
    CHECK(changed.vehicles[0].actions[0] == other);
  }
  CHECK(kind_of([&] { counterfactual_variant(base, ToggleRunRedLights{"ghost"}); }) ==
        ErrorKind::kUnknownVehicle);
  CHECK(kind_of([&] { counterfactual_variant(base, ChangeAction{who, 99, Action::kLeft}); }) ==
        ErrorKind::kOutOfRange);
  auto toy = base;
  toy.signal_schedule.reset();
  CHECK(kind_of([&] { counterfactual_variant(toy, ShiftSignalOffset{1.0, std::nullopt}); }) ==
        ErrorKind::kInvariantViolation);
}

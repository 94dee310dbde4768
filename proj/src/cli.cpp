#include "ccity/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccity/analysis.hpp"
#include "ccity/datagen.hpp"
#include "ccity/error.hpp"
#include "ccity/parallel.hpp"
#include "json.hpp"

namespace ccity::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GenArgs {
  int cars = 8;
  double frac = 0.5;
  std::string mode = "agency";
  std::string counts;
  std::string preset;
  std::uint64_t seed = 42;
  std::string out;
};

struct SimArgs {
  std::string scenario;
  std::string out;
};

struct DiscoverArgs {
  std::string dataset;
  std::string split = "test";
  int max_lag = kDefaultMaxLag;
  std::optional<double> threshold;
  bool calibrate = false;
  std::string out;
};

struct PredictArgs {
  std::string method = "cv";
  int history = kDefaultHistory;
  int horizon = kDefaultHorizon;
  std::string dataset;
  std::string split = "test";
  int max_lag = kDefaultMaxLag;
  std::optional<double> threshold;
  std::string out;
};

struct EvalArgs {
  std::string pred;
  std::string truth;
  std::string out;
};

struct DumpArgs {
  GridParams grid;
  std::string out;
};

[[noreturn]] void invalid(const std::string& why) {
  throw Error(ErrorKind::kInvariantViolation, why);
}

Split split_arg(const std::string& text) {
  auto s = parse_split(text);
  if (!s) invalid("unknown split '" + text + "'");
  return *s;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    write_text_file(path, text);
  }
}

json edges_json(const CausalGraph& g) {
  json arr = json::array();
  for (const auto& e : g.edges) arr.push_back({e.leader, e.follower});
  return arr;
}

std::vector<ScoredScenario> score_logs(std::span<const SimLog> logs, int max_lag,
                                       std::optional<std::size_t> frames, int workers) {
  std::vector<ScoredScenario> out(logs.size());
  parallel_for(logs.size(), workers,
               [&](std::size_t i) { out[i] = score_scenario(logs[i], max_lag, frames); });
  return out;
}

// Threshold from the train split when it has scenarios, else the default.
Calibration calibrate_on_train(const fs::path& dataset, int max_lag,
                               std::optional<std::size_t> frames, int workers) {
  const auto logs = load_split_logs(dataset, Split::kTrain, workers);
  if (logs.empty()) return Calibration{};
  const auto scored = score_logs(logs, max_lag, frames, workers);
  return threshold_calibrate(scored);
}

int cmd_gen(const GenArgs& a, int workers) {
  DatasetParams p;
  p.n_cars = a.cars;
  p.causal_fraction = a.frac;
  auto mode = parse_mode(a.mode);
  if (!mode) invalid("unknown mode '" + a.mode + "'");
  p.mode = *mode;
  p.seed = a.seed;
  if (!a.preset.empty()) {
    auto c = preset_counts(a.preset);
    if (!c) invalid("unknown preset '" + a.preset + "'");
    p.counts = *c;
  }
  if (!a.counts.empty()) {
    SplitCounts c;
    char tail = 0;
    if (std::sscanf(a.counts.c_str(), "%d,%d,%d%c", &c.train, &c.val, &c.test, &tail) != 3) {
      invalid("--counts expects TRAIN,VAL,TEST");
    }
    p.counts = c;
  }
  if (auto why = check_dataset_params(p); !why.empty()) invalid(why);
  const auto m = generate_dataset(p, a.out, workers);
  std::cerr << "wrote " << m.entries(Split::kTrain).size() << "/"
            << m.entries(Split::kVal).size() << "/" << m.entries(Split::kTest).size()
            << " scenarios to " << a.out << "\n";
  return kExitOk;
}

int cmd_sim(const SimArgs& a) {
  const ScenarioConfig config = parse_scenario(read_text_file(a.scenario));
  const RoadNetwork network = build_grid(config.network);
  emit(a.out, serialize_log(run(config, network)));
  return kExitOk;
}

int cmd_discover(const DiscoverArgs& a, int workers) {
  const Split split = split_arg(a.split);
  if (a.max_lag < 1) invalid("--max-lag must be >= 1");
  double threshold = a.threshold.value_or(kDefaultThreshold);
  if (a.calibrate) threshold = calibrate_on_train(a.dataset, a.max_lag, std::nullopt, workers).threshold;
  if (!(threshold >= 0.0)) invalid("--threshold must be >= 0");

  const auto logs = load_split_logs(a.dataset, split, workers);
  const auto scored = score_logs(logs, a.max_lag, std::nullopt, workers);
  const SplitDiscovery d = evaluate_discovery(scored, threshold);

  json scenarios = json::array();
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& e = d.scores[i];
    scenarios.push_back({{"id", logs[i].scenario_id},
                         {"predicted", edges_json(d.predicted[i])},
                         {"truth", edges_json(logs[i].ground_truth)},
                         {"precision", e.precision},
                         {"recall", e.recall},
                         {"f1", e.f1}});
  }
  json root = {{"split", a.split},
               {"max_lag", a.max_lag},
               {"threshold", threshold},
               {"calibrated", a.calibrate},
               {"scenarios", std::move(scenarios)},
               {"summary",
                {{"scenarios", logs.size()},
                 {"mean_f1", d.f1.mean},
                 {"f1_std_error", d.f1.std_error},
                 {"micro_precision", d.pooled.precision},
                 {"micro_recall", d.pooled.recall},
                 {"micro_f1", d.pooled.f1}}}};
  const std::string out =
      a.out.empty() ? (fs::path(a.dataset) / ("discover-" + a.split + ".json")).string() : a.out;
  emit(out, root.dump(2) + "\n");
  std::cerr << "mean F1 " << d.f1.mean << " over " << logs.size() << " scenarios\n";
  return kExitOk;
}

int cmd_predict(const PredictArgs& a, int workers) {
  const Split split = split_arg(a.split);
  if (a.method != "cv" && a.method != "graph") invalid("--method must be cv or graph");
  if (a.history < 2 || a.horizon < 1) invalid("--history must be >= 2 and --horizon >= 1");
  const auto history = static_cast<std::size_t>(a.history);

  std::optional<double> threshold;
  if (a.method == "graph") {
    threshold = a.threshold ? *a.threshold
                            : calibrate_on_train(a.dataset, a.max_lag, history, workers).threshold;
  }
  const auto logs = load_split_logs(a.dataset, split, workers);
  std::vector<json> rows(logs.size());
  parallel_for(logs.size(), workers, [&](std::size_t i) {
    const TrajectorySet trajs = TrajectorySet::from_log(logs[i]);
    if (trajs.frame_count() < history + static_cast<std::size_t>(a.horizon)) {
      throw Error(ErrorKind::kShapeMismatch,
                  logs[i].scenario_id + " is shorter than history + horizon");
    }
    CausalGraph graph;
    graph.nodes = trajs.ids;
    Prediction pred;
    if (threshold) {
      const auto scored = score_scenario(logs[i], a.max_lag, history);
      graph = select_edges(scored.nodes, scored.scores, *threshold);
      pred = predict_graph_conditioned(trajs, graph, a.history, a.horizon, a.max_lag);
    } else {
      pred = predict_cv(trajs, a.history, a.horizon);
    }
    json vehicles = json::object();
    for (const auto& [id, pts] : pred) {
      json arr = json::array();
      for (const auto& p : pts) arr.push_back({p.x, p.y});
      vehicles[id] = std::move(arr);
    }
    rows[i] = {{"id", logs[i].scenario_id}, {"graph", edges_json(graph)},
               {"vehicles", std::move(vehicles)}};
  });
  json root = {{"format", "ccity-predictions"},
               {"method", a.method},
               {"split", a.split},
               {"history", a.history},
               {"horizon", a.horizon},
               {"threshold", threshold ? json(*threshold) : json(nullptr)},
               {"scenarios", rows}};
  const std::string out =
      a.out.empty()
          ? (fs::path(a.dataset) / ("pred-" + a.method + "-" + a.split + ".json")).string()
          : a.out;
  emit(out, root.dump() + "\n");
  return kExitOk;
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

int cmd_eval(const EvalArgs& a, int workers) {
  json root = json::parse(read_text_file(a.pred), nullptr, false);
  if (root.is_discarded() || !root.is_object() || root.value("format", "") != "ccity-predictions") {
    throw Error(ErrorKind::kMalformedJson, a.pred + " is not a predictions file");
  }
  std::vector<Prediction> preds;
  std::vector<CausalGraph> graphs;
  std::vector<TrajectorySet> truths;
  int history = 0;
  int horizon = 0;
  try {
    history = root.at("history").get<int>();
    horizon = root.at("horizon").get<int>();
    const Split split = split_arg(root.at("split").get<std::string>());
    const auto logs = load_split_logs(a.truth, split, workers);
    std::map<std::string, const SimLog*> by_id;
    for (const auto& log : logs) by_id[log.scenario_id] = &log;
    for (const auto& row : root.at("scenarios")) {
      const auto id = row.at("id").get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw Error(ErrorKind::kShapeMismatch, "no truth log for scenario " + id);
      }
      Prediction p;
      for (const auto& [vid, pts] : row.at("vehicles").items()) {
        auto& v = p[vid];
        for (const auto& xy : pts) v.push_back({xy.at(0).get<double>(), xy.at(1).get<double>()});
      }
      CausalGraph g;
      g.nodes = it->second->ground_truth.nodes;
      for (const auto& e : row.at("graph")) {
        g.edges.insert({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
      }
      preds.push_back(std::move(p));
      graphs.push_back(std::move(g));
      truths.push_back(TrajectorySet::from_log(*it->second));
    }
    if (preds.size() != logs.size()) {
      throw Error(ErrorKind::kShapeMismatch, "prediction file does not cover the split");
    }
    std::vector<double> p, r, f;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const EdgeScores e = f1_edges(graphs[i], by_id.at(root.at("scenarios")[i].at("id"))->ground_truth);
      p.push_back(e.precision);
      r.push_back(e.recall);
      f.push_back(e.f1);
    }
    const HorizonErrors mse = mse_per_horizon(preds, truths, history, horizon);
    const auto ps = mean_std_error(p), rs = mean_std_error(r), fs1 = mean_std_error(f);

    const bool as_json = fs::path(a.out).extension() == ".json";
    std::string text;
    if (as_json) {
      json rep = {{"mse_per_horizon", mse.mse},
                  {"stderr_per_horizon", mse.std_error},
                  {"precision", ps.mean},
                  {"recall", rs.mean},
                  {"f1", fs1.mean},
                  {"f1_stderr", fs1.std_error},
                  {"scenarios", mse.scenarios},
                  {"threshold", root.at("threshold")}};
      text = rep.dump(2) + "\n";
    } else {
      text = "metric,horizon,value,stderr\n";
      for (std::size_t k = 0; k < mse.mse.size(); ++k) {
        text += "mse," + std::to_string(k + 1) + "," + csv_number(mse.mse[k]) + "," +
                csv_number(mse.std_error[k]) + "\n";
      }
      text += "precision,," + csv_number(ps.mean) + "," + csv_number(ps.std_error) + "\n";
      text += "recall,," + csv_number(rs.mean) + "," + csv_number(rs.std_error) + "\n";
      text += "f1,," + csv_number(fs1.mean) + "," + csv_number(fs1.std_error) + "\n";
    }
    emit(a.out, text);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::kSchemaViolation, a.pred + ": " + ex.what());
  }
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  return kind == ErrorKind::kIoError ? kExitIo : kExitValidation;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Deterministic grid-city traffic simulator and causal discovery harness",
               "ccity"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 1024));

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a dataset");
  g->add_option("--cars", gen.cars, "Vehicles per scenario");
  g->add_option("--causal-frac", gen.frac, "Fraction of vehicles in leader-follower pairs");
  g->add_option("--mode", gen.mode, "toy or agency");
  g->add_option("--counts", gen.counts, "TRAIN,VAL,TEST scenario counts");
  g->add_option("--preset", gen.preset, "smoke, desk or paper split sizes");
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 1024));

  SimArgs sim;
  auto* s = app.add_subcommand("sim", "Run one scenario");
  s->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  s->add_option("--out", sim.out, "Log path (stdout when omitted)");

  DiscoverArgs disc;
  auto* d = app.add_subcommand("discover", "Discover causal edges on a split");
  d->add_option("--dataset", disc.dataset, "Dataset directory")->required();
  d->add_option("--split", disc.split, "train, val or test");
  d->add_option("--max-lag", disc.max_lag, "Largest lag in frames");
  auto* thr = d->add_option("--threshold", disc.threshold, "Score threshold, map units");
  d->add_flag("--calibrate", disc.calibrate, "Calibrate the threshold on the train split")
      ->excludes(thr);
  d->add_option("--out", disc.out, "Metrics JSON path");
  d->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 1024));

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Predict trajectories after the history window");
  p->add_option("--method", pred.method, "cv or graph");
  p->add_option("--history", pred.history, "History frames");
  p->add_option("--horizon", pred.horizon, "Predicted frames");
  p->add_option("--dataset", pred.dataset, "Dataset directory")->required();
  p->add_option("--split", pred.split, "train, val or test");
  p->add_option("--max-lag", pred.max_lag, "Largest lag in frames");
  p->add_option("--threshold", pred.threshold, "Discovery threshold for --method graph");
  p->add_option("--out", pred.out, "Predictions JSON path");
  p->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 1024));

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predictions against a dataset");
  e->add_option("--pred", ev.pred, "Predictions JSON")->required();
  e->add_option("--truth", ev.truth, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Report path, CSV or .json (stdout when omitted)");
  e->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 1024));

  DumpArgs dump;
  auto* n = app.add_subcommand("network-dump", "Write road network geometry as JSON");
  n->add_option("--rows", dump.grid.rows, "East-west roads");
  n->add_option("--cols", dump.grid.cols, "North-south roads");
  n->add_option("--block", dump.grid.block_size, "Block size, metres");
  n->add_option("--lane-offset", dump.grid.lane_offset, "Lane centre offset, metres");
  n->add_option("--lanes", dump.grid.lanes_per_direction, "Lanes per direction");
  n->add_option("--out", dump.out, "Output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, workers);
    if (s->parsed()) return cmd_sim(sim);
    if (d->parsed()) return cmd_discover(disc, workers);
    if (p->parsed()) return cmd_predict(pred, workers);
    if (e->parsed()) return cmd_eval(ev, workers);
    if (n->parsed()) {
      emit(dump.out, network_to_json(build_grid(dump.grid)) + "\n");
      return kExitOk;
    }
  } catch (const Error& ex) {
    std::cerr << "ccity: " << ex.what() << "\n";
    return exit_code_for(ex.kind());
  } catch (const std::exception& ex) {
    std::cerr << "ccity: " << ex.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace ccity::cli

#include "ccity/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccity/error.hpp"

namespace ccity {

TrajectorySet TrajectorySet::from_log(const SimLog& log) {
  TrajectorySet set;
  set.extent = log.extent;
  if (log.frames.empty()) return set;
  for (const auto& [id, _] : log.frames.front().vehicles) set.ids.push_back(id);
  set.tracks.resize(set.ids.size());
  for (auto& tr : set.tracks) {
    tr.points.reserve(log.frames.size());
    tr.en_route.reserve(log.frames.size());
  }
  for (const auto& frame : log.frames) {
    for (std::size_t i = 0; i < set.ids.size(); ++i) {
      auto it = frame.vehicles.find(set.ids[i]);
      if (it == frame.vehicles.end()) {
        throw Error(ErrorKind::kShapeMismatch,
                    "vehicle " + set.ids[i] + " missing from frame " +
                        std::to_string(frame.frame_index));
      }
      set.tracks[i].points.push_back({it->second.x, it->second.y});
      set.tracks[i].en_route.push_back(!it->second.done);
    }
  }
  return set;
}

const Trajectory& TrajectorySet::track(const std::string& id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) {
    throw Error(ErrorKind::kShapeMismatch, "no trajectory for vehicle " + id);
  }
  return tracks[static_cast<std::size_t>(it - ids.begin())];
}

TrajectorySet TrajectorySet::head(std::size_t frames) const {
  TrajectorySet out = *this;
  for (auto& tr : out.tracks) {
    const std::size_t n = std::min(frames, tr.size());
    tr.points.resize(n);
    tr.en_route.resize(n);
  }
  return out;
}

namespace {

bool never_moves(const Trajectory& tr) {
  for (const auto& p : tr.points) {
    if (distance(p, tr.points.front()) > 1e-9) return false;
  }
  return true;
}

}  // namespace

LagScore lag_similarity(const Trajectory& leader, const Trajectory& follower, int max_lag) {
  LagScore best;
  const std::size_t frames = std::min(leader.size(), follower.size());
  if (frames == 0) {
    best.degenerate = true;
    return best;
  }
  best.degenerate = never_moves(leader) || never_moves(follower);
  for (int lag = 1; lag <= max_lag; ++lag) {
    const auto tau = static_cast<std::size_t>(lag);
    if (tau >= frames) break;
    double sum = 0.0;
    int n = 0;
    for (std::size_t t = 0; t + tau < frames; ++t) {
      if (!leader.en_route[t] || !follower.en_route[t + tau]) continue;
      sum += distance(leader.points[t], follower.points[t + tau]);
      ++n;
    }
    if (n < kMinLagOverlap) continue;
    const double score = sum / n;
    if (score < best.score) {
      best.score = score;
      best.best_lag = lag;
      best.valid_frames = n;
    }
  }
  return best;
}

std::vector<PairScore> score_pairs(const TrajectorySet& trajs, int max_lag) {
  std::vector<PairScore> out;
  const std::size_t n = trajs.ids.size();
  out.reserve(n * (n > 0 ? n - 1 : 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      out.push_back({trajs.ids[i], trajs.ids[j],
                     lag_similarity(trajs.tracks[i], trajs.tracks[j], max_lag)});
    }
  }
  return out;
}

namespace {

bool usable(const LagScore& s) { return !s.degenerate && std::isfinite(s.score); }

// Index-based form of one scenario for repeated thresholding.
struct CompactScenario {
  struct Entry {
    std::size_t leader;
    std::size_t follower;
    double score;
    bool is_true;
  };
  std::size_t nodes = 0;
  std::vector<Entry> entries;  // usable scores only, sorted by score
  std::size_t true_edges = 0;
};

CompactScenario compact(const std::vector<std::string>& nodes,
                        std::span<const PairScore> scores, const CausalGraph* truth) {
  CompactScenario c;
  c.nodes = nodes.size();
  const auto index_of = [&](const std::string& id) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
    if (it == nodes.end() || *it != id) {
      throw Error(ErrorKind::kNodeSetMismatch, "scored vehicle " + id + " not in node set");
    }
    return static_cast<std::size_t>(it - nodes.begin());
  };
  for (const auto& ps : scores) {
    if (!usable(ps.lag)) continue;
    c.entries.push_back({index_of(ps.leader), index_of(ps.follower), ps.lag.score,
                         truth && truth->has_edge(ps.leader, ps.follower)});
  }
  // Ties resolve towards the lexicographically smaller leader, which is the
  // smaller node index.
  std::sort(c.entries.begin(), c.entries.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.leader != b.leader) return a.leader < b.leader;
    return a.follower < b.follower;
  });
  if (truth) c.true_edges = truth->edges.size();
  return c;
}

// Indices into entries of the selected edges.
std::vector<std::size_t> select(const CompactScenario& c, double threshold) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> leader_of(c.nodes, kNone);
  // Entries are score-ordered, so the first hit per follower is its best.
  for (std::size_t k = 0; k < c.entries.size(); ++k) {
    const auto& e = c.entries[k];
    if (!(e.score < threshold)) break;
    if (leader_of[e.follower] == kNone) leader_of[e.follower] = k;
  }
  std::vector<std::size_t> chosen;
  for (std::size_t f = 0; f < c.nodes; ++f) {
    const std::size_t k = leader_of[f];
    if (k == kNone) continue;
    const auto& e = c.entries[k];
    const std::size_t back = leader_of[e.leader];
    if (back != kNone && c.entries[back].leader == f) {
      // Both directions survived: the earlier entry in score order wins.
      if (back < k) continue;
    }
    chosen.push_back(k);
  }
  return chosen;
}

EdgeScores count_compact(const CompactScenario& c, double threshold) {
  std::size_t tp = 0;
  const auto chosen = select(c, threshold);
  for (std::size_t k : chosen) tp += c.entries[k].is_true ? 1 : 0;
  return scores_from_counts(tp, chosen.size() - tp, c.true_edges - tp);
}

}  // namespace

CausalGraph select_edges(const std::vector<std::string>& nodes,
                         std::span<const PairScore> scores, double threshold) {
  std::vector<std::string> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  const CompactScenario c = compact(sorted, scores, nullptr);
  CausalGraph g;
  g.nodes = sorted;
  for (std::size_t k : select(c, threshold)) {
    g.edges.insert({sorted[c.entries[k].leader], sorted[c.entries[k].follower]});
  }
  return g;
}

CausalGraph discover_edges(const TrajectorySet& trajs, int max_lag, double threshold) {
  const auto scores = score_pairs(trajs, max_lag);
  return select_edges(trajs.ids, scores, threshold);
}

Prediction predict_cv(const TrajectorySet& trajs, int history_len, int horizon) {
  if (history_len < 2 || horizon < 1 ||
      trajs.frame_count() < static_cast<std::size_t>(history_len)) {
    throw Error(ErrorKind::kShapeMismatch, "history must be >= 2 frames and available");
  }
  const auto last = static_cast<std::size_t>(history_len - 1);
  Prediction out;
  for (std::size_t i = 0; i < trajs.ids.size(); ++i) {
    const auto& tr = trajs.tracks[i];
    const Vec2 p1 = tr.points[last];
    // A vehicle that has left the map stays where it was logged.
    const Vec2 vel = tr.en_route[last] ? p1 - tr.points[last - 1] : Vec2{};
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(horizon));
    Vec2 p = p1;
    for (int k = 0; k < horizon; ++k) {
      p = p + vel;
      pts.push_back(p);
    }
    out.emplace(trajs.ids[i], std::move(pts));
  }
  return out;
}

Prediction predict_graph_conditioned(const TrajectorySet& trajs, const CausalGraph& graph,
                                     int history_len, int horizon, int max_lag) {
  Prediction out = predict_cv(trajs, history_len, horizon);
  for (const auto& node : graph.nodes) {
    if (!std::binary_search(trajs.ids.begin(), trajs.ids.end(), node)) {
      throw Error(ErrorKind::kNodeSetMismatch, "graph node " + node + " has no trajectory");
    }
  }
  const TrajectorySet history = trajs.head(static_cast<std::size_t>(history_len));
  const auto last = static_cast<std::size_t>(history_len - 1);
  for (const auto& edge : graph.edges) {
    const LagScore lag =
        lag_similarity(history.track(edge.leader), history.track(edge.follower), max_lag);
    if (!std::isfinite(lag.score)) {
      throw Error(ErrorKind::kMissingLag,
                  "no computable lag for " + edge.leader + " -> " + edge.follower);
    }
    const Trajectory& leader = history.track(edge.leader);
    const Trajectory& follower = history.track(edge.follower);
    // A finished leader says nothing about where the follower goes next.
    if (!leader.en_route[last] || !follower.en_route[last]) continue;
    const auto& leader_future = out.at(edge.leader);
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(horizon));
    for (int k = 0; k < horizon; ++k) {
      const long idx = static_cast<long>(history_len) + k - lag.best_lag;
      if (idx <= static_cast<long>(last)) {
        pts.push_back(leader.points[static_cast<std::size_t>(idx)]);
      } else {
        pts.push_back(leader_future[static_cast<std::size_t>(idx - history_len)]);
      }
    }
    out[edge.follower] = std::move(pts);
  }
  return out;
}

MeanStdError mean_std_error(std::span<const double> values) {
  MeanStdError r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return r;
}

HorizonErrors mse_per_horizon(std::span<const Prediction> preds,
                              std::span<const TrajectorySet> truths, int history_len,
                              int horizon, std::span<const std::vector<std::string>> only) {
  if (preds.size() != truths.size() || (!only.empty() && only.size() != preds.size())) {
    throw Error(ErrorKind::kShapeMismatch, "prediction and truth scenario counts differ");
  }
  if (horizon < 1) throw Error(ErrorKind::kShapeMismatch, "horizon must be >= 1");
  const auto h = static_cast<std::size_t>(horizon);
  std::vector<double> total(h, 0.0);
  std::size_t total_count = 0;
  std::vector<std::vector<double>> per_scenario(h);

  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& truth = truths[s];
    if (truth.frame_count() < static_cast<std::size_t>(history_len) + h) {
      throw Error(ErrorKind::kShapeMismatch, "truth shorter than history + horizon");
    }
    if (!(truth.extent.x > 0.0) || !(truth.extent.y > 0.0)) {
      throw Error(ErrorKind::kShapeMismatch, "extent must be positive");
    }
    std::vector<std::string> ids;
    if (only.empty()) {
      for (const auto& [id, _] : preds[s]) ids.push_back(id);
      if (ids != truth.ids) throw Error(ErrorKind::kShapeMismatch, "vehicle sets differ");
    } else {
      ids = only[s];
    }
    if (ids.empty()) continue;
    std::vector<double> sums(h, 0.0);
    for (const auto& id : ids) {
      auto it = preds[s].find(id);
      if (it == preds[s].end() || it->second.size() != h) {
        throw Error(ErrorKind::kShapeMismatch, "prediction for " + id + " has wrong shape");
      }
      const auto& tr = truth.track(id);
      for (std::size_t k = 0; k < h; ++k) {
        const Vec2 p = it->second[k];
        const Vec2 t = tr.points[static_cast<std::size_t>(history_len) + k];
        const double dx = (p.x - t.x) / truth.extent.x;
        const double dy = (p.y - t.y) / truth.extent.y;
        sums[k] += dx * dx + dy * dy;
      }
    }
    for (std::size_t k = 0; k < h; ++k) {
      total[k] += sums[k];
      per_scenario[k].push_back(sums[k] / static_cast<double>(ids.size()));
    }
    total_count += ids.size();
  }

  HorizonErrors out;
  out.scenarios = per_scenario[0].size();
  out.mse.resize(h, 0.0);
  out.std_error.resize(h, 0.0);
  for (std::size_t k = 0; k < h; ++k) {
    if (total_count > 0) out.mse[k] = total[k] / static_cast<double>(total_count);
    out.std_error[k] = mean_std_error(per_scenario[k]).std_error;
  }
  return out;
}

EdgeScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  EdgeScores e;
  e.tp = tp;
  e.fp = fp;
  e.fn = fn;
  e.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  e.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double pr = e.precision + e.recall;
  e.f1 = pr > 0.0 ? 2.0 * e.precision * e.recall / pr : 0.0;
  return e;
}

EdgeScores f1_edges(const CausalGraph& pred, const CausalGraph& truth) {
  auto a = pred.nodes;
  auto b = truth.nodes;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) throw Error(ErrorKind::kNodeSetMismatch, "graphs have different node sets");
  std::size_t tp = 0;
  for (const auto& e : pred.edges) tp += truth.edges.contains(e) ? 1 : 0;
  return scores_from_counts(tp, pred.edges.size() - tp, truth.edges.size() - tp);
}

namespace {

EdgeScores pooled(std::span<const CompactScenario> split, double threshold) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& c : split) {
    const EdgeScores e = count_compact(c, threshold);
    tp += e.tp;
    fp += e.fp;
    fn += e.fn;
  }
  return scores_from_counts(tp, fp, fn);
}

std::vector<CompactScenario> compact_all(std::span<const ScoredScenario> split) {
  std::vector<CompactScenario> out;
  out.reserve(split.size());
  for (const auto& s : split) {
    auto nodes = s.nodes;
    std::sort(nodes.begin(), nodes.end());
    out.push_back(compact(nodes, s.scores, &s.truth));
  }
  return out;
}

constexpr std::size_t kCalibrationCuts = 512;

}  // namespace

EdgeScores pooled_scores(std::span<const ScoredScenario> split, double threshold) {
  return pooled(compact_all(split), threshold);
}

Calibration threshold_calibrate(std::span<const ScoredScenario> train) {
  const auto split = compact_all(train);
  std::vector<double> scores;
  std::size_t true_edges = 0;
  for (const auto& c : split) {
    for (const auto& e : c.entries) scores.push_back(e.score);
    true_edges += c.true_edges;
  }
  std::sort(scores.begin(), scores.end());

  Calibration cal;
  if (true_edges == 0) {
    cal.fallback = true;
    cal.threshold = scores.empty() ? 0.0 : scores.front() / 2.0;
    cal.band_low = cal.band_high = cal.threshold;
    cal.f1 = pooled(split, cal.threshold).f1;
    return cal;
  }
  if (scores.empty()) {
    cal.threshold = kDefaultThreshold;
    return cal;
  }

  // Quantile cut points; a threshold in (cuts[k-1], cuts[k]] admits every
  // sampled score up to cuts[k-1].
  std::vector<double> cuts;
  const std::size_t m = std::min(kCalibrationCuts, scores.size());
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t idx = m == 1 ? 0 : (k * (scores.size() - 1)) / (m - 1);
    cuts.push_back(scores[idx]);
  }
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(cuts.back() * 2.0 + 1.0);

  std::vector<double> lows, highs, f1s;
  double lo = 0.0;
  for (double hi : cuts) {
    if (hi > lo) {
      lows.push_back(lo);
      highs.push_back(hi);
      f1s.push_back(pooled(split, 0.5 * (lo + hi)).f1);
    }
    lo = hi;
  }
  const double best = *std::max_element(f1s.begin(), f1s.end());
  std::size_t best_start = 0, best_end = 0;
  double best_width = -1.0;
  for (std::size_t k = 0; k < f1s.size();) {
    if (f1s[k] < best - 1e-12) {
      ++k;
      continue;
    }
    std::size_t e = k;
    while (e + 1 < f1s.size() && f1s[e + 1] >= best - 1e-12) ++e;
    const double width = highs[e] - lows[k];
    if (width > best_width) {
      best_width = width;
      best_start = k;
      best_end = e;
    }
    k = e + 1;
  }
  cal.band_low = lows[best_start];
  cal.band_high = highs[best_end];
  cal.threshold = 0.5 * (cal.band_low + cal.band_high);
  cal.f1 = pooled(split, cal.threshold).f1;
  return cal;
}

ScoredScenario score_scenario(const SimLog& log, int max_lag,
                              std::optional<std::size_t> frames) {
  TrajectorySet trajs = TrajectorySet::from_log(log);
  if (frames) trajs = trajs.head(*frames);
  ScoredScenario s;
  s.nodes = trajs.ids;
  s.scores = score_pairs(trajs, max_lag);
  s.truth = log.ground_truth;
  return s;
}

SplitDiscovery evaluate_discovery(std::span<const ScoredScenario> split, double threshold) {
  SplitDiscovery out;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::vector<double> f1s;
  for (const auto& s : split) {
    CausalGraph g = select_edges(s.nodes, s.scores, threshold);
    const EdgeScores e = f1_edges(g, s.truth);
    tp += e.tp;
    fp += e.fp;
    fn += e.fn;
    f1s.push_back(e.f1);
    out.scores.push_back(e);
    out.predicted.push_back(std::move(g));
  }
  out.f1 = mean_std_error(f1s);
  out.pooled = scores_from_counts(tp, fp, fn);
  return out;
}

}  // namespace ccity

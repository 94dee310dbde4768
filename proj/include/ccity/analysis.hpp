#pragma once

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccity/causal_graph.hpp"
#include "ccity/engine.hpp"
#include "ccity/geometry.hpp"

namespace ccity {

// Per-frame positions of one vehicle. en_route is false once the vehicle has
// reached the end of its route and its pose is frozen.
struct Trajectory {
  std::vector<Vec2> points;
  std::vector<bool> en_route;

  std::size_t size() const { return points.size(); }
};

struct TrajectorySet {
  std::vector<std::string> ids;  // sorted
  std::vector<Trajectory> tracks;
  Vec2 extent;
  int history_len = 100;
  int horizon = 20;

  static TrajectorySet from_log(const SimLog& log);

  std::size_t frame_count() const { return tracks.empty() ? 0 : tracks.front().size(); }
  const Trajectory& track(const std::string& id) const;
  // The first `frames` frames of every track.
  TrajectorySet head(std::size_t frames) const;
};

inline constexpr int kDefaultMaxLag = 40;
inline constexpr int kDefaultHistory = 100;
inline constexpr int kDefaultHorizon = 20;
// Lags supported by fewer aligned frames than this are not scored.
inline constexpr int kMinLagOverlap = 5;
// Uncalibrated discovery threshold, map units.
inline constexpr double kDefaultThreshold = 5.0;

// Best alignment of `follower` onto `leader` delayed by lag frames:
// score(lag) = mean over t of |leader(t) - follower(t + lag)|, using only t
// where the leader is en route at t and the follower at t + lag.
struct LagScore {
  int best_lag = 1;
  double score = std::numeric_limits<double>::infinity();
  int valid_frames = 0;
  bool degenerate = false;  // one of the vehicles never moves
};

LagScore lag_similarity(const Trajectory& leader, const Trajectory& follower, int max_lag);

struct PairScore {
  std::string leader;
  std::string follower;
  LagScore lag;
};

// Every ordered pair, in (leader, follower) id order.
std::vector<PairScore> score_pairs(const TrajectorySet& trajs, int max_lag);

// Thresholds pair scores, then keeps at most one leader per follower and at
// most one direction per pair (lower score wins, ties go to the smaller id).
CausalGraph select_edges(const std::vector<std::string>& nodes,
                         std::span<const PairScore> scores, double threshold);

CausalGraph discover_edges(const TrajectorySet& trajs, int max_lag, double threshold);

// Predicted positions for horizon steps after the history window.
using Prediction = std::map<std::string, std::vector<Vec2>>;

Prediction predict_cv(const TrajectorySet& trajs, int history_len, int horizon);

// Followers replay their leader's track delayed by the pair's lag; the
// leader's future beyond the history comes from its constant-velocity
// prediction. Throws MissingLag when an edge has no computable lag.
Prediction predict_graph_conditioned(const TrajectorySet& trajs, const CausalGraph& graph,
                                     int history_len, int horizon,
                                     int max_lag = kDefaultMaxLag);

struct HorizonErrors {
  std::vector<double> mse;
  std::vector<double> std_error;
  std::size_t scenarios = 0;  // contributing to the means
};

// Normalised squared error per horizon step. `only` restricts the vehicles
// scored per scenario (empty = all). Throws ShapeMismatch.
HorizonErrors mse_per_horizon(std::span<const Prediction> preds,
                              std::span<const TrajectorySet> truths, int history_len,
                              int horizon,
                              std::span<const std::vector<std::string>> only = {});

struct EdgeScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// Directed exact-match scores. Throws NodeSetMismatch.
EdgeScores f1_edges(const CausalGraph& pred, const CausalGraph& truth);

// Precision/recall/F1 from counts with zero conventions on empty denominators.
EdgeScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

struct MeanStdError {
  double mean = 0.0;
  double std_error = 0.0;
};

MeanStdError mean_std_error(std::span<const double> values);

struct ScoredScenario {
  std::vector<std::string> nodes;
  std::vector<PairScore> scores;
  CausalGraph truth;
};

struct Calibration {
  double threshold = kDefaultThreshold;
  double f1 = 0.0;  // pooled over the split at `threshold`
  double band_low = 0.0;
  double band_high = 0.0;
  bool fallback = false;  // split had no true edges
};

// Grid search over score quantiles for the threshold maximising pooled F1;
// returns the midpoint of the widest optimal band.
Calibration threshold_calibrate(std::span<const ScoredScenario> train);

// Pooled F1 over a split at a fixed threshold.
EdgeScores pooled_scores(std::span<const ScoredScenario> split, double threshold);

// Pair scores of one log, optionally over its first `frames` frames only.
ScoredScenario score_scenario(const SimLog& log, int max_lag,
                              std::optional<std::size_t> frames = std::nullopt);

struct SplitDiscovery {
  std::vector<CausalGraph> predicted;
  std::vector<EdgeScores> scores;  // per scenario
  MeanStdError f1;                 // over scenarios
  EdgeScores pooled;
};

SplitDiscovery evaluate_discovery(std::span<const ScoredScenario> split, double threshold);

struct MetricsReport {
  std::vector<double> mse_per_horizon;
  std::vector<double> stderr_per_horizon;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f1_std_error = 0.0;
  double threshold = 0.0;
};

}  // namespace ccity

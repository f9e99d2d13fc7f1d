#pragma once

#include "cmp/copt.hpp"
#include "cmp/kin.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace cmp {

/// Surface id per effector, 0 = free.
using Assignment = std::vector<int>;

/// Mixed-radix encoding of an assignment, base (N_Omega + 1), first effector
/// most significant. Fixed so datasets and models stay compatible.
int action_index(const Assignment& a, int n_omega);
Assignment assignment_from_index(int index, int n_c, int n_omega);

/// Decision epochs of d timesteps laid over an L-sample trajectory. A final
/// partial epoch (L % d != 0) admits no assignment changes so every contact
/// run keeps the d-step persistence.
struct EpochGrid {
  int L = 0, d = 1, K = 0;

  static EpochGrid make(int L, int d);
  int epoch_start(int k) const { return k * d; }
  int epoch_len(int k) const { return std::min(L, (k + 1) * d) - k * d; }
  bool partial(int k) const { return epoch_len(k) < d; }
};

/// MCTS state: epochs decided so far and their assignments.
struct SearchState {
  int epoch = 0;
  std::vector<Assignment> history;
};

struct Action {
  Assignment assign;
  int index = 0;
};

/// Self-contained record of one visited state: inputs for the networks plus
/// the empirical search targets.
struct TrainingSample {
  std::vector<Assignment> history;
  VectorXd pose_features;  // position (3) + rotation rows (9)
  Vec6 goal;               // pose_diff to the lookahead sample
  std::vector<int> legal;  // legal action indices, ascending
  VectorXd p_bar;          // empirical policy aligned with `legal`
  double v_bar = 0.0;
  bool feasible = false;
  int n_c = 0, n_omega = 0;
};

/// Action priors and state value for guiding the tree search.
class SearchGuide {
 public:
  virtual ~SearchGuide() = default;
  /// p aligned with state.legal (sums to 1), v in [0, 1].
  virtual std::pair<VectorXd, double> priors(const TrainingSample& state) const = 0;
};

/// Untrained baseline: uniform priors, zero values.
class UniformGuide : public SearchGuide {
 public:
  std::pair<VectorXd, double> priors(const TrainingSample& state) const override;
};

struct SearchConfig {
  int budget = 500;       // terminal evaluations (unique schedules)
  double gamma = 0.1;     // exploration constant
  int d = 1;              // persistence / epoch length
  int h_lookahead = 0;    // goal lookahead in samples; 0 = use d
  double time_cap_s = 60.0;
  std::uint64_t seed = 0;
  int max_calls = 0;      // 0 = auto
};

enum class SearchMode { FirstFeasible, Collect };

struct SearchStats {
  int evaluations = 0;
  bool feasible_found = false;
  double wall_time_s = 0.0;
  double reward = 0.0;
  std::uint64_t seed = 0;
  int calls = 0;
  int nodes = 0;
  int cache_hits = 0;
};

struct SearchResult {
  std::optional<std::pair<ContactSchedule, ContactPlan>> best;
  std::vector<TrainingSample> dataset;  // filled in Collect mode
  SearchStats stats;
};

/// Eq. (11): U = Q + gamma * p * sqrt(sum_b N) / (1 + N).
double ucb_score(double Q, int N, int N_sum, double prior, double gamma);

/// Eq. (10): running mean update; returns (Q', N').
std::pair<double, int> backup(double Q, int N, double v);

/// Actions obeying the manipulation heuristics: surface exclusivity, at most
/// one change per epoch, break only at rest samples, reachability and
/// separation of assigned surfaces. Sorted by action index.
std::vector<Action> legal_actions(const SearchState& s, const MotionTrajectory& traj,
                                  const SceneModel& scene,
                                  const ReachabilityModel& kin, const EpochGrid& grid);

/// Replicates per-epoch assignments onto the timestep grid.
ContactSchedule expand_schedule(const SearchState& s, const EpochGrid& grid, int n_c);

/// Network-facing view of a state (history, pose features, lookahead goal).
TrainingSample make_state_features(const SearchState& s, const MotionTrajectory& traj,
                                   const EpochGrid& grid, int h, int n_c, int n_omega);

/// Algorithm 1 driven to either the first feasible schedule or a fixed budget
/// of unique terminal evaluations (Collect also extracts the dataset).
SearchResult run_search(const MotionTrajectory& traj, const SceneModel& scene,
                        const SearchGuide& guide, SearchMode mode,
                        const SearchConfig& cfg, const AdmmConfig& admm);

}  // namespace cmp

#include "cmp/search.hpp"

#include <chrono>
#include <cmath>
#include <unordered_map>

namespace cmp {

int action_index(const Assignment& a, int n_omega) {
  int idx = 0;
  for (int v : a) idx = idx * (n_omega + 1) + v;
  return idx;
}

Assignment assignment_from_index(int index, int n_c, int n_omega) {
  Assignment a(n_c, 0);
  for (int c = n_c - 1; c >= 0; --c) {
    a[c] = index % (n_omega + 1);
    index /= (n_omega + 1);
  }
  return a;
}

EpochGrid EpochGrid::make(int L, int d) {
  EpochGrid g;
  g.L = L;
  g.d = std::max(1, d);
  g.K = (L + g.d - 1) / g.d;
  return g;
}

std::pair<VectorXd, double> UniformGuide::priors(const TrainingSample& state) const {
  const int n = static_cast<int>(state.legal.size());
  return {VectorXd::Constant(n, 1.0 / std::max(1, n)), 0.0};
}

double ucb_score(double Q, int N, int N_sum, double prior, double gamma) {
  return Q + gamma * prior * std::sqrt(static_cast<double>(N_sum)) / (1.0 + N);
}

std::pair<double, int> backup(double Q, int N, double v) {
  return {(N * Q + v) / (N + 1), N + 1};
}

namespace {

bool at_rest(const MotionTrajectory& traj, int t) {
  const Twist& tw = traj.twist(t);
  const Accel& ac = traj.accel(t);
  constexpr double tol = 1e-6;
  return tw.v.norm() <= tol && tw.w.norm() <= tol && ac.dv.norm() <= tol &&
         ac.dw.norm() <= tol;
}

bool exclusive(const Assignment& a) {
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = i + 1; j < a.size(); ++j)
      if (a[i] != 0 && a[i] == a[j]) return false;
  return true;
}

}  // namespace

std::vector<Action> legal_actions(const SearchState& s, const MotionTrajectory& traj,
                                  const SceneModel& scene,
                                  const ReachabilityModel& kin, const EpochGrid& grid) {
  const int n_c = scene.robot.size();
  const int n_omega = scene.object.num_surfaces();
  const Assignment prev = s.epoch > 0 ? s.history.back() : Assignment(n_c, 0);
  const int start = grid.epoch_start(s.epoch);
  const Pose& q = traj.pose(std::min(start, grid.L - 1));
  const bool rest = at_rest(traj, std::min(start, grid.L - 1));

  std::vector<Assignment> candidates;
  candidates.push_back(prev);  // keep
  if (!grid.partial(s.epoch)) {
    for (int c = 0; c < n_c; ++c) {
      if (prev[c] == 0) {
        for (int w = 1; w <= n_omega; ++w) {
          Assignment a = prev;
          a[c] = w;
          candidates.push_back(std::move(a));
        }
      } else if (rest) {
        Assignment a = prev;
        a[c] = 0;  // break only while the desired motion is at rest
        candidates.push_back(std::move(a));
      }
    }
  }

  std::vector<Action> out;
  for (Assignment& a : candidates) {
    if (!exclusive(a)) continue;
    bool ok = true;
    for (int c = 0; c < n_c && ok; ++c)
      if (a[c] != 0) ok = kin.reachable(c, scene.object.surface(a[c]), q);
    if (!ok) continue;
    if (!kin.pair_feasible(a, scene.object, q)) continue;
    Action act;
    act.index = action_index(a, n_omega);
    act.assign = std::move(a);
    out.push_back(std::move(act));
  }
  std::sort(out.begin(), out.end(),
            [](const Action& x, const Action& y) { return x.index < y.index; });
  return out;
}

ContactSchedule expand_schedule(const SearchState& s, const EpochGrid& grid, int n_c) {
  if (s.epoch != grid.K)
    throw std::logic_error("expand_schedule: state is not terminal");
  ContactSchedule sched;
  sched.omega = Eigen::MatrixXi::Zero(grid.L, n_c);
  for (int k = 0; k < grid.K; ++k)
    for (int t = grid.epoch_start(k); t < grid.epoch_start(k) + grid.epoch_len(k); ++t)
      for (int c = 0; c < n_c; ++c) sched.omega(t, c) = s.history[k][c];
  return sched;
}

TrainingSample make_state_features(const SearchState& s, const MotionTrajectory& traj,
                                   const EpochGrid& grid, int h, int n_c,
                                   int n_omega) {
  TrainingSample smp;
  smp.history = s.history;
  smp.n_c = n_c;
  smp.n_omega = n_omega;

  const int idx = std::min(grid.epoch_start(s.epoch), grid.L - 1);
  const Pose& q = traj.pose(idx);
  smp.pose_features.resize(12);
  smp.pose_features.head<3>() = q.p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) smp.pose_features[3 + 3 * r + c] = q.R(r, c);

  const int ahead = std::min(idx + h, grid.L - 1);
  smp.goal = pose_diff(q, traj.pose(ahead));
  return smp;
}

namespace {

struct Node {
  bool expanded = false;
  bool terminal = false;    // dead end (no legal action)
  std::vector<Action> actions;
  VectorXd prior;
  std::vector<double> Q;
  std::vector<int> N;
  std::vector<int> child;
};

struct Mcts {
  const MotionTrajectory& traj;
  const SceneModel& scene;
  const SearchGuide& guide;
  const SearchConfig& cfg;
  const AdmmConfig& admm;
  EpochGrid grid;
  ReachabilityModel kin;
  int n_c, n_omega, h;

  std::vector<Node> nodes;
  std::unordered_map<std::string, double> eval_cache;
  SearchStats stats;
  SearchMode mode;
  std::optional<std::pair<ContactSchedule, ContactPlan>> best;
  bool stop = false;
  std::chrono::steady_clock::time_point t0;

  Mcts(const MotionTrajectory& tr, const SceneModel& sc, const SearchGuide& g,
       SearchMode m, const SearchConfig& c, const AdmmConfig& a)
      : traj(tr), scene(sc), guide(g), cfg(c), admm(a),
        grid(EpochGrid::make(tr.length(), c.d)), kin(sc.robot),
        n_c(sc.robot.size()), n_omega(sc.object.num_surfaces()),
        h(c.h_lookahead > 0 ? c.h_lookahead : c.d), mode(m) {
    nodes.emplace_back();
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  static std::string schedule_key(const ContactSchedule& s) {
    std::string key;
    key.reserve(static_cast<size_t>(s.omega.size()) * sizeof(int));
    key.append(reinterpret_cast<const char*>(s.omega.data()),
               static_cast<size_t>(s.omega.size()) * sizeof(int));
    return key;
  }

  double evaluate_terminal(const SearchState& s) {
    const ContactSchedule sched = expand_schedule(s, grid, n_c);
    const std::string key = schedule_key(sched);
    if (auto it = eval_cache.find(key); it != eval_cache.end()) {
      ++stats.cache_hits;
      return it->second;
    }
    auto [reward, plan] = evaluate(sched, traj, scene, admm);
    eval_cache.emplace(key, reward);
    ++stats.evaluations;
    stats.reward = std::max(stats.reward, reward);
    if (reward > 0 && (!best || reward > best->second.reward)) best = {{sched, plan}};
    if (reward > 0) {
      stats.feasible_found = true;
      if (mode == SearchMode::FirstFeasible) stop = true;
    }
    if (stats.evaluations >= cfg.budget) stop = true;
    return reward;
  }

  double recurse(int node_id, SearchState& s) {
    ++stats.calls;
    if (s.epoch == grid.K) return evaluate_terminal(s);

    Node& node = nodes[node_id];
    if (!node.expanded) {
      node.expanded = true;
      node.actions = legal_actions(s, traj, scene, kin, grid);
      const int n = static_cast<int>(node.actions.size());
      if (n == 0) {  // dead end: terminal with zero reward
        node.terminal = true;
        return 0.0;
      }
      node.Q.assign(n, 0.0);
      node.N.assign(n, 0);
      node.child.assign(n, -1);
      TrainingSample feats = make_state_features(s, traj, grid, h, n_c, n_omega);
      for (const Action& a : node.actions) feats.legal.push_back(a.index);
      auto [p, v] = guide.priors(feats);
      node.prior = p;
      return v;
    }
    if (node.terminal) return 0.0;

    int pick = 0;
    int n_sum = 0;
    for (int n : node.N) n_sum += n;
    double best_u = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < node.actions.size(); ++i) {
      const double u = ucb_score(node.Q[i], node.N[i], n_sum, node.prior[i], cfg.gamma);
      if (u > best_u) {  // ties resolve to the lowest action index
        best_u = u;
        pick = static_cast<int>(i);
      }
    }

    int child_id = node.child[pick];
    if (child_id < 0) {
      child_id = static_cast<int>(nodes.size());
      node.child[pick] = child_id;  // write before the vector may reallocate
      nodes.emplace_back();
    }

    s.history.push_back(nodes[node_id].actions[pick].assign);
    ++s.epoch;
    const double v = recurse(child_id, s);
    --s.epoch;
    s.history.pop_back();

    Node& nd = nodes[node_id];  // nodes may have reallocated
    std::tie(nd.Q[pick], nd.N[pick]) = backup(nd.Q[pick], nd.N[pick], v);
    return v;
  }

  SearchResult run() {
    t0 = std::chrono::steady_clock::now();
    stats.seed = cfg.seed;
    const int max_calls = cfg.max_calls > 0 ? cfg.max_calls : 200 * cfg.budget + 20000;

    SearchState root;
    int root_calls = 0;
    while (!stop) {
      if (stats.evaluations >= cfg.budget) break;
      if (root_calls >= max_calls) break;
      if (elapsed() > cfg.time_cap_s) break;
      ++root_calls;
      recurse(0, root);
      // fully absorbed root (dead end at the very start)
      if (nodes[0].terminal) break;
    }

    SearchResult result;
    result.stats = stats;
    result.stats.nodes = static_cast<int>(nodes.size());
    result.stats.wall_time_s = elapsed();
    result.best = std::move(best);
    if (mode == SearchMode::Collect) extract_dataset(result.dataset);
    return result;
  }

  void extract_dataset(std::vector<TrainingSample>& out) {
    // reconstruct states by walking the tree from the root
    struct Frame {
      int node;
      SearchState state;
    };
    std::vector<Frame> stack;
    stack.push_back({0, SearchState{}});
    while (!stack.empty()) {
      Frame fr = std::move(stack.back());
      stack.pop_back();
      const Node& node = nodes[fr.node];
      if (!node.expanded || node.terminal) continue;

      int n_sum = 0;
      for (int n : node.N) n_sum += n;
      if (n_sum > 0) {
        TrainingSample smp = make_state_features(fr.state, traj, grid, h, n_c, n_omega);
        smp.p_bar.resize(node.actions.size());
        double v_bar = 0.0;
        for (size_t i = 0; i < node.actions.size(); ++i) {
          smp.legal.push_back(node.actions[i].index);
          smp.p_bar[i] = static_cast<double>(node.N[i]) / n_sum;
          v_bar += smp.p_bar[i] * node.Q[i];
        }
        smp.v_bar = v_bar;
        smp.feasible = v_bar > 0.0;
        out.push_back(std::move(smp));
      }
      for (size_t i = 0; i < node.actions.size(); ++i) {
        if (node.child[i] < 0) continue;
        Frame next;
        next.node = node.child[i];
        next.state = fr.state;
        next.state.history.push_back(node.actions[i].assign);
        next.state.epoch = fr.state.epoch + 1;
        stack.push_back(std::move(next));
      }
    }
  }
};

}  // namespace

SearchResult run_search(const MotionTrajectory& traj, const SceneModel& scene,
                        const SearchGuide& guide, SearchMode mode,
                        const SearchConfig& cfg, const AdmmConfig& admm) {
  Mcts mcts(traj, scene, guide, mode, cfg, admm);
  return mcts.run();
}

}  // namespace cmp

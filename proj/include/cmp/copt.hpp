#pragma once

#include "cmp/qp.hpp"
#include "cmp/scene.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cmp {

/// Per-timestep, per-effector surface assignment; 0 = free.
struct ContactSchedule {
  Eigen::MatrixXi omega;  // T x N_c

  int T() const { return static_cast<int>(omega.rows()); }
  int num_effectors() const { return static_cast<int>(omega.cols()); }
};

/// Returns a reason string when the schedule violates surface exclusivity,
/// d-step persistence, or the one-change/break-before-switch rule.
std::optional<std::string> check_schedule(const ContactSchedule& s,
                                          int num_surfaces, int d);

struct AdmmConfig {
  double rho = 2e6;    // torque-coupling penalty
  int iterations = 1;
  double beta = 0.1;   // angular weight in the pose distance
  double D_th = 0.03;  // reward distance threshold
  QpConfig qp;
};

struct PlanContact {
  int effector = 0;
  int surface = 0;
  Vec3 r = Vec3::Zero();  // object frame
  Vec3 f = Vec3::Zero();  // object frame
  VectorXd alpha;         // convex weights over the surface vertices
};

struct PlanEnvContact {
  Vec3 r = Vec3::Zero();
  Vec3 f = Vec3::Zero();
  ContactMode mode = ContactMode::Sticking;
  Vec3 slide_dir = Vec3::Zero();
};

struct PlanStep {
  std::vector<PlanContact> contacts;  // contacted effectors only
  std::vector<PlanEnvContact> env;
};

struct ContactPlan {
  double dt = 0.1;
  int T = 0;
  int n_effectors = 0;
  std::vector<PlanStep> steps;
  double torque_residual = std::numeric_limits<double>::infinity();
  double D = std::numeric_limits<double>::infinity();
  double reward = 0.0;
  bool feasible = false;
  std::string failure;  // diagnostic when a subproblem was not Optimal
};

/// Torque balance gap at one step: sum of r x f (effector and environment)
/// minus the desired torque.
Vec3 torque_gap(const PlanStep& step, const Vec3& tau_des);

/// Shared assembly of the biconvex split: variable maps, per-step desired
/// wrenches and environment contacts, and the two QP builders.
class CoptProblem {
 public:
  CoptProblem(const ContactSchedule& schedule, const MotionTrajectory& traj,
              const SceneModel& scene, const AdmmConfig& cfg);

  VectorXd initial_locations() const;  // centroids + uniform alphas
  VectorXd zero_forces() const;

  /// Eq. (9a): location/weight step with forces frozen.
  QuadraticProgram location_qp(const VectorXd& z, const VectorXd& y) const;
  /// Eq. (9b): force step with locations frozen.
  QuadraticProgram force_qp(const VectorXd& x, const VectorXd& y) const;

  Vec3 torque_gap_at(const VectorXd& x, const VectorXd& z, int t) const;
  ContactPlan extract_plan(const VectorXd& x, const VectorXd& z) const;

  int num_location_vars() const { return n_x_; }
  int num_force_vars() const { return n_z_; }
  int horizon() const { return T_; }
  const std::vector<EnvContact>& env_contacts(int t) const { return env_[t]; }
  const Wrench& wrench(int t) const { return wrench_[t]; }

 private:
  struct LocBlock {
    int t, c, surface, nv;
    int r0, a0;  // offsets into x
  };

  int loc_block_index(int t, int c) const { return loc_lookup_[t * n_c_ + c]; }
  int f_index(int t, int c) const { return 3 * (t * n_c_ + c); }
  int e_index(int t, int j) const { return 3 * (T_ * n_c_ + env_offset_[t] + j); }

  const ContactSchedule schedule_;
  const MotionTrajectory* traj_;
  const SceneModel* scene_;
  AdmmConfig cfg_;
  int T_ = 0, n_c_ = 0, n_x_ = 0, n_z_ = 0;
  std::vector<LocBlock> blocks_;
  std::vector<int> loc_lookup_;
  std::vector<std::vector<EnvContact>> env_;
  std::vector<int> env_offset_;
  std::vector<Wrench> wrench_;
};

/// One (by default) scaled-dual ADMM pass over the biconvex split, followed
/// by plan extraction. Any non-Optimal subproblem yields an infeasible plan.
ContactPlan admm_solve(const ContactSchedule& schedule, const MotionTrajectory& traj,
                       const SceneModel& scene, const AdmmConfig& cfg);

/// Semi-implicit Euler rollout of the plan's wrenches from the trajectory's
/// initial state; returns the final pose.
Pose integrate_plan(const ContactPlan& plan, const MotionTrajectory& traj,
                    const SceneModel& scene);

/// Linear normalization of the final-pose distance: 1 at D = 0, 0 at
/// D >= D_th.
double reward_from_distance(double D, double D_th);

/// admm_solve + rollout + reward 1 - D/D_th (0 when infeasible or D > D_th).
std::pair<double, ContactPlan> evaluate(const ContactSchedule& schedule,
                                        const MotionTrajectory& traj,
                                        const SceneModel& scene,
                                        const AdmmConfig& cfg);

/// Schedule implied by the plan's listed contacts (absent = free).
ContactSchedule schedule_from_plan(const ContactPlan& plan);

struct AuditCheck {
  std::string family;
  bool pass = false;
  double worst = 0.0;
};

/// Re-checks every plan invariant (Newton residual, hull membership, sticking,
/// zero force off contact, friction cones, schedule rules, reward range).
std::vector<AuditCheck> audit_plan(const ContactPlan& plan,
                                   const ContactSchedule& schedule,
                                   const MotionTrajectory& traj,
                                   const SceneModel& scene, const AdmmConfig& cfg,
                                   int d = 1);

bool audit_pass(const std::vector<AuditCheck>& checks);

}  // namespace cmp

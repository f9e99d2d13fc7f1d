#include "cmp/copt.hpp"

#include <algorithm>
#include <cmath>

namespace cmp {

std::optional<std::string> check_schedule(const ContactSchedule& s,
                                          int num_surfaces, int d) {
  const int T = s.T(), nc = s.num_effectors();
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < nc; ++c) {
      const int w = s.omega(t, c);
      if (w < 0 || w > num_surfaces)
        return "surface id out of range at t=" + std::to_string(t);
    }
  // surface exclusivity
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < nc; ++c)
      for (int c2 = c + 1; c2 < nc; ++c2)
        if (s.omega(t, c) != 0 && s.omega(t, c) == s.omega(t, c2))
          return "surface " + std::to_string(s.omega(t, c)) +
                 " used by two effectors at t=" + std::to_string(t);
  // switch rule: at most one change per step, never nonzero -> other nonzero
  for (int t = 0; t + 1 < T; ++t) {
    int changes = 0;
    for (int c = 0; c < nc; ++c) {
      const int a = s.omega(t, c), b = s.omega(t + 1, c);
      if (a == b) continue;
      ++changes;
      if (a != 0 && b != 0)
        return "effector " + std::to_string(c) + " switches surface without break at t=" +
               std::to_string(t + 1);
    }
    if (changes > 1) return "more than one assignment change at t=" + std::to_string(t + 1);
  }
  // persistence: maximal nonzero runs last at least d steps
  for (int c = 0; c < nc; ++c) {
    int run_start = 0;
    for (int t = 1; t <= T; ++t) {
      const bool boundary = t == T || s.omega(t, c) != s.omega(run_start, c);
      if (!boundary) continue;
      if (s.omega(run_start, c) != 0 && t - run_start < d)
        return "contact run shorter than d for effector " + std::to_string(c) +
               " at t=" + std::to_string(run_start);
      run_start = t;
    }
  }
  return std::nullopt;
}

Vec3 torque_gap(const PlanStep& step, const Vec3& tau_des) {
  Vec3 g = -tau_des;
  for (const PlanContact& c : step.contacts) g += c.r.cross(c.f);
  for (const PlanEnvContact& e : step.env) g += e.r.cross(e.f);
  return g;
}

CoptProblem::CoptProblem(const ContactSchedule& schedule,
                         const MotionTrajectory& traj, const SceneModel& scene,
                         const AdmmConfig& cfg)
    : schedule_(schedule), traj_(&traj), scene_(&scene), cfg_(cfg) {
  T_ = schedule.T();
  n_c_ = schedule.num_effectors();
  if (T_ != traj.length())
    throw std::invalid_argument("schedule horizon does not match trajectory");

  env_.resize(T_);
  env_offset_.resize(T_);
  wrench_.resize(T_);
  int env_count = 0;
  for (int t = 0; t < T_; ++t) {
    env_[t] = detect_env_contacts(scene.object, scene.environment, traj, t);
    env_offset_[t] = env_count;
    env_count += static_cast<int>(env_[t].size());
    wrench_[t] = desired_wrench(scene.object, scene.environment, traj, t);
  }

  loc_lookup_.assign(T_ * n_c_, -1);
  int x_off = 0;
  for (int t = 0; t < T_; ++t)
    for (int c = 0; c < n_c_; ++c) {
      const int w = schedule.omega(t, c);
      if (w == 0) continue;
      LocBlock b;
      b.t = t;
      b.c = c;
      b.surface = w;
      b.nv = static_cast<int>(scene.object.surface(w).vertices.size());
      b.r0 = x_off;
      b.a0 = x_off + 3;
      x_off += 3 + b.nv;
      loc_lookup_[t * n_c_ + c] = static_cast<int>(blocks_.size());
      blocks_.push_back(b);
    }
  n_x_ = x_off;
  n_z_ = 3 * (T_ * n_c_ + env_count);
}

VectorXd CoptProblem::initial_locations() const {
  VectorXd x = VectorXd::Zero(n_x_);
  for (const LocBlock& b : blocks_) {
    const ContactSurface& s = scene_->object.surface(b.surface);
    x.segment<3>(b.r0) = s.center();
    x.segment(b.a0, b.nv).setConstant(1.0 / b.nv);
  }
  return x;
}

VectorXd CoptProblem::zero_forces() const { return VectorXd::Zero(n_z_); }

QuadraticProgram CoptProblem::location_qp(const VectorXd& z, const VectorXd& y) const {
  using T = Eigen::Triplet<double>;
  std::vector<T> pt, at, gt;
  VectorXd c = VectorXd::Zero(n_x_);

  // Sum ||r||^2
  for (const LocBlock& b : blocks_)
    for (int i = 0; i < 3; ++i) pt.emplace_back(b.r0 + i, b.r0 + i, 2.0);

  // rho/2 || G(x, z) + y ||^2 per timestep; G is linear in r for fixed z
  for (int t = 0; t < T_; ++t) {
    std::vector<const LocBlock*> at_t;
    for (int cidx = 0; cidx < n_c_; ++cidx) {
      const int bi = loc_block_index(t, cidx);
      if (bi >= 0) at_t.push_back(&blocks_[bi]);
    }
    if (at_t.empty()) continue;

    Vec3 w = -wrench_[t].torque + y.segment<3>(3 * t);
    for (size_t j = 0; j < env_[t].size(); ++j)
      w += env_[t][j].r.cross(Vec3(z.segment<3>(e_index(t, static_cast<int>(j)))));

    std::vector<Mat3> M(at_t.size());
    for (size_t i = 0; i < at_t.size(); ++i)
      M[i] = -skew(z.segment<3>(f_index(t, at_t[i]->c)));

    for (size_t i = 0; i < at_t.size(); ++i) {
      const Vec3 cv = cfg_.rho * (M[i].transpose() * w);
      for (int r = 0; r < 3; ++r) c[at_t[i]->r0 + r] += cv[r];
      for (size_t j = 0; j < at_t.size(); ++j) {
        const Mat3 blk = cfg_.rho * (M[i].transpose() * M[j]);
        for (int r = 0; r < 3; ++r)
          for (int cc = 0; cc < 3; ++cc)
            if (blk(r, cc) != 0.0)
              pt.emplace_back(at_t[i]->r0 + r, at_t[j]->r0 + cc, blk(r, cc));
      }
    }
  }

  // Eq. (3): r = sum alpha_i v_i, sum alpha = 1, alpha >= 0
  int eq_rows = 0, in_rows = 0;
  std::vector<double> bvals;
  for (const LocBlock& b : blocks_) {
    const ContactSurface& s = scene_->object.surface(b.surface);
    for (int r = 0; r < 3; ++r) {
      at.emplace_back(eq_rows, b.r0 + r, 1.0);
      for (int i = 0; i < b.nv; ++i)
        at.emplace_back(eq_rows, b.a0 + i, -s.vertices[i][r]);
      bvals.push_back(0.0);
      ++eq_rows;
    }
    for (int i = 0; i < b.nv; ++i) at.emplace_back(eq_rows, b.a0 + i, 1.0);
    bvals.push_back(1.0);
    ++eq_rows;
    for (int i = 0; i < b.nv; ++i) {
      gt.emplace_back(in_rows, b.a0 + i, -1.0);
      ++in_rows;
    }
  }
  // Eq. (5): sticking while the contact persists
  for (const LocBlock& b : blocks_) {
    if (b.t + 1 >= T_) continue;
    const int nb = loc_block_index(b.t + 1, b.c);
    if (nb < 0) continue;
    for (int r = 0; r < 3; ++r) {
      at.emplace_back(eq_rows, blocks_[nb].r0 + r, 1.0);
      at.emplace_back(eq_rows, b.r0 + r, -1.0);
      bvals.push_back(0.0);
      ++eq_rows;
    }
  }

  QuadraticProgram qp;
  qp.P.resize(n_x_, n_x_);
  qp.P.setFromTriplets(pt.begin(), pt.end());
  qp.c = c;
  qp.A.resize(eq_rows, n_x_);
  qp.A.setFromTriplets(at.begin(), at.end());
  qp.b = Eigen::Map<VectorXd>(bvals.data(), eq_rows);
  qp.G.resize(in_rows, n_x_);
  qp.G.setFromTriplets(gt.begin(), gt.end());
  qp.h = VectorXd::Zero(in_rows);
  return qp;
}

QuadraticProgram CoptProblem::force_qp(const VectorXd& x, const VectorXd& y) const {
  using T = Eigen::Triplet<double>;
  std::vector<T> pt, at, gt;
  VectorXd c = VectorXd::Zero(n_z_);

  // Sum ||f_c||^2 over effector forces
  for (int t = 0; t < T_; ++t)
    for (int cc = 0; cc < n_c_; ++cc)
      for (int i = 0; i < 3; ++i)
        pt.emplace_back(f_index(t, cc) + i, f_index(t, cc) + i, 2.0);

  // rho/2 || G(x, z) + y ||^2; G is linear in the forces for fixed locations
  for (int t = 0; t < T_; ++t) {
    struct Col {
      int z0;
      Mat3 N;
    };
    std::vector<Col> cols;
    for (int cc = 0; cc < n_c_; ++cc) {
      const int bi = loc_block_index(t, cc);
      if (bi < 0) continue;
      cols.push_back({f_index(t, cc), skew(x.segment<3>(blocks_[bi].r0))});
    }
    for (size_t j = 0; j < env_[t].size(); ++j)
      cols.push_back({e_index(t, static_cast<int>(j)), skew(env_[t][j].r)});
    if (cols.empty()) continue;

    const Vec3 w = -wrench_[t].torque + y.segment<3>(3 * t);
    for (size_t i = 0; i < cols.size(); ++i) {
      const Vec3 cv = cfg_.rho * (cols[i].N.transpose() * w);
      for (int r = 0; r < 3; ++r) c[cols[i].z0 + r] += cv[r];
      for (size_t j = 0; j < cols.size(); ++j) {
        const Mat3 blk = cfg_.rho * (cols[i].N.transpose() * cols[j].N);
        for (int r = 0; r < 3; ++r)
          for (int s = 0; s < 3; ++s)
            if (blk(r, s) != 0.0)
              pt.emplace_back(cols[i].z0 + r, cols[j].z0 + s, blk(r, s));
      }
    }
  }

  int eq_rows = 0, in_rows = 0;
  std::vector<double> bvals, hvals;

  auto pyramid = [&](int z0, const Vec3& n, const Vec3& t1, const Vec3& t2,
                     double mu) {
    const Vec3 rows[5] = {-n, t1 - mu * n, -t1 - mu * n, t2 - mu * n, -t2 - mu * n};
    for (const Vec3& row : rows) {
      for (int i = 0; i < 3; ++i)
        if (row[i] != 0.0) gt.emplace_back(in_rows, z0 + i, row[i]);
      hvals.push_back(0.0);
      ++in_rows;
    }
  };

  for (int t = 0; t < T_; ++t) {
    // Eq. (2a): Newton rows
    for (int r = 0; r < 3; ++r) {
      for (int cc = 0; cc < n_c_; ++cc) at.emplace_back(eq_rows, f_index(t, cc) + r, 1.0);
      for (size_t j = 0; j < env_[t].size(); ++j)
        at.emplace_back(eq_rows, e_index(t, static_cast<int>(j)) + r, 1.0);
      bvals.push_back(wrench_[t].force[r]);
      ++eq_rows;
    }
    // Eq. (4): free effectors carry no force
    for (int cc = 0; cc < n_c_; ++cc) {
      if (schedule_.omega(t, cc) != 0) continue;
      for (int r = 0; r < 3; ++r) {
        at.emplace_back(eq_rows, f_index(t, cc) + r, 1.0);
        bvals.push_back(0.0);
        ++eq_rows;
      }
    }
    // Eq. (6): linearized cones
    for (int cc = 0; cc < n_c_; ++cc) {
      const int w = schedule_.omega(t, cc);
      if (w == 0) continue;
      const ContactSurface& s = scene_->object.surface(w);
      Vec3 t1, t2;
      s.tangent_basis(t1, t2);
      pyramid(f_index(t, cc), -s.normal, t1, t2, scene_->object.mu);
    }
    const Mat3 Rt = traj_->pose(t).R.transpose();
    const Vec3 n_env = Rt * Vec3::UnitZ();
    const Vec3 te1 = Rt * Vec3::UnitX(), te2 = Rt * Vec3::UnitY();
    for (size_t j = 0; j < env_[t].size(); ++j) {
      const EnvContact& e = env_[t][j];
      const int z0 = e_index(t, static_cast<int>(j));
      if (e.mode == ContactMode::Sticking) {
        pyramid(z0, e.normal, te1, te2, scene_->environment.mu_e);
      } else {
        // f_tangential = -mu_e (f . n) slide_dir, written per tangent axis
        for (const Vec3& ta : {te1, te2}) {
          const Vec3 row = ta + scene_->environment.mu_e * ta.dot(e.slide_dir) * n_env;
          for (int i = 0; i < 3; ++i)
            if (row[i] != 0.0) at.emplace_back(eq_rows, z0 + i, row[i]);
          bvals.push_back(0.0);
          ++eq_rows;
        }
        for (int i = 0; i < 3; ++i)
          if (n_env[i] != 0.0) gt.emplace_back(in_rows, z0 + i, -n_env[i]);
        hvals.push_back(0.0);
        ++in_rows;
      }
    }
  }

  QuadraticProgram qp;
  qp.P.resize(n_z_, n_z_);
  qp.P.setFromTriplets(pt.begin(), pt.end());
  qp.c = c;
  qp.A.resize(eq_rows, n_z_);
  qp.A.setFromTriplets(at.begin(), at.end());
  qp.b = Eigen::Map<VectorXd>(bvals.data(), eq_rows);
  qp.G.resize(in_rows, n_z_);
  qp.G.setFromTriplets(gt.begin(), gt.end());
  qp.h = Eigen::Map<VectorXd>(hvals.data(), in_rows);
  return qp;
}

Vec3 CoptProblem::torque_gap_at(const VectorXd& x, const VectorXd& z, int t) const {
  Vec3 g = -wrench_[t].torque;
  for (int cc = 0; cc < n_c_; ++cc) {
    const int bi = loc_block_index(t, cc);
    if (bi < 0) continue;
    g += Vec3(x.segment<3>(blocks_[bi].r0)).cross(Vec3(z.segment<3>(f_index(t, cc))));
  }
  for (size_t j = 0; j < env_[t].size(); ++j)
    g += env_[t][j].r.cross(Vec3(z.segment<3>(e_index(t, static_cast<int>(j)))));
  return g;
}

ContactPlan CoptProblem::extract_plan(const VectorXd& x, const VectorXd& z) const {
  ContactPlan plan;
  plan.dt = traj_->dt;
  plan.T = T_;
  plan.n_effectors = n_c_;
  plan.steps.resize(T_);
  for (const LocBlock& b : blocks_) {
    PlanContact pc;
    pc.effector = b.c;
    pc.surface = b.surface;
    pc.r = x.segment<3>(b.r0);
    pc.f = z.segment<3>(f_index(b.t, b.c));
    pc.alpha = x.segment(b.a0, b.nv);
    plan.steps[b.t].contacts.push_back(std::move(pc));
  }
  for (int t = 0; t < T_; ++t)
    for (size_t j = 0; j < env_[t].size(); ++j) {
      PlanEnvContact pe;
      pe.r = env_[t][j].r;
      pe.f = z.segment<3>(e_index(t, static_cast<int>(j)));
      pe.mode = env_[t][j].mode;
      pe.slide_dir = env_[t][j].slide_dir;
      plan.steps[t].env.push_back(std::move(pe));
    }
  double worst = 0.0;
  for (int t = 0; t < T_; ++t) worst = std::max(worst, torque_gap_at(x, z, t).norm());
  plan.torque_residual = worst;
  return plan;
}

namespace {
const char* status_name(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::PrimalInfeasible: return "PrimalInfeasible";
    case QpStatus::MaxIterations: return "MaxIterations";
  }
  return "?";
}
}  // namespace

ContactPlan admm_solve(const ContactSchedule& schedule, const MotionTrajectory& traj,
                       const SceneModel& scene, const AdmmConfig& cfg) {
  CoptProblem prob(schedule, traj, scene, cfg);
  VectorXd x = prob.initial_locations();
  VectorXd z = prob.zero_forces();
  VectorXd y = VectorXd::Zero(3 * prob.horizon());

  for (int k = 0; k < cfg.iterations; ++k) {
    const QpSolution sx = solve(prob.location_qp(z, y), cfg.qp, &x);
    if (sx.status != QpStatus::Optimal) {
      ContactPlan plan = prob.extract_plan(x, z);
      plan.feasible = false;
      plan.reward = 0.0;
      plan.failure = std::string("location step: ") + status_name(sx.status);
      return plan;
    }
    if (sx.x.size()) x = sx.x;

    const QpSolution sz = solve(prob.force_qp(x, y), cfg.qp, &z);
    if (sz.status != QpStatus::Optimal) {
      ContactPlan plan = prob.extract_plan(x, z);
      plan.feasible = false;
      plan.reward = 0.0;
      plan.failure = std::string("force step: ") + status_name(sz.status);
      return plan;
    }
    z = sz.x;

    for (int t = 0; t < prob.horizon(); ++t)
      y.segment<3>(3 * t) += prob.torque_gap_at(x, z, t);
  }

  ContactPlan plan = prob.extract_plan(x, z);
  plan.feasible = true;
  return plan;
}

Pose integrate_plan(const ContactPlan& plan, const MotionTrajectory& traj,
                    const SceneModel& scene) {
  const ObjectModel& obj = scene.object;
  const Mat3 I_inv = obj.inertia.inverse();

  Pose q = traj.pose(0);
  Vec3 v = traj.twist(0).v, w = traj.twist(0).w;

  for (int t = 0; t + 1 < plan.T; ++t) {
    Vec3 f_sum = Vec3::Zero(), tau_sum = Vec3::Zero();
    for (const PlanContact& c : plan.steps[t].contacts) {
      f_sum += c.f;
      tau_sum += c.r.cross(c.f);
    }
    for (const PlanEnvContact& e : plan.steps[t].env) {
      f_sum += e.f;
      tau_sum += e.r.cross(e.f);
    }
    const Vec3 g_body = q.R.transpose() * scene.environment.gravity;
    const Vec3 dv = f_sum / obj.mass - w.cross(v) + g_body;
    const Vec3 dw = I_inv * (tau_sum - w.cross(obj.inertia * w));

    v += plan.dt * dv;
    w += plan.dt * dw;
    q.p += plan.dt * (q.R * v);
    q.R = q.R * exp_so3(plan.dt * w);
  }
  return q;
}

double reward_from_distance(double D, double D_th) {
  return D <= D_th ? std::max(0.0, 1.0 - D / D_th) : 0.0;
}

std::pair<double, ContactPlan> evaluate(const ContactSchedule& schedule,
                                        const MotionTrajectory& traj,
                                        const SceneModel& scene,
                                        const AdmmConfig& cfg) {
  ContactPlan plan = admm_solve(schedule, traj, scene, cfg);
  if (!plan.feasible) return {0.0, plan};

  const Pose q_hat = integrate_plan(plan, traj, scene);
  plan.D = weighted_distance(traj.samples.back().pose, q_hat, cfg.beta);
  plan.reward = reward_from_distance(plan.D, cfg.D_th);
  return {plan.reward, plan};
}

ContactSchedule schedule_from_plan(const ContactPlan& plan) {
  ContactSchedule s;
  s.omega = Eigen::MatrixXi::Zero(plan.T, plan.n_effectors);
  for (int t = 0; t < plan.T; ++t)
    for (const PlanContact& c : plan.steps[t].contacts) s.omega(t, c.effector) = c.surface;
  return s;
}

std::vector<AuditCheck> audit_plan(const ContactPlan& plan,
                                   const ContactSchedule& schedule,
                                   const MotionTrajectory& traj,
                                   const SceneModel& scene, const AdmmConfig& cfg,
                                   int d) {
  std::vector<AuditCheck> checks;
  const ObjectModel& obj = scene.object;
  const int T = plan.T, nc = plan.n_effectors;

  {
    AuditCheck c{"schedule", true, 0.0};
    const auto why = check_schedule(schedule, obj.num_surfaces(), d);
    c.pass = !why.has_value() && schedule.T() == T && schedule.num_effectors() == nc;
    checks.push_back(c);
  }

  double newton = 0.0, hull = 0.0, stick = 0.0, cone = 0.0, zero_force = 0.0,
         tq = 0.0;
  for (int t = 0; t < T; ++t) {
    const Wrench des = desired_wrench(obj, scene.environment, traj, t);
    Vec3 f_sum = Vec3::Zero();
    std::vector<bool> listed(nc, false);
    for (const PlanContact& c : plan.steps[t].contacts) {
      f_sum += c.f;
      listed[c.effector] = true;
      if (schedule.omega(t, c.effector) != c.surface) zero_force = std::max(zero_force, 1.0);

      const ContactSurface& s = obj.surface(c.surface);
      Vec3 rec = Vec3::Zero();
      for (int i = 0; i < c.alpha.size(); ++i) rec += c.alpha[i] * s.vertices[i];
      hull = std::max(hull, (rec - c.r).norm());
      hull = std::max(hull, std::abs(c.alpha.sum() - 1.0));
      if (c.alpha.size()) hull = std::max(hull, -c.alpha.minCoeff());

      Vec3 t1, t2;
      s.tangent_basis(t1, t2);
      const Vec3 n = -s.normal;
      const double fn = c.f.dot(n);
      cone = std::max({cone, -fn, std::abs(c.f.dot(t1)) - obj.mu * fn,
                       std::abs(c.f.dot(t2)) - obj.mu * fn});
    }
    for (const PlanEnvContact& e : plan.steps[t].env) {
      f_sum += e.f;
      const Mat3 Rt = traj.pose(t).R.transpose();
      const Vec3 n = Rt * Vec3::UnitZ(), t1 = Rt * Vec3::UnitX(), t2 = Rt * Vec3::UnitY();
      const double fn = e.f.dot(n);
      if (e.mode == ContactMode::Sticking) {
        cone = std::max({cone, -fn, std::abs(e.f.dot(t1)) - scene.environment.mu_e * fn,
                         std::abs(e.f.dot(t2)) - scene.environment.mu_e * fn});
      } else {
        cone = std::max(cone, -fn);
        for (const Vec3& ta : {t1, t2})
          cone = std::max(cone, std::abs(e.f.dot(ta) +
                                         scene.environment.mu_e * ta.dot(e.slide_dir) * fn));
      }
    }
    for (int c = 0; c < nc; ++c)
      if (schedule.omega(t, c) != 0 && !listed[c]) zero_force = std::max(zero_force, 1.0);
    newton = std::max(newton, (f_sum - des.force).norm());
    tq = std::max(tq, torque_gap(plan.steps[t], des.torque).norm());
  }
  for (int t = 0; t + 1 < T; ++t)
    for (const PlanContact& c : plan.steps[t].contacts)
      for (const PlanContact& c2 : plan.steps[t + 1].contacts)
        if (c2.effector == c.effector) stick = std::max(stick, (c2.r - c.r).norm());

  checks.push_back({"newton_residual", newton <= 1e-5, newton});
  checks.push_back({"location_hull", hull <= 1e-6, hull});
  checks.push_back({"sticking", stick <= 1e-6, stick});
  checks.push_back({"zero_force_off_contact", zero_force == 0.0, zero_force});
  checks.push_back({"friction_cones", cone <= 1e-6, cone});
  checks.push_back(
      {"torque_residual_reported", std::abs(tq - plan.torque_residual) <= 1e-8,
       std::abs(tq - plan.torque_residual)});

  {
    const Pose q_hat = integrate_plan(plan, traj, scene);
    const double D = weighted_distance(traj.samples.back().pose, q_hat, cfg.beta);
    const double reward = plan.feasible ? reward_from_distance(D, cfg.D_th) : 0.0;
    checks.push_back({"final_pose_distance", std::abs(D - plan.D) <= 1e-9,
                      std::abs(D - plan.D)});
    checks.push_back({"reward", plan.reward >= 0.0 && plan.reward <= 1.0 &&
                                    std::abs(reward - plan.reward) <= 1e-9,
                      std::abs(reward - plan.reward)});
  }
  return checks;
}

bool audit_pass(const std::vector<AuditCheck>& checks) {
  for (const AuditCheck& c : checks)
    if (!c.pass) return false;
  return true;
}

}  // namespace cmp

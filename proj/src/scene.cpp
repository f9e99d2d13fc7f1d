#include "cmp/scene.hpp"

#include <algorithm>
#include <cmath>

namespace cmp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Vec3 ContactSurface::center() const {
  Vec3 c = Vec3::Zero();
  for (const auto& v : vertices) c += v;
  return c / static_cast<double>(vertices.size());
}

void ContactSurface::tangent_basis(Vec3& t1, Vec3& t2) const {
  const Vec3 n = normal.normalized();
  Vec3 ref = Vec3::UnitZ();
  if (std::abs(n.dot(ref)) > 0.9) ref = Vec3::UnitX();
  t1 = n.cross(ref).normalized();
  t2 = n.cross(t1);
}

const ContactSurface& ObjectModel::surface(int id) const {
  for (const auto& s : surfaces)
    if (s.id == id) return s;
  throw std::out_of_range("ObjectModel: no surface with id " + std::to_string(id));
}

Wrench desired_wrench(const ObjectModel& obj, const EnvironmentModel& env,
                      const MotionTrajectory& traj, int t) {
  const TrajectorySample& s = traj.samples.at(t);
  const Vec3 g_body = s.pose.R.transpose() * env.gravity;
  Wrench w;
  w.force = obj.mass * (s.accel.dv + s.twist.w.cross(s.twist.v) - g_body);
  w.torque = obj.inertia * s.accel.dw + s.twist.w.cross(obj.inertia * s.twist.w);
  return w;
}

std::vector<EnvContact> detect_env_contacts(const ObjectModel& obj,
                                            const EnvironmentModel& env,
                                            const MotionTrajectory& traj, int t) {
  const TrajectorySample& s = traj.samples.at(t);
  std::vector<EnvContact> contacts;
  for (const Vec3& v : obj.collision_vertices) {
    const Vec3 world = s.pose.p + s.pose.R * v;
    const double height = world.z() - env.plane_height;
    if (height < -2e-3)
      throw PenetrationError("corner below plane by " + std::to_string(-height) + " m");
    if (height > env.height_tol) continue;

    EnvContact c;
    c.r = v;
    c.normal = s.pose.R.transpose() * Vec3::UnitZ();
    Vec3 vel_world = s.pose.R * (s.twist.v + s.twist.w.cross(v));
    vel_world.z() = 0.0;  // tangential part on the plane
    if (vel_world.norm() > env.slide_threshold) {
      c.mode = ContactMode::Sliding;
      c.slide_dir = s.pose.R.transpose() * vel_world.normalized();
    }
    contacts.push_back(c);
  }
  return contacts;
}

const char* to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Slide: return "S";
    case PrimitiveKind::SlideCurve: return "SC";
    case PrimitiveKind::Rotate: return "R";
    case PrimitiveKind::Lift: return "L";
    case PrimitiveKind::Pivot: return "P";
  }
  return "?";
}

PrimitiveKind primitive_from_string(const std::string& s) {
  if (s == "S") return PrimitiveKind::Slide;
  if (s == "SC") return PrimitiveKind::SlideCurve;
  if (s == "R") return PrimitiveKind::Rotate;
  if (s == "L") return PrimitiveKind::Lift;
  if (s == "P") return PrimitiveKind::Pivot;
  throw std::invalid_argument("unknown primitive kind: " + s);
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ParamOutOfRange(what);
}

Mat3 rot_z(double a) { return exp_so3(Vec3(0, 0, a)); }

/// Screw motion about a fixed world axis line, quintic time scaling.
MotionTrajectory screw_about_line(const Pose& q0, const Vec3& axis_w,
                                  const Vec3& point_w, double angle, int T,
                                  double dt) {
  MotionTrajectory traj;
  traj.dt = dt;
  traj.samples.resize(T);
  const double duration = (T - 1) * dt;

  for (int t = 0; t < T; ++t) {
    const double tau = static_cast<double>(t) / (T - 1);
    const double s = quintic_scale(tau);
    const double sd = quintic_scale_d(tau) / duration;
    const double sdd = quintic_scale_dd(tau) / (duration * duration);
    const double th = s * angle, thd = sd * angle, thdd = sdd * angle;

    const Mat3 Rw = exp_so3(axis_w * th);
    TrajectorySample& smp = traj.samples[t];
    smp.pose.R = Rw * q0.R;
    smp.pose.p = point_w + Rw * (q0.p - point_w);

    const Vec3 arm = smp.pose.p - point_w;
    const Vec3 pd = thd * axis_w.cross(arm);
    const Vec3 pdd = thdd * axis_w.cross(arm) + thd * axis_w.cross(pd);

    smp.twist.w = smp.pose.R.transpose() * (axis_w * thd);
    smp.twist.v = smp.pose.R.transpose() * pd;
    smp.accel.dw = smp.pose.R.transpose() * (axis_w * thdd);
    smp.accel.dv = smp.pose.R.transpose() * pdd - smp.twist.w.cross(smp.twist.v);
  }
  traj.samples.front().twist = Twist{};
  traj.samples.front().accel = Accel{};
  traj.samples.back().twist = Twist{};
  traj.samples.back().accel = Accel{};
  return traj;
}

/// Midpoint of the bottom edge at the x-extreme given by `sign`, object frame.
Vec3 support_edge_point(const ObjectModel& obj, double sign) {
  double zmin = 1e30;
  for (const Vec3& v : obj.collision_vertices) zmin = std::min(zmin, v.z());
  double xext = -1e30;
  for (const Vec3& v : obj.collision_vertices)
    if (v.z() < zmin + 1e-9) xext = std::max(xext, sign * v.x());
  Vec3 acc = Vec3::Zero();
  int n = 0;
  for (const Vec3& v : obj.collision_vertices)
    if (v.z() < zmin + 1e-9 && sign * v.x() > xext - 1e-9) {
      acc += v;
      ++n;
    }
  return acc / std::max(n, 1);
}

}  // namespace

MotionTrajectory generate_primitive(PrimitiveKind kind,
                                    const std::vector<double>& params,
                                    const ObjectModel& obj, const Pose& q0,
                                    int T, double dt) {
  constexpr double eps = 1e-9;
  Pose q1 = q0;
  switch (kind) {
    case PrimitiveKind::Slide: {
      require(params.size() == 2, "S expects (dx, dy)");
      require(std::abs(params[0]) <= 0.1 + eps && std::abs(params[1]) <= 0.1 + eps,
              "S displacement outside +/-10 cm");
      q1.p += Vec3(params[0], params[1], 0);
      return interpolate(q0, q1, T, dt);
    }
    case PrimitiveKind::SlideCurve: {
      require(params.size() == 3, "SC expects (dx, dy, yaw)");
      require(std::abs(params[0]) <= 0.05 + eps && std::abs(params[1]) <= 0.05 + eps,
              "SC displacement outside +/-5 cm");
      require(std::abs(params[2]) <= kPi / 4 + eps, "SC yaw outside +/-45 deg");
      q1.p += Vec3(params[0], params[1], 0);
      q1.R = rot_z(params[2]) * q0.R;
      return interpolate(q0, q1, T, dt);
    }
    case PrimitiveKind::Rotate: {
      require(params.size() == 1, "R expects (yaw)");
      require(std::abs(params[0]) <= kPi / 2 + eps, "R yaw outside +/-90 deg");
      q1.R = rot_z(params[0]) * q0.R;
      return interpolate(q0, q1, T, dt);
    }
    case PrimitiveKind::Lift: {
      require(params.size() == 1, "L expects (dz)");
      require(params[0] >= -eps && params[0] <= 0.1 + eps, "L lift outside 0-10 cm");
      q1.p += Vec3(0, 0, params[0]);
      return interpolate(q0, q1, T, dt);
    }
    case PrimitiveKind::Pivot: {
      require(params.size() == 1, "P expects (angle)");
      require(std::abs(params[0]) <= kPi / 4 + eps, "P angle outside +/-45 deg");
      const double angle = params[0];
      const double sign = angle >= 0 ? 1.0 : -1.0;
      const Vec3 edge_obj = support_edge_point(obj, sign);
      const Vec3 edge_w = q0.p + q0.R * edge_obj;
      const Vec3 axis_w = (q0.R * Vec3::UnitY()).normalized();
      return screw_about_line(q0, axis_w, edge_w, angle, T, dt);
    }
  }
  throw std::invalid_argument("generate_primitive: bad kind");
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

std::vector<double> sample_primitive_params(std::mt19937_64& rng, PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Slide:
      return {uniform_real(rng, -0.1, 0.1), uniform_real(rng, -0.1, 0.1)};
    case PrimitiveKind::SlideCurve:
      return {uniform_real(rng, -0.05, 0.05), uniform_real(rng, -0.05, 0.05),
              uniform_real(rng, -kPi / 4, kPi / 4)};
    case PrimitiveKind::Rotate:
      return {uniform_real(rng, -kPi / 2, kPi / 2)};
    case PrimitiveKind::Lift:
      return {uniform_real(rng, 0.0, 0.1)};
    case PrimitiveKind::Pivot:
      return {uniform_real(rng, 0.0, kPi / 4)};
  }
  return {};
}

MotionTrajectory sample_task(std::mt19937_64& rng, const TaskSpec& spec,
                             const ObjectModel& obj, const EnvironmentModel& env) {
  const double x = uniform_real(rng, -0.05, 0.05);
  const double y = uniform_real(rng, -0.05, 0.05);
  const double yaw = uniform_real(rng, -kPi / 2, kPi / 2);

  Pose q0;
  q0.R = rot_z(yaw);
  // rest the object on the plane
  double zmin = 1e30;
  for (const Vec3& v : obj.collision_vertices) zmin = std::min(zmin, (q0.R * v).z());
  q0.p = Vec3(x, y, env.plane_height - zmin);

  MotionTrajectory traj;
  bool first = true;
  for (const PrimitiveSpec& ps : spec.primitives) {
    std::vector<double> params = ps.params;
    if (params.empty()) params = sample_primitive_params(rng, ps.kind);
    const Pose start = first ? q0 : traj.samples.back().pose;
    MotionTrajectory piece =
        generate_primitive(ps.kind, params, obj, start, spec.T, spec.dt);
    traj = first ? piece : concat(traj, piece);
    first = false;
  }
  if (first) throw std::invalid_argument("sample_task: no primitives");
  return traj;
}

SceneModel default_cube_scene() {
  constexpr double side = 0.10, half = side / 2, patch = 0.04;

  SceneModel scene;
  ObjectModel& obj = scene.object;
  obj.mass = 0.5;
  obj.mu = 0.8;
  obj.inertia = (obj.mass * side * side / 6.0) * Mat3::Identity();

  // faces except the bottom; 8 cm x 8 cm patches centered on each face
  struct Face {
    Vec3 n, t1, t2;
  };
  const Face faces[5] = {
      {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()},
      {Vec3::UnitY(), -Vec3::UnitX(), Vec3::UnitZ()},
      {-Vec3::UnitX(), -Vec3::UnitY(), Vec3::UnitZ()},
      {-Vec3::UnitY(), Vec3::UnitX(), Vec3::UnitZ()},
      {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()},
  };
  int id = 1;
  for (const Face& f : faces) {
    ContactSurface s;
    s.id = id++;
    s.normal = f.n;
    const Vec3 c = f.n * half;
    s.vertices = {c - patch * f.t1 - patch * f.t2, c + patch * f.t1 - patch * f.t2,
                  c + patch * f.t1 + patch * f.t2, c - patch * f.t1 + patch * f.t2};
    obj.surfaces.push_back(std::move(s));
  }

  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        obj.collision_vertices.emplace_back(sx * half, sy * half, sz * half);

  scene.environment.mu_e = 0.8;

  scene.robot.effectors = {{Vec3(0.15, 0, 0.25), 0.3}, {Vec3(-0.15, 0, 0.25), 0.3}};
  scene.robot.min_separation = 0.02;
  return scene;
}

}  // namespace cmp

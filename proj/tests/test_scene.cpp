#include "cmp/scene.hpp"

#include <doctest.h>

using namespace cmp;

namespace {
MotionTrajectory static_traj(const Pose& q, int T = 10, double dt = 0.1) {
  return interpolate(q, q, T, dt);
}

Pose resting_pose() {
  Pose q;
  q.p = Vec3(0, 0, 0.05);
  return q;
}
}  // namespace

TEST_CASE("default cube scene constants") {
  const SceneModel scene = default_cube_scene();
  CHECK(scene.object.mass == doctest::Approx(0.5));
  CHECK(scene.object.mu == doctest::Approx(0.8));
  CHECK(scene.environment.mu_e == doctest::Approx(0.8));
  CHECK(scene.object.num_surfaces() == 5);
  CHECK(scene.object.inertia(0, 0) == doctest::Approx(0.5 * 0.01 / 6.0));
  CHECK(scene.object.collision_vertices.size() == 8);
  for (const ContactSurface& s : scene.object.surfaces) {
    CHECK(s.vertices.size() == 4);
    // 8 cm x 8 cm patch
    CHECK((s.vertices[0] - s.vertices[1]).norm() == doctest::Approx(0.08));
    CHECK((s.center().cwiseAbs().maxCoeff()) == doctest::Approx(0.05));
  }
  CHECK(scene.robot.size() == 2);
}

TEST_CASE("desired wrench of a resting cube") {
  const SceneModel scene = default_cube_scene();
  const MotionTrajectory traj = static_traj(resting_pose());
  for (int t = 0; t < traj.length(); ++t) {
    const Wrench w = desired_wrench(scene.object, scene.environment, traj, t);
    CHECK((w.force - Vec3(0, 0, 0.5 * 9.81)).norm() < 1e-12);
    CHECK(w.torque.norm() < 1e-12);
  }
}

TEST_CASE("principal-axis spin has zero gyroscopic torque") {
  const SceneModel scene = default_cube_scene();
  MotionTrajectory traj = static_traj(resting_pose(), 3, 0.1);
  traj.samples[1].twist.w = Vec3(0, 0, 1);
  const Wrench w = desired_wrench(scene.object, scene.environment, traj, 1);
  CHECK(w.torque.norm() < 1e-12);
}

TEST_CASE("R-90 mid-sample torque matches direct Newton-Euler evaluation") {
  const SceneModel scene = default_cube_scene();
  Pose q0 = resting_pose(), q1 = q0;
  q1.R = exp_so3(Vec3(0, 0, M_PI / 2));
  const MotionTrajectory traj = interpolate(q0, q1, 10, 0.1);
  for (int t = 0; t < 10; ++t) {
    const Wrench w = desired_wrench(scene.object, scene.environment, traj, t);
    const Vec3 expected = scene.object.inertia * traj.accel(t).dw +
                          traj.twist(t).w.cross(scene.object.inertia * traj.twist(t).w);
    CHECK((w.torque - expected).norm() < 1e-12);
    // uniform cube: pure z-axis torque, gyroscopic term vanishes
    CHECK(w.torque.x() == doctest::Approx(0.0));
    CHECK(w.torque.y() == doctest::Approx(0.0));
    CHECK(w.torque.z() ==
          doctest::Approx(8.3333e-4 * traj.accel(t).dw.z()).epsilon(1e-4));
  }
}

TEST_CASE("frame invariance of the desired wrench") {
  SceneModel scene = default_cube_scene();
  Pose q0 = resting_pose(), q1 = q0;
  q1.p += Vec3(0.1, 0, 0);
  const MotionTrajectory traj = interpolate(q0, q1, 10, 0.1);

  const Mat3 Rw = exp_so3(Vec3(0, 0, 0.7));
  SceneModel rotated = scene;
  rotated.environment.gravity = Rw * scene.environment.gravity;
  MotionTrajectory rt = traj;
  for (auto& s : rt.samples) {
    s.pose.p = Rw * s.pose.p;
    s.pose.R = Rw * s.pose.R;
  }
  for (int t = 0; t < traj.length(); ++t) {
    const Wrench a = desired_wrench(scene.object, scene.environment, traj, t);
    const Wrench b = desired_wrench(rotated.object, rotated.environment, rt, t);
    CHECK((a.force - b.force).norm() < 1e-10);
    CHECK((a.torque - b.torque).norm() < 1e-10);
  }
}

TEST_CASE("environment contacts: resting, lifted, pivoting") {
  const SceneModel scene = default_cube_scene();

  const MotionTrajectory rest = static_traj(resting_pose());
  const auto contacts = detect_env_contacts(scene.object, scene.environment, rest, 0);
  REQUIRE(contacts.size() == 4);
  for (const EnvContact& c : contacts) {
    CHECK(c.r.z() == doctest::Approx(-0.05));
    CHECK(std::abs(c.r.x()) == doctest::Approx(0.05));
    CHECK(std::abs(c.r.y()) == doctest::Approx(0.05));
    CHECK((c.normal - Vec3(0, 0, 1)).norm() < 1e-12);
    CHECK(c.mode == ContactMode::Sticking);
  }

  Pose lifted = resting_pose();
  lifted.p.z() += 0.05;
  CHECK(detect_env_contacts(scene.object, scene.environment, static_traj(lifted), 0)
            .empty());

  // mid-pivot about the +x support edge: exactly the two edge corners touch
  const MotionTrajectory piv = generate_primitive(
      PrimitiveKind::Pivot, {M_PI / 4}, scene.object, resting_pose(), 10, 0.1);
  const auto mid = detect_env_contacts(scene.object, scene.environment, piv, 5);
  REQUIRE(mid.size() == 2);
  for (const EnvContact& c : mid) {
    CHECK(c.r.x() == doctest::Approx(0.05));
    CHECK(c.r.z() == doctest::Approx(-0.05));
  }

  Pose sunk = resting_pose();
  sunk.p.z() -= 0.005;
  CHECK_THROWS_AS(
      detect_env_contacts(scene.object, scene.environment, static_traj(sunk), 0),
      PenetrationError);
}

TEST_CASE("sliding detection and direction") {
  const SceneModel scene = default_cube_scene();
  Pose q0 = resting_pose(), q1 = q0;
  q1.p += Vec3(0.1, 0, 0);
  const MotionTrajectory traj = interpolate(q0, q1, 10, 0.1);
  const auto mid = detect_env_contacts(scene.object, scene.environment, traj, 5);
  REQUIRE(mid.size() == 4);
  for (const EnvContact& c : mid) {
    CHECK(c.mode == ContactMode::Sliding);
    CHECK((c.slide_dir - Vec3(1, 0, 0)).norm() < 1e-9);
  }
  // endpoints are at rest
  for (const EnvContact& c :
       detect_env_contacts(scene.object, scene.environment, traj, 0))
    CHECK(c.mode == ContactMode::Sticking);
}

TEST_CASE("primitive endpoint displacements") {
  const SceneModel scene = default_cube_scene();
  const Pose q0 = resting_pose();

  const auto s = generate_primitive(PrimitiveKind::Slide, {0.1, 0.0}, scene.object, q0, 10, 0.1);
  CHECK((s.pose(9).p - (q0.p + Vec3(0.1, 0, 0))).norm() < 1e-9);
  CHECK((s.pose(9).R - q0.R).cwiseAbs().maxCoeff() < 1e-9);

  const auto r = generate_primitive(PrimitiveKind::Rotate, {M_PI / 2}, scene.object, q0, 10, 0.1);
  CHECK((r.pose(9).p - q0.p).norm() < 1e-9);
  CHECK((r.pose(9).R - exp_so3(Vec3(0, 0, M_PI / 2)) * q0.R).cwiseAbs().maxCoeff() < 1e-9);

  const auto l = generate_primitive(PrimitiveKind::Lift, {0.1}, scene.object, q0, 10, 0.1);
  CHECK((l.pose(9).p - (q0.p + Vec3(0, 0, 0.1))).norm() < 1e-9);

  const auto sc = generate_primitive(PrimitiveKind::SlideCurve, {0.05, -0.03, M_PI / 4},
                                     scene.object, q0, 10, 0.1);
  CHECK((sc.pose(9).p - (q0.p + Vec3(0.05, -0.03, 0))).norm() < 1e-9);

  CHECK_THROWS_AS(generate_primitive(PrimitiveKind::Slide, {0.2, 0}, scene.object, q0, 10, 0.1),
                  ParamOutOfRange);
  CHECK_THROWS_AS(generate_primitive(PrimitiveKind::Lift, {-0.05}, scene.object, q0, 10, 0.1),
                  ParamOutOfRange);
}

TEST_CASE("pivot keeps the support edge on the plane at every sample") {
  const SceneModel scene = default_cube_scene();
  for (double angle : {M_PI / 4, -M_PI / 4, 0.3}) {
    const Pose q0 = resting_pose();
    const auto piv =
        generate_primitive(PrimitiveKind::Pivot, {angle}, scene.object, q0, 10, 0.1);
    const double sx = angle >= 0 ? 0.05 : -0.05;
    for (int t = 0; t < piv.length(); ++t) {
      for (double y : {-0.05, 0.05}) {
        const Vec3 corner = piv.pose(t).p + piv.pose(t).R * Vec3(sx, y, -0.05);
        CHECK(std::abs(corner.z()) < 1e-9);
      }
    }
    // final orientation is the requested rotation about the object's y-axis
    const Mat3 expect = exp_so3(Vec3(0, angle, 0)) * q0.R;
    CHECK((piv.pose(9).R - expect).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("sample_task determinism and ranges") {
  const SceneModel scene = default_cube_scene();
  TaskSpec spec;
  spec.T = 10;
  spec.dt = 0.1;
  spec.primitives = {{PrimitiveKind::Slide, {}}};

  std::mt19937_64 a(42), b(42);
  const auto t1 = sample_task(a, spec, scene.object, scene.environment);
  const auto t2 = sample_task(b, spec, scene.object, scene.environment);
  REQUIRE(t1.length() == t2.length());
  for (int t = 0; t < t1.length(); ++t)
    CHECK((t1.pose(t).p - t2.pose(t).p).norm() == 0.0);

  spec.primitives = {{PrimitiveKind::SlideCurve, {}}, {PrimitiveKind::SlideCurve, {}}};
  std::mt19937_64 c(1);
  CHECK(sample_task(c, spec, scene.object, scene.environment).length() == 19);

  // empirical parameter ranges
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto p = sample_primitive_params(rng, PrimitiveKind::SlideCurve);
    CHECK(std::abs(p[0]) <= 0.05);
    CHECK(std::abs(p[1]) <= 0.05);
    CHECK(std::abs(p[2]) <= M_PI / 4);
  }
  for (int i = 0; i < 100; ++i) {
    const auto p = sample_primitive_params(rng, PrimitiveKind::Lift);
    CHECK(p[0] >= 0.0);
    CHECK(p[0] <= 0.1);
  }

  // initial pose: position within +/-5 cm, yaw within +/-90 deg, resting
  std::mt19937_64 rng2(5);
  TaskSpec one;
  one.T = 5;
  one.primitives = {{PrimitiveKind::Slide, {0.0, 0.0}}};
  for (int i = 0; i < 50; ++i) {
    const auto task = sample_task(rng2, one, scene.object, scene.environment);
    const Pose& q = task.pose(0);
    CHECK(std::abs(q.p.x()) <= 0.05);
    CHECK(std::abs(q.p.y()) <= 0.05);
    CHECK(q.p.z() == doctest::Approx(0.05));
    const Vec3 aa = log_so3(q.R);
    CHECK(aa.head<2>().norm() < 1e-12);
    CHECK(std::abs(aa.z()) <= M_PI / 2);
  }
}

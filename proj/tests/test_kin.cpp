#include "cmp/kin.hpp"

#include <doctest.h>

using namespace cmp;

TEST_CASE("reachable: sphere test on the world-frame surface center") {
  const SceneModel scene = default_cube_scene();
  const ReachabilityModel kin(scene.robot);
  Pose q;
  q.p = Vec3(0, 0, 0.05);

  CHECK(kin.reachable(0, scene.object.surface(1), q));
  CHECK(kin.reachable(1, scene.object.surface(1), q));

  // move the object far away
  Pose far = q;
  far.p = Vec3(1.0, 0, 0.05);
  CHECK_FALSE(kin.reachable(0, scene.object.surface(1), far));

  // rotating the object swings a face in and out of range consistently with
  // the hand-computed center
  RobotModel tight;
  tight.effectors = {{Vec3(0.12, 0, 0.05), 0.1}};
  const ReachabilityModel kt(tight);
  Pose yawed = q;
  // -x face center at (-0.05, 0, 0.05): distance 0.17 from base, out of range
  CHECK_FALSE(kt.reachable(0, scene.object.surface(3), yawed));
  yawed.R = exp_so3(Vec3(0, 0, M_PI));  // -x face now points to +x
  const Vec3 center_world = yawed.p + yawed.R * scene.object.surface(3).center();
  CHECK((center_world - Vec3(0.05, 0, 0.05)).norm() < 1e-12);
  CHECK(kt.reachable(0, scene.object.surface(3), yawed));
}

TEST_CASE("reachable is invariant under rigid world transforms") {
  const SceneModel scene = default_cube_scene();
  Pose q;
  q.p = Vec3(0.02, -0.03, 0.05);
  q.R = exp_so3(Vec3(0, 0, 0.6));

  const Mat3 Rw = exp_so3(Vec3(0.3, -0.2, 0.9));
  const Vec3 tw(0.4, -0.1, 0.2);

  RobotModel moved = scene.robot;
  for (auto& e : moved.effectors) e.base = Rw * e.base + tw;
  Pose qw;
  qw.p = Rw * q.p + tw;
  qw.R = Rw * q.R;

  const ReachabilityModel a(scene.robot), b(moved);
  for (int c = 0; c < scene.robot.size(); ++c)
    for (const ContactSurface& s : scene.object.surfaces)
      CHECK(a.reachable(c, s, q) == b.reachable(c, s, qw));
}

TEST_CASE("pair_feasible separation") {
  const SceneModel scene = default_cube_scene();
  const ReachabilityModel kin(scene.robot);  // min separation 2 cm
  Pose q;
  q.p = Vec3(0, 0, 0.05);

  // opposite faces: centers 10 cm apart
  CHECK(kin.pair_feasible({1, 3}, scene.object, q));
  // adjacent faces: sqrt(2) * 5 cm ~ 7.07 cm apart, fine at 2 cm min-sep
  CHECK(kin.pair_feasible({1, 2}, scene.object, q));
  // empty and single assignments are vacuously fine
  CHECK(kin.pair_feasible({0, 0}, scene.object, q));
  CHECK(kin.pair_feasible({0, 4}, scene.object, q));

  RobotModel strict = scene.robot;
  strict.min_separation = 0.2;
  const ReachabilityModel ks(strict);
  CHECK_FALSE(ks.pair_feasible({1, 2}, scene.object, q));
  CHECK_FALSE(ks.pair_feasible({1, 3}, scene.object, q));
}

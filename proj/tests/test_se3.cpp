#include "cmp/se3.hpp"
#include "cmp/scene.hpp"  // uniform_real

#include <doctest.h>

#include <random>

using namespace cmp;

namespace {

// Independent Rodrigues map: truncated matrix exponential series.
Mat3 exp_series(const Vec3& u) {
  const Mat3 k = skew(u);
  Mat3 term = Mat3::Identity(), sum = Mat3::Identity();
  for (int i = 1; i <= 30; ++i) {
    term = (term * k) / i;
    sum += term;
  }
  return sum;
}

// Quaternion-based axis-angle extraction, robust near pi.
Vec3 log_quaternion(const Mat3& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  const double angle = 2.0 * std::atan2(q.vec().norm(), q.w());
  if (q.vec().norm() < 1e-12) return Vec3::Zero();
  return angle * q.vec().normalized();
}

Vec3 random_axis_angle(std::mt19937_64& rng, double max_norm) {
  Vec3 u(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1), uniform_real(rng, -1, 1));
  if (u.norm() < 1e-12) u = Vec3::UnitX();
  return u.normalized() * uniform_real(rng, 0.0, max_norm);
}

}  // namespace

TEST_CASE("exp_so3 basics") {
  CHECK((exp_so3(Vec3::Zero()) - Mat3::Identity()).norm() == doctest::Approx(0.0));
  const Mat3 R = exp_so3(Vec3(0, 0, M_PI / 2));
  CHECK(R.col(0).isApprox(Vec3(0, 1, 0), 1e-12));
  CHECK(is_rotation(R));
}

TEST_CASE("exp matches the series oracle") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Vec3 u = random_axis_angle(rng, M_PI - 1e-3);
    CHECK((exp_so3(u) - exp_series(u)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("exp/log roundtrip over 1000 random axis-angles") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 u = random_axis_angle(rng, M_PI - 1e-3);
    CHECK((log_so3(exp_so3(u)) - u).norm() < 1e-8);
  }
}

TEST_CASE("log_so3 trivial and near-pi cases") {
  CHECK(log_so3(Mat3::Identity()).norm() == doctest::Approx(0.0));
  CHECK((log_so3(exp_so3(Vec3(0, 0, 0.3))) - Vec3(0, 0, 0.3)).norm() < 1e-12);

  // robust branch checked against the quaternion oracle
  const double theta = M_PI - 1e-4;
  const Mat3 R = exp_so3(Vec3(theta, 0, 0));
  const Vec3 l = log_so3(R);
  CHECK((l - Vec3(theta, 0, 0)).norm() < 1e-6);
  CHECK((l - log_quaternion(R)).norm() < 1e-6);

  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis = random_axis_angle(rng, 1.0).normalized();
    const Mat3 Rp = exp_so3(axis * (M_PI - uniform_real(rng, 0.0, 1e-4)));
    const Vec3 lp = log_so3(Rp);
    CHECK(lp.norm() <= M_PI + 1e-12);
    CHECK((exp_so3(lp) - Rp).cwiseAbs().maxCoeff() < 1e-8);
  }
  // exactly pi: valid axis, deterministic sign
  const Mat3 Rpi = exp_so3(Vec3(0, M_PI, 0));
  const Vec3 lpi = log_so3(Rpi);
  CHECK(lpi.norm() == doctest::Approx(M_PI));
  CHECK((exp_so3(lpi) - Rpi).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pose_diff") {
  Pose q;
  q.p = Vec3(0.2, -0.1, 0.4);
  q.R = exp_so3(Vec3(0.1, 0.2, -0.3));
  CHECK(pose_diff(q, q).norm() == doctest::Approx(0.0));

  Pose q2 = q;
  q2.p += Vec3(0.1, 0, 0);
  Vec6 d = pose_diff(q, q2);
  CHECK((d - (Vec6() << 0.1, 0, 0, 0, 0, 0).finished()).norm() < 1e-12);

  Pose q3 = q;
  q3.R = q.R * exp_so3(Vec3(0, 0, M_PI / 4));
  d = pose_diff(q, q3);
  CHECK(d.head<3>().norm() < 1e-12);
  CHECK((d.tail<3>() - Vec3(0, 0, M_PI / 4)).norm() < 1e-12);
}

TEST_CASE("weighted_distance") {
  Pose q;
  CHECK(weighted_distance(q, q, 0.1) == doctest::Approx(0.0));

  Pose moved = q;
  moved.p = Vec3(0.01, 0, 0);
  CHECK(weighted_distance(moved, q, 0.1) == doctest::Approx(0.01));

  Pose rot = q;
  rot.R = exp_so3(Vec3(0, 0, 0.3));
  // 0.3 rad at beta = 0.1 sits exactly at the 0.03 threshold
  CHECK(weighted_distance(rot, q, 0.1) == doctest::Approx(0.03));

  // symmetric in the rotation part
  Pose a, b;
  a.R = exp_so3(Vec3(0.2, -0.4, 0.1));
  b.R = exp_so3(Vec3(-0.3, 0.2, 0.5));
  CHECK(weighted_distance(a, b, 0.1) == doctest::Approx(weighted_distance(b, a, 0.1)));
}

TEST_CASE("distance is zero iff poses coincide") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    Pose a, b;
    a.p = Vec3(uniform_real(rng, -1, 1), uniform_real(rng, -1, 1), uniform_real(rng, -1, 1));
    a.R = exp_so3(random_axis_angle(rng, 3.0));
    b.p = a.p;
    b.R = a.R;
    CHECK(weighted_distance(a, b, 0.1) < 1e-12);
    b.p += Vec3(1e-6, 0, 0);
    CHECK(weighted_distance(a, b, 0.1) > 1e-9);
  }
}

TEST_CASE("interpolate endpoints and symmetry") {
  Pose q0, q1;
  q1.p = Vec3(0.1, 0, 0);
  const MotionTrajectory traj = interpolate(q0, q1, 10, 0.1);
  REQUIRE(traj.length() == 10);
  CHECK((traj.pose(0).p - q0.p).norm() < 1e-12);
  CHECK((traj.pose(9).p - q1.p).norm() < 1e-12);
  for (int t : {0, 9}) {
    CHECK(traj.twist(t).v.norm() <= 1e-9);
    CHECK(traj.twist(t).w.norm() <= 1e-9);
    CHECK(traj.accel(t).dv.norm() <= 1e-9);
    CHECK(traj.accel(t).dw.norm() <= 1e-9);
  }
  // quintic scaling is symmetric about the midpoint; T=10 has no middle
  // sample, so check s(4.5/9) by the sample pair around it
  CHECK(traj.pose(4).p.x() + traj.pose(5).p.x() == doctest::Approx(0.1));

  const MotionTrajectory flat = interpolate(q0, q0, 10, 0.1);
  for (int t = 0; t < flat.length(); ++t) {
    CHECK(flat.twist(t).v.norm() < 1e-12);
    CHECK(flat.twist(t).w.norm() < 1e-12);
  }
}

TEST_CASE("interpolate rotation rate matches the quintic profile") {
  Pose q0, q1;
  q1.R = exp_so3(Vec3(0, 0, M_PI / 2));
  const int T = 10;
  const double dt = 0.1, duration = (T - 1) * dt;
  const MotionTrajectory traj = interpolate(q0, q1, T, dt);

  // oracle: finite differences of the closed-form s(tau), independent of
  // quintic_scale_d
  auto s = [](double tau) { return 10 * tau * tau * tau - 15 * tau * tau * tau * tau + 6 * tau * tau * tau * tau * tau; };
  double peak = 0.0;
  for (int t = 0; t < T; ++t) {
    const double tau = static_cast<double>(t) / (T - 1);
    const double eps = 1e-6;
    const double sd = (s(std::min(1.0, tau + eps)) - s(std::max(0.0, tau - eps))) /
                      ((std::min(1.0, tau + eps) - std::max(0.0, tau - eps)));
    const double expected = (M_PI / 2) * sd / duration;
    CHECK(traj.twist(t).w.z() == doctest::Approx(expected).epsilon(1e-4));
    peak = std::max(peak, traj.twist(t).w.z());
  }
  // continuous peak 15/8 * (pi/2) / 0.9 bounds the sampled maximum
  const double cont_peak = (15.0 / 8.0) * (M_PI / 2) / duration;
  CHECK(peak <= cont_peak + 1e-12);
  CHECK(peak > 0.97 * cont_peak);
}

TEST_CASE("finite-difference consistency of interpolated trajectories") {
  Pose q0, q1;
  q1.p = Vec3(0.1, -0.05, 0.0);
  q1.R = exp_so3(Vec3(0, 0, M_PI / 3));
  const MotionTrajectory traj = interpolate(q0, q1, 10, 0.1);
  for (int t = 0; t + 1 < traj.length(); ++t) {
    const Vec3 fd = (traj.pose(t + 1).p - traj.pose(t).p) / traj.dt;
    const Vec3 v_world = traj.pose(t).R * traj.twist(t).v;
    CHECK((fd - v_world).norm() <= 0.05);
  }
}

TEST_CASE("concat") {
  Pose q0, q1, q2;
  q1.p = Vec3(0.1, 0, 0);
  q2.p = Vec3(0.1, 0.1, 0);
  const MotionTrajectory a = interpolate(q0, q1, 10, 0.1);
  const MotionTrajectory b = interpolate(q1, q2, 10, 0.1);
  const MotionTrajectory ab = concat(a, b);
  CHECK(ab.length() == 19);
  CHECK((ab.pose(18).p - q2.p).norm() < 1e-12);

  // junction sample keeps the zero-twist property
  CHECK(ab.twist(9).v.norm() < 1e-12);

  // split reproduces the originals
  for (int t = 0; t < 10; ++t) CHECK((ab.pose(t).p - a.pose(t).p).norm() < 1e-12);
  for (int t = 0; t < 10; ++t) CHECK((ab.pose(9 + t).p - b.pose(t).p).norm() < 1e-12);

  // two 45-degree rotations compose to 90
  Pose r0, r1, r2;
  r1.R = exp_so3(Vec3(0, 0, M_PI / 4));
  r2.R = exp_so3(Vec3(0, 0, M_PI / 2));
  const MotionTrajectory rr = concat(interpolate(r0, r1, 10, 0.1), interpolate(r1, r2, 10, 0.1));
  CHECK((rr.pose(18).R - r2.R).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(concat(a, interpolate(q0, q1, 10, 0.1)), PoseMismatch);
  MotionTrajectory c = b;
  c.dt = 0.2;
  CHECK_THROWS_AS(concat(a, c), PoseMismatch);
}

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace cmp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Rigid-body pose: position p and rotation matrix R (world_from_object).
struct Pose {
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();
};

/// Velocity expressed in the object (body) frame.
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
};

/// Body-frame linear/angular acceleration.
struct Accel {
  Vec3 dv = Vec3::Zero();
  Vec3 dw = Vec3::Zero();
};

struct TrajectorySample {
  Pose pose;
  Twist twist;
  Accel accel;
};

/// Time-discretized object motion: poses, twists and accelerations at step dt.
struct MotionTrajectory {
  double dt = 0.1;
  std::vector<TrajectorySample> samples;

  int length() const { return static_cast<int>(samples.size()); }
  const Pose& pose(int t) const { return samples.at(t).pose; }
  const Twist& twist(int t) const { return samples.at(t).twist; }
  const Accel& accel(int t) const { return samples.at(t).accel; }
};

struct PoseMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Mat3 skew(const Vec3& v);

/// Rodrigues map; exp(0) = I.
Mat3 exp_so3(const Vec3& axis_angle);

/// Inverse of exp_so3 with ||result|| in [0, pi]. Near pi the axis is
/// recovered from the symmetric part of R; when the sign is numerically
/// ambiguous (angle == pi) the first nonzero axis component is made positive.
Vec3 log_so3(const Mat3& R);

bool is_rotation(const Mat3& R, double tol = 1e-9);

/// q2 "minus" q1: (p2 - p1, log(R1^T R2)).
Vec6 pose_diff(const Pose& q1, const Pose& q2);

/// D = ||p - p_hat|| + beta * ||log(R_hat^T R)||.
double weighted_distance(const Pose& q, const Pose& q_hat, double beta);

/// Quintic time scaling s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5 and derivatives.
double quintic_scale(double tau);
double quintic_scale_d(double tau);
double quintic_scale_dd(double tau);

/// Geodesic interpolation q0 -> q1 over T samples spaced dt apart, with
/// quintic time scaling so endpoint twists and accelerations vanish.
MotionTrajectory interpolate(const Pose& q0, const Pose& q1, int T, double dt);

/// Joins two trajectories sharing the junction sample. Throws PoseMismatch
/// if the junction poses disagree beyond 1e-9 or the steps differ.
MotionTrajectory concat(const MotionTrajectory& a, const MotionTrajectory& b);

/// World-frame linear velocity of the object origin.
Vec3 world_linear_velocity(const Pose& q, const Twist& t);

}  // namespace cmp

#include "cmp/se3.hpp"

#include <cmath>

namespace cmp {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 exp_so3(const Vec3& u) {
  const double theta = u.norm();
  if (theta < 1e-12) {
    // second-order series keeps the map smooth through zero
    const Mat3 k = skew(u);
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const Vec3 a = u / theta;
  const Mat3 k = skew(a);
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

Vec3 log_so3(const Mat3& R) {
  // vee of the antisymmetric part = sin(theta) * axis
  const Vec3 w(0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)),
               0.5 * (R(1, 0) - R(0, 1)));
  const double sn = w.norm();
  const double cs = 0.5 * (R.trace() - 1.0);
  const double theta = std::atan2(sn, cs);

  if (theta < 1e-9) return w;  // first order, axis*sin(theta) ~ axis*theta

  if (cs > -0.999) return (theta / sn) * w;

  // Near pi: sin(theta) is tiny, recover the axis from the symmetric part
  // R + R^T = 2 cos(theta) I + 2 (1 - cos(theta)) a a^T.
  const Mat3 S = 0.5 * (R + R.transpose());
  const double one_minus_cos = 1.0 - cs;
  int k = 0;
  Vec3 aa2;
  for (int i = 0; i < 3; ++i) aa2[i] = (S(i, i) - cs) / one_minus_cos;
  aa2.maxCoeff(&k);
  Vec3 a;
  for (int i = 0; i < 3; ++i) a[i] = (S(i, k) - (i == k ? cs : 0.0)) / one_minus_cos;
  a /= std::sqrt(std::max(aa2[k], 1e-30));
  a.normalize();

  // Sign: follow the antisymmetric part while it carries information,
  // otherwise make the first nonzero component positive.
  if (sn > 1e-12) {
    if (a.dot(w) < 0) a = -a;
  } else {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(a[i]) > 1e-9) {
        if (a[i] < 0) a = -a;
        break;
      }
    }
  }
  return theta * a;
}

bool is_rotation(const Mat3& R, double tol) {
  return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

Vec6 pose_diff(const Pose& q1, const Pose& q2) {
  Vec6 d;
  d.head<3>() = q2.p - q1.p;
  d.tail<3>() = log_so3(q1.R.transpose() * q2.R);
  return d;
}

double weighted_distance(const Pose& q, const Pose& q_hat, double beta) {
  return (q.p - q_hat.p).norm() + beta * log_so3(q_hat.R.transpose() * q.R).norm();
}

double quintic_scale(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
double quintic_scale_d(double t) { return t * t * (30.0 + t * (-60.0 + 30.0 * t)); }
double quintic_scale_dd(double t) { return t * (60.0 + t * (-180.0 + 120.0 * t)); }

MotionTrajectory interpolate(const Pose& q0, const Pose& q1, int T, double dt) {
  if (T < 2) throw std::invalid_argument("interpolate: T must be >= 2");
  MotionTrajectory traj;
  traj.dt = dt;
  traj.samples.resize(T);

  const double duration = (T - 1) * dt;
  const Vec3 dp = q1.p - q0.p;
  const Vec3 u = log_so3(q0.R.transpose() * q1.R);

  for (int t = 0; t < T; ++t) {
    const double tau = static_cast<double>(t) / (T - 1);
    const double s = quintic_scale(tau);
    const double sd = quintic_scale_d(tau) / duration;
    const double sdd = quintic_scale_dd(tau) / (duration * duration);

    TrajectorySample& smp = traj.samples[t];
    smp.pose.p = q0.p + s * dp;
    smp.pose.R = q0.R * exp_so3(s * u);

    // body-frame rates; the rotation axis u is fixed in the body frame
    const Vec3 dp_body = smp.pose.R.transpose() * dp;
    smp.twist.w = sd * u;
    smp.twist.v = sd * dp_body;
    smp.accel.dw = sdd * u;
    smp.accel.dv = sdd * dp_body - smp.twist.w.cross(smp.twist.v);
  }
  // exact zeros at the endpoints (required by the contact-break rule)
  traj.samples.front().twist = Twist{};
  traj.samples.front().accel = Accel{};
  traj.samples.back().twist = Twist{};
  traj.samples.back().accel = Accel{};
  return traj;
}

MotionTrajectory concat(const MotionTrajectory& a, const MotionTrajectory& b) {
  if (a.samples.empty() || b.samples.empty())
    throw PoseMismatch("concat: empty trajectory");
  if (std::abs(a.dt - b.dt) > 1e-12) throw PoseMismatch("concat: dt mismatch");
  const Pose& qa = a.samples.back().pose;
  const Pose& qb = b.samples.front().pose;
  if ((qa.p - qb.p).norm() > 1e-9 ||
      (qa.R - qb.R).cwiseAbs().maxCoeff() > 1e-9)
    throw PoseMismatch("concat: junction poses differ");

  MotionTrajectory out = a;
  out.samples.insert(out.samples.end(), b.samples.begin() + 1, b.samples.end());
  return out;
}

Vec3 world_linear_velocity(const Pose& q, const Twist& t) { return q.R * t.v; }

}  // namespace cmp

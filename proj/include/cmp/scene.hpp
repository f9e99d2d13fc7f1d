#pragma once

#include "cmp/se3.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cmp {

/// Planar contact patch on the object, convex and counterclockwise about the
/// outward normal. All quantities in the object frame.
struct ContactSurface {
  int id = 0;
  std::vector<Vec3> vertices;
  Vec3 normal = Vec3::UnitZ();

  Vec3 center() const;
  /// Orthonormal tangents spanning the surface plane (deterministic choice).
  void tangent_basis(Vec3& t1, Vec3& t2) const;
};

struct ObjectModel {
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();
  double mu = 0.5;
  std::vector<ContactSurface> surfaces;
  /// Corner points used for object/plane collision checks (object frame).
  std::vector<Vec3> collision_vertices;

  const ContactSurface& surface(int id) const;
  int num_surfaces() const { return static_cast<int>(surfaces.size()); }
};

struct EnvironmentModel {
  double mu_e = 0.8;
  Vec3 gravity = Vec3(0, 0, -9.81);  // world frame
  double plane_height = 0.0;         // plane z = plane_height
  double height_tol = 1e-3;          // contact detection band
  double slide_threshold = 1e-3;     // tangential speed separating modes
};

enum class ContactMode { Sticking, Sliding };

/// Object/environment contact at one timestep, object frame throughout.
struct EnvContact {
  Vec3 r = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // direction of admissible normal force
  ContactMode mode = ContactMode::Sticking;
  Vec3 slide_dir = Vec3::Zero();  // unit tangential velocity direction
};

struct EffectorModel {
  Vec3 base = Vec3::Zero();  // world frame
  double radius = 0.3;
};

struct RobotModel {
  std::vector<EffectorModel> effectors;
  double min_separation = 0.02;
  int size() const { return static_cast<int>(effectors.size()); }
};

struct SceneModel {
  ObjectModel object;
  EnvironmentModel environment;
  RobotModel robot;
};

struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

struct PenetrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParamOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Newton-Euler wrench (object frame) required to realize sample t.
Wrench desired_wrench(const ObjectModel& obj, const EnvironmentModel& env,
                      const MotionTrajectory& traj, int t);

/// Corner points within the contact band of the plane, with stick/slide mode
/// from the tangential velocity of the material point. Throws PenetrationError
/// when a corner sits more than 2 mm below the plane.
std::vector<EnvContact> detect_env_contacts(const ObjectModel& obj,
                                            const EnvironmentModel& env,
                                            const MotionTrajectory& traj, int t);

enum class PrimitiveKind { Slide, SlideCurve, Rotate, Lift, Pivot };

const char* to_string(PrimitiveKind k);
PrimitiveKind primitive_from_string(const std::string& s);

/// Motion primitive starting at q0 with T samples spaced dt apart.
/// Parameters: S (dx, dy) | SC (dx, dy, yaw) | R (yaw) | L (dz) | P (angle).
/// P pivots about the support edge so its corners stay on the plane.
MotionTrajectory generate_primitive(PrimitiveKind kind,
                                    const std::vector<double>& params,
                                    const ObjectModel& obj, const Pose& q0,
                                    int T, double dt);

struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::Slide;
  std::vector<double> params;  // empty = sample uniformly
};

struct TaskSpec {
  std::uint64_t seed = 0;
  std::vector<PrimitiveSpec> primitives;
  int T = 10;      // samples per primitive
  double dt = 0.1;
  int d = 1;       // contact persistence (decision epoch length)
};

/// Uniform draw in [lo, hi) from the top 53 bits of the generator.
double uniform_real(std::mt19937_64& rng, double lo, double hi);

std::vector<double> sample_primitive_params(std::mt19937_64& rng, PrimitiveKind kind);

/// Random initial pose (position in [-5 cm, 5 cm]^2, yaw in [-90 deg, 90 deg],
/// resting on the plane) followed by the spec'd primitives, concatenated.
MotionTrajectory sample_task(std::mt19937_64& rng, const TaskSpec& spec,
                             const ObjectModel& obj, const EnvironmentModel& env);

/// 10 cm cube, m = 0.5 kg, mu = mu_e = 0.8, five 8 cm x 8 cm contact
/// surfaces (all faces but the bottom), two fingers.
SceneModel default_cube_scene();

}  // namespace cmp

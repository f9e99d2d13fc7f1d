#pragma once

#include "cmp/scene.hpp"

#include <vector>

namespace cmp {

/// Coarse reachability stand-in for inverse kinematics: an effector can use a
/// surface when the surface center lies within its reach sphere. Pluggable so
/// a real IK can replace it without touching the search.
class ReachabilityModel {
 public:
  explicit ReachabilityModel(RobotModel robot) : robot_(std::move(robot)) {}

  bool reachable(int effector, const ContactSurface& surface, const Pose& q) const;

  /// All assigned surface centers pairwise at least min_separation apart
  /// (world frame). `assignment[c]` is a surface id, 0 = free.
  bool pair_feasible(const std::vector<int>& assignment, const ObjectModel& obj,
                     const Pose& q) const;

  const RobotModel& robot() const { return robot_; }

 private:
  RobotModel robot_;
};

}  // namespace cmp

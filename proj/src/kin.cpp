#include "cmp/kin.hpp"

namespace cmp {

bool ReachabilityModel::reachable(int effector, const ContactSurface& surface,
                                  const Pose& q) const {
  const EffectorModel& eff = robot_.effectors.at(effector);
  const Vec3 center_world = q.p + q.R * surface.center();
  return (center_world - eff.base).norm() <= eff.radius;
}

bool ReachabilityModel::pair_feasible(const std::vector<int>& assignment,
                                      const ObjectModel& obj, const Pose& q) const {
  std::vector<Vec3> centers;
  for (int id : assignment)
    if (id != 0) centers.push_back(q.p + q.R * obj.surface(id).center());
  for (size_t i = 0; i < centers.size(); ++i)
    for (size_t j = i + 1; j < centers.size(); ++j)
      if ((centers[i] - centers[j]).norm() < robot_.min_separation) return false;
  return true;
}

}  // namespace cmp

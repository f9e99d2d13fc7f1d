#pragma once

#include "cmp/copt.hpp"
#include "cmp/learn.hpp"
#include "cmp/scene.hpp"
#include "cmp/search.hpp"

#include <string>
#include <utility>
#include <vector>

namespace cmp {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checks the model invariants (surface geometry, inertia, ids) and throws
/// ParseError with the reason on violation.
void validate_scene(const SceneModel& scene);

SceneModel load_scene(const std::string& path);
void save_scene(const SceneModel& scene, const std::string& path);

TaskSpec load_task_spec(const std::string& path);
void save_task_spec(const TaskSpec& spec, const std::string& path);

void save_plan(const ContactPlan& plan, const std::string& path);
ContactPlan load_plan(const std::string& path);

void save_model(const PolicyValueNet& net, const FeasibilityClassifier& classifier,
                const std::string& path);
std::pair<PolicyValueNet, FeasibilityClassifier> load_model(const std::string& path);

/// JSON-lines, one TrainingSample per line.
void save_dataset(const std::vector<TrainingSample>& dataset, const std::string& path);
std::vector<TrainingSample> load_dataset(const std::string& path);

std::string stats_to_json(const SearchStats& stats);

}  // namespace cmp

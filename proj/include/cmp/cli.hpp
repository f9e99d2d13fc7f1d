#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cmp::cli {

/// Command-line overrides; zero means "keep the built-in default".
struct Overrides {
  double rho = 0.0;
  double gamma = 0.0;
  int d = 0;
  int budget = 0;
  double time_cap_s = 0.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

struct PlanOptions {
  std::string scene_file;  // empty = built-in cube scene
  std::string traj_file;
  std::string model_file;  // empty = uniform (untrained) guidance
  std::string out_file = "plan.json";
  Overrides ov;
};

struct TrainOptions {
  std::string config_file;
  std::string scene_file;
  std::string out_model = "model.json";
};

struct BenchOptions {
  std::string scene_file;
  std::string traj_file;
  std::string model_file;
  std::string out_csv = "bench.csv";
  int trials = 20;
  int threads = 1;
  Overrides ov;
};

struct ValidateOptions {
  std::string plan_file;
  std::string scene_file;
  std::string traj_file;
};

struct BenchmarkRecord {
  std::string mix;
  std::string method;  // mcts_trained | mcts_uniform
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  double time_s = 0.0;
  std::optional<double> force_err;   // N, successful trials only
  std::optional<double> torque_err;  // N*m, successful trials only
  int evaluations = 0;
};

extern const char* kBenchCsvHeader;
std::string to_csv_row(const BenchmarkRecord& rec);
BenchmarkRecord from_csv_row(const std::string& line);

// exit codes: 0 ok, 1 exhausted/failed checks, 2 parse error, 3 other errors
int run_plan(const PlanOptions& opt, std::ostream& out);
int run_train(const TrainOptions& opt, std::ostream& out);
int run_bench(const BenchOptions& opt, std::ostream& out);
int run_validate(const ValidateOptions& opt, std::ostream& out);
int run_make_scene(const std::string& out_file, std::ostream& out);

}  // namespace cmp::cli

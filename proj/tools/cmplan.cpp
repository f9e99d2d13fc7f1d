#include "cmp/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Contact planner: MCTS over contact surfaces with ADMM contact optimization"};
  app.require_subcommand(1);

  cmp::cli::PlanOptions plan_opt;
  cmp::cli::TrainOptions train_opt;
  cmp::cli::BenchOptions bench_opt;
  cmp::cli::ValidateOptions val_opt;
  std::string scene_out = "scene.json";

  auto add_overrides = [](CLI::App* cmd, cmp::cli::Overrides& ov) {
    cmd->add_option("--rho", ov.rho, "torque penalty weight (default 2e6)");
    cmd->add_option("--gamma", ov.gamma, "exploration constant (default 0.1)");
    cmd->add_option("--d", ov.d, "contact persistence steps (default: from spec)");
    cmd->add_option("--budget", ov.budget, "terminal evaluation budget (default 500)");
    cmd->add_option("--time-cap", ov.time_cap_s, "per-search wall clock cap in s (default 60)");
    auto* s = cmd->add_option("--seed", ov.seed, "override the task seed");
    s->each([&ov](const std::string&) { ov.seed_set = true; });
  };

  CLI::App* plan = app.add_subcommand("plan", "find the first feasible contact plan");
  plan->add_option("--scene", plan_opt.scene_file, "scene JSON (default: built-in cube)");
  plan->add_option("--traj", plan_opt.traj_file, "trajectory spec JSON")->required();
  plan->add_option("--model", plan_opt.model_file, "trained model JSON");
  plan->add_option("--out", plan_opt.out_file, "output plan JSON");
  add_overrides(plan, plan_opt.ov);

  CLI::App* train = app.add_subcommand("train", "collect search data and train the model");
  train->add_option("--config", train_opt.config_file, "training config JSON")->required();
  train->add_option("--scene", train_opt.scene_file, "scene JSON (default: built-in cube)");
  train->add_option("--out", train_opt.out_model, "output model JSON");

  CLI::App* bench = app.add_subcommand("bench", "benchmark planner success/time/error");
  bench->add_option("--scene", bench_opt.scene_file, "scene JSON (default: built-in cube)");
  bench->add_option("--traj", bench_opt.traj_file, "trajectory spec JSON (the mix)")->required();
  bench->add_option("--model", bench_opt.model_file, "trained model (adds mcts_trained rows)");
  bench->add_option("--out", bench_opt.out_csv, "output CSV");
  bench->add_option("--trials", bench_opt.trials, "number of trials");
  bench->add_option("--threads", bench_opt.threads, "parallel trials");
  add_overrides(bench, bench_opt.ov);

  CLI::App* validate = app.add_subcommand("validate", "re-check every plan constraint");
  validate->add_option("--plan", val_opt.plan_file, "plan JSON")->required();
  validate->add_option("--scene", val_opt.scene_file, "scene JSON (default: built-in cube)");
  validate->add_option("--traj", val_opt.traj_file, "trajectory spec JSON")->required();

  CLI::App* scene = app.add_subcommand("scene", "write the built-in cube scene JSON");
  scene->add_option("--out", scene_out, "output scene JSON");

  CLI11_PARSE(app, argc, argv);

  if (plan->parsed()) return cmp::cli::run_plan(plan_opt, std::cout);
  if (train->parsed()) return cmp::cli::run_train(train_opt, std::cout);
  if (bench->parsed()) return cmp::cli::run_bench(bench_opt, std::cout);
  if (validate->parsed()) return cmp::cli::run_validate(val_opt, std::cout);
  if (scene->parsed()) return cmp::cli::run_make_scene(scene_out, std::cout);
  return 0;
}

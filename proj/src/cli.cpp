#include "cmp/cli.hpp"

#include "cmp/json_io.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

namespace cmp::cli {

namespace {

SceneModel load_scene_or_default(const std::string& path) {
  if (path.empty()) return default_cube_scene();
  return load_scene(path);
}

std::uint64_t trial_seed(std::uint64_t base, int i) {
  return base + 1000003ULL * static_cast<std::uint64_t>(i);
}

std::string mix_name(const std::vector<PrimitiveSpec>& prims) {
  std::string s;
  for (size_t i = 0; i < prims.size(); ++i) {
    if (i) s += "+";
    s += to_string(prims[i].kind);
  }
  return s;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Mean Newton / torque-balance residual norms over the horizon.
std::pair<double, double> plan_errors(const ContactPlan& plan,
                                      const MotionTrajectory& traj,
                                      const SceneModel& scene) {
  double fe = 0.0, te = 0.0;
  for (int t = 0; t < plan.T; ++t) {
    const Wrench des = desired_wrench(scene.object, scene.environment, traj, t);
    Vec3 f = -des.force;
    for (const PlanContact& c : plan.steps[t].contacts) f += c.f;
    for (const PlanEnvContact& e : plan.steps[t].env) f += e.f;
    fe += f.norm();
    te += torque_gap(plan.steps[t], des.torque).norm();
  }
  return {fe / plan.T, te / plan.T};
}

void apply_overrides(const Overrides& ov, AdmmConfig& admm, SearchConfig& scfg) {
  if (ov.rho > 0) admm.rho = ov.rho;
  if (ov.gamma > 0) scfg.gamma = ov.gamma;
  if (ov.d > 0) scfg.d = ov.d;
  if (ov.budget > 0) scfg.budget = ov.budget;
  if (ov.time_cap_s > 0) scfg.time_cap_s = ov.time_cap_s;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, n);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

const char* kBenchCsvHeader =
    "mix,method,trial,seed,success,time_s,force_err_N,torque_err_Nm,evaluations";

std::string to_csv_row(const BenchmarkRecord& r) {
  std::ostringstream os;
  os << r.mix << ',' << r.method << ',' << r.trial << ',' << r.seed << ','
     << (r.success ? 1 : 0) << ',' << fmt17(r.time_s) << ','
     << (r.force_err ? fmt17(*r.force_err) : "") << ','
     << (r.torque_err ? fmt17(*r.torque_err) : "") << ',' << r.evaluations;
  return os.str();
}

BenchmarkRecord from_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (line.size() && line.back() == ',') cells.push_back("");
  if (cells.size() != 9) throw ParseError("bad CSV row: " + line);
  BenchmarkRecord r;
  r.mix = cells[0];
  r.method = cells[1];
  r.trial = std::stoi(cells[2]);
  r.seed = std::stoull(cells[3]);
  r.success = cells[4] == "1";
  r.time_s = std::stod(cells[5]);
  if (!cells[6].empty()) r.force_err = std::stod(cells[6]);
  if (!cells[7].empty()) r.torque_err = std::stod(cells[7]);
  r.evaluations = std::stoi(cells[8]);
  return r;
}

int run_plan(const PlanOptions& opt, std::ostream& out) {
  try {
    const SceneModel scene = load_scene_or_default(opt.scene_file);
    validate_scene(scene);
    TaskSpec spec = load_task_spec(opt.traj_file);
    if (opt.ov.seed_set) spec.seed = opt.ov.seed;

    std::mt19937_64 rng(spec.seed);
    const MotionTrajectory traj =
        sample_task(rng, spec, scene.object, scene.environment);

    AdmmConfig admm;
    SearchConfig scfg;
    scfg.d = spec.d;
    scfg.seed = spec.seed;
    apply_overrides(opt.ov, admm, scfg);

    std::unique_ptr<SearchGuide> guide;
    if (!opt.model_file.empty()) {
      auto [net, clf] = load_model(opt.model_file);
      scfg.h_lookahead = net.arch().h_lookahead;
      guide = std::make_unique<LearnedGuide>(std::move(net), std::move(clf));
    } else {
      guide = std::make_unique<UniformGuide>();
    }

    const SearchResult result =
        run_search(traj, scene, *guide, SearchMode::FirstFeasible, scfg, admm);
    out << stats_to_json(result.stats) << "\n";
    if (!result.best) {
      out << "no feasible contact plan within budget\n";
      return 1;
    }
    save_plan(result.best->second, opt.out_file);
    out << "reward " << result.best->second.reward << ", D " << result.best->second.D
        << ", wall time " << result.stats.wall_time_s << " s, plan written to "
        << opt.out_file << "\n";
    return 0;
  } catch (const ParseError& e) {
    out << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 3;
  }
}

int run_train(const TrainOptions& opt, std::ostream& out) {
  try {
    const SceneModel scene = load_scene_or_default(opt.scene_file);
    validate_scene(scene);

    nlohmann::json cfg;
    {
      std::ifstream in(opt.config_file);
      if (!in) throw ParseError("cannot open " + opt.config_file);
      try {
        in >> cfg;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(opt.config_file + ": " + e.what());
      }
    }
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const int n_traj = cfg.at("n_traj").get<int>();
    if (n_traj <= 0) throw ParseError("n_traj must be positive");
    const int budget = cfg.at("budget").get<int>();

    TaskSpec base;
    base.T = cfg.value("T", 10);
    base.dt = cfg.value("dt", 0.1);
    base.d = cfg.value("d", 1);

    // expand the mix into one primitive list per trajectory
    std::vector<std::vector<PrimitiveSpec>> tasks;
    for (const auto& entry : cfg.at("mix")) {
      const int count = entry.at("count").get<int>();
      std::vector<PrimitiveSpec> prims;
      for (const auto& k : entry.at("primitives"))
        prims.push_back({primitive_from_string(k.get<std::string>()), {}});
      for (int i = 0; i < count && static_cast<int>(tasks.size()) < n_traj; ++i)
        tasks.push_back(prims);
    }
    while (static_cast<int>(tasks.size()) < n_traj && !tasks.empty())
      tasks.push_back(tasks.back());

    AdmmConfig admm;
    if (cfg.contains("rho")) admm.rho = cfg.at("rho").get<double>();

    SearchConfig scfg;
    scfg.budget = budget;
    scfg.d = base.d;
    scfg.gamma = cfg.value("gamma", 0.1);
    scfg.time_cap_s = cfg.value("time_cap_s", 60.0);
    scfg.h_lookahead = cfg.value("h", 0);

    const int threads =
        std::max(1, std::min<int>(cfg.value("threads", 2),
                                  std::thread::hardware_concurrency()));
    const UniformGuide uniform;
    std::vector<SearchResult> slots(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), threads, [&](int i) {
      TaskSpec spec = base;
      spec.primitives = tasks[i];
      spec.seed = trial_seed(seed, i);
      std::mt19937_64 rng(spec.seed);
      const MotionTrajectory traj =
          sample_task(rng, spec, scene.object, scene.environment);
      SearchConfig sc = scfg;
      sc.seed = spec.seed;
      slots[i] = run_search(traj, scene, uniform, SearchMode::Collect, sc, admm);
    });

    std::vector<TrainingSample> dataset;
    int feasible_tasks = 0;
    for (const SearchResult& r : slots) {
      feasible_tasks += r.stats.feasible_found ? 1 : 0;
      dataset.insert(dataset.end(), r.dataset.begin(), r.dataset.end());
    }
    out << "collected " << dataset.size() << " samples from " << tasks.size()
        << " trajectories (" << feasible_tasks << " with feasible schedules)\n";

    ModelArch arch;
    arch.n_c = scene.robot.size();
    arch.n_omega = scene.object.num_surfaces();
    arch.h_lookahead = scfg.h_lookahead > 0 ? scfg.h_lookahead : base.d;

    TrainConfig tcfg;
    tcfg.seed = seed;
    tcfg.epochs = cfg.value("epochs", 300);
    tcfg.batch = cfg.value("batch", 256);
    tcfg.lr = cfg.value("lr", 1e-3);

    const FeasibilityClassifier clf = train_classifier(dataset, arch, tcfg);
    out << "classifier held-out balanced accuracy "
        << clf.held_out_balanced_accuracy << "\n";

    TrainLog log;
    const PolicyValueNet net = train_model(dataset, arch, tcfg, &log);
    out << "final training loss " << (log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back())
        << "\n";

    save_model(net, clf, opt.out_model);
    save_dataset(dataset, opt.out_model + ".dataset.jsonl");
    {
      std::ofstream curve(opt.out_model + ".curve.csv");
      curve << "epoch,loss\n";
      for (size_t e = 0; e < log.epoch_loss.size(); ++e)
        curve << e << "," << fmt17(log.epoch_loss[e]) << "\n";
    }
    out << "model written to " << opt.out_model << "\n";
    return 0;
  } catch (const ParseError& e) {
    out << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 3;
  }
}

int run_bench(const BenchOptions& opt, std::ostream& out) {
  try {
    const SceneModel scene = load_scene_or_default(opt.scene_file);
    validate_scene(scene);
    TaskSpec spec = load_task_spec(opt.traj_file);
    if (opt.ov.seed_set) spec.seed = opt.ov.seed;

    AdmmConfig admm;
    SearchConfig scfg;
    scfg.d = spec.d;
    apply_overrides(opt.ov, admm, scfg);

    std::optional<LearnedGuide> trained;
    if (!opt.model_file.empty()) {
      auto [net, clf] = load_model(opt.model_file);
      trained.emplace(std::move(net), std::move(clf));
    }
    const UniformGuide uniform;
    const std::string mix = mix_name(spec.primitives);

    struct TrialOut {
      std::vector<BenchmarkRecord> recs;
    };
    std::vector<TrialOut> slots(opt.trials);

    parallel_for(opt.trials, std::max(1, opt.threads), [&](int i) {
      TaskSpec tspec = spec;
      tspec.seed = trial_seed(spec.seed, i);
      std::mt19937_64 rng(tspec.seed);
      const MotionTrajectory traj =
          sample_task(rng, tspec, scene.object, scene.environment);

      auto run_one = [&](const SearchGuide& guide, const std::string& method,
                         int h_lookahead) {
        SearchConfig sc = scfg;
        sc.seed = tspec.seed;
        if (h_lookahead > 0) sc.h_lookahead = h_lookahead;
        const SearchResult res =
            run_search(traj, scene, guide, SearchMode::FirstFeasible, sc, admm);
        BenchmarkRecord rec;
        rec.mix = mix;
        rec.method = method;
        rec.trial = i;
        rec.seed = tspec.seed;
        rec.success = res.best.has_value();
        rec.time_s = res.stats.wall_time_s;
        rec.evaluations = res.stats.evaluations;
        if (res.best) {
          const auto [fe, te] = plan_errors(res.best->second, traj, scene);
          rec.force_err = fe;
          rec.torque_err = te;
        }
        slots[i].recs.push_back(std::move(rec));
      };

      if (trained) run_one(*trained, "mcts_trained", trained->net().arch().h_lookahead);
      run_one(uniform, "mcts_uniform", 0);
    });

    std::vector<BenchmarkRecord> records;
    for (const TrialOut& t : slots)
      records.insert(records.end(), t.recs.begin(), t.recs.end());

    {
      std::ofstream csv(opt.out_csv, std::ios::binary);
      if (!csv) throw std::runtime_error("cannot write " + opt.out_csv);
      csv << kBenchCsvHeader << "\n";
      for (const BenchmarkRecord& r : records) csv << to_csv_row(r) << "\n";
    }

    for (const char* method : {"mcts_trained", "mcts_uniform"}) {
      int n = 0, ok = 0;
      double tsum = 0, tworst = 0, fsum = 0, fworst = 0, qsum = 0, qworst = 0;
      double esum = 0;
      for (const BenchmarkRecord& r : records) {
        if (r.method != method) continue;
        ++n;
        if (!r.success) continue;
        ++ok;
        tsum += r.time_s;
        tworst = std::max(tworst, r.time_s);
        esum += r.evaluations;
        if (r.force_err) {
          fsum += *r.force_err;
          fworst = std::max(fworst, *r.force_err);
        }
        if (r.torque_err) {
          qsum += *r.torque_err;
          qworst = std::max(qworst, *r.torque_err);
        }
      }
      if (n == 0) continue;
      out << mix << " " << method << ": success " << ok << "/" << n;
      if (ok > 0)
        out << ", time mean/worst " << tsum / ok << "/" << tworst
            << " s, error mean/worst " << fsum / ok << "/" << fworst << " N, "
            << qsum / ok << "/" << qworst << " N*m, mean evaluations "
            << esum / ok;
      out << "\n";
    }
    out << "records written to " << opt.out_csv << "\n";
    return 0;
  } catch (const ParseError& e) {
    out << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 3;
  }
}

int run_validate(const ValidateOptions& opt, std::ostream& out) {
  try {
    const SceneModel scene = load_scene_or_default(opt.scene_file);
    validate_scene(scene);
    const TaskSpec spec = load_task_spec(opt.traj_file);
    std::mt19937_64 rng(spec.seed);
    const MotionTrajectory traj =
        sample_task(rng, spec, scene.object, scene.environment);
    const ContactPlan plan = load_plan(opt.plan_file);
    if (plan.T != traj.length())
      throw ParseError("plan horizon does not match the trajectory spec");

    AdmmConfig admm;
    const ContactSchedule schedule = schedule_from_plan(plan);
    const auto checks = audit_plan(plan, schedule, traj, scene, admm, spec.d);
    bool all = true;
    for (const AuditCheck& c : checks) {
      all = all && c.pass;
      out << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.family
          << " worst " << c.worst << "\n";
    }
    out << (all ? "plan valid\n" : "plan INVALID\n");
    return all ? 0 : 1;
  } catch (const ParseError& e) {
    out << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 3;
  }
}

int run_make_scene(const std::string& out_file, std::ostream& out) {
  try {
    save_scene(default_cube_scene(), out_file);
    out << "scene written to " << out_file << "\n";
    return 0;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace cmp::cli

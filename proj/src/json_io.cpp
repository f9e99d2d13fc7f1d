#include "cmp/json_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace cmp {

using nlohmann::json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vecx_to_json(const VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VectorXd vecx_from_json(const json& j) {
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

json mat3_to_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Mat3 mat3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw ParseError("expected 9-entry matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j[3 * r + c].get<double>();
  return m;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

void validate_scene(const SceneModel& scene) {
  const ObjectModel& obj = scene.object;
  if (obj.mass <= 0) throw ParseError("object mass must be positive");
  if ((obj.inertia - obj.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw ParseError("inertia must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(obj.inertia);
  if (eig.eigenvalues().minCoeff() <= 0)
    throw ParseError("inertia must be positive definite");
  if (obj.mu < 0 || scene.environment.mu_e < 0)
    throw ParseError("friction coefficients must be nonnegative");

  for (size_t i = 0; i < obj.surfaces.size(); ++i) {
    const ContactSurface& s = obj.surfaces[i];
    if (s.id != static_cast<int>(i) + 1)
      throw ParseError("surface ids must be 1..N without gaps");
    if (s.vertices.size() < 3) throw ParseError("surface needs >= 3 vertices");
    if (std::abs(s.normal.norm() - 1.0) > 1e-6)
      throw ParseError("surface normal must be unit length");
    const Vec3& v0 = s.vertices[0];
    for (const Vec3& v : s.vertices)
      if (std::abs((v - v0).dot(s.normal)) > 1e-9)
        throw ParseError("surface vertices must be coplanar with the normal");
    const int n = static_cast<int>(s.vertices.size());
    for (int k = 0; k < n; ++k) {
      const Vec3 e1 = s.vertices[(k + 1) % n] - s.vertices[k];
      const Vec3 e2 = s.vertices[(k + 2) % n] - s.vertices[(k + 1) % n];
      if (e1.cross(e2).dot(s.normal) < -1e-9)
        throw ParseError("surface vertices must be convex and counterclockwise");
    }
  }
  if (scene.robot.effectors.empty()) throw ParseError("robot needs >= 1 effector");
  for (const EffectorModel& e : scene.robot.effectors)
    if (e.radius <= 0) throw ParseError("effector radius must be positive");
}

SceneModel load_scene(const std::string& path) {
  const json j = load_json_file(path);
  SceneModel scene;
  try {
    const json& jo = j.at("object");
    scene.object.mass = jo.at("mass").get<double>();
    scene.object.inertia = mat3_from_json(jo.at("inertia"));
    scene.object.mu = jo.at("mu").get<double>();
    for (const json& js : jo.at("surfaces")) {
      ContactSurface s;
      s.id = js.at("id").get<int>();
      for (const json& jv : js.at("vertices")) s.vertices.push_back(vec3_from_json(jv));
      s.normal = vec3_from_json(js.at("normal"));
      scene.object.surfaces.push_back(std::move(s));
    }
    if (jo.contains("collision_vertices")) {
      for (const json& jv : jo.at("collision_vertices"))
        scene.object.collision_vertices.push_back(vec3_from_json(jv));
    } else {
      for (const ContactSurface& s : scene.object.surfaces)
        for (const Vec3& v : s.vertices) scene.object.collision_vertices.push_back(v);
    }
    const json& je = j.at("environment");
    scene.environment.mu_e = je.at("mu_e").get<double>();
    if (je.contains("gravity")) scene.environment.gravity = vec3_from_json(je.at("gravity"));
    const json& jr = j.at("robot");
    for (const json& jeff : jr.at("effectors"))
      scene.robot.effectors.push_back(
          {vec3_from_json(jeff.at("base")), jeff.at("radius").get<double>()});
    if (jr.contains("min_separation"))
      scene.robot.min_separation = jr.at("min_separation").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  validate_scene(scene);
  return scene;
}

void save_scene(const SceneModel& scene, const std::string& path) {
  json jo;
  jo["mass"] = scene.object.mass;
  jo["inertia"] = mat3_to_json(scene.object.inertia);
  jo["mu"] = scene.object.mu;
  jo["surfaces"] = json::array();
  for (const ContactSurface& s : scene.object.surfaces) {
    json js;
    js["id"] = s.id;
    js["vertices"] = json::array();
    for (const Vec3& v : s.vertices) js["vertices"].push_back(vec_to_json(v));
    js["normal"] = vec_to_json(s.normal);
    jo["surfaces"].push_back(js);
  }
  jo["collision_vertices"] = json::array();
  for (const Vec3& v : scene.object.collision_vertices)
    jo["collision_vertices"].push_back(vec_to_json(v));

  json j;
  j["object"] = jo;
  j["environment"] = {{"mu_e", scene.environment.mu_e},
                      {"gravity", vec_to_json(scene.environment.gravity)}};
  json jr;
  jr["effectors"] = json::array();
  for (const EffectorModel& e : scene.robot.effectors)
    jr["effectors"].push_back({{"base", vec_to_json(e.base)}, {"radius", e.radius}});
  jr["min_separation"] = scene.robot.min_separation;
  j["robot"] = jr;
  write_text_file(path, j.dump(2) + "\n");
}

TaskSpec load_task_spec(const std::string& path) {
  const json j = load_json_file(path);
  TaskSpec spec;
  try {
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.T = j.at("T").get<int>();
    spec.dt = j.at("dt").get<double>();
    spec.d = j.value("d", 1);
    for (const json& jp : j.at("primitives")) {
      PrimitiveSpec p;
      p.kind = primitive_from_string(jp.at("kind").get<std::string>());
      if (jp.contains("params"))
        for (const json& v : jp.at("params")) p.params.push_back(v.get<double>());
      spec.primitives.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (spec.T < 2) throw ParseError(path + ": T must be >= 2");
  if (spec.d < 1) throw ParseError(path + ": d must be >= 1");
  if (spec.primitives.empty()) throw ParseError(path + ": no primitives");
  return spec;
}

void save_task_spec(const TaskSpec& spec, const std::string& path) {
  json j;
  j["seed"] = spec.seed;
  j["T"] = spec.T;
  j["dt"] = spec.dt;
  j["d"] = spec.d;
  j["primitives"] = json::array();
  for (const PrimitiveSpec& p : spec.primitives) {
    json jp;
    jp["kind"] = to_string(p.kind);
    if (!p.params.empty()) jp["params"] = p.params;
    j["primitives"].push_back(jp);
  }
  write_text_file(path, j.dump(2) + "\n");
}

void save_plan(const ContactPlan& plan, const std::string& path) {
  json j;
  j["frame"] = "object";
  j["dt"] = plan.dt;
  j["T"] = plan.T;
  j["effectors"] = plan.n_effectors;
  j["steps"] = json::array();
  for (int t = 0; t < plan.T; ++t) {
    json js;
    js["t"] = t;
    js["contacts"] = json::array();
    for (const PlanContact& c : plan.steps[t].contacts) {
      json jc;
      jc["c"] = c.effector;
      jc["surface"] = c.surface;
      jc["r"] = vec_to_json(c.r);
      jc["f"] = vec_to_json(c.f);
      jc["alpha"] = vecx_to_json(c.alpha);
      js["contacts"].push_back(jc);
    }
    js["env"] = json::array();
    for (const PlanEnvContact& e : plan.steps[t].env) {
      json je;
      je["r"] = vec_to_json(e.r);
      je["f"] = vec_to_json(e.f);
      je["mode"] = e.mode == ContactMode::Sticking ? "sticking" : "sliding";
      je["slide_dir"] = vec_to_json(e.slide_dir);
      js["env"].push_back(je);
    }
    j["steps"].push_back(js);
  }
  j["torque_residual"] = plan.torque_residual;
  j["D"] = plan.D;
  j["reward"] = plan.reward;
  write_text_file(path, j.dump(2) + "\n");
}

ContactPlan load_plan(const std::string& path) {
  const json j = load_json_file(path);
  ContactPlan plan;
  try {
    plan.dt = j.at("dt").get<double>();
    plan.T = j.at("T").get<int>();
    plan.n_effectors = j.at("effectors").get<int>();
    plan.steps.resize(plan.T);
    for (const json& js : j.at("steps")) {
      const int t = js.at("t").get<int>();
      if (t < 0 || t >= plan.T) throw ParseError("step index out of range");
      for (const json& jc : js.at("contacts")) {
        PlanContact c;
        c.effector = jc.at("c").get<int>();
        c.surface = jc.at("surface").get<int>();
        c.r = vec3_from_json(jc.at("r"));
        c.f = vec3_from_json(jc.at("f"));
        c.alpha = vecx_from_json(jc.at("alpha"));
        plan.steps[t].contacts.push_back(std::move(c));
      }
      for (const json& je : js.at("env")) {
        PlanEnvContact e;
        e.r = vec3_from_json(je.at("r"));
        e.f = vec3_from_json(je.at("f"));
        e.mode = je.at("mode").get<std::string>() == "sliding" ? ContactMode::Sliding
                                                               : ContactMode::Sticking;
        if (je.contains("slide_dir")) e.slide_dir = vec3_from_json(je.at("slide_dir"));
        plan.steps[t].env.push_back(std::move(e));
      }
    }
    plan.torque_residual = j.at("torque_residual").get<double>();
    plan.D = j.at("D").get<double>();
    plan.reward = j.at("reward").get<double>();
    plan.feasible = plan.reward > 0.0 || j.value("feasible", true);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return plan;
}

void save_model(const PolicyValueNet& net, const FeasibilityClassifier& classifier,
                const std::string& path) {
  const ModelArch& a = net.arch();
  json j;
  j["format_version"] = 1;
  j["arch"] = {{"n_c", a.n_c},           {"n_omega", a.n_omega},
               {"hidden_rnn", a.hidden_rnn}, {"hidden1", a.hidden1},
               {"hidden2", a.hidden2},   {"h_lookahead", a.h_lookahead}};
  json sections;
  for (const auto& s : net.sections()) {
    json weights = json::array();
    for (int i = 0; i < s.size(); ++i) weights.push_back(net.params()[s.offset + i]);
    sections[s.name] = weights;
  }
  j["policy_value"] = {{"sections", sections}};
  j["classifier"] = {
      {"encoder_seed", classifier.encoder_seed()},
      {"weights", vecx_to_json(classifier.weights())},
      {"bias", classifier.bias()},
      {"held_out_balanced_accuracy", classifier.held_out_balanced_accuracy}};
  write_text_file(path, j.dump(2) + "\n");
}

std::pair<PolicyValueNet, FeasibilityClassifier> load_model(const std::string& path) {
  const json j = load_json_file(path);
  try {
    const json& ja = j.at("arch");
    ModelArch arch;
    arch.n_c = ja.at("n_c").get<int>();
    arch.n_omega = ja.at("n_omega").get<int>();
    arch.hidden_rnn = ja.at("hidden_rnn").get<int>();
    arch.hidden1 = ja.at("hidden1").get<int>();
    arch.hidden2 = ja.at("hidden2").get<int>();
    arch.h_lookahead = ja.at("h_lookahead").get<int>();

    PolicyValueNet net(arch);
    const json& sections = j.at("policy_value").at("sections");
    for (const auto& s : net.sections()) {
      const json& w = sections.at(s.name);
      if (static_cast<int>(w.size()) != s.size())
        throw ParseError("section size mismatch for " + s.name);
      for (int i = 0; i < s.size(); ++i)
        net.params()[s.offset + i] = w[i].get<double>();
    }
    const json& jc = j.at("classifier");
    FeasibilityClassifier clf(arch, jc.at("encoder_seed").get<std::uint64_t>());
    clf.weights() = vecx_from_json(jc.at("weights"));
    clf.bias() = jc.at("bias").get<double>();
    clf.held_out_balanced_accuracy =
        jc.value("held_out_balanced_accuracy", 0.0);
    return {std::move(net), std::move(clf)};
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

namespace {

json sample_to_json(const TrainingSample& s) {
  json j;
  json hist = json::array();
  for (const Assignment& a : s.history) hist.push_back(a);
  j["history"] = hist;
  j["pose"] = vecx_to_json(s.pose_features);
  j["goal"] = vecx_to_json(s.goal);
  j["legal"] = s.legal;
  j["p_bar"] = vecx_to_json(s.p_bar);
  j["v_bar"] = s.v_bar;
  j["feasible"] = s.feasible;
  j["n_c"] = s.n_c;
  j["n_omega"] = s.n_omega;
  return j;
}

TrainingSample sample_from_json(const json& j) {
  TrainingSample s;
  for (const json& ja : j.at("history")) s.history.push_back(ja.get<Assignment>());
  s.pose_features = vecx_from_json(j.at("pose"));
  s.goal = vecx_from_json(j.at("goal"));
  s.legal = j.at("legal").get<std::vector<int>>();
  s.p_bar = vecx_from_json(j.at("p_bar"));
  s.v_bar = j.at("v_bar").get<double>();
  s.feasible = j.at("feasible").get<bool>();
  s.n_c = j.at("n_c").get<int>();
  s.n_omega = j.at("n_omega").get<int>();
  return s;
}

}  // namespace

void save_dataset(const std::vector<TrainingSample>& dataset,
                  const std::string& path) {
  std::ostringstream out;
  for (const TrainingSample& s : dataset) out << sample_to_json(s).dump() << "\n";
  write_text_file(path, out.str());
}

std::vector<TrainingSample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<TrainingSample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string stats_to_json(const SearchStats& stats) {
  json j;
  j["evaluations"] = stats.evaluations;
  j["feasible_found"] = stats.feasible_found;
  j["wall_time_s"] = stats.wall_time_s;
  j["reward"] = stats.reward;
  j["seed"] = stats.seed;
  return j.dump();
}

}  // namespace cmp

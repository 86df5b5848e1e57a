#include "babbling/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include "babbling/errors.hpp"
#include "babbling/goalspace.hpp"

namespace babbling::experiment {

namespace fs = std::filesystem;
using io::Json;

namespace {

// Stream ids for derive_seed; one per consumer so stages stay independent.
constexpr std::uint64_t kPlantStream = 1;
constexpr std::uint64_t kGoalSpaceStream = 10;
constexpr std::uint64_t kLearnStream = 20;
constexpr std::uint64_t kEvaluateStream = 30;
constexpr std::uint64_t kAbundanceStream = 40;
constexpr std::uint64_t kBenchStream = 50;

void require_keys(const Json& j, const char* what, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& item : j.items())
    if (!known.count(item.key())) throw ConfigError(std::string(what) + ": unknown key '" + item.key() + "'");
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config.") + key + ": wrong type");
  }
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Meta {
  std::string hash;
  std::uint64_t seed;
  std::string command;

  Json json() const { return {{"config_hash", hash}, {"seed", seed}, {"command", command}}; }
  std::string line() const { return "config_hash=" + hash + " seed=" + std::to_string(seed) + " command=" + command; }
};

Meta meta_for(const ExperimentConfig& c, const char* command) { return {config_hash(c), c.seed, command}; }

void write_json(const fs::path& path, const Json& j) { io::write_file(path, j.dump(2) + "\n"); }

Json load_json(const fs::path& path) {
  try {
    return Json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

fs::path goalspace_dir(const ExperimentConfig& c) { return c.output_dir / "goalspace"; }
fs::path learn_dir(const ExperimentConfig& c) { return c.output_dir / "learn"; }

// Missing prerequisite files are reported and mapped to exit code 4.
bool have_files(std::initializer_list<fs::path> paths) {
  bool ok = true;
  for (const auto& p : paths)
    if (!fs::exists(p)) {
      std::cerr << "missing artifact: " << p.string() << '\n';
      ok = false;
    }
  return ok;
}

GoalGrid load_convex(const ExperimentConfig& c) {
  return io::grid_from_json(load_json(goalspace_dir(c) / "goalspace.json").at("convex"));
}

GoalGrid load_cut(const ExperimentConfig& c) {
  return io::grid_from_json(load_json(learn_dir(c) / "cutspace.json").at("cut"));
}

Json report_pair(const InverseModel& model, const GoalGrid& grid, Plant& plant, const BabbleConfig& b) {
  if (grid.goals.empty()) return nullptr;
  return {{"plain", io::to_json(evaluate(model, grid, plant, false))},
          {"feedback", io::to_json(evaluate(model, grid, plant, true, b.fb_alpha, b.fb_steps))}};
}

std::string error_line(const Json& pair) {
  if (pair.is_null()) return "n/a";
  return fmt("%.4f", pair["plain"]["mean"].get<double>()) + " m (feedback " +
         fmt("%.4f", pair["feedback"]["mean"].get<double>()) + " m)";
}

double sphere(const Eigen::VectorXd& x) { return x.squaredNorm(); }

double rosenbrock(const Eigen::VectorXd& x) {
  double f = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
    f += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
  return f;
}

}  // namespace

cma::CmaConfig ExperimentConfig::strategy() const { return io::cma_from_json(cma, kMuscleCount); }

void ExperimentConfig::validate() const {
  plant.validate();
  babble.validate();
  InverseModel probe(model);  // throws on invalid rates or radii
  (void)probe;
  if (goalspace.empirical_count < 4) throw ConfigError("goalspace: empirical_count must be >= 4");
  if (!(goalspace.spacing > 0.0)) throw ConfigError("goalspace: spacing must be > 0");
  if (!(goalspace.outlier_radius > 0.0)) throw ConfigError("goalspace: outlier_radius must be > 0");
  try {
    strategy().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("cma: ") + e.what());
  }
  abundance.validate();
  for (int id : abundance_goals)
    if (id < 0) throw ConfigError("abundance_goals: ids must be >= 0");
  if (auto_goal_count < 1) throw ConfigError("auto_goal_count must be >= 1");
  if (bench.sphere_dim < 1 || bench.rosen_dim < 2) throw ConfigError("bench: invalid dimension");
  if (bench.sphere_budget < 1 || bench.rosen_budget < 1) throw ConfigError("bench: budgets must be >= 1");
  if (!(bench.sphere_sigma0 > 0.0) || !(bench.rosen_sigma0 > 0.0)) throw ConfigError("bench: sigma0 must be > 0");
}

Json to_json(const ExperimentConfig& c) {
  return {{"plant", io::to_json(c.plant)},
          {"babble", io::to_json(c.babble)},
          {"model", io::to_json(c.model)},
          {"goalspace",
           {{"empirical_count", c.goalspace.empirical_count},
            {"spacing", c.goalspace.spacing},
            {"outlier_radius", c.goalspace.outlier_radius}}},
          {"cma", c.cma},
          {"abundance", io::to_json(c.abundance)},
          {"abundance_goals", c.abundance_goals},
          {"auto_goal_count", c.auto_goal_count},
          {"bench",
           {{"sphere_dim", c.bench.sphere_dim},
            {"sphere_budget", c.bench.sphere_budget},
            {"sphere_target", c.bench.sphere_target},
            {"rosen_dim", c.bench.rosen_dim},
            {"rosen_budget", c.bench.rosen_budget},
            {"rosen_target", c.bench.rosen_target},
            {"sphere_sigma0", c.bench.sphere_sigma0},
            {"rosen_sigma0", c.bench.rosen_sigma0}}},
          {"output_dir", c.output_dir.string()},
          {"seed", c.seed}};
}

void from_json(const Json& j, ExperimentConfig& c) {
  require_keys(j, "config",
               {"plant", "babble", "model", "goalspace", "cma", "abundance", "abundance_goals", "auto_goal_count",
                "bench", "output_dir", "seed"});
  if (j.contains("plant")) io::from_json(j["plant"], c.plant);
  if (j.contains("babble")) io::from_json(j["babble"], c.babble);
  if (j.contains("model")) io::from_json(j["model"], c.model);
  if (j.contains("abundance")) io::from_json(j["abundance"], c.abundance);
  if (j.contains("goalspace")) {
    const Json& g = j["goalspace"];
    require_keys(g, "goalspace", {"empirical_count", "spacing", "outlier_radius"});
    read(g, "empirical_count", c.goalspace.empirical_count);
    read(g, "spacing", c.goalspace.spacing);
    read(g, "outlier_radius", c.goalspace.outlier_radius);
  }
  if (j.contains("cma")) {
    if (!j["cma"].is_object()) throw ConfigError("cma: expected an object");
    c.cma = j["cma"];
  }
  if (j.contains("bench")) {
    const Json& b = j["bench"];
    require_keys(b, "bench",
                 {"sphere_dim", "sphere_budget", "sphere_target", "rosen_dim", "rosen_budget", "rosen_target",
                  "sphere_sigma0", "rosen_sigma0"});
    read(b, "sphere_dim", c.bench.sphere_dim);
    read(b, "sphere_budget", c.bench.sphere_budget);
    read(b, "sphere_target", c.bench.sphere_target);
    read(b, "rosen_dim", c.bench.rosen_dim);
    read(b, "rosen_budget", c.bench.rosen_budget);
    read(b, "rosen_target", c.bench.rosen_target);
    read(b, "sphere_sigma0", c.bench.sphere_sigma0);
    read(b, "rosen_sigma0", c.bench.rosen_sigma0);
  }
  read(j, "abundance_goals", c.abundance_goals);
  read(j, "auto_goal_count", c.auto_goal_count);
  if (j.contains("output_dir")) {
    std::string dir;
    read(j, "output_dir", dir);
    c.output_dir = dir;
  }
  read(j, "seed", c.seed);
}

ExperimentConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides,
                             std::uint64_t seed, const std::optional<fs::path>& output_dir) {
  ExperimentConfig c;
  Json tree = to_json(c);
  if (file) {
    Json doc;
    try {
      doc = Json::parse(io::read_file(*file));
    } catch (const std::exception& e) {
      throw ConfigError("config file: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw ConfigError("config file: expected a JSON object");
    ExperimentConfig probe;
    from_json(doc, probe);  // rejects unknown keys before merging
    tree.merge_patch(doc);
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    Json* node = &tree;
    std::stringstream path(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(path, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("--set: unknown key '" + key + "'");
      node = &(*node)[parts[i]];
    }
    if (!node->is_object() || parts.empty()) throw ConfigError("--set: unknown key '" + key + "'");
    (*node)[parts.back()] = value;
  }
  try {
    from_json(tree, c);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.seed = seed;
  if (output_dir) c.output_dir = *output_dir;
  c.plant.seed = derive_seed(seed, kPlantStream);
  c.validate();
  return c;
}

std::string config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("output_dir");
  return io::hex64(io::fnv1a(j.dump()));
}

int cmd_goalspace(const ExperimentConfig& config, std::ostream& out) {
  const Meta meta = meta_for(config, "goalspace");
  const Plant plant(config.plant);
  Rng rng(derive_seed(config.seed, kGoalSpaceStream));
  const std::vector<TaskPoint> empirical = sample_empirical(plant, config.goalspace.empirical_count, rng);
  ConvexHull hull;
  try {
    hull = convex_hull(empirical);
  } catch (const DegenerateInput& e) {
    std::cerr << "degenerate goal space: " << e.what() << '\n';
    return kDegenerateHull;
  }
  const GoalGrid grid = grid_intersect(hull, config.goalspace.spacing);

  const fs::path dir = goalspace_dir(config);
  write_json(dir / "goalspace.json", {{"meta", meta.json()},
                                      {"empirical", {{"provenance", "empirical"}, {"count", empirical.size()}}},
                                      {"hull", io::to_json(hull)},
                                      {"convex", io::to_json(grid)}});
  std::ostringstream csv;
  io::write_points_csv(csv, empirical, meta.line() + " set=empirical");
  io::write_file(dir / "empirical.csv", csv.str());
  csv.str("");
  io::write_points_csv(csv, grid.goals, meta.line() + " set=convex");
  io::write_file(dir / "goals_convex.csv", csv.str());
  csv.str("");
  io::write_points_csv(csv, hull.vertices, meta.line() + " set=hull_vertices");
  io::write_file(dir / "hull_vertices.csv", csv.str());

  out << "goalspace: " << empirical.size() << " empirical points, hull " << hull.vertices.size() << " vertices "
      << hull.faces.size() << " faces, volume " << fmt("%.6f", hull.volume()) << " m^3\n";
  out << "goalspace: spacing " << fmt("%.3f", grid.spacing) << " m -> " << grid.goals.size() << " goals\n";
  return kOk;
}

int cmd_learn(const ExperimentConfig& config, std::ostream& out) {
  if (!have_files({goalspace_dir(config) / "goalspace.json"})) return kMissingArtifacts;
  const Meta meta = meta_for(config, "learn");
  const GoalGrid convex = load_convex(config);

  Plant plant(config.plant);
  Rng rng(derive_seed(config.seed, kLearnStream));
  SessionResult session = run_session(config.babble, config.model, plant, convex, rng);
  const GoalGrid cut = remove_outliers(convex, session.model.centers(), config.goalspace.outlier_radius);

  const Json convex_eval = report_pair(session.model, convex, plant, config.babble);
  const Json cut_eval = report_pair(session.model, cut, plant, config.babble);

  Json snapshots = Json::array();
  for (const auto& s : session.log.snapshots) snapshots.push_back(io::to_json(s));

  const fs::path dir = learn_dir(config);
  Json model_doc = io::to_json(session.model);
  model_doc["meta"] = meta.json();
  write_json(dir / "model.json", model_doc);
  write_json(dir / "evals.json", {{"meta", meta.json()},
                                  {"samples", session.log.samples.size()},
                                  {"units", session.model.units().size()},
                                  {"snapshots", snapshots},
                                  {"final", {{"convex", convex_eval}, {"cut", cut_eval}}},
                                  {"cut_count", cut.goals.size()},
                                  {"warnings", session.log.warnings}});
  write_json(dir / "cutspace.json", {{"meta", meta.json()}, {"cut", io::to_json(cut)}});

  std::ostringstream csv;
  io::write_session_csv(csv, session.log, meta.line());
  io::write_file(dir / "session.csv", csv.str());
  csv.str("");
  io::write_points_csv(csv, cut.goals, meta.line() + " set=cut");
  io::write_file(dir / "goals_cut.csv", csv.str());
  csv.str("");
  io::write_points_csv(csv, session.model.centers(), meta.line() + " set=centers");
  io::write_file(dir / "centers.csv", csv.str());
  csv.str("");
  csv << "# " << meta.line() << "\nsamples,units,plain_mean,plain_std,feedback_mean,feedback_std\n";
  for (const auto& s : session.log.snapshots)
    csv << s.samples << ',' << s.units << ',' << io::format_double(s.plain.mean) << ','
        << io::format_double(s.plain.stddev) << ',' << io::format_double(s.feedback.mean) << ','
        << io::format_double(s.feedback.stddev) << '\n';
  io::write_file(dir / "curve.csv", csv.str());

  out << "learn: " << session.log.samples.size() << " samples, " << session.model.units().size() << " units\n";
  for (const auto& s : session.log.snapshots)
    out << "learn: samples " << s.samples << " units " << s.units << " error " << fmt("%.4f", s.plain.mean)
        << " m (feedback " << fmt("%.4f", s.feedback.mean) << " m)\n";
  out << "learn: X_C " << convex.goals.size() << " goals error " << error_line(convex_eval) << " | X_S "
      << cut.goals.size() << " goals error " << error_line(cut_eval) << '\n';
  return kOk;
}

int cmd_evaluate(const ExperimentConfig& config, std::ostream& out) {
  if (!have_files({goalspace_dir(config) / "goalspace.json", learn_dir(config) / "model.json",
                   learn_dir(config) / "cutspace.json"}))
    return kMissingArtifacts;
  const Meta meta = meta_for(config, "evaluate");
  const GoalGrid convex = load_convex(config);
  const GoalGrid cut = load_cut(config);
  const InverseModel model = io::model_from_json(load_json(learn_dir(config) / "model.json"));

  PlantConfig pc = config.plant;
  pc.seed = derive_seed(config.seed, kEvaluateStream);
  Plant plant(pc);
  const Json convex_eval = report_pair(model, convex, plant, config.babble);
  const Json cut_eval = report_pair(model, cut, plant, config.babble);
  Rng rng(derive_seed(config.seed, kEvaluateStream + 1));
  const double accuracy = control_accuracy(plant, 20, 20, rng);

  const fs::path dir = config.output_dir / "evaluate";
  write_json(dir / "evaluate.json", {{"meta", meta.json()},
                                     {"units", model.units().size()},
                                     {"convex", convex_eval},
                                     {"cut", cut_eval},
                                     {"control_accuracy", accuracy}});
  out << "evaluate: X_C " << convex.goals.size() << " goals error " << error_line(convex_eval) << " | X_S "
      << cut.goals.size() << " goals error " << error_line(cut_eval) << '\n';
  out << "evaluate: control accuracy D " << fmt("%.4f", accuracy) << " m\n";
  return kOk;
}

int cmd_abundance(const ExperimentConfig& config, std::ostream& out) {
  const fs::path ldir = learn_dir(config);
  if (!have_files({ldir / "model.json", ldir / "cutspace.json", ldir / "session.csv"})) return kMissingArtifacts;
  const Meta meta = meta_for(config, "abundance");
  const InverseModel model = io::model_from_json(load_json(ldir / "model.json"));
  const GoalGrid cut = load_cut(config);
  SessionLog log;
  {
    std::istringstream in(io::read_file(ldir / "session.csv"));
    log.samples = io::read_session_csv(in);
  }

  std::vector<int> ids = config.abundance_goals;
  if (ids.empty()) {
    ids = select_spread_goals(cut.goals, config.auto_goal_count);
  } else {
    for (int id : ids)
      if (id < 0 || id >= static_cast<int>(cut.goals.size())) {
        std::cerr << "goal id " << id << " outside X_S (" << cut.goals.size() << " goals)\n";
        return kGoalOutOfRange;
      }
  }
  out << "abundance: " << ids.size() << " goals:";
  for (int id : ids) out << ' ' << id;
  out << '\n';

  const cma::CmaConfig strategy = config.strategy();
  const fs::path dir = config.output_dir / "abundance";
  std::ostringstream summary;
  summary << "# " << meta.line() << '\n'
          << "goal_id,x,y,z,baseline_size,cma_size,baseline_error_mean,baseline_error_std,cma_error_mean,"
             "cma_error_std,baseline_variance_mean,baseline_variance_std,cma_variance_mean,cma_variance_std\n";

  for (std::size_t n = 0; n < ids.size(); ++n) {
    const int id = ids[n];
    const TaskPoint& goal = cut.goals[static_cast<std::size_t>(id)];
    PlantConfig pc = config.plant;
    pc.seed = derive_seed(config.seed, kAbundanceStream + 2 * n);
    Plant plant(pc);
    Rng rng(derive_seed(config.seed, kAbundanceStream + 2 * n + 1));

    const PostureSet local =
        PostureSet::from_samples(local_samples(log, goal, config.abundance.radius), PostureTag::GoalBabble);
    const QueryResult query = query_abundance(goal, model, local, cut.goals, plant, config.abundance, strategy, rng);

    const fs::path gdir = dir / ("goal_" + std::to_string(id));
    Json trials = Json::array();
    for (std::size_t k = 0; k < query.trials.size(); ++k) {
      trials.push_back(io::to_json(query.trials[k]));
      std::ostringstream h;
      io::write_history_csv(h, query.trials[k].history, meta.line() + " goal=" + std::to_string(id));
      io::write_file(gdir / ("history_trial" + std::to_string(k) + ".csv"), h.str());
    }
    PostureSet all = local;
    all.append(query.feedback);
    all.append(query.cma);
    std::ostringstream csv;
    io::write_postures_csv(csv, all, meta.line() + " goal=" + std::to_string(id));
    io::write_file(gdir / "postures.csv", csv.str());

    Json doc = {{"meta", meta.json()},
                {"goal_id", id},
                {"goal", io::point_json(goal)},
                {"sizes", {{"goalbabble", local.size()}, {"feedback", query.feedback.size()}, {"cma", query.cma.size()}}},
                {"trials", trials},
                {"warnings", query.warnings}};
    if (local.empty() || query.cma.empty()) {
      doc["report"] = nullptr;
      doc["skipped"] = "empty posture set";
      write_json(gdir / "report.json", doc);
      out << "abundance: goal " << id << " skipped (goalbabble " << local.size() << ", cma " << query.cma.size()
          << " postures)\n";
      continue;
    }
    const AbundanceReport report = abundance_report(local, query.cma, plant, goal, config.abundance, rng);
    doc["report"] = io::to_json(report);
    write_json(gdir / "report.json", doc);
    csv.str("");
    io::write_matrix_csv(csv, report.baseline.covariance, "m", meta.line() + " set=baseline");
    io::write_file(gdir / "cov_baseline.csv", csv.str());
    csv.str("");
    io::write_matrix_csv(csv, report.cma.covariance, "m", meta.line() + " set=cma");
    io::write_file(gdir / "cov_cma.csv", csv.str());

    summary << id;
    for (int i = 0; i < 3; ++i) summary << ',' << io::format_double(goal[i]);
    summary << ',' << local.size() << ',' << query.cma.size();
    for (double v : {report.baseline.error_mean, report.baseline.error_std, report.cma.error_mean,
                     report.cma.error_std, report.baseline.variance_mean, report.baseline.variance_std,
                     report.cma.variance_mean, report.cma.variance_std})
      summary << ',' << io::format_double(v);
    summary << '\n';

    out << "abundance: goal " << id << " variance " << fmt("%.3e", report.baseline.variance_mean) << " -> "
        << fmt("%.3e", report.cma.variance_mean) << ", error " << fmt("%.4f", report.baseline.error_mean) << " -> "
        << fmt("%.4f", report.cma.error_mean) << " m\n";
  }
  io::write_file(dir / "summary.csv", summary.str());
  return kOk;
}

int cmd_cma_bench(const ExperimentConfig& config, std::ostream& out) {
  const Meta meta = meta_for(config, "cma-bench");
  const BenchConfig& b = config.bench;
  const fs::path dir = config.output_dir / "cma_bench";
  Json results = Json::object();

  struct Case {
    const char* name;
    cma::Objective f;
    int dim;
    long budget;
    double target;
    double sigma0;
    Eigen::VectorXd x0;
  };
  Eigen::VectorXd rosen_start = Eigen::VectorXd::Ones(b.rosen_dim);
  rosen_start[0] = -1.0;
  const Case cases[] = {
      {"sphere", sphere, b.sphere_dim, b.sphere_budget, b.sphere_target, b.sphere_sigma0,
       Eigen::VectorXd::Ones(b.sphere_dim)},
      {"rosenbrock", rosenbrock, b.rosen_dim, b.rosen_budget, b.rosen_target, b.rosen_sigma0, rosen_start}};
  std::uint64_t stream = kBenchStream;
  for (const Case& c : cases) {
    Rng rng(derive_seed(config.seed, stream++));
    const Eigen::VectorXd& x0 = c.x0;
    cma::StopRules stop;
    stop.f_target = c.target;
    stop.max_evaluations = c.budget;
    const cma::OptimizeResult r = cma::optimize(c.f, x0, c.sigma0, cma::CmaConfig::defaults(c.dim), stop, rng);
    Json j = io::to_json(r);
    j["dim"] = c.dim;
    j["target"] = c.target;
    j["budget"] = c.budget;
    j["x0"] = Json::array();
    for (int i = 0; i < c.dim; ++i) j["x0"].push_back(x0[i]);
    results[c.name] = j;
    std::ostringstream csv;
    io::write_history_csv(csv, r.history, meta.line() + " function=" + c.name);
    io::write_file(dir / (std::string(c.name) + "_history.csv"), csv.str());
    out << "cma-bench: " << c.name << " n=" << c.dim << " best_f " << fmt("%.3e", r.best_f) << " after "
        << r.evaluations << " evaluations (" << cma::to_string(r.stop) << ")\n";
  }
  write_json(dir / "bench.json", {{"meta", meta.json()}, {"results", results}});
  return kOk;
}

}  // namespace babbling::experiment

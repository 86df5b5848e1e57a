#include "babbling/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "babbling/errors.hpp"

namespace babbling::io {

namespace {

void require_object(const Json& j, const char* what, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& item : j.items())
    if (!known.count(item.key())) throw ConfigError(std::string(what) + ": unknown key '" + item.key() + "'");
}

template <typename T>
void read(const Json& j, const char* key, T& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(what) + "." + key + ": wrong type");
  }
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return rows;
}

Eigen::VectorXd vector_from(const Json& j, Eigen::Index expected, const char* what) {
  if (!j.is_array() || (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected))
    throw ConfigError(std::string(what) + ": wrong array length");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from(const Json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ConfigError(std::string(what) + ": wrong row count");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = vector_from(j[static_cast<std::size_t>(r)], cols, what);
  return m;
}

void write_meta(std::ostream& out, std::string_view meta) {
  if (!meta.empty()) out << "# " << meta << '\n';
}

// Splits one CSV line on commas (no quoting is ever written).
std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::runtime_error("csv: not a number: '" + s + "'");
  return v;
}

// Yields data rows, skipping metadata comments and the header line.
std::vector<std::vector<std::string>> data_rows(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    rows.push_back(split(line));
  }
  return rows;
}

template <typename Vec>
void put_values(std::ostream& out, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v[i]);
}

void put_columns(std::ostream& out, std::string_view prefix, int count) {
  for (int i = 0; i < count; ++i) out << ',' << prefix << i;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json point_json(const TaskPoint& p) { return Json::array({p.x(), p.y(), p.z()}); }

TaskPoint point_from_json(const Json& j) { return vector_from(j, 3, "point"); }

// ---- configs ----

Json to_json(const PlantConfig& c) {
  Json axes = Json::array();
  for (const auto& a : c.joint_axes) axes.push_back(point_json(a));
  Json limits = Json::array();
  for (const auto& [lo, hi] : c.joint_limits) limits.push_back({lo, hi});
  return {{"joint_count", c.joint_count},
          {"link_lengths", c.link_lengths},
          {"joint_axes", axes},
          {"rest_angles", c.rest_angles},
          {"muscle_map", matrix_json(c.muscle_map)},
          {"joint_limits", limits},
          {"obs_noise_std", point_json(c.obs_noise_std)},
          {"seed", c.seed},
          {"drift_rate", c.drift_rate}};
}

void from_json(const Json& j, PlantConfig& c) {
  const char* what = "plant";
  require_object(j, what,
                 {"joint_count", "link_lengths", "joint_axes", "rest_angles", "muscle_map", "joint_limits",
                  "obs_noise_std", "seed", "drift_rate"});
  read(j, "joint_count", c.joint_count, what);
  read(j, "link_lengths", c.link_lengths, what);
  read(j, "rest_angles", c.rest_angles, what);
  read(j, "seed", c.seed, what);
  read(j, "drift_rate", c.drift_rate, what);
  try {
    if (j.contains("joint_axes")) {
      c.joint_axes.clear();
      for (const auto& a : j.at("joint_axes")) c.joint_axes.push_back(point_from_json(a));
    }
    if (j.contains("joint_limits")) {
      c.joint_limits.clear();
      for (const auto& l : j.at("joint_limits")) {
        const Eigen::VectorXd pair = vector_from(l, 2, "plant.joint_limits");
        c.joint_limits.emplace_back(pair[0], pair[1]);
      }
    }
    if (j.contains("muscle_map")) {
      const Json& m = j.at("muscle_map");
      c.muscle_map = matrix_from(m, static_cast<Eigen::Index>(m.size()), kMuscleCount, "plant.muscle_map");
    }
    if (j.contains("obs_noise_std")) c.obs_noise_std = vector_from(j.at("obs_noise_std"), 3, "plant.obs_noise_std");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plant: ") + e.what());
  }
}

Json to_json(const BabbleConfig& c) {
  return {{"delta_x", c.delta_x},
          {"delta_q", c.delta_q},
          {"p_home", c.p_home},
          {"rate_hz", c.rate_hz},
          {"total_samples", c.total_samples},
          {"eval_every", c.eval_every},
          {"noise_sigma", c.noise_sigma},
          {"noise_sigma_delta", c.noise_sigma_delta},
          {"fb_alpha", c.fb_alpha},
          {"fb_steps", c.fb_steps},
          {"fb_radius", c.fb_radius}};
}

void from_json(const Json& j, BabbleConfig& c) {
  const char* what = "babble";
  require_object(j, what,
                 {"delta_x", "delta_q", "p_home", "rate_hz", "total_samples", "eval_every", "noise_sigma",
                  "noise_sigma_delta", "fb_alpha", "fb_steps", "fb_radius"});
  read(j, "delta_x", c.delta_x, what);
  read(j, "delta_q", c.delta_q, what);
  read(j, "p_home", c.p_home, what);
  read(j, "rate_hz", c.rate_hz, what);
  read(j, "total_samples", c.total_samples, what);
  read(j, "eval_every", c.eval_every, what);
  read(j, "noise_sigma", c.noise_sigma, what);
  read(j, "noise_sigma_delta", c.noise_sigma_delta, what);
  read(j, "fb_alpha", c.fb_alpha, what);
  read(j, "fb_steps", c.fb_steps, what);
  read(j, "fb_radius", c.fb_radius, what);
}

Json to_json(const InverseModelConfig& c) {
  return {{"r_proto", c.r_proto},
          {"learning_rate", c.learning_rate},
          {"bandwidth", c.bandwidth},
          {"anneal_samples", c.anneal_samples}};
}

void from_json(const Json& j, InverseModelConfig& c) {
  const char* what = "model";
  require_object(j, what, {"r_proto", "learning_rate", "bandwidth", "anneal_samples"});
  read(j, "r_proto", c.r_proto, what);
  read(j, "learning_rate", c.learning_rate, what);
  read(j, "bandwidth", c.bandwidth, what);
  read(j, "anneal_samples", c.anneal_samples, what);
}

Json to_json(const AbundanceConfig& c) {
  return {{"alpha", c.alpha},
          {"fb_steps", c.fb_steps},
          {"trials", c.trials},
          {"radius", c.radius},
          {"scale", c.scale},
          {"f_star", c.f_star},
          {"max_evals_per_trial", c.max_evals_per_trial},
          {"k_max", c.k_max},
          {"n_eval", c.n_eval},
          {"fallback_sigma", c.fallback_sigma},
          {"min_samples_per_dim", c.min_samples_per_dim}};
}

void from_json(const Json& j, AbundanceConfig& c) {
  const char* what = "abundance";
  require_object(j, what,
                 {"alpha", "fb_steps", "trials", "radius", "scale", "f_star", "max_evals_per_trial", "k_max",
                  "n_eval", "fallback_sigma", "min_samples_per_dim"});
  read(j, "alpha", c.alpha, what);
  read(j, "fb_steps", c.fb_steps, what);
  read(j, "trials", c.trials, what);
  read(j, "radius", c.radius, what);
  read(j, "scale", c.scale, what);
  read(j, "f_star", c.f_star, what);
  read(j, "max_evals_per_trial", c.max_evals_per_trial, what);
  read(j, "k_max", c.k_max, what);
  read(j, "n_eval", c.n_eval, what);
  read(j, "fallback_sigma", c.fallback_sigma, what);
  read(j, "min_samples_per_dim", c.min_samples_per_dim, what);
}

Json to_json(const cma::CmaConfig& c) {
  return {{"lambda", c.lambda}, {"c_sigma", c.c_sigma}, {"d_sigma", c.d_sigma}, {"c_c", c.c_c}, {"c_cov", c.c_cov}};
}

cma::CmaConfig cma_from_json(const Json& j, int dim) {
  const char* what = "cma";
  require_object(j, what, {"lambda", "c_sigma", "d_sigma", "c_c", "c_cov"});
  int lambda = 0;
  read(j, "lambda", lambda, what);
  cma::CmaConfig c = cma::CmaConfig::defaults(dim, lambda);
  read(j, "c_sigma", c.c_sigma, what);
  read(j, "d_sigma", c.d_sigma, what);
  read(j, "c_c", c.c_c, what);
  read(j, "c_cov", c.c_cov, what);
  return c;
}

// ---- model ----

Json to_json(const InverseModel& model) {
  Json units = Json::array();
  for (const auto& u : model.units()) {
    units.push_back({{"center", point_json(u.center)},
                     {"offset", vector_json(u.offset)},
                     {"jacobian", matrix_json(u.jacobian)},
                     {"sample_count", u.sample_count}});
  }
  return {{"format", "inverse_model"},
          {"version", kModelFormatVersion},
          {"config", to_json(model.config())},
          {"units", units}};
}

InverseModel model_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "inverse_model")
    throw std::runtime_error("model: not an inverse model document");
  if (j.value("version", -1) != kModelFormatVersion)
    throw std::runtime_error("model: unsupported version " + std::to_string(j.value("version", -1)));
  InverseModelConfig cfg;
  from_json(j.at("config"), cfg);
  InverseModel model(cfg);
  for (const auto& ju : j.at("units")) {
    PrototypeUnit u;
    u.center = point_from_json(ju.at("center"));
    u.offset = vector_from(ju.at("offset"), kMuscleCount, "model.offset");
    u.jacobian = matrix_from(ju.at("jacobian"), kMuscleCount, kTaskDim, "model.jacobian");
    u.sample_count = ju.at("sample_count").get<long>();
    model.mutable_units().push_back(u);
  }
  return model;
}

// ---- goal space ----

Json to_json(const GoalGrid& grid) {
  Json goals = Json::array();
  for (const auto& g : grid.goals) goals.push_back(point_json(g));
  return {{"spacing", grid.spacing},
          {"provenance", std::string(to_string(grid.provenance))},
          {"count", grid.goals.size()},
          {"goals", goals}};
}

GoalGrid grid_from_json(const Json& j) {
  GoalGrid grid;
  grid.spacing = j.at("spacing").get<double>();
  grid.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  for (const auto& g : j.at("goals")) grid.goals.push_back(point_from_json(g));
  return grid;
}

Json to_json(const ConvexHull& hull) {
  Json vertices = Json::array();
  for (const auto& v : hull.vertices) vertices.push_back(point_json(v));
  Json faces = Json::array();
  for (const auto& f : hull.faces)
    faces.push_back({{"vertices", f.vertices}, {"normal", point_json(f.normal)}, {"offset", f.offset}});
  return {{"vertices", vertices}, {"faces", faces}, {"volume", hull.volume()}};
}

ConvexHull hull_from_json(const Json& j) {
  ConvexHull hull;
  for (const auto& v : j.at("vertices")) hull.vertices.push_back(point_from_json(v));
  for (const auto& jf : j.at("faces")) {
    HullFace f;
    f.vertices = jf.at("vertices").get<std::array<int, 3>>();
    f.normal = point_from_json(jf.at("normal"));
    f.offset = jf.at("offset").get<double>();
    hull.faces.push_back(f);
  }
  return hull;
}

// ---- reports ----

Json to_json(const ErrorReport& r) {
  return {{"mean", r.mean},
          {"stddev", r.stddev},
          {"count", r.errors.size()},
          {"bin_width", r.bin_width},
          {"histogram", r.histogram}};
}

Json to_json(const EvalSnapshot& s) {
  return {{"samples", s.samples}, {"units", s.units}, {"plain", to_json(s.plain)}, {"feedback", to_json(s.feedback)}};
}

Json to_json(const cma::GenerationRecord& g) {
  return {{"generation", g.generation}, {"evaluations", g.evaluations}, {"best_f", g.best_f},
          {"best_ever", g.best_ever},   {"sigma", g.sigma},             {"axis_ratio", g.axis_ratio},
          {"min_std", g.min_std},       {"max_std", g.max_std}};
}

Json to_json(const cma::OptimizeResult& r) {
  return {{"best_f", r.best_f},
          {"best_x", vector_json(r.best_x)},
          {"evaluations", r.evaluations},
          {"stop", std::string(cma::to_string(r.stop))},
          {"generations", r.history.size()}};
}

Json to_json(const TrialRecord& t) {
  return {{"start_goal", point_json(t.start_goal)},
          {"feedback_best_err", t.feedback_best_err},
          {"feedback_collected", t.feedback_collected},
          {"sigma0", t.sigma0},
          {"sigma_fallback", t.sigma_fallback},
          {"evaluations", t.evaluations},
          {"best_f", t.best_f},
          {"stop", std::string(cma::to_string(t.stop))},
          {"collected", t.collected},
          {"generations", t.history.size()}};
}

Json to_json(const SetStatistics& s) {
  return {{"mode", s.mode},
          {"source_size", s.source_size},
          {"k_best", s.k_best},
          {"bic", s.bic},
          {"executed", s.errors.size()},
          {"error_mean", s.error_mean},
          {"error_std", s.error_std},
          {"variances", vector_json(s.variances)},
          {"variance_mean", s.variance_mean},
          {"variance_std", s.variance_std}};
}

Json to_json(const AbundanceReport& r) {
  return {{"goal", point_json(r.goal)},
          {"baseline", to_json(r.baseline)},
          {"cma", to_json(r.cma)},
          {"largest_change",
           {{"row", r.change_row}, {"col", r.change_col}, {"baseline", r.change_baseline}, {"cma", r.change_cma}}},
          {"log", r.log}};
}

// ---- CSV ----

void write_points_csv(std::ostream& out, const std::vector<TaskPoint>& points, std::string_view meta) {
  write_meta(out, meta);
  out << "id,x,y,z\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << i;
    put_values(out, points[i]);
    out << '\n';
  }
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, std::string_view column_prefix,
                      std::string_view meta) {
  write_meta(out, meta);
  out << "row";
  put_columns(out, column_prefix, static_cast<int>(m.cols()));
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << r;
    put_values(out, m.row(r));
    out << '\n';
  }
}

void write_session_csv(std::ostream& out, const SessionLog& log, std::string_view meta) {
  write_meta(out, meta);
  out << "t,time_s";
  put_columns(out, "xs", kTaskDim);
  put_columns(out, "x", kTaskDim);
  put_columns(out, "qs", kMuscleCount);
  put_columns(out, "q", kMuscleCount);
  out << ",w,home\n";
  for (const auto& s : log.samples) {
    out << s.t << ',' << format_double(s.time_s);
    put_values(out, s.x_star);
    put_values(out, s.x);
    put_values(out, s.q_star);
    put_values(out, s.q);
    out << ',' << format_double(s.w) << ',' << (s.home ? 1 : 0) << '\n';
  }
}

std::vector<SampleRecord> read_session_csv(std::istream& in) {
  constexpr std::size_t kCells = 2 + 2 * kTaskDim + 2 * kMuscleCount + 2;
  std::vector<SampleRecord> out;
  for (const auto& c : data_rows(in)) {
    if (c.size() != kCells) throw std::runtime_error("session csv: wrong column count");
    SampleRecord s;
    std::size_t k = 0;
    s.t = std::stol(c[k++]);
    s.time_s = parse_double(c[k++]);
    for (int i = 0; i < kTaskDim; ++i) s.x_star[i] = parse_double(c[k++]);
    for (int i = 0; i < kTaskDim; ++i) s.x[i] = parse_double(c[k++]);
    for (int i = 0; i < kMuscleCount; ++i) s.q_star[i] = parse_double(c[k++]);
    for (int i = 0; i < kMuscleCount; ++i) s.q[i] = parse_double(c[k++]);
    s.w = parse_double(c[k++]);
    s.home = c[k++] == "1";
    out.push_back(s);
  }
  return out;
}

void write_postures_csv(std::ostream& out, const PostureSet& set, std::string_view meta) {
  write_meta(out, meta);
  out << "tag";
  put_columns(out, "x", kTaskDim);
  put_columns(out, "q", kMuscleCount);
  out << '\n';
  for (const auto& p : set.postures) {
    out << to_string(p.tag);
    put_values(out, p.x);
    put_values(out, p.q);
    out << '\n';
  }
}

PostureSet read_postures_csv(std::istream& in) {
  PostureSet set;
  for (const auto& c : data_rows(in)) {
    if (c.size() != 1 + kTaskDim + kMuscleCount) throw std::runtime_error("posture csv: wrong column count");
    TaggedPosture p;
    p.tag = posture_tag_from_string(c[0]);
    for (int i = 0; i < kTaskDim; ++i) p.x[i] = parse_double(c[static_cast<std::size_t>(1 + i)]);
    for (int i = 0; i < kMuscleCount; ++i) p.q[i] = parse_double(c[static_cast<std::size_t>(1 + kTaskDim + i)]);
    set.postures.push_back(p);
  }
  return set;
}

void write_history_csv(std::ostream& out, const std::vector<cma::GenerationRecord>& history,
                       std::string_view meta) {
  write_meta(out, meta);
  out << "generation,evaluations,best_f,best_ever,sigma,axis_ratio,min_std,max_std\n";
  for (const auto& g : history) {
    out << g.generation << ',' << g.evaluations << ',' << format_double(g.best_f) << ','
        << format_double(g.best_ever) << ',' << format_double(g.sigma) << ',' << format_double(g.axis_ratio) << ','
        << format_double(g.min_std) << ',' << format_double(g.max_std) << '\n';
  }
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace babbling::io

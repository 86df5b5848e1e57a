#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "babbling/abundance.hpp"
#include "babbling/babble.hpp"
#include "babbling/cmaes.hpp"
#include "babbling/goalspace.hpp"
#include "babbling/invmodel.hpp"
#include "babbling/plant.hpp"

namespace babbling::io {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Shortest text that reads back to the same double ("%.17g").
std::string format_double(double v);

// Configs serialize every field; the *_from_json readers start from the
// object passed in and only overwrite keys that are present, so partial
// documents override defaults. Unknown keys throw ConfigError.
Json to_json(const PlantConfig& c);
void from_json(const Json& j, PlantConfig& c);
Json to_json(const BabbleConfig& c);
void from_json(const Json& j, BabbleConfig& c);
Json to_json(const InverseModelConfig& c);
void from_json(const Json& j, InverseModelConfig& c);
Json to_json(const AbundanceConfig& c);
void from_json(const Json& j, AbundanceConfig& c);

/// Strategy parameters as {lambda, c_sigma, d_sigma, c_c, c_cov}. Reading
/// rebuilds the defaults for `dim` and the given lambda, then applies any
/// explicit rate overrides.
Json to_json(const cma::CmaConfig& c);
cma::CmaConfig cma_from_json(const Json& j, int dim);

/// Versioned document; doubles round-trip bit-exactly.
Json to_json(const InverseModel& model);
InverseModel model_from_json(const Json& j);

Json to_json(const GoalGrid& grid);
GoalGrid grid_from_json(const Json& j);
Json to_json(const ConvexHull& hull);
ConvexHull hull_from_json(const Json& j);

Json to_json(const ErrorReport& r);
Json to_json(const EvalSnapshot& s);
Json to_json(const cma::GenerationRecord& g);
Json to_json(const cma::OptimizeResult& r);
Json to_json(const TrialRecord& t);
Json to_json(const SetStatistics& s);
Json to_json(const AbundanceReport& r);

Json point_json(const TaskPoint& p);
TaskPoint point_from_json(const Json& j);

// CSV. Every file starts with a "# key=value ..." metadata comment line
// when `meta` is non-empty.
void write_points_csv(std::ostream& out, const std::vector<TaskPoint>& points, std::string_view meta);
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, std::string_view column_prefix,
                      std::string_view meta);
void write_session_csv(std::ostream& out, const SessionLog& log, std::string_view meta);
std::vector<SampleRecord> read_session_csv(std::istream& in);
void write_postures_csv(std::ostream& out, const PostureSet& set, std::string_view meta);
PostureSet read_postures_csv(std::istream& in);
void write_history_csv(std::ostream& out, const std::vector<cma::GenerationRecord>& history,
                       std::string_view meta);

/// Writes `text` to `path`, creating parent directories. Throws on failure.
void write_file(const std::filesystem::path& path, std::string_view text);
/// Whole-file read; throws std::runtime_error when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace babbling::io

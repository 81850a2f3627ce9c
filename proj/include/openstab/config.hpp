#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "openstab/json_io.hpp"
#include "openstab/system.hpp"

namespace openstab {

enum class ConfigErrorKind { io, parse, dangling_reference, dimension_mismatch, invalid };

class ConfigError : public std::runtime_error {
 public:
  ConfigError(ConfigErrorKind kind, std::string where, const std::string& what, std::size_t line = 0);

  ConfigErrorKind kind() const { return kind_; }
  /// JSON location ("systems[1].components[0]") or file path for io/parse errors.
  const std::string& where() const { return where_; }
  std::size_t line() const { return line_; }  // 1-based; 0 when unknown

 private:
  ConfigErrorKind kind_;
  std::string where_;
  std::size_t line_;
};

enum class AnalysisKind { simulate, distance, stability, morphism, transfer, sweep };
std::string_view to_string(AnalysisKind k);
std::optional<AnalysisKind> analysis_kind(std::string_view name);

struct SystemDef {
  std::string name;
  std::size_t dim = 0;
  std::vector<std::string> components;
  DomainSpec domain{std::vector<Interval>{Interval{}}};

  friend bool operator==(const SystemDef&, const SystemDef&) = default;
};

struct MapDef {
  std::string name;
  std::optional<std::string> source;  // system whose state space is the map's source
  std::size_t dim = 0;                // source dimension
  std::vector<std::string> components;
  DomainSpec domain{std::vector<Interval>{Interval{}}};

  friend bool operator==(const MapDef&, const MapDef&) = default;
};

struct MorphismDef {
  std::string name;
  std::string map;
  std::string source;
  std::string target;

  friend bool operator==(const MorphismDef&, const MorphismDef&) = default;
};

struct AnalysisDef {
  AnalysisKind kind = AnalysisKind::simulate;
  std::string name;
  Json params;  // the analysis object as written, minus "kind" and "name"

  friend bool operator==(const AnalysisDef&, const AnalysisDef&) = default;
};

/// Parsed and cross-checked project file. Systems and maps are also held in
/// resolved (parsed, compiled) form.
class ProjectConfig {
 public:
  std::vector<SystemDef> systems;
  std::vector<MapDef> maps;
  std::vector<MorphismDef> morphisms;
  std::vector<AnalysisDef> analyses;
  std::string output = "out";
  Json integrator = Json::object();  // overrides of IntegratorConfig fields
  std::optional<std::uint64_t> seed;

  const VectorFieldSpec& system(const std::string& name) const;
  const SmoothMapSpec& map(const std::string& name) const;
  MorphismDecl morphism(const std::string& name) const;

  /// Applies the global overrides and then `local` (an analysis object) to `base`.
  IntegratorConfig integrator_for(const Json& local, IntegratorConfig base = {}) const;

  /// Structural equality of definitions and resolved expressions.
  bool same_as(const ProjectConfig& other) const;

 private:
  friend ProjectConfig parse_config(const std::string& text, const std::string& origin);
  void resolve();

  std::vector<VectorFieldSpec> resolved_systems_;
  std::vector<SmoothMapSpec> resolved_maps_;
};

/// Throws ConfigError.
ProjectConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ProjectConfig load_config(const std::filesystem::path& path);
Json serialize_config(const ProjectConfig& config);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(const std::string& bytes);

/// Writes to a temporary sibling and renames it into place.
void atomic_write(const std::filesystem::path& path, const std::string& content);

// ---------------------------------------------------------------------------

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // overrides the config's "output"
  std::optional<std::uint64_t> seed;             // overrides every analysis seed
  bool parallel = false;
  std::optional<AnalysisKind> only;
};

struct AnalysisOutcome {
  std::string name;
  AnalysisKind kind = AnalysisKind::simulate;
  bool completed = false;
  std::string result;  // verdict or short summary
  std::optional<std::uint64_t> seed;
  std::vector<std::string> artifacts;  // paths relative to the output directory
  std::vector<std::string> warnings;
  std::string error;
  double wall_seconds = 0.0;
};

struct RunReport {
  std::string tool_version;
  std::string config_hash;
  std::vector<AnalysisOutcome> outcomes;

  bool all_completed() const;
  /// Deterministic part: no timings.
  Json to_json() const;
  /// Wall times and timestamp, kept apart from the deterministic report.
  Json metadata_json() const;
};

/// Runs the selected analyses and writes their artifacts plus report.json
/// and metadata.json into the output directory.
RunReport run(const ProjectConfig& config, const RunOptions& options = {}, const std::string& config_hash = {});

struct SweepBundle {
  std::filesystem::path index;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
};

/// One trajectory CSV per initial condition plus index.csv in `dir`.
SweepBundle emit_sweep_plot_data(const VectorFieldSpec& system, const std::vector<State>& initial_conditions,
                                 const IntegratorConfig& config, const std::filesystem::path& dir);

}  // namespace openstab

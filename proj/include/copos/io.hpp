// Run configuration and JSON serialisation of pipeline artefacts.
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "copos/fuzzy.hpp"
#include "copos/model.hpp"
#include "copos/sim.hpp"
#include "copos/synthesis.hpp"

namespace copos::io {

using json = nlohmann::ordered_json;

/// Malformed or inconsistent configuration; `where` is a JSON pointer.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

inline constexpr double kDefaultSamplingPeriod = 1e-5;

struct RunConfig {
  std::string preset = "stepanova-table1";
  ModelParams<double> params = ModelParams<double>::table1();
  Domain<double> domain;
  ExtremaMode mode = ExtremaMode::kEndpoint;
  double T = kDefaultSamplingPeriod;
  SynthesisOptions lp;
  bool dump_lp = false;
  sim::DoseCaps caps;
  double record_interval = 0.01;
  std::vector<sim::Scenario> scenarios;
  std::string out_dir = "out";
  bool timestamp = true;
};

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
RunConfig preset(const std::string& name);

/// Overlays a JSON document on `base` (or on its "preset" when given).
/// Unknown keys and ill-typed values are rejected.
RunConfig parse_config(const json& doc, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Forces M_j <= 0, uses the pure feasibility objective and drops the coupling margin.
void apply_strict_paper(RunConfig& cfg);

json to_json(const Eigen::MatrixXd& M);
json to_json(const RunConfig& cfg);
json to_json(const std::vector<Equilibrium<double>>& eq);
json to_json(const VertexSystem<double>& sys);
json to_json(const AugmentedVertexSystem<double>& sys);
json to_json(const SynthesisResult& res);
json to_json(const sim::OutcomeMetrics& m);

/// Current UTC time, ISO 8601.
std::string utc_timestamp();

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& doc);

}  // namespace copos::io

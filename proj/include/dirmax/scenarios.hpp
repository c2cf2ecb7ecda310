#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dirmax/angular.hpp"

namespace dirmax {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

/// Invalid configuration (unknown key, bad type, bad value, or an eps/field
/// combination that cannot run). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A module-level assertion failed while running a scenario. CLI maps this
/// to exit code 1 and echoes the message.
struct ScenarioFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TauGridSpec {
  std::string kind = "aligned";  // "aligned" | "default"
  int count = 64;
};

/// One experiment: a scenario name plus every knob any scenario reads.
/// Unknown JSON keys are rejected; missing keys take the scenario's defaults
/// (see defaults_for). Serialization round-trips losslessly and the hash is
/// the FNV-1a of the canonical serialization.
struct ExperimentConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";

  std::string field = "rotation";  // catalog label or "csv"
  std::string field_csv;           // lattice CSV path when field == "csv"

  int grid_n = 256;
  int N_t = 512;
  double eps = 0.25;
  double eps_ref = 0.25;  // <= 0 means: largest power of two within epsilon0
  int eps_levels = 2;     // dyadic scales eps_ref * 2^{-k}, k = 0..eps_levels

  TauGridSpec tau;
  std::vector<DecayShape> shapes;

  double delta = 0.5;
  double theta = 0.005;
  int lambda_count = 64;

  std::vector<double> lengths = {0.25, 0.5};
  int center_stride = 16;
  int n_alpha = 4;

  std::vector<double> a_values = {10, 100};
  std::vector<double> Tdelta_values;
  double p = 2;
  int J = 40;

  int n_families = 10;
  int max_members = 64;

  /// Scenario-appropriate starting point (field, scales, shape lists).
  static ExperimentConfig defaults_for(const std::string& scenario);

  /// Parses JSON text. Starts from defaults_for(the resolved scenario): the
  /// file's "scenario" key if present, else `fallback_scenario`; when both
  /// exist they must agree. Unknown keys raise ConfigError naming the key.
  static ExperimentConfig from_json_text(const std::string& text,
                                         const std::string& fallback_scenario);
  static ExperimentConfig from_json_file(const std::string& path,
                                         const std::string& fallback_scenario);

  std::string canonical_json() const;
  std::uint64_t hash() const;
};

struct EmittedFile {
  std::string name;
  std::uint64_t bytes = 0;
  std::uint64_t checksum = 0;  // FNV-1a of the file's bytes
};

struct RunManifest {
  std::string scenario;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string artifact_version{kArtifactVersion};
  std::string generator;
  int workers = 1;
  std::string started_utc;
  std::string finished_utc;
  std::vector<EmittedFile> files;  // everything emitted except the manifest
};

/// Runs config.scenario, writing its outputs plus config.json and
/// manifest.json under config.out_dir (created if missing). Outputs contain
/// no timestamps and no worker counts: identical config + seed gives
/// byte-identical files at any worker count. Throws ConfigError or
/// ScenarioFailure.
RunManifest run_scenario(const ExperimentConfig& config);

/// The five field kinds with their parameter schemas.
std::string catalog_text();
std::string catalog_json();

/// Reshapes a result file into a plot-ready CSV at out_path.
/// kinds: "decay" (decay_sweep.csv -> tau,ratio,envelope, max ratio over the
/// first shape's profiles), "omega" (omega_partition.csv -> row,col,s),
/// "certificate" (certificate.json -> member,contained_in,slack).
void emit_plotdata(const std::string& kind, const std::string& result_path,
                   const std::string& out_path);

}  // namespace dirmax

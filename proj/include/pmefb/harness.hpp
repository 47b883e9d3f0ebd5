#pragma once

// Orchestration of a scenario: assumption audit, the sweep over exponents (one task per
// run), the selected diagnostics, and the files written under <out>/<hash16>/.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmefb/pme_solver.hpp"
#include "pmefb/scenario.hpp"

namespace pmefb {

inline constexpr const char* kArtifactVersion = "1.0.0";

/// "m10", "m2.5", or "inf" for the limit.
std::string run_label(const Exponent& m);

struct AuditRow {
  std::string label;
  AssumptionReport report;
  /// sigma > 0 or the autonomous waiver, with finite norms.
  bool supported = false;
  /// ab_constant, or NaN when unsupported.
  double c0 = 0.0;
  std::string note;
};

/// One row per finite exponent; the limit run has no assumptions of its own.
std::vector<AuditRow> audit_scenario(const Scenario& s);
nlohmann::json audit_to_json(const std::vector<AuditRow>& rows);

struct RunResult {
  std::string label;
  Exponent m;
  std::optional<Trajectory> traj;
  double seconds = 0.0;
  /// Empty on success; the exception text otherwise.
  std::string error;
};

/// Runs every exponent (and the limit when requested) with up to `jobs` threads; 0 means one per
/// hardware thread. Results come back in the order m_values..., limit.
std::vector<RunResult> execute_runs(const Scenario& s, int jobs = 0, std::ostream* log = nullptr);

struct DiagnosticResult {
  std::string name;
  bool pass = false;
  std::string summary;
  nlohmann::json report;
  /// Plot data as CSV text.
  std::string csv;
};

/// Evaluates the selected diagnostics, in the order of `diagnostic_names()`, on completed runs.
std::vector<DiagnosticResult> evaluate_diagnostics(const Scenario& s, const std::vector<RunResult>& runs);

struct FileEntry {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string scenario_name;
  std::string scenario_hash;
  std::string version = kArtifactVersion;
  std::string directory;
  struct Run {
    std::string label;
    double m = 0.0;
    double seconds = 0.0;
    std::size_t snapshots = 0;
    bool ok = false;
    std::string error;
  };
  std::vector<Run> runs;
  struct Outcome {
    std::string name;
    bool pass = false;
    std::string summary;
  };
  std::vector<Outcome> diagnostics;
  double total_seconds = 0.0;
  /// Every file of the directory except manifest.json itself.
  std::vector<FileEntry> files;

  /// All runs succeeded and every selected diagnostic passed.
  bool pass() const;
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

struct RunOptions {
  int jobs = 0;
  std::ostream* log = nullptr;
};

/// Audits, runs, evaluates and writes snapshots, supports, frontier tables, reports and the
/// manifest into <output.dir>/<first 16 hex digits of the hash>. Solver failures are recorded and
/// the manifest is still written. Throws UnsupportedRegime when a finite run fails the audit.
RunManifest run_scenario(const Scenario& s, const RunOptions& opts = {});

/// Reads <dir>/manifest.json.
RunManifest read_manifest(const std::string& dir);

/// Files whose digest or size no longer matches, plus unlisted files and listed files that are missing.
std::vector<std::string> verify_inventory(const std::string& dir, const RunManifest& manifest);

}  // namespace pmefb

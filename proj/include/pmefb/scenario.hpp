#pragma once

// Scenario files: one model template swept over a list of exponents (plus, optionally,
// the incompressible limit), solver settings, the diagnostics to run and where to put
// the results. Files are JSON; every object is parsed strictly, so a misspelt key is an
// error that names the key by its dotted path.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmefb/hele_shaw.hpp"
#include "pmefb/model.hpp"
#include "pmefb/pme_solver.hpp"

namespace pmefb {

struct SolverSettings {
  double cfl_fraction = 0.4;
  double max_dt = 1e-2;
  /// Snapshots are kept at multiples of this spacing and at the horizon.
  double frame_spacing = 0.01;
  double positivity_floor = 0.0;
  int margin_cells = 4;
  bool operator==(const SolverSettings&) const = default;
};

struct LimitSettings {
  double omega = 1.7;
  double tol_residual = 1e-8;
  int max_sweeps = 20000;
  double max_dt = 2e-3;
  int average_steps = 2;
  bool operator==(const LimitSettings&) const = default;
};

/// Names accepted in `diagnostics.selected`.
const std::vector<std::string>& diagnostic_names();

struct DiagnosticSettings {
  std::vector<std::string> selected;
  /// Negative selects 0.1 T.
  double eta0 = -1.0;
  /// Pressure threshold for supports; negative selects max(1e-10, 1e-6 |p|_inf).
  double support_threshold = -1.0;
  bool ab_improved_floor = false;
  std::vector<double> probe_radii_cells{2, 3, 4, 6, 8, 12, 16};
  /// Negative selects the horizon.
  double probe_time = -1.0;
  double probe_slope_max = 1.9;
  std::vector<double> s_ladder{0.02, 0.04, 0.08, 0.16};
  std::vector<double> tau_ladder;
  double expansion_constant = 0.25;
  /// Non-positive selects one cell per frame.
  double time_weight = 0.0;
  double proximity_radius_cells = 4.0;
  /// Bound on the Hausdorff distance between the largest finite m and the limit; negative disables.
  double limit_distance_cells = 4.0;
  std::vector<double> covering_radii_cells{3, 4, 6, 8, 12};
  double covering_time = -1.0;
  double dimension_slack = 0.25;
  std::vector<double> oscillation_radii_cells{1, 2, 4, 8};
  double c_max = 20.0;
  double ordering_r0_cells = 4.0;
  int ordering_checks = 5;
  bool operator==(const DiagnosticSettings&) const = default;

  bool has(const std::string& name) const;
};

struct OutputSettings {
  std::string dir = "out";
  /// Every k-th frame is written as a snapshot binary; 0 writes none.
  int snapshot_stride = 10;
  bool operator==(const OutputSettings&) const = default;
};

struct Scenario {
  std::string name = "scenario";
  /// Template; its exponent is replaced per run.
  ModelSpec model;
  std::vector<double> m_values{2.0};
  bool include_limit = false;
  int cells = 128;
  SolverSettings solver;
  LimitSettings limit;
  DiagnosticSettings diagnostics;
  OutputSettings output;
  std::uint64_t seed = 0;

  bool operator==(const Scenario&) const = default;

  Grid grid() const;
  ModelSpec spec_for(const Exponent& m) const;
  /// 0, frame_spacing, 2 frame_spacing, ... and the horizon.
  std::vector<double> save_times() const;
  SolveConfig solve_config() const;
  LimitConfig limit_config() const;
  double eta0() const;
  /// Sorts m_values and checks every field; throws ConfigError naming the key.
  void validate();
};

Scenario default_scenario(int dim = 2);

nlohmann::json scenario_to_json(const Scenario& s);
/// Strict: unknown keys and wrong types raise ConfigError with the dotted key.
Scenario scenario_from_json(const nlohmann::json& j);
/// Canonical text (sorted keys, two-space indent).
std::string serialize(const Scenario& s);
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// SHA-256 of the canonical text with the output directory removed.
std::string scenario_hash(const Scenario& s);

const std::vector<std::string>& preset_names();
/// Throws ConfigError for names outside the list.
Scenario preset(const std::string& name);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace pmefb

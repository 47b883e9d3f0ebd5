#pragma once

// Explicit conservative finite-volume integrator for the finite-m model
//   d_t rho = div(rho grad p + rho b) + rho f(x, t, p).

#include <optional>
#include <utility>
#include <vector>

#include "pmefb/grid.hpp"
#include "pmefb/model.hpp"

namespace pmefb {

struct SolveConfig {
  double cfl_fraction = 0.4;
  double max_dt = 1e-2;
  /// Sorted times in [0, T] at which snapshots are kept. Empty means {0, T}.
  std::vector<double> save_times;
  double positivity_floor = 0.0;
  /// Cells between the thresholded support and the domain edge before a run aborts.
  int margin_cells = 4;

  void validate(double horizon) const;
};

struct Snapshot {
  double time = 0.0;
  Field rho;
  Field p;
};

/// Per-step record of the complementarity solve (limit runs only).
struct PsorLogEntry {
  double time = 0.0;
  int sweeps = 0;
  double residual = 0.0;
  bool converged = true;
};

struct Trajectory {
  ModelSpec spec;
  Grid grid;
  std::vector<Snapshot> snapshots;
  std::vector<std::pair<double, double>> mass_series;
  std::vector<double> step_log;
  double clamped_mass = 0.0;
  double min_before_clamp = 0.0;
  /// Times at which the thresholded support left the closed ball of the theoretical barrier radius.
  std::vector<double> barrier_excursions;
  /// Limit runs: forward-averaged pressures used for support extraction, one per snapshot.
  std::vector<Field> support_pressure;
  std::vector<PsorLogEntry> psor_log;
  /// Limit runs: |p (1 - rho)|_L1 at each snapshot.
  std::vector<double> complementarity;

  /// Pressure used for support extraction at snapshot k.
  const Field& support_field(std::size_t k) const {
    return support_pressure.empty() ? snapshots.at(k).p : support_pressure.at(k);
  }
  std::vector<double> times() const;
};

/// cfl * min(dx^2 / (2d (D_max + eps)), dx / (|b|_inf + eps), 1 / (|f|_inf + eps)), capped by max_dt,
/// with D_max = (m - 1) max p and eps = 1e-14. Norms of b and f are taken over the support of rho.
double stable_dt(const Field& rho, const ModelSpec& spec, double t, const SolveConfig& cfg);

struct StepResult {
  Field rho;
  /// Mass added by raising undershoots to the positivity floor.
  double clamped_mass = 0.0;
  /// Smallest cell value before clamping.
  double min_before_clamp = 0.0;
};

/// One forward-Euler step. Diffusive face density is the arithmetic mean, advective face density
/// is upwind with respect to b. Throws NumericalFailure on NaN or infinity.
StepResult step(const Field& rho, const ModelSpec& spec, double t, double dt, double positivity_floor = 0.0);

/// Integrates from the initial data of `spec` on `grid`.
Trajectory run(const ModelSpec& spec, const Grid& grid, const SolveConfig& cfg);
/// Integrates from the given density.
Trajectory run(const ModelSpec& spec, const Field& rho0, const SolveConfig& cfg);

/// Default support threshold: max(1e-10, 1e-6 |p|_inf).
double default_threshold(const Field& p);

}  // namespace pmefb

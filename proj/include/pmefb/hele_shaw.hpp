#pragma once

// Incompressible (m = infinity) limit:
//   d_t rho = Lap p + div(rho b) + rho f,   rho <= 1,   p >= 0,   p (1 - rho) = 0,
// advanced by splitting: explicit upwind transport and growth, then a projection onto
// {rho <= 1} through a linear complementarity problem solved by projected SOR.

#include "pmefb/grid.hpp"
#include "pmefb/model.hpp"
#include "pmefb/pme_solver.hpp"

namespace pmefb {

struct LimitState {
  Field rho;
  Field p;
  double time = 0.0;
};

struct PsorConfig {
  double omega = 1.7;
  double tol_residual = 1e-8;
  int max_sweeps = 20000;

  void validate() const;
};

struct LimitConfig {
  SolveConfig solve;
  PsorConfig psor;
  /// Bound on |p (1 - rho)|_L1; negative selects 1e-6 times the domain volume.
  double complementarity_tol = -1.0;
  /// Steps over which p is averaged forward in time for support extraction.
  int average_steps = 2;
};

/// rho* = rho + dt (div(rho b) + rho f(x, t, p)) with upwind advection and the state's pressure in f.
Field transport_growth_step(const LimitState& state, const ModelSpec& spec, double dt);

struct ComplementarityResult {
  LimitState state;
  int sweeps = 0;
  double residual = 0.0;
  bool converged = true;
  /// Mass removed or added by clipping the projected density into [0, 1].
  double clipped_mass = 0.0;
};

/// Finds p >= 0 with rho = rho* + dt Lap_h p + dt min(rho*, 1) (f(p) - f(p_lag)) <= 1 and p > 0 only
/// where rho = 1. `p_lag` is the pressure used in the growth step; it also seeds the iteration.
/// Sources are affine in p, so the lagged correction enters the complementarity problem exactly.
ComplementarityResult complementarity_solve(const Field& rho_star, const ModelSpec& spec, double t,
                                            const PsorConfig& cfg, double dt);
ComplementarityResult complementarity_solve(const Field& rho_star, const ModelSpec& spec, double t,
                                            const PsorConfig& cfg, double dt, const Field& p_lag);

/// |p (1 - rho)|_L1.
double complementarity_residual(const LimitState& state);

/// Time step: cfl * min(dx / |b|_inf, 1 / |f|_inf) capped by max_dt.
double limit_dt(const LimitState& state, const ModelSpec& spec, const SolveConfig& cfg);

/// Alternates transport_growth_step and complementarity_solve. Snapshot pressures are the solver
/// iterates; `support_pressure` holds their forward averages over `average_steps` further steps.
Trajectory run_limit(const ModelSpec& spec, const Grid& grid, const LimitConfig& cfg);
Trajectory run_limit(const ModelSpec& spec, const Field& rho0, const LimitConfig& cfg);

}  // namespace pmefb

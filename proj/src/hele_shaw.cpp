#include "pmefb/hele_shaw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pmefb {

namespace {

struct Box2 {
  int i0, i1, j0, j1;
};

void require_no_nan(const Field& u, double t, const char* what) {
  for (Index k = 0; k < u.size(); ++k)
    if (!std::isfinite(u[k])) {
      std::ostringstream os;
      os << what << ": non-finite value at t=" << t << " cell " << k;
      throw NumericalFailure(os.str(), t, k);
    }
}

}  // namespace

void PsorConfig::validate() const {
  if (!(omega > 0.0 && omega < 2.0)) throw InvalidArgument("PSOR relaxation must lie in (0, 2)");
  if (!(tol_residual > 0.0)) throw InvalidArgument("PSOR tolerance must be positive");
  if (max_sweeps < 1) throw InvalidArgument("PSOR needs at least one sweep");
}

Field transport_growth_step(const LimitState& state, const ModelSpec& spec, double dt) {
  const Field& rho = state.rho;
  const Grid& g = rho.grid;
  const int n = g.cells_per_axis();
  const double t = state.time;
  const FaceField b = sample_faces(g, [&](int a, const Vec& x) { return spec.drift.value(x, t)[a]; });
  FaceField flux(g);
  for (int j = 0; j < g.rows(); ++j)
    for (int i = 0; i <= n; ++i) {
      const double bf = b.axis[0][b.face_index(0, i, j)];
      flux.axis[0][flux.face_index(0, i, j)] = (bf > 0.0 ? rho.at(i, j) : rho.at(i - 1, j)) * bf;
    }
  if (g.dim() == 2)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i < n; ++i) {
        const double bf = b.axis[1][b.face_index(1, i, j)];
        flux.axis[1][flux.face_index(1, i, j)] = (bf > 0.0 ? rho.at(i, j) : rho.at(i, j - 1)) * bf;
      }
  Field out = divergence(flux);
  for (Index k = 0; k < g.size(); ++k) {
    const double growth = rho[k] > 0.0 ? rho[k] * spec.source.value(g.center(k), t, state.p[k]) : 0.0;
    out[k] = std::max(0.0, rho[k] + dt * (out[k] + growth));
  }
  out.time_stamp = t + dt;
  require_no_nan(out, t, "transport_growth_step");
  return out;
}

ComplementarityResult complementarity_solve(const Field& rho_star, const ModelSpec& spec, double t,
                                            const PsorConfig& cfg, double dt) {
  return complementarity_solve(rho_star, spec, t, cfg, dt, Field(rho_star.grid, 0.0, t));
}

ComplementarityResult complementarity_solve(const Field& rho_star, const ModelSpec& spec, double t,
                                            const PsorConfig& cfg, double dt, const Field& p_lag) {
  cfg.validate();
  require_same_grid(rho_star.grid, p_lag.grid, "complementarity_solve");
  const Grid& g = rho_star.grid;
  const int n = g.cells_per_axis();
  const int rows = g.rows();
  for (Index k = 0; k < g.size(); ++k)
    if (rho_star[k] < 0.0) throw InvalidArgument("negative rho* at cell " + std::to_string(k));
  if (!(dt > 0.0)) throw InvalidArgument("complementarity_solve needs dt > 0");

  // w = q + M p with M = -dt Lap_h + diag(dt min(rho*, 1) c_p) and
  // q = 1 - rho* - dt min(rho*, 1) c_p p_lag; rho = 1 - w.
  const double off = dt / (g.dx() * g.dx());
  const double cp = spec.source.cp;
  Eigen::ArrayXd diag(g.size()), q(g.size());
  for (Index k = 0; k < g.size(); ++k) {
    const double react = dt * std::min(rho_star[k], 1.0) * cp;
    diag[k] = 2.0 * g.dim() * off + react;
    q[k] = 1.0 - rho_star[k] - react * p_lag[k];
  }
  if ((diag <= 0.0).any()) throw UnsupportedRegime("complementarity matrix lost diagonal dominance");

  Eigen::ArrayXd p = p_lag.values.max(0.0);
  auto neighbor_sum = [&](int i, int j) {
    double s = 0.0;
    if (i > 0) s += p[g.index(i - 1, j)];
    if (i + 1 < n) s += p[g.index(i + 1, j)];
    if (rows > 1) {
      if (j > 0) s += p[g.index(i, j - 1)];
      if (j + 1 < rows) s += p[g.index(i, j + 1)];
    }
    return s;
  };

  // Active box: cells that are or may become saturated, grown whenever pressure reaches its edge.
  Box2 box{n, -1, rows, -1};
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < n; ++i) {
      const Index k = g.index(i, j);
      if (q[k] < 0.0 || p[k] > 0.0) {
        box.i0 = std::min(box.i0, i);
        box.i1 = std::max(box.i1, i);
        box.j0 = std::min(box.j0, j);
        box.j1 = std::max(box.j1, j);
      }
    }

  ComplementarityResult out;
  out.converged = true;
  if (box.i1 >= 0) {
    auto grow = [&](int k) {
      box.i0 = std::max(0, box.i0 - k);
      box.i1 = std::min(n - 1, box.i1 + k);
      if (rows > 1) {
        box.j0 = std::max(0, box.j0 - k);
        box.j1 = std::min(rows - 1, box.j1 + k);
      }
    };
    grow(2);
    out.converged = false;
    double residual = std::numeric_limits<double>::infinity();
    int sweep = 0;
    while (sweep < cfg.max_sweeps) {
      ++sweep;
      residual = 0.0;
      for (int j = box.j0; j <= box.j1; ++j)
        for (int i = box.i0; i <= box.i1; ++i) {
          const Index k = g.index(i, j);
          const double w = q[k] + diag[k] * p[k] - off * neighbor_sum(i, j);
          residual = std::max(residual, std::abs(std::min(p[k] * diag[k], w)));
          p[k] = std::max(0.0, p[k] - cfg.omega * w / diag[k]);
        }
      // Pressure on a box side that can still grow means the saturated set may extend further.
      bool edge = false;
      for (int j = box.j0; j <= box.j1 && !edge; ++j)
        for (int i = box.i0; i <= box.i1; ++i) {
          const bool open_side = (i == box.i0 && box.i0 > 0) || (i == box.i1 && box.i1 < n - 1) ||
                                 (rows > 1 && ((j == box.j0 && box.j0 > 0) || (j == box.j1 && box.j1 < rows - 1)));
          if (open_side && p[g.index(i, j)] > 0.0) {
            edge = true;
            break;
          }
        }
      if (edge) {
        grow(2);
        continue;
      }
      if (!std::isfinite(residual)) throw NumericalFailure("complementarity_solve diverged", t, -1);
      if (residual < cfg.tol_residual) {
        out.converged = true;
        break;
      }
    }
    out.sweeps = sweep;
    out.residual = residual;
  }

  out.state.p = Field(g, p, t + dt);
  out.state.rho = Field(g, 0.0, t + dt);
  out.state.time = t + dt;
  double clipped = 0.0;
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < n; ++i) {
      const Index k = g.index(i, j);
      double r = 1.0 - (q[k] + diag[k] * p[k] - off * neighbor_sum(i, j));
      const double c = std::clamp(r, 0.0, 1.0);
      clipped += c - r;
      out.state.rho[k] = c;
    }
  out.clipped_mass = clipped * g.cell_volume();
  require_no_nan(out.state.p, t, "complementarity_solve");
  return out;
}

double complementarity_residual(const LimitState& state) {
  return (state.p.values * (1.0 - state.rho.values)).abs().sum() * state.rho.grid.cell_volume();
}

double limit_dt(const LimitState& state, const ModelSpec& spec, const SolveConfig& cfg) {
  const Grid& g = state.rho.grid;
  double bmax = 0.0, fmax = 0.0;
  for (Index k = 0; k < g.size(); ++k) {
    const Vec x = g.center(k);
    bmax = std::max(bmax, spec.drift.value(x, state.time).norm());
    if (state.rho[k] > 0.0) fmax = std::max(fmax, std::abs(spec.source.value(x, state.time, state.p[k])));
  }
  const double eps = 1e-14;
  return std::min(cfg.max_dt, cfg.cfl_fraction * std::min(g.dx() / (bmax + eps), 1.0 / (fmax + eps)));
}

Trajectory run_limit(const ModelSpec& spec, const Grid& grid, const LimitConfig& cfg) {
  return run_limit(spec, initial_density(spec, grid), cfg);
}

Trajectory run_limit(const ModelSpec& spec, const Field& rho0, const LimitConfig& cfg) {
  spec.validate();
  if (!spec.m.is_infinite()) throw InvalidArgument("run_limit needs m = infinity");
  cfg.solve.validate(spec.horizon);
  cfg.psor.validate();
  if (cfg.average_steps < 0) throw InvalidArgument("average_steps must be non-negative");
  const Grid& g = rho0.grid;
  for (Index k = 0; k < g.size(); ++k)
    if (!(rho0[k] >= 0.0 && rho0[k] <= 1.0 + 1e-12))
      throw InvalidArgument("limit initial density must lie in [0, 1] (cell " + std::to_string(k) + ")");
  const int n = g.cells_per_axis();
  const int margin = cfg.solve.margin_cells;

  Trajectory traj;
  traj.spec = spec;
  traj.grid = g;
  std::vector<double> saves = cfg.solve.save_times;
  if (saves.empty()) saves = {0.0, spec.horizon};

  LimitState state{rho0, Field(g, 0.0, 0.0), 0.0};
  state.rho.values = state.rho.values.min(1.0);

  auto log_solve = [&](const ComplementarityResult& r, double time) {
    traj.psor_log.push_back(PsorLogEntry{time, r.sweeps, r.residual, r.converged});
  };
  auto check_margin = [&](double time) {
    int lo = n, hi = -1;
    for (int j = 0; j < g.rows(); ++j)
      for (int i = 0; i < n; ++i)
        if (state.rho[g.index(i, j)] > 1e-10) {
          lo = std::min({lo, i, g.dim() == 2 ? j : lo});
          hi = std::max({hi, i, g.dim() == 2 ? j : hi});
        }
    if (hi >= 0 && (lo < margin || hi > n - 1 - margin)) {
      std::ostringstream os;
      os << "support came within " << margin << " cells of the domain edge at t=" << time << "; enlarge the domain";
      throw MarginViolation(os.str(), time);
    }
  };

  // Initial pressure from one projection of the first transport step.
  {
    const double dt0 = limit_dt(state, spec, cfg.solve);
    const Field star = transport_growth_step(state, spec, dt0);
    const ComplementarityResult r = complementarity_solve(star, spec, 0.0, cfg.psor, dt0, state.p);
    log_solve(r, 0.0);
    state.p = r.state.p;
    state.p.time_stamp = 0.0;
  }
  check_margin(0.0);

  struct Pending {
    std::size_t snapshot;
    Field sum;
    int count;
  };
  std::vector<Pending> pending;
  const double cell_vol = g.cell_volume();
  traj.mass_series.emplace_back(0.0, state.rho.values.sum() * cell_vol);

  auto save = [&]() {
    traj.snapshots.push_back(Snapshot{state.time, state.rho, state.p});
    traj.snapshots.back().rho.time_stamp = state.time;
    traj.snapshots.back().p.time_stamp = state.time;
    traj.complementarity.push_back(complementarity_residual(state));
    traj.support_pressure.emplace_back(g, 0.0, state.time);
    pending.push_back(Pending{traj.snapshots.size() - 1, state.p, 1});
  };
  auto settle = [&]() {
    for (auto it = pending.begin(); it != pending.end();) {
      if (it->count >= cfg.average_steps + 1) {
        Field avg = it->sum;
        avg.values /= it->count;
        avg.time_stamp = traj.snapshots[it->snapshot].time;
        traj.support_pressure[it->snapshot] = std::move(avg);
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
  };
  auto advance = [&](double dt) {
    const Field star = transport_growth_step(state, spec, dt);
    const ComplementarityResult r = complementarity_solve(star, spec, state.time, cfg.psor, dt, state.p);
    log_solve(r, state.time + dt);
    const double t_new = state.time + dt;
    state.rho = r.state.rho;
    state.p = r.state.p;
    state.time = t_new;
    traj.step_log.push_back(dt);
    traj.mass_series.emplace_back(t_new, state.rho.values.sum() * cell_vol);
    for (auto& pd : pending) {
      pd.sum.values += state.p.values;
      ++pd.count;
    }
  };

  double last_dt = cfg.solve.max_dt;
  for (double target : saves) {
    while (state.time < target) {
      double dt = limit_dt(state, spec, cfg.solve);
      bool last = false;
      if (state.time + dt >= target || target - (state.time + dt) < 1e-12 * std::max(1.0, target)) {
        dt = target - state.time;
        last = true;
      }
      if (!last) last_dt = dt;
      advance(dt);
      if (last) state.time = target;
      settle();
      check_margin(state.time);
    }
    save();
    settle();
  }
  // Forward averaging past the last save time.
  while (!pending.empty()) {
    advance(std::min(last_dt, limit_dt(state, spec, cfg.solve)));
    settle();
  }
  return traj;
}

}  // namespace pmefb

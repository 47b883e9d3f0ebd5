#include "pmefb/pme_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pmefb {

namespace {

constexpr double kEps = 1e-14;
// Densities whose density and pressure are both below kTail are flushed to zero. Upwind
// transport otherwise leaves a geometrically decaying tail over the whole grid, which
// defeats the active-box restriction below.
constexpr double kTail = 1e-40;
constexpr double kPFlush = 1e-280;

// Inclusive cell bounds; empty when i0 > i1.
struct Bounds {
  int i0 = 0, i1 = -1, j0 = 0, j1 = -1;
  bool empty() const { return i0 > i1 || j0 > j1; }
};

Bounds positive_bounds(const Grid& g, const Eigen::ArrayXd& v, const Bounds& within, double above = 0.0) {
  Bounds b{std::numeric_limits<int>::max(), -1, std::numeric_limits<int>::max(), -1};
  for (int j = within.j0; j <= within.j1; ++j)
    for (int i = within.i0; i <= within.i1; ++i)
      if (v[g.index(i, j)] > above) {
        b.i0 = std::min(b.i0, i);
        b.i1 = std::max(b.i1, i);
        b.j0 = std::min(b.j0, j);
        b.j1 = std::max(b.j1, j);
      }
  if (b.i1 < 0) return Bounds{};
  return b;
}

Bounds whole(const Grid& g) { return Bounds{0, g.cells_per_axis() - 1, 0, g.rows() - 1}; }

Bounds grow(const Grid& g, const Bounds& b, int k) {
  if (b.empty()) return b;
  const int n = g.cells_per_axis();
  Bounds out{std::max(0, b.i0 - k), std::min(n - 1, b.i1 + k), b.j0, b.j1};
  if (g.dim() == 2) {
    out.j0 = std::max(0, b.j0 - k);
    out.j1 = std::min(n - 1, b.j1 + k);
  }
  return out;
}

double drift_sup(const ModelSpec& spec, const Grid& g, double t) {
  double s = 0.0;
  for (Index k = 0; k < g.size(); ++k) s = std::max(s, spec.drift.value(g.center(k), t).norm());
  return s;
}

// Stepper with the drift on faces and the x-dependent part of the source cached per cell.
// Work is restricted to the bounding box of the positive set grown by one cell, which is
// the only place the explicit update can change values.
class Stepper {
public:
  Stepper(const ModelSpec& spec, const Grid& g)
      : spec_(spec), g_(g), m_(spec.m.value()), flush_(std::min(kTail, density_of(kTail, m_))), base_(g.size()) {
    bface_ = sample_faces(g, [&](int a, const Vec& x) { return spec.drift.value(x, 0.0)[a]; });
    for (Index k = 0; k < g.size(); ++k) base_[k] = spec.source.value(g.center(k), 0.0, 0.0);
    b_inf_ = drift_sup(spec, g, 0.0);
    p_.setZero(g.size());
    next_p_.setZero(g.size());
  }

  // p_ holds pressure_of(rho) on every cell; advance keeps it current.
  void set_state(const Eigen::ArrayXd& rho, double t) {
    bounds_ = positive_bounds(g_, rho, whole(g_));
    pmax_ = fmax_ = 0.0;
    for (Index k = 0; k < rho.size(); ++k) {
      const double p = pressure_of(rho[k], m_);
      p_[k] = p < kPFlush ? 0.0 : p;
      if (rho[k] > 0.0) {
        pmax_ = std::max(pmax_, p_[k]);
        fmax_ = std::max(fmax_, std::abs(source(k, t, p_[k])));
      }
    }
  }

  double source(Index k, double t, double p) const { return base_[k] + spec_.source.ct * t - spec_.source.cp * p; }

  double stable_dt(const SolveConfig& cfg) const { return combine_dt(pmax_, fmax_, cfg); }

  double combine_dt(double pmax, double fmax, const SolveConfig& cfg) const {
    const double dx = g_.dx();
    const double diff = dx * dx / (2.0 * g_.dim() * ((m_ - 1.0) * pmax + kEps));
    const double adv = dx / (b_inf_ + kEps);
    const double grow = 1.0 / (fmax + kEps);
    return std::min(cfg.max_dt, cfg.cfl_fraction * std::min({diff, adv, grow}));
  }

  // Advances rho in place. Returns clamped mass and the minimum before clamping.
  std::pair<double, double> advance(Eigen::ArrayXd& rho, double t, double dt, double floor) {
    if (bounds_.empty()) return {0.0, 0.0};
    const Bounds r = grow(g_, bounds_, 1);
    const int w = r.i1 - r.i0 + 1;
    const int h = r.j1 - r.j0 + 1;
    const double inv_dx = 1.0 / g_.dx();
    const bool two_d = g_.dim() == 2;

    // Cells outside the region are zero, as are ghosts outside the grid.
    auto rho_at = [&](int i, int j) {
      return (i < r.i0 || i > r.i1 || j < r.j0 || j > r.j1) ? 0.0 : rho[g_.index(i, j)];
    };
    auto p_at = [&](int i, int j) {
      return (i < r.i0 || i > r.i1 || j < r.j0 || j > r.j1) ? 0.0 : p_[g_.index(i, j)];
    };
    // rho grad p = grad rho^m, and rho^m = c rho p: the difference of rho^m across the face
    // keeps the flux out of a cell that is still filling at the front independent of its density.
    const double c = (m_ - 1.0) / m_;
    auto flux = [&](double rl, double rr, double pl, double pr, double b) {
      return c * (rr * pr - rl * pl) * inv_dx + (b > 0.0 ? rr : rl) * b;
    };

    fx_.resize(static_cast<Index>(w + 1) * h);
    for (int j = r.j0; j <= r.j1; ++j)
      for (int i = r.i0; i <= r.i1 + 1; ++i)
        fx_[Index(j - r.j0) * (w + 1) + (i - r.i0)] =
            flux(rho_at(i - 1, j), rho_at(i, j), p_at(i - 1, j), p_at(i, j), bface_.axis[0][bface_.face_index(0, i, j)]);
    if (two_d) {
      fy_.resize(static_cast<Index>(w) * (h + 1));
      for (int j = r.j0; j <= r.j1 + 1; ++j)
        for (int i = r.i0; i <= r.i1; ++i)
          fy_[Index(j - r.j0) * w + (i - r.i0)] =
              flux(rho_at(i, j - 1), rho_at(i, j), p_at(i, j - 1), p_at(i, j), bface_.axis[1][bface_.face_index(1, i, j)]);
    }

    double clamped = 0.0;
    double min_before = std::numeric_limits<double>::infinity();
    pmax_ = fmax_ = 0.0;
    const double lambda = dt * inv_dx;
    for (int j = r.j0; j <= r.j1; ++j) {
      for (int i = r.i0; i <= r.i1; ++i) {
        const Index k = g_.index(i, j);
        const Index fi = Index(j - r.j0) * (w + 1) + (i - r.i0);
        double div = fx_[fi + 1] - fx_[fi];
        if (two_d) {
          const Index fj = Index(j - r.j0) * w + (i - r.i0);
          div += fy_[fj + w] - fy_[fj];
        }
        const double old = rho[k];
        double v = old + lambda * div;
        if (old > 0.0) v += dt * old * source(k, t, p_[k]);
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "non-finite density at t=" << t << " cell " << k;
          throw NumericalFailure(os.str(), t, k);
        }
        min_before = std::min(min_before, v);
        if (v < floor) {
          clamped += floor - v;
          v = floor;
        }
        if (v < flush_) v = 0.0;
        rho[k] = v;
        next_p_[k] = 0.0;
        if (v > 0.0) {
          const double p = pressure_of(v, m_);
          next_p_[k] = p < kPFlush ? 0.0 : p;
          pmax_ = std::max(pmax_, next_p_[k]);
          fmax_ = std::max(fmax_, std::abs(source(k, t + dt, next_p_[k])));
        }
      }
    }
    for (int j = r.j0; j <= r.j1; ++j)
      for (int i = r.i0; i <= r.i1; ++i) p_[g_.index(i, j)] = next_p_[g_.index(i, j)];
    bounds_ = positive_bounds(g_, rho, r);
    return {clamped * g_.cell_volume(), min_before};
  }

  const Bounds& bounds() const { return bounds_; }
  const Eigen::ArrayXd& pressure() const { return p_; }
  double pmax() const { return pmax_; }
  double mass(const Eigen::ArrayXd& rho) const {
    double s = 0.0;
    for (int j = bounds_.j0; j <= bounds_.j1; ++j)
      for (int i = bounds_.i0; i <= bounds_.i1; ++i) s += rho[g_.index(i, j)];
    return s * g_.cell_volume();
  }

private:
  const ModelSpec& spec_;
  Grid g_;
  double m_;
  double flush_;
  FaceField bface_;
  Eigen::ArrayXd base_;
  double b_inf_ = 0.0;
  Bounds bounds_;
  Eigen::ArrayXd p_, next_p_, fx_, fy_;
  double pmax_ = 0.0, fmax_ = 0.0;
};

void require_finite_m(const ModelSpec& spec) {
  if (spec.m.is_infinite()) throw InvalidArgument("the finite-m solver needs finite m; use the limit solver");
}

}  // namespace

void SolveConfig::validate(double horizon) const {
  if (!(cfl_fraction > 0.0 && cfl_fraction <= 1.0)) throw InvalidArgument("cfl_fraction must lie in (0, 1]");
  if (!(max_dt > 0.0)) throw InvalidArgument("max_dt must be positive");
  if (!std::is_sorted(save_times.begin(), save_times.end())) throw InvalidArgument("save_times must be sorted");
  for (double s : save_times)
    if (!(s >= 0.0 && s <= horizon)) throw InvalidArgument("save_times must lie in [0, T]");
  if (!(positivity_floor >= 0.0)) throw InvalidArgument("positivity_floor must be non-negative");
  if (margin_cells < 0) throw InvalidArgument("margin_cells must be non-negative");
}

std::vector<double> Trajectory::times() const {
  std::vector<double> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) out.push_back(s.time);
  return out;
}

double default_threshold(const Field& p) { return std::max(1e-10, 1e-6 * linf_norm(p)); }

double stable_dt(const Field& rho, const ModelSpec& spec, double t, const SolveConfig& cfg) {
  require_finite_m(spec);
  const Grid& g = rho.grid;
  double pmax = 0.0, fmax = 0.0;
  for (Index k = 0; k < rho.size(); ++k) {
    if (rho[k] < 0.0) throw InvalidArgument("negative density at cell " + std::to_string(k));
    if (rho[k] == 0.0) continue;
    const double p = pressure_of(rho[k], spec.m.value());
    pmax = std::max(pmax, p);
    fmax = std::max(fmax, std::abs(spec.source.value(g.center(k), t, p)));
  }
  const double dx = g.dx();
  const double diff = dx * dx / (2.0 * g.dim() * ((spec.m.value() - 1.0) * pmax + kEps));
  const double adv = dx / (drift_sup(spec, g, t) + kEps);
  const double grow = 1.0 / (fmax + kEps);
  return std::min(cfg.max_dt, cfg.cfl_fraction * std::min({diff, adv, grow}));
}

StepResult step(const Field& rho, const ModelSpec& spec, double t, double dt, double positivity_floor) {
  require_finite_m(spec);
  for (Index k = 0; k < rho.size(); ++k)
    if (rho[k] < 0.0) throw InvalidArgument("negative density at cell " + std::to_string(k));
  Stepper st(spec, rho.grid);
  StepResult out{rho, 0.0, 0.0};
  st.set_state(out.rho.values, t);
  const auto [clamped, min_before] = st.advance(out.rho.values, t, dt, positivity_floor);
  out.clamped_mass = clamped;
  out.min_before_clamp = min_before;
  out.rho.time_stamp = t + dt;
  return out;
}

Trajectory run(const ModelSpec& spec, const Grid& grid, const SolveConfig& cfg) {
  return run(spec, initial_density(spec, grid), cfg);
}

Trajectory run(const ModelSpec& spec, const Field& rho0, const SolveConfig& cfg) {
  spec.validate();
  require_finite_m(spec);
  cfg.validate(spec.horizon);
  const Grid& g = rho0.grid;
  for (Index k = 0; k < rho0.size(); ++k)
    if (!(rho0[k] >= 0.0) || !std::isfinite(rho0[k]))
      throw InvalidArgument("initial density must be finite and non-negative (cell " + std::to_string(k) + ")");

  Trajectory traj;
  traj.spec = spec;
  traj.grid = g;
  std::vector<double> saves = cfg.save_times;
  if (saves.empty()) saves = spec.horizon > 0.0 ? std::vector<double>{0.0, spec.horizon} : std::vector<double>{0.0};

  const double m = spec.m.value();
  const SupportBarrier barrier = support_barrier(spec, pressure_from_density(rho0, m));
  const int n = g.cells_per_axis();
  const double barrier_slack = 0.5 * g.dx() * std::sqrt(double(g.dim()));

  Eigen::ArrayXd rho = rho0.values;
  Stepper st(spec, g);
  st.set_state(rho, 0.0);
  double t = 0.0;
  bool in_excursion = false;
  traj.mass_series.emplace_back(0.0, st.mass(rho));

  auto check_support = [&](double time) {
    const Bounds& b = st.bounds();
    if (b.empty()) return;
    const double thr = std::max(1e-10, 1e-6 * st.pmax());
    const Eigen::ArrayXd& p = st.pressure();
    const Bounds s = positive_bounds(g, p, b, thr);
    if (s.empty()) return;
    const int k = cfg.margin_cells;
    const bool near_edge = s.i0 < k || s.i1 > n - 1 - k || (g.dim() == 2 && (s.j0 < k || s.j1 > n - 1 - k));
    if (near_edge) {
      std::ostringstream os;
      os << "support came within " << k << " cells of the domain edge at t=" << time << "; enlarge the domain";
      throw MarginViolation(os.str(), time);
    }
    double reach = 0.0;
    for (int j = s.j0; j <= s.j1; ++j)
      for (int i = s.i0; i <= s.i1; ++i)
        if (p[g.index(i, j)] > thr) reach = std::max(reach, g.center(i, j).norm());
    const bool out = reach > barrier.radius(time) + barrier_slack;
    if (out && !in_excursion) traj.barrier_excursions.push_back(time);
    in_excursion = out;
  };

  check_support(0.0);
  traj.min_before_clamp = rho.size() ? rho.minCoeff() : 0.0;
  for (double target : saves) {
    while (t < target) {
      double dt = st.stable_dt(cfg);
      bool last = false;
      if (t + dt >= target || target - (t + dt) < 1e-12 * std::max(1.0, target)) {
        dt = target - t;
        last = true;
      }
      const auto [clamped, min_before] = st.advance(rho, t, dt, cfg.positivity_floor);
      traj.clamped_mass += clamped;
      traj.min_before_clamp = std::min(traj.min_before_clamp, min_before);
      t = last ? target : t + dt;
      traj.step_log.push_back(dt);
      traj.mass_series.emplace_back(t, st.mass(rho));
      check_support(t);
    }
    Field r(g, rho, t);
    Field p = pressure_from_density(r, m);
    traj.snapshots.push_back(Snapshot{t, std::move(r), std::move(p)});
  }
  return traj;
}

}  // namespace pmefb

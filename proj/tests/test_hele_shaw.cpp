#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pmefb/diagnostics.hpp"
#include "pmefb/geometry.hpp"
#include "pmefb/hele_shaw.hpp"

using namespace pmefb;

namespace {

ModelSpec limit_spec(double half = 1.0) {
  ModelSpec s;
  s.m = Exponent::infinite();
  s.domain = Box{make_vec(-half, -half), make_vec(half, half)};
  s.drift = Drift::zero(2);
  s.source = Source::constant(2, 0.0);
  s.init.center = make_vec(0.0, 0.0);
  s.init.kind = InitKind::patch;
  s.init.radius = 0.5;
  s.horizon = 0.1;
  return s;
}

Field disk(const Grid& g, double r, double value = 1.0) {
  return sample(g, [&](const Vec& x) { return x.norm() < r ? value : 0.0; });
}

}  // namespace

TEST_CASE("transport and growth step") {
  ModelSpec s = limit_spec();
  const Grid g = Grid::over(s.domain, 64);
  LimitState st{disk(g, 0.4), Field(g), 0.0};
  const Field same = transport_growth_step(st, s, 0.01);
  CHECK((same.values == st.rho.values).all());

  s.source = Source::constant(2, 1.0);
  const Field grown = transport_growth_step(st, s, 0.01);
  for (Index k = 0; k < g.size(); ++k)
    if (st.rho[k] == 1.0) CHECK(grown[k] == doctest::Approx(1.01));

  s.source = Source::constant(2, 0.0);
  s.drift = Drift::rotation(1.0, make_vec(0.0, 0.0));
  const double dt = 0.4 * g.dx() / 1.0;
  LimitState moving{disk(g, 0.4), Field(g), 0.0};
  for (int i = 0; i < 10; ++i) {
    const Field next = transport_growth_step(moving, s, dt);
    CHECK(std::abs(mass(next) - mass(moving.rho)) <= 1e-10 * mass(moving.rho));
    CHECK(next.values.minCoeff() >= 0.0);
    moving.rho = next;
    moving.time += dt;
  }
}

TEST_CASE("inactive constraint") {
  const ModelSpec s = limit_spec();
  const Grid g = Grid::over(s.domain, 32);
  const Field rho_star = disk(g, 0.5, 0.7);
  const auto res = complementarity_solve(rho_star, s, 0.0, PsorConfig{}, 1e-3);
  CHECK(linf_norm(res.state.p) == 0.0);
  CHECK((res.state.rho.values == rho_star.values).all());
  CHECK(res.converged);
}

TEST_CASE("projection of an overfull interval") {
  ModelSpec s = limit_spec();
  s.domain = Box{make_vec(-1.0), make_vec(1.0)};
  s.drift = Drift::zero(1);
  s.source = Source::constant(1, 0.0);
  s.init.center = make_vec(0.0);
  const Grid g = Grid::over(s.domain, 256);
  const double a = 0.25, c = 0.5;
  const Field rho_star = sample(g, [&](const Vec& x) { return std::abs(x[0]) < a ? 1.0 + c : 0.0; });
  PsorConfig cfg;
  cfg.tol_residual = 1e-12;
  cfg.max_sweeps = 200000;
  const auto res = complementarity_solve(rho_star, s, 0.0, cfg, 1e-3);
  CHECK(res.converged);
  CHECK(std::abs(mass(res.state.rho) - mass(rho_star)) <= 1e-8 * mass(rho_star));
  // Interval oracle: the excess spreads to a saturated interval of half-width a (1 + c).
  const double half = a * (1.0 + c);
  for (Index k = 0; k < g.size(); ++k) {
    const double x = std::abs(g.center(k)[0]);
    CHECK(res.state.rho[k] <= 1.0 + 1e-10);
    if (x < half - 1.5 * g.dx()) CHECK(res.state.rho[k] == doctest::Approx(1.0));
    if (x > half + 1.5 * g.dx()) CHECK(res.state.rho[k] == doctest::Approx(0.0));
  }
}

TEST_CASE("saturated disk with unit source has the torsion profile") {
  ModelSpec s = limit_spec();
  s.source = Source::constant(2, 1.0);
  const Grid g = Grid::over(s.domain, 256);
  const double R = 0.5, dt = 1e-4;
  const Field rho_star = disk(g, R, 1.0 + dt);
  PsorConfig cfg;
  cfg.omega = 1.95;
  cfg.tol_residual = 1e-10;
  cfg.max_sweeps = 100000;
  const auto res = complementarity_solve(rho_star, s, 0.0, cfg, dt);
  CHECK(res.converged);
  double num = 0.0, den = 0.0;
  for (Index k = 0; k < g.size(); ++k) {
    const double r = g.center(k).norm();
    if (r >= R) continue;
    const double exact = (R * R - r * r) / 4.0;
    num += (res.state.p[k] - exact) * (res.state.p[k] - exact);
    den += exact * exact;
  }
  CHECK(std::sqrt(num / den) <= 0.05);
}

TEST_CASE("limit run invariants") {
  ModelSpec s = limit_spec();
  s.source = Source::constant(2, 1.0);
  s.horizon = 0.1;
  const Grid g = Grid::over(s.domain, 64);
  LimitConfig cfg;
  cfg.solve.save_times = {0.0, 0.025, 0.05, 0.075, 0.1};
  const Trajectory tr = run_limit(s, g, cfg);
  REQUIRE(tr.snapshots.size() == 5);
  const double tol_c = 1e-6 * s.domain.volume();
  for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
    CHECK(tr.snapshots[k].rho.values.maxCoeff() <= 1.0 + 1e-10);
    CHECK(tr.snapshots[k].p.values.minCoeff() >= 0.0);
    CHECK(tr.complementarity[k] <= tol_c);
  }
  CHECK(tr.support_pressure.size() == tr.snapshots.size());
  // Saturated patch with f = 1: d(mass)/dt = mass.
  const double rate = std::log(mass(tr.snapshots.back().rho) / mass(tr.snapshots.front().rho)) / s.horizon;
  CHECK(rate == doctest::Approx(1.0).epsilon(0.05));

  const auto mono = streamline_monotonicity(tr, 2.0);
  CHECK(mono.pass);
}

TEST_CASE("limit run at zero time") {
  ModelSpec s = limit_spec();
  const Grid g = Grid::over(s.domain, 32);
  LimitConfig cfg;
  cfg.solve.save_times = {0.0};
  const Trajectory tr = run_limit(s, g, cfg);
  REQUIRE(tr.snapshots.size() == 1);
  CHECK((tr.snapshots[0].rho.values == initial_density(s, g).values).all());
}

TEST_CASE("annulus data: the core stays pressure-free") {
  ModelSpec s = limit_spec(3.0);
  s.init.kind = InitKind::annulus_plus_core;
  s.init.radius = 1.0;
  s.source = Source::logistic(2, 2.0);
  s.horizon = 0.01;
  const Grid g = Grid::over(s.domain, 96);
  LimitConfig cfg;
  cfg.solve.save_times = {0.0, 0.01};
  const Trajectory tr = run_limit(s, g, cfg);
  const Field& p = tr.snapshots.back().p;
  double core = 0.0, ring = 0.0;
  for (Index k = 0; k < g.size(); ++k) {
    const double r = g.center(k).norm();
    if (r < 0.75) core = std::max(core, p[k]);
    if (r > 1.2 && r < 1.8) ring = std::min(ring == 0.0 ? p[k] : ring, p[k]);
  }
  CHECK(core == 0.0);
  CHECK(ring > 0.0);
}

TEST_CASE("finite-m pressures approach the limit") {
  ModelSpec s = limit_spec(1.5);
  s.init.kind = InitKind::smooth_bump;
  s.init.radius = 0.5;
  s.init.gamma0 = 0.5;
  s.source = Source::constant(2, 1.0);
  s.horizon = 0.1;
  const Grid g = Grid::over(s.domain, 48);
  SolveConfig cfg;
  cfg.save_times = {0.0, 0.025, 0.05, 0.075, 0.1};
  LimitConfig lcfg;
  lcfg.solve = cfg;
  const Trajectory lim = run_limit(s, g, lcfg);
  auto spacetime_l1 = [&](const Trajectory& a) {
    double acc = 0.0;
    for (std::size_t k = 1; k < a.snapshots.size(); ++k)
      acc += 0.5 * (l1_distance(a.snapshots[k - 1].p, lim.snapshots[k - 1].p) +
                    l1_distance(a.snapshots[k].p, lim.snapshots[k].p)) *
             (a.snapshots[k].time - a.snapshots[k - 1].time);
    return acc;
  };
  double prev = std::numeric_limits<double>::infinity();
  for (double m : {10.0, 20.0, 40.0, 80.0}) {
    ModelSpec f = s;
    f.m = Exponent(m);
    const double d = spacetime_l1(run(f, g, cfg));
    CHECK(d <= 1.1 * prev);
    prev = d;
  }
}

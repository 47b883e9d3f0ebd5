// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmefb/diagnostics.hpp"
#include "pmefb/geometry.hpp"
#include "pmefb/harness.hpp"
#include "pmefb/hele_shaw.hpp"

using namespace pmefb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Runs are cached per scenario name so criteria can share them.
std::map<std::string, std::vector<RunResult>> g_runs;

const std::vector<RunResult>& runs_of(const std::string& key, const Scenario& s) {
  auto it = g_runs.find(key);
  if (it != g_runs.end()) return it->second;
  auto res = execute_runs(s, 1);
  for (const auto& r : res)
    if (!r.traj) throw std::runtime_error(key + " run " + r.label + " failed: " + r.error);
  return g_runs.emplace(key, std::move(res)).first->second;
}

const Trajectory& run_of(const std::vector<RunResult>& runs, const std::string& label) {
  for (const auto& r : runs)
    if (r.label == label) return *r.traj;
  throw InvalidArgument("no run " + label);
}

std::size_t frame_at(const Trajectory& tr, double t) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < tr.snapshots.size(); ++k)
    if (std::abs(tr.snapshots[k].time - t) < std::abs(tr.snapshots[best].time - t)) best = k;
  return best;
}

Mask support_at(const Trajectory& tr, double t, double threshold = -1.0) {
  const Field& p = tr.support_field(frame_at(tr, t));
  return threshold < 0.0 ? extract_frontier(p).support : extract_frontier(p, threshold).support;
}

Scenario rotation_sweep() {
  Scenario s = preset("rotation_drift");
  s.m_values = {2, 10, 20, 40, 80};
  s.validate();
  return s;
}

// 1. Barenblatt oracle.
void barenblatt_oracle(Outcome& o) {
  auto error_at = [](int cells, double& secs) {
    Scenario s = preset("barenblatt");
    s.cells = cells;
    s.validate();
    const ModelSpec spec = s.spec_for(Exponent(2.0));
    SolveConfig cfg = s.solve_config();
    cfg.save_times = {0.0, spec.horizon};
    const auto t0 = Clock::now();
    const Trajectory tr = run(spec, s.grid(), cfg);
    secs = seconds_since(t0);
    const Barenblatt bb = spec.init.barenblatt(1, 2.0);
    const double t_end = spec.init.barenblatt_time + spec.horizon;
    const Field exact = sample(s.grid(), [&](const Vec& x) { return bb.density(std::abs(x[0]), t_end); });
    return l1_distance(tr.snapshots.back().rho, exact) / l1_norm(exact);
  };
  double s256 = 0.0, s128 = 0.0;
  const double e256 = error_at(256, s256);
  const double e128 = error_at(128, s128);
  o.detail << "relative L1 error " << e256 << " at 256 cells (" << s256 << " s), ratio e128/e256 " << e128 / e256;
  o.require(e256 <= 0.02, "error <= 2%");
  o.require(s256 <= 30.0, "runtime <= 30 s");
  o.require(e128 / e256 >= 1.7, "ratio >= 1.7");
}

// 2. Conservation and comparison with b = f = 0.
void conservation_and_comparison(Outcome& o) {
  const auto t0 = Clock::now();
  double worst_drift = 0.0;
  auto drift_of = [&](const Trajectory& tr) {
    const double m0 = tr.mass_series.front().second;
    for (const auto& [t, m] : tr.mass_series) worst_drift = std::max(worst_drift, std::abs(m - m0) / m0);
  };
  for (const auto& r : runs_of("barenblatt", preset("barenblatt"))) drift_of(*r.traj);

  Scenario s = default_scenario(2);
  s.model.horizon = 0.1;
  s.model.init.radius = 0.5;
  s.model.init.gamma0 = 0.8;
  s.validate();
  double worst_order = -std::numeric_limits<double>::infinity();
  for (double m : {2.0, 10.0, 40.0, 80.0}) {
    const ModelSpec lo = s.spec_for(Exponent(m));
    ModelSpec hi = lo;
    hi.init.gamma0 = 1.0;
    hi.init.radius = 0.6;
    const Trajectory a = run(lo, s.grid(), s.solve_config());
    const Trajectory b = run(hi, s.grid(), s.solve_config());
    drift_of(a);
    drift_of(b);
    for (std::size_t k = 0; k < a.snapshots.size(); ++k)
      worst_order = std::max(worst_order, (a.snapshots[k].rho.values - b.snapshots[k].rho.values).maxCoeff());
  }
  const double secs = seconds_since(t0);
  o.detail << "largest relative mass drift " << worst_drift << ", largest ordering violation "
           << std::max(0.0, worst_order) << " (" << secs << " s)";
  o.require(worst_drift <= 1e-10, "mass drift <= 1e-10");
  o.require(worst_order <= 1e-9, "ordering violation <= 1e-9");
  o.require(secs <= 60.0, "runtime <= 1 min");
}

// 3. Semiconvexity floors.
void semiconvexity(Outcome& o) {
  const std::vector<std::string> labels{"m2", "m10", "m40", "m80"};
  AbOptions standard;
  standard.eta0 = 0.1;
  int rows = 0, failed = 0;
  double worst = std::numeric_limits<double>::infinity();
  auto tally = [&](const AbReport& rep) {
    for (const auto& r : rep.rows) {
      ++rows;
      failed += !r.pass;
      worst = std::min(worst, r.margin + r.tolerance);
    }
  };
  const auto& bb = runs_of("barenblatt", preset("barenblatt"));
  const auto& rot = runs_of("rotation_sweep", rotation_sweep());
  for (const auto& l : labels) {
    tally(ab_check(run_of(bb, l), standard));
    tally(ab_check(run_of(rot, l), standard));
  }
  AbOptions improved;
  improved.eta0 = 0.0;
  improved.improved_floor = true;
  const Scenario r11 = preset("r11_compatible");
  for (const auto& r : runs_of("r11_compatible", r11)) tally(ab_check(*r.traj, improved));
  o.detail << failed << " of " << rows << " rows below the floor; smallest margin + tol " << worst;
  o.require(failed == 0 && rows > 0, "every row above the floor");
}

// 4. Monotonicity along streamlines and pointwise decay.
void streamlines(Outcome& o) {
  int pairs = 0, failures = 0, probes = 0;
  double worst_fraction = 1.0;
  auto check = [&](const std::string& key, const Scenario& s) {
    for (const auto& r : runs_of(key, s)) {
      const auto mono = streamline_monotonicity(*r.traj, 2.0, s.diagnostics.support_threshold);
      pairs += mono.pairs;
      failures += mono.failures;
      if (r.m.is_infinite()) continue;
      DecayOptions d;
      d.t_min = std::max(s.eta0(), s.solver.frame_spacing);
      const auto dec = streamline_decay(*r.traj, d);
      probes += dec.probes;
      worst_fraction = std::min(worst_fraction, dec.fraction);
    }
  };
  check("barenblatt", preset("barenblatt"));
  check("rotation_sweep", rotation_sweep());
  check("r11_compatible", preset("r11_compatible"));
  o.detail << failures << " of " << pairs << " snapshot pairs outside the 2-cell dilation; smallest decay fraction "
           << worst_fraction << " over " << probes << " probes";
  o.require(failures == 0, "monotonicity on every pair");
  o.require(worst_fraction >= 0.95 && probes > 0, "decay at >= 95% of probes");
}

// 5. Hausdorff convergence in m on rotation_drift.
void convergence_in_m(Outcome& o) {
  const auto& runs = runs_of("rotation_sweep", rotation_sweep());
  const double dx = run_of(runs, "m10").grid.dx();
  for (double t : {0.25, 0.5}) {
    std::vector<double> d;
    for (auto [a, b] : {std::pair{"m10", "m20"}, {"m20", "m40"}, {"m40", "m80"}})
      d.push_back(hausdorff_distance(support_at(run_of(runs, a), t), support_at(run_of(runs, b), t)));
    const double lim = hausdorff_distance(support_at(run_of(runs, "m40"), t), support_at(run_of(runs, "inf"), t));
    o.detail << "t=" << t << ": d(10,20) " << d[0] / dx << ", d(20,40) " << d[1] / dx << ", d(40,80) " << d[2] / dx
             << ", d(40,inf) " << lim / dx << " cells; ";
    o.require(d[1] <= d[0] + dx && d[2] <= d[1] + dx, "non-increasing within one cell at t=" + std::to_string(t));
    o.require(lim <= 4.0 * dx, "m=40 vs limit <= 4 cells at t=" + std::to_string(t));
  }
  auto late = [](const Trajectory& tr) {
    std::vector<FrontierRecord> out;
    for (auto& r : frontiers(tr))
      if (r.time >= 0.1 - 1e-12) out.push_back(std::move(r));
    return out;
  };
  const Trajectory& m40 = run_of(runs, "m40");
  const auto a = late(m40), b = late(run_of(runs, "m80"));
  const double w = default_time_weight(m40.grid, m40.times());
  const double st = spacetime_frontier_distance(a, b, w).distance;
  o.detail << "space-time d(40,80) " << st / dx << " cells";
  o.require(st <= 4.0 * dx, "space-time distance <= 4 cells");
}

// 6. One-sided failure on annulus_core.
void annulus_asymmetry(Outcome& o) {
  const Scenario s = preset("annulus_core");
  const auto& runs = runs_of("annulus_core", s);
  const double thr = s.diagnostics.support_threshold;
  const Mask finite = support_at(run_of(runs, "m80"), 0.05, thr);
  const Mask limit = support_at(run_of(runs, "inf"), 0.05, thr);
  const double dx = s.grid().dx();
  const double forward = directed_distance(finite, limit);
  const double backward = directed_distance(limit, finite);
  o.detail << "sup over finite support of d(., limit) " << forward << ", sup over limit support of d(., finite) "
           << backward / dx << " cells";
  o.require(forward >= 0.2, "core separation >= 0.2");
  o.require(backward <= 3.0 * dx, "limit within 3 cells of the finite support");
}

// 7. Weak nondegeneracy of the average pressure.
void nondegeneracy(Outcome& o) {
  const Scenario bs = preset("barenblatt");
  const auto& bb = runs_of("barenblatt", bs);
  const Trajectory& m2 = run_of(bb, "m2");
  const double dx = m2.grid.dx();
  auto ladder = [&](const Scenario& s, double h) {
    std::vector<double> r;
    for (double c : s.diagnostics.probe_radii_cells) r.push_back(c * h);
    return r;
  };
  const std::size_t kb = m2.snapshots.size() - 1;
  const auto tb = avg_pressure_probe(m2, kb, front_points(m2.snapshots[kb].p), ladder(bs, dx));
  o.detail << "Barenblatt slope " << tb.fit.slope << " (R^2 " << tb.fit.r2 << ")";
  o.require(!tb.fit.inconclusive && std::abs(tb.fit.slope - 1.0) <= 0.15, "Barenblatt slope 1 +- 0.15");

  const Scenario rs = rotation_sweep();
  const Trajectory& m20 = run_of(runs_of("rotation_sweep", rs), "m20");
  const std::size_t kr = m20.snapshots.size() - 1;
  const auto tr = avg_pressure_probe(m20, kr, front_points(m20.snapshots[kr].p), ladder(rs, m20.grid.dx()));
  o.detail << ", rotation_drift m=20 slope " << tr.fit.slope << " (R^2 " << tr.fit.r2 << ")";
  o.require(tr.fit.slope <= 1.9 && tr.fit.r2 >= 0.8, "rotation slope <= 1.9 with R^2 >= 0.8");
}

// 8. Ordering of the modified sup- and inf-convolutions.
void convolution_order(Outcome& o) {
  const Scenario s = preset("interior_ball_patch");
  const Grid g = s.grid();
  double worst = 0.0;
  for (double m : s.m_values) {
    const ModelSpec spec = s.spec_for(Exponent(m));
    const AssumptionReport audit = audit_assumptions(spec, g);
    const ConvolutionParams params = convolution_params(audit, 4.0 * g.dx(), spec.horizon);
    std::vector<double> times;
    for (int i = 0; i <= 5; ++i) times.push_back(params.tau0 * i / 5.0);
    const OrderingReport rep = convolution_ordering(spec, g, params, times, s.solve_config(), 1e-6);
    for (std::size_t k = 0; k < rep.times.size(); ++k)
      worst = std::max({worst, rep.lower_violation[k], rep.upper_violation[k]});
    o.detail << "m=" << m << " alpha " << params.alpha << " tau0 " << params.tau0 << "; ";
    o.require(rep.pass, "ordering at m=" + std::to_string(m));
  }
  o.detail << "largest violation " << worst;
  o.require(worst <= 1e-6, "violation <= 1e-6");
}

// 9. Oscillation propagation on every preset.
void oscillation(Outcome& o) {
  double worst = 0.0;
  for (const auto& name : preset_names()) {
    const Scenario s = preset(name);
    const std::string key = name == "rotation_drift" ? "rotation_sweep" : name;
    const auto& runs = runs_of(key, name == "rotation_drift" ? rotation_sweep() : s);
    double c = 0.0;
    for (const auto& r : runs) {
      std::vector<double> radii;
      for (double k : s.diagnostics.oscillation_radii_cells) radii.push_back(k * r.traj->grid.dx());
      const auto fit = propagation_constant(*r.traj, radii, 20.0);
      c = std::max(c, fit.c);
      o.require(fit.pass, name + " " + r.label);
    }
    worst = std::max(worst, c);
    o.detail << name << " " << c << "; ";
  }
  o.detail << "largest C " << worst;
  o.require(worst <= 20.0, "C <= 20");
}

// 10. Covering dimension.
void covering(Outcome& o) {
  const Grid g = Grid::over(Box{make_vec(-2.0, -2.0), make_vec(2.0, 2.0)}, 256);
  const double dx = g.dx();
  const std::vector<double> radii{3 * dx, 4 * dx, 6 * dx, 8 * dx, 12 * dx};
  const Field cone = sample(g, [](const Vec& x) { return std::max(0.0, 1.0 - x.norm()); });
  const auto circle = covering_dimension(extract_frontier(cone), radii);
  o.detail << "circle " << circle.dimension;
  o.require(circle.dimension >= 0.9 && circle.dimension <= 1.15, "circle fit in [0.9, 1.15]");

  Scenario s = preset("rotation_drift");
  s.cells = 256;
  s.m_values = {40};
  s.include_limit = false;
  s.validate();
  const auto& runs = runs_of("rotation_256", s);
  const Trajectory& tr = run_of(runs, "m40");
  const auto fr = extract_frontier(tr.support_field(frame_at(tr, 0.5)));
  const auto est = covering_dimension(fr, radii);
  o.detail << ", rotation_drift m=40 at 256^2: " << est.dimension << " (R^2 " << est.fit.r2 << ")";
  o.require(est.dimension <= 1.25 && est.fit.r2 >= 0.8, "free-boundary dimension <= 1.25 with R^2 >= 0.8");
}

// 11. Determinism of the written reports.
void determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "pmefb_acceptance";
  fs::remove_all(root);
  auto digests = [](const RunManifest& m) {
    std::map<std::string, std::string> out;
    for (const auto& f : m.files)
      if (f.path != "scenario.json") out[f.path] = f.sha256;
    return out;
  };
  std::size_t files = 0;
  for (const std::string name : {"barenblatt", "annulus_core"}) {
    Scenario s = preset(name);
    s.output.dir = (root / "a").string();
    const RunManifest a = run_scenario(s, RunOptions{1, nullptr});
    s.output.dir = (root / "b").string();
    const RunManifest b = run_scenario(s, RunOptions{2, nullptr});
    const auto da = digests(a), db = digests(b);
    files += da.size();
    o.require(da == db && !da.empty(), name + " reports identical");
  }
  o.detail << files << " report and snapshot files compared byte for byte";
  fs::remove_all(root);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"Barenblatt oracle", barenblatt_oracle},
      {"Conservation and comparison", conservation_and_comparison},
      {"Semiconvexity floor", semiconvexity},
      {"Streamline monotonicity and decay", streamlines},
      {"Hausdorff convergence in m", convergence_in_m},
      {"One-sided failure for the limit", annulus_asymmetry},
      {"Weak nondegeneracy", nondegeneracy},
      {"Sup/inf-convolution ordering", convolution_order},
      {"Oscillation propagation", oscillation},
      {"Covering dimension", covering},
      {"Determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

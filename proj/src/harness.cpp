#include "pmefb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "pmefb/diagnostics.hpp"
#include "pmefb/geometry.hpp"
#include "pmefb/hele_shaw.hpp"

namespace pmefb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string fmt_m(double m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", m);
  return buf;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json matrix_json(const Eigen::MatrixXd& a) {
  json rows = json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < a.cols(); ++j) row.push_back(number_or_null(a(i, j)));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number_or_null(x));
  return out;
}

json fit_json(const PowerFit& f) {
  return {{"slope", number_or_null(f.slope)},
          {"intercept", number_or_null(f.intercept)},
          {"r2", number_or_null(f.r2)},
          {"points", f.points},
          {"inconclusive", f.inconclusive}};
}

std::size_t nearest_frame(const Trajectory& traj, double t) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < traj.snapshots.size(); ++k)
    if (std::abs(traj.snapshots[k].time - t) < std::abs(traj.snapshots[best].time - t)) best = k;
  return best;
}

double resolve_threshold(const Scenario& s) { return s.diagnostics.support_threshold; }

std::vector<double> cells_to_lengths(const std::vector<double>& cells, double dx) {
  std::vector<double> out;
  for (double c : cells) out.push_back(c * dx);
  return out;
}

struct FiniteRun {
  const RunResult* run;
  const Trajectory* traj;
};

std::vector<FiniteRun> finite_runs(const std::vector<RunResult>& runs) {
  std::vector<FiniteRun> out;
  for (const auto& r : runs)
    if (r.traj && !r.m.is_infinite()) out.push_back({&r, &*r.traj});
  return out;
}

// --- one function per diagnostic -------------------------------------------------

DiagnosticResult diag_ab(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"ab", true, "", json::object(), "m,time,min_q,floor,margin,tolerance,pass\n"};
  int rows = 0, failed = 0;
  for (const auto& fr : finite_runs(runs)) {
    AbOptions o;
    o.eta0 = s.diagnostics.ab_improved_floor && s.diagnostics.eta0 < 0.0 ? 0.0 : s.eta0();
    o.improved_floor = s.diagnostics.ab_improved_floor;
    try {
      const AbReport r = ab_check(*fr.traj, o);
      json jr = {{"eta0", r.eta0}, {"c0", r.c0}, {"p_max", r.p_max}, {"improved_floor", r.improved_floor},
                 {"pass", r.pass}, {"rows", json::array()}};
      for (const auto& row : r.rows) {
        jr["rows"].push_back({{"time", row.time},
                              {"min_q", number_or_null(row.min_q)},
                              {"floor", row.floor},
                              {"margin", number_or_null(row.margin)},
                              {"tolerance", row.tolerance},
                              {"argmin", row.argmin},
                              {"interior_cells", row.interior_cells},
                              {"pass", row.pass}});
        d.csv += fmt_m(fr.traj->spec.m.value()) + "," + fmt(row.time) + "," + fmt(row.min_q) + "," + fmt(row.floor) +
                 "," + fmt(row.margin) + "," + fmt(row.tolerance) + "," + (row.pass ? "1" : "0") + "\n";
        ++rows;
        failed += !row.pass;
      }
      d.pass = d.pass && r.pass;
      d.report[fr.run->label] = jr;
    } catch (const UnsupportedRegime& e) {
      d.pass = false;
      d.report[fr.run->label] = {{"error", e.what()}};
    }
  }
  d.summary = std::to_string(rows - failed) + "/" + std::to_string(rows) + " snapshot rows above the floor";
  return d;
}

DiagnosticResult diag_monotonicity(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"monotonicity", true, "", json::object(), "run,pairs,failures,worst_excess\n"};
  int pairs = 0, failures = 0;
  for (const auto& r : runs) {
    if (!r.traj) continue;
    const auto rep = streamline_monotonicity(*r.traj, 2.0, resolve_threshold(s));
    d.report[r.label] = {{"pairs", rep.pairs},
                         {"failures", rep.failures},
                         {"worst_excess", rep.worst_excess},
                         {"worst_t0", number_or_null(rep.worst_t0)},
                         {"worst_t1", number_or_null(rep.worst_t1)},
                         {"pass", rep.pass}};
    d.csv += r.label + "," + std::to_string(rep.pairs) + "," + std::to_string(rep.failures) + "," +
             std::to_string(rep.worst_excess) + "\n";
    pairs += rep.pairs;
    failures += rep.failures;
    d.pass = d.pass && rep.pass;
  }
  d.summary = std::to_string(failures) + " of " + std::to_string(pairs) + " snapshot pairs outside the 2-cell dilation";
  return d;
}

DiagnosticResult diag_decay(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"decay", true, "", json::object(), "m,probes,passed,fraction,worst_shortfall\n"};
  double worst = 1.0;
  for (const auto& fr : finite_runs(runs)) {
    DecayOptions o;
    o.t_min = s.eta0() > 0.0 ? s.eta0() : 0.1 * s.model.horizon;
    try {
      const auto rep = streamline_decay(*fr.traj, o);
      d.report[fr.run->label] = {{"c0", rep.c0},
                                 {"probes", rep.probes},
                                 {"passed", rep.passed},
                                 {"fraction", rep.fraction},
                                 {"worst_shortfall", rep.worst_shortfall},
                                 {"pass", rep.pass}};
      d.csv += fmt_m(fr.traj->spec.m.value()) + "," + std::to_string(rep.probes) + "," + std::to_string(rep.passed) +
               "," + fmt(rep.fraction) + "," + fmt(rep.worst_shortfall) + "\n";
      worst = std::min(worst, rep.fraction);
      d.pass = d.pass && rep.pass;
    } catch (const UnsupportedRegime& e) {
      d.pass = false;
      d.report[fr.run->label] = {{"error", e.what()}};
    }
  }
  d.summary = "smallest fraction of probes within the decay bound: " + fmt(worst);
  return d;
}

AvgPressureTable probe_at(const Scenario& s, const Trajectory& traj, double t) {
  const std::size_t k = nearest_frame(traj, t < 0.0 ? s.model.horizon : t);
  const Field& p = traj.snapshots[k].p;
  return avg_pressure_probe(traj, k, front_points(p), cells_to_lengths(s.diagnostics.probe_radii_cells, traj.grid.dx()),
                            resolve_threshold(s));
}

DiagnosticResult diag_avg_pressure(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"avg_pressure", true, "", json::object(), "m,time,radius,pooled_average\n"};
  std::string slopes;
  for (const auto& fr : finite_runs(runs)) {
    const auto tab = probe_at(s, *fr.traj, s.diagnostics.probe_time);
    std::map<std::string, int> branches;
    for (const auto& pr : tab.probes)
      if (!pr.skipped) ++branches[to_string(pr.branch)];
    const bool ok = tab.fit.inconclusive || tab.fit.slope < s.diagnostics.probe_slope_max;
    d.report[fr.run->label] = {{"time", tab.time},
                               {"radii", tab.radii},
                               {"pooled", vector_json(tab.pooled)},
                               {"fit", fit_json(tab.fit)},
                               {"probes", tab.probes.size()},
                               {"skipped", tab.skipped},
                               {"branches", branches},
                               {"pass", ok}};
    for (std::size_t i = 0; i < tab.radii.size(); ++i)
      d.csv += fmt_m(fr.traj->spec.m.value()) + "," + fmt(tab.time) + "," + fmt(tab.radii[i]) + "," +
               fmt(tab.pooled[i]) + "\n";
    slopes += (slopes.empty() ? "" : ", ") + fr.run->label + " " + fmt(tab.fit.slope);
    d.pass = d.pass && ok;
  }
  d.summary = "log-log slopes of the average pressure: " + slopes;
  return d;
}

DiagnosticResult diag_expansion(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"expansion", true, "", json::object(), "m,kind,s,value\n"};
  std::string gammas;
  for (const auto& fr : finite_runs(runs)) {
    ExpansionOptions o;
    // Backward distances need earlier frames, so eta0 = 0 (improved floor presets) is raised.
    o.eta0 = std::max(s.eta0(), 2.0 * s.solver.frame_spacing);
    o.s_ladder = s.diagnostics.s_ladder;
    o.tau_ladder = s.diagnostics.tau_ladder;
    o.expansion_constant = s.diagnostics.expansion_constant;
    o.threshold = resolve_threshold(s);
    const auto rep = strict_expansion_measure(*fr.traj, o);
    json back = json::array(), fwd = json::array(), init = json::array();
    const std::string m = fmt_m(fr.traj->spec.m.value());
    for (const auto& r : rep.backward) {
      back.push_back({{"s", r.s},
                      {"samples", r.samples},
                      {"median", number_or_null(r.median)},
                      {"min", number_or_null(r.min)},
                      {"positive_fraction", r.positive_fraction}});
      d.csv += m + ",backward_median," + fmt(r.s) + "," + fmt(r.median) + "\n";
    }
    for (const auto& r : rep.forward) {
      fwd.push_back({{"s", r.s}, {"growth", r.growth}});
      d.csv += m + ",forward_growth," + fmt(r.s) + "," + fmt(r.growth) + "\n";
    }
    for (const auto& r : rep.initial) {
      init.push_back({{"tau", r.tau}, {"r_tau", r.r_tau}, {"required", r.required}, {"pass", r.pass}});
      d.csv += m + ",initial_r_tau," + fmt(r.tau) + "," + fmt(r.r_tau) + "\n";
    }
    const bool ok = rep.initial_pass && (rep.fit.inconclusive || rep.gamma > 0.0);
    d.report[fr.run->label] = {{"eta0", rep.eta0},
                               {"probes", rep.probes},
                               {"backward", back},
                               {"fit", fit_json(rep.fit)},
                               {"gamma", number_or_null(rep.gamma)},
                               {"c_star", number_or_null(rep.c_star)},
                               {"forward", fwd},
                               {"speed_cap", rep.speed_cap},
                               {"initial", init},
                               {"initial_pass", rep.initial_pass},
                               {"pass", ok}};
    gammas += (gammas.empty() ? "" : ", ") + fr.run->label + " " + fmt(rep.gamma);
    d.pass = d.pass && ok;
  }
  d.summary = "backward expansion exponents: " + gammas;
  return d;
}

DiagnosticResult diag_convergence(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"convergence", true, "", json::object(), ""};
  std::vector<const Trajectory*> trajs;
  for (const auto& r : runs)
    if (r.traj) trajs.push_back(&*r.traj);
  if (trajs.size() < 2) {
    d.pass = false;
    d.summary = "needs at least two completed runs";
    return d;
  }
  ConvergenceOptions o;
  o.eta0 = s.eta0();
  o.time_weight = s.diagnostics.time_weight;
  o.proximity_radius = s.diagnostics.proximity_radius_cells * trajs.front()->grid.dx();
  o.threshold = resolve_threshold(s);
  const auto tab = convergence_report(trajs, o);
  const double dx = trajs.front()->grid.dx();
  const std::size_t n = trajs.size();
  const bool has_limit = trajs.back()->spec.m.is_infinite();
  const std::size_t finite = has_limit ? n - 1 : n;

  // Consecutive distances may not grow by more than a cell, and the largest finite m stays close
  // to the limit.
  int violations = 0;
  double worst_limit = 0.0;
  for (std::size_t k = 0; k < tab.times.size(); ++k) {
    if (tab.times[k] < o.eta0 - 1e-12) continue;
    const auto& h = tab.hausdorff[k];
    for (std::size_t i = 0; i + 2 < finite; ++i)
      if (h(i + 1, i + 2) > h(i, i + 1) + dx + 1e-12) ++violations;
    if (has_limit && finite > 0) worst_limit = std::max(worst_limit, h(finite - 1, n - 1));
  }
  const bool limit_ok = !has_limit || finite == 0 || s.diagnostics.limit_distance_cells < 0.0 ||
                        worst_limit <= s.diagnostics.limit_distance_cells * dx + 1e-12;
  d.pass = violations == 0 && limit_ok;

  json prox = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < n; ++j)
      row.push_back({{"to_support", tab.proximity[i][j].to_support},
                     {"to_complement", tab.proximity[i][j].to_complement},
                     {"points", tab.proximity[i][j].points}});
    prox.push_back(row);
  }
  json haus = json::array();
  for (const auto& h : tab.hausdorff) haus.push_back(matrix_json(h));

  // Directed distances at the last frame, for the one-sided comparison with the limit.
  const auto last = [&](const Trajectory* t) {
    const std::size_t k = t->snapshots.size() - 1;
    return s.diagnostics.support_threshold < 0.0 ? extract_frontier(t->support_field(k))
                                                 : extract_frontier(t->support_field(k), s.diagnostics.support_threshold);
  };
  std::vector<Mask> finals;
  for (const Trajectory* t : trajs) finals.push_back(last(t).support);
  Eigen::MatrixXd directed = Eigen::MatrixXd::Zero(Index(n), Index(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      directed(i, j) = i == j || finals[i].empty() || finals[j].empty() ? (i == j ? 0.0 : kNaN)
                                                                          : directed_distance(finals[i], finals[j]);

  d.report = {{"labels", tab.labels},
              {"times", tab.times},
              {"beta", matrix_json(tab.beta)},
              {"gamma", matrix_json(tab.gamma)},
              {"beta_tail", vector_json(tab.beta_tail)},
              {"gamma_tail", vector_json(tab.gamma_tail)},
              {"gamma_prime_tail", vector_json(tab.gamma_prime_tail)},
              {"hausdorff", haus},
              {"spacetime", matrix_json(tab.spacetime)},
              {"containment_cells", matrix_json(tab.containment_cells)},
              {"early_containment_cells", matrix_json(tab.early_containment_cells)},
              {"directed_final", matrix_json(directed)},
              {"proximity", prox},
              {"proximity_radius", tab.proximity_radius},
              {"time_weight", tab.time_weight},
              {"monotone_violations", violations},
              {"largest_finite_to_limit", worst_limit},
              {"pass", d.pass}};

  d.csv = "time";
  for (std::size_t i = 0; i + 1 < n; ++i) d.csv += ",dH_" + tab.labels[i] + "_" + tab.labels[i + 1];
  d.csv += "\n";
  for (std::size_t k = 0; k < tab.times.size(); ++k) {
    d.csv += fmt(tab.times[k]);
    for (std::size_t i = 0; i + 1 < n; ++i) d.csv += "," + fmt(tab.hausdorff[k](i, i + 1));
    d.csv += "\n";
  }
  d.summary = std::to_string(violations) + " growth violations of consecutive distances; largest finite m to limit " +
              fmt(worst_limit / dx) + " cells";
  return d;
}

DiagnosticResult diag_covering(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"covering", true, "", json::object(), "m,radius,count\n"};
  std::string dims;
  for (const auto& fr : finite_runs(runs)) {
    const Trajectory& traj = *fr.traj;
    const double dx = traj.grid.dx();
    const double t = s.diagnostics.covering_time < 0.0 ? s.model.horizon : s.diagnostics.covering_time;
    const std::size_t k = nearest_frame(traj, t);
    const Field& p = traj.support_field(k);
    const FrontierRecord rec = s.diagnostics.support_threshold < 0.0
                                   ? extract_frontier(p)
                                   : extract_frontier(p, s.diagnostics.support_threshold);
    // Exponents for the bound: oscillation decay of the density and average-pressure growth,
    // with the conservative values when a fit is inconclusive.
    const PowerFit osc =
        oscillation_exponent(traj.snapshots[k].rho, cells_to_lengths(s.diagnostics.oscillation_radii_cells, dx));
    const double sigma_m = osc.inconclusive ? 0.0 : std::clamp(osc.slope, 0.0, 1.0);
    const auto tab = probe_at(s, traj, traj.snapshots[k].time);
    const double mu = tab.fit.inconclusive ? 2.0 : tab.fit.slope;
    const int dim = traj.grid.dim();
    const double bound = dimension_bound(dim, sigma_m, mu, traj.spec.m.value());
    const auto est = covering_dimension(rec, cells_to_lengths(s.diagnostics.covering_radii_cells, dx), bound);
    const bool ok = !est.fit.inconclusive &&
                    est.dimension <= std::max(bound, double(dim - 1)) + s.diagnostics.dimension_slack;
    std::vector<double> counts(est.counts.begin(), est.counts.end());
    d.report[fr.run->label] = {{"time", est.time},
                               {"radii", est.radii},
                               {"counts", counts},
                               {"fit", fit_json(est.fit)},
                               {"dimension", number_or_null(est.dimension)},
                               {"sigma_m", sigma_m},
                               {"mu", mu},
                               {"bound", number_or_null(bound)},
                               {"frontier_cells", est.frontier_cells},
                               {"monotone", est.monotone},
                               {"pass", ok}};
    for (std::size_t i = 0; i < est.radii.size(); ++i)
      d.csv += fmt_m(traj.spec.m.value()) + "," + fmt(est.radii[i]) + "," + std::to_string(est.counts[i]) + "\n";
    dims += (dims.empty() ? "" : ", ") + fr.run->label + " " + fmt(est.dimension);
    d.pass = d.pass && ok;
  }
  d.summary = "fitted free-boundary dimensions: " + dims;
  return d;
}

DiagnosticResult diag_oscillation(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"oscillation", true, "", json::object(), "run,time,radius,osc\n"};
  std::string cs;
  for (const auto& r : runs) {
    if (!r.traj) continue;
    const auto fit = propagation_constant(
        *r.traj, cells_to_lengths(s.diagnostics.oscillation_radii_cells, r.traj->grid.dx()), s.diagnostics.c_max);
    d.report[r.label] = {{"times", fit.times},
                         {"radii", fit.radii},
                         {"osc", matrix_json(fit.osc)},
                         {"c", number_or_null(fit.c)},
                         {"pass", fit.pass}};
    for (Index k = 0; k < fit.osc.rows(); ++k)
      for (Index j = 0; j < fit.osc.cols(); ++j)
        d.csv += r.label + "," + fmt(fit.times[k]) + "," + fmt(fit.radii[j]) + "," + fmt(fit.osc(k, j)) + "\n";
    cs += (cs.empty() ? "" : ", ") + r.label + " " + fmt(fit.c);
    d.pass = d.pass && fit.pass;
  }
  d.summary = "propagation constants: " + cs;
  return d;
}

DiagnosticResult diag_ordering(const Scenario& s, const std::vector<RunResult>& runs) {
  DiagnosticResult d{"ordering", true, "", json::object(), "m,time,lower_violation,upper_violation\n"};
  double worst = 0.0;
  const Grid g = s.grid();
  for (const auto& fr : finite_runs(runs)) {
    const ModelSpec spec = fr.traj->spec;
    try {
      const AssumptionReport audit = audit_assumptions(spec, g);
      const auto params = convolution_params(audit, s.diagnostics.ordering_r0_cells * g.dx(), s.model.horizon);
      std::vector<double> times;
      for (int i = 1; i <= s.diagnostics.ordering_checks; ++i)
        times.push_back(params.tau0 * double(i) / s.diagnostics.ordering_checks);
      const auto rep = convolution_ordering(spec, g, params, times, s.solve_config());
      d.report[fr.run->label] = {{"r0", params.r0},
                                 {"rate", params.rate},
                                 {"alpha", params.alpha},
                                 {"tau0", params.tau0},
                                 {"times", rep.times},
                                 {"lower_violation", rep.lower_violation},
                                 {"upper_violation", rep.upper_violation},
                                 {"tolerance", rep.tolerance},
                                 {"pass", rep.pass}};
      for (std::size_t i = 0; i < rep.times.size(); ++i) {
        d.csv += fmt_m(spec.m.value()) + "," + fmt(rep.times[i]) + "," + fmt(rep.lower_violation[i]) + "," +
                 fmt(rep.upper_violation[i]) + "\n";
        worst = std::max({worst, rep.lower_violation[i], rep.upper_violation[i]});
      }
      d.pass = d.pass && rep.pass;
    } catch (const UnsupportedRegime& e) {
      d.pass = false;
      d.report[fr.run->label] = {{"error", e.what()}};
    }
  }
  d.summary = "largest ordering violation " + fmt(worst);
  return d;
}

// --- files --------------------------------------------------------------------

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_run_files(const Scenario& s, const RunResult& r, const fs::path& dir) {
  if (!r.traj) return;
  const Trajectory& traj = *r.traj;
  const fs::path run_dir = dir / "runs" / r.label;
  if (s.output.snapshot_stride > 0) {
    fs::create_directories(run_dir);
    const std::size_t last = traj.snapshots.size() - 1;
    for (std::size_t k = 0; k <= last; ++k) {
      if (k % std::size_t(s.output.snapshot_stride) != 0 && k != last) continue;
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_%04zu.bin", k);
      write_snapshot((run_dir / ("rho" + std::string(suffix))).string(), traj.snapshots[k].rho, "rho");
      write_snapshot((run_dir / ("p" + std::string(suffix))).string(), traj.snapshots[k].p, "p");
    }
  }
  const auto rec = frontiers(traj, s.diagnostics.support_threshold);
  json supports = json::array();
  std::string csv = "time,support_cells,boundary_cells,support_area,mass\n";
  for (std::size_t k = 0; k < rec.size(); ++k) {
    supports.push_back({{"time", rec[k].time}, {"mask", json::parse(mask_to_rle_json(rec[k].support))}});
    const double mass = traj.snapshots[k].rho.values.sum() * traj.grid.cell_volume();
    csv += fmt(rec[k].time) + "," + std::to_string(rec[k].support.count()) + "," +
           std::to_string(rec[k].boundary.count()) + "," +
           fmt(double(rec[k].support.count()) * traj.grid.cell_volume()) + "," + fmt(mass) + "\n";
  }
  write_text(run_dir / "supports.json",
             json{{"cells_per_axis", traj.grid.cells_per_axis()}, {"dim", traj.grid.dim()}, {"frames", supports}}.dump() +
                 "\n");
  write_text(run_dir / "frontier.csv", csv);
}

std::vector<FileEntry> inventory(const fs::path& dir) {
  std::vector<FileEntry> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    const std::string bytes = read_bytes(e.path());
    out.push_back({rel, sha256_hex(bytes), bytes.size()});
  }
  std::sort(out.begin(), out.end(), [](const FileEntry& a, const FileEntry& b) { return a.path < b.path; });
  return out;
}

}  // namespace

// -------------------------------------------------------------------------------------

std::string run_label(const Exponent& m) { return m.is_infinite() ? "inf" : "m" + fmt_m(m.value()); }

std::vector<AuditRow> audit_scenario(const Scenario& s) {
  const Grid g = s.grid();
  std::vector<AuditRow> rows;
  for (double m : s.m_values) {
    AuditRow row;
    row.label = run_label(Exponent(m));
    const ModelSpec spec = s.spec_for(Exponent(m));
    row.report = audit_assumptions(spec, g);
    const auto& f = row.report.satisfied;
    row.supported = f.norms_finite && (f.cond || f.autonomous_waiver);
    row.c0 = kNaN;
    if (row.supported) {
      try {
        row.c0 = ab_constant(spec, row.report.p_max);
      } catch (const UnsupportedRegime& e) {
        row.supported = false;
        row.note = e.what();
      }
    } else {
      row.note = f.norms_finite ? "sigma <= 0 and no waiver applies" : "drift or source not finite on the sample";
    }
    if (row.supported && !f.cond) row.note = "sigma check waived: b = 0 and f = f(p) >= 0 with f_p <= 0";
    rows.push_back(row);
  }
  return rows;
}

json audit_to_json(const std::vector<AuditRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    const auto& a = r.report;
    out.push_back({{"run", r.label},
                   {"supported", r.supported},
                   {"note", r.note},
                   {"c0", number_or_null(r.c0)},
                   {"sigma", a.sigma},
                   {"sigma_tilde", a.sigma_tilde},
                   {"fp_sup", a.fp_sup},
                   {"r11_margin", number_or_null(a.r11_margin)},
                   {"p_max", a.p_max},
                   {"flags",
                    {{"norms_finite", a.satisfied.norms_finite},
                     {"cond", a.satisfied.cond},
                     {"h2", a.satisfied.h2},
                     {"r11", a.satisfied.r11},
                     {"autonomous_waiver", a.satisfied.autonomous_waiver}}},
                   {"norms",
                    {{"b_inf", a.norms.b_inf},
                     {"db_inf", a.norms.db_inf},
                     {"divb_inf", a.norms.divb_inf},
                     {"b_c21", a.norms.b_c21},
                     {"f_c1", a.norms.f_c1},
                     {"f_c1_xt", a.norms.f_c1_xt},
                     {"f0_inf", a.norms.f0_inf},
                     {"fplus_inf", a.norms.fplus_inf},
                     {"f_inf", a.norms.f_inf},
                     {"fp_inf", a.norms.fp_inf}}}});
  }
  return out;
}

std::vector<RunResult> execute_runs(const Scenario& s, int jobs, std::ostream* log) {
  std::vector<RunResult> results;
  for (double m : s.m_values) results.push_back({run_label(Exponent(m)), Exponent(m), std::nullopt, 0.0, ""});
  if (s.include_limit) results.push_back({"inf", Exponent::infinite(), std::nullopt, 0.0, ""});

  const Grid g = s.grid();
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < results.size(); i = next++) {
      RunResult& r = results[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        const ModelSpec spec = s.spec_for(r.m);
        r.traj = r.m.is_infinite() ? run_limit(spec, g, s.limit_config()) : run(spec, g, s.solve_config());
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << "  " << r.label << (r.error.empty() ? " done" : " FAILED: " + r.error) << " (" << fmt(r.seconds)
             << " s)\n";
      }
    }
  };
  unsigned n = jobs > 0 ? unsigned(jobs) : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, unsigned(results.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

std::vector<DiagnosticResult> evaluate_diagnostics(const Scenario& s, const std::vector<RunResult>& runs) {
  using Fn = DiagnosticResult (*)(const Scenario&, const std::vector<RunResult>&);
  static const std::map<std::string, Fn> table{
      {"ab", diag_ab},           {"monotonicity", diag_monotonicity}, {"decay", diag_decay},
      {"avg_pressure", diag_avg_pressure}, {"expansion", diag_expansion}, {"convergence", diag_convergence},
      {"covering", diag_covering}, {"oscillation", diag_oscillation}, {"ordering", diag_ordering}};
  std::vector<DiagnosticResult> out;
  for (const auto& name : diagnostic_names()) {
    if (!s.diagnostics.has(name)) continue;
    try {
      out.push_back(table.at(name)(s, runs));
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("error: ") + e.what(), json{{"error", e.what()}}, ""});
    }
  }
  return out;
}

bool RunManifest::pass() const {
  for (const auto& r : runs)
    if (!r.ok) return false;
  for (const auto& d : diagnostics)
    if (!d.pass) return false;
  return true;
}

json RunManifest::to_json() const {
  json j;
  j["scenario"] = scenario_name;
  j["scenario_hash"] = scenario_hash;
  j["version"] = version;
  j["directory"] = directory;
  j["total_seconds"] = total_seconds;
  j["runs"] = json::array();
  for (const auto& r : runs)
    j["runs"].push_back({{"label", r.label},
                         {"m", number_or_null(r.m)},
                         {"seconds", r.seconds},
                         {"snapshots", r.snapshots},
                         {"ok", r.ok},
                         {"error", r.error}});
  j["diagnostics"] = json::array();
  for (const auto& d : diagnostics)
    j["diagnostics"].push_back({{"name", d.name}, {"pass", d.pass}, {"summary", d.summary}});
  j["files"] = json::array();
  for (const auto& f : files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["pass"] = pass();
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.scenario_name = j.at("scenario").get<std::string>();
  m.scenario_hash = j.at("scenario_hash").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.directory = j.at("directory").get<std::string>();
  m.total_seconds = j.at("total_seconds").get<double>();
  for (const auto& r : j.at("runs"))
    m.runs.push_back({r.at("label").get<std::string>(),
                      r.at("m").is_null() ? std::numeric_limits<double>::infinity() : r.at("m").get<double>(),
                      r.at("seconds").get<double>(), r.at("snapshots").get<std::size_t>(), r.at("ok").get<bool>(),
                      r.at("error").get<std::string>()});
  for (const auto& d : j.at("diagnostics"))
    m.diagnostics.push_back({d.at("name").get<std::string>(), d.at("pass").get<bool>(), d.at("summary").get<std::string>()});
  for (const auto& f : j.at("files"))
    m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(), f.at("bytes").get<std::uintmax_t>()});
  return m;
}

RunManifest run_scenario(const Scenario& s, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const auto audit = audit_scenario(s);
  for (const auto& row : audit)
    if (!row.supported) throw UnsupportedRegime(row.label + ": " + row.note);

  RunManifest man;
  man.scenario_name = s.name;
  man.scenario_hash = scenario_hash(s);
  const fs::path dir = fs::path(s.output.dir) / man.scenario_hash.substr(0, 16);
  man.directory = dir.generic_string();
  fs::create_directories(dir);
  if (opts.log) *opts.log << "scenario " << s.name << " -> " << man.directory << "\n";

  const auto runs = execute_runs(s, opts.jobs, opts.log);
  for (const auto& r : runs)
    man.runs.push_back({r.label, r.m.value(), r.seconds, r.traj ? r.traj->snapshots.size() : 0, r.error.empty(), r.error});

  // Everything below is written from one thread, in a fixed order.
  write_text(dir / "scenario.json", serialize(s));
  write_text(dir / "reports" / "audit.json", audit_to_json(audit).dump(2) + "\n");
  for (const auto& r : runs) write_run_files(s, r, dir);
  if (opts.log && !s.diagnostics.selected.empty()) *opts.log << "  diagnostics\n";
  for (const auto& d : evaluate_diagnostics(s, runs)) {
    man.diagnostics.push_back({d.name, d.pass, d.summary});
    json rep = {{"name", d.name}, {"pass", d.pass}, {"summary", d.summary}, {"report", d.report}};
    write_text(dir / "reports" / (d.name + ".json"), rep.dump(2) + "\n");
    if (!d.csv.empty()) write_text(dir / "reports" / (d.name + ".csv"), d.csv);
    if (opts.log) *opts.log << "  " << (d.pass ? "PASS " : "FAIL ") << d.name << ": " << d.summary << "\n";
  }
  man.files = inventory(dir);
  man.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(dir / "manifest.json", man.to_json().dump(2) + "\n");
  return man;
}

RunManifest read_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.json";
  try {
    return RunManifest::from_json(json::parse(read_bytes(path)));
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

std::vector<std::string> verify_inventory(const std::string& dir, const RunManifest& manifest) {
  std::vector<std::string> bad;
  std::map<std::string, FileEntry> listed;
  for (const auto& f : manifest.files) listed[f.path] = f;
  for (const auto& f : inventory(dir)) {
    auto it = listed.find(f.path);
    if (it == listed.end())
      bad.push_back(f.path + ": not listed");
    else if (it->second.sha256 != f.sha256 || it->second.bytes != f.bytes)
      bad.push_back(f.path + ": digest mismatch");
    if (it != listed.end()) listed.erase(it);
  }
  for (const auto& [path, f] : listed) bad.push_back(path + ": missing");
  return bad;
}

}  // namespace pmefb

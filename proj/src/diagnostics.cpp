#include "pmefb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

namespace pmefb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double trajectory_p_max(const Trajectory& traj) {
  if (traj.spec.p_max_bound) return *traj.spec.p_max_bound;
  double p = 0.0;
  for (const auto& s : traj.snapshots) p = std::max(p, linf_norm(s.p));
  return p;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + h, v.end());
  if (v.size() % 2 == 1) return v[h];
  const double hi = v[h];
  return 0.5 * (*std::max_element(v.begin(), v.begin() + h) + hi);
}

double mean_spacing(const std::vector<double>& times) {
  return times.size() < 2 ? 0.0 : (times.back() - times.front()) / double(times.size() - 1);
}

// Frame whose time is closest to t.
std::size_t nearest_frame(const std::vector<double>& times, double t) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < times.size(); ++k)
    if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
  return best;
}

// Latest frame with time <= t (frame 0 when none).
std::size_t frame_at_or_before(const std::vector<double>& times, double t) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] <= t + 1e-12) best = k;
  return best;
}

std::vector<Index> cells_of(const Mask& m) {
  std::vector<Index> out;
  for (Index k = 0; k < m.size(); ++k)
    if (m.bits[k]) out.push_back(k);
  return out;
}

std::vector<Index> every_kth(const std::vector<Index>& cells, int max_count) {
  if (max_count <= 0) throw InvalidArgument("probe budget must be positive");
  const std::size_t k = std::max<std::size_t>(1, (cells.size() + max_count - 1) / max_count);
  std::vector<Index> out;
  for (std::size_t i = 0; i < cells.size(); i += k) out.push_back(cells[i]);
  return out;
}

Mask and_mask(const Mask& a, const Mask& b) { return Mask(a.grid, Mask::Bits(a.bits && b.bits)); }

const Snapshot& snapshot_at(const Trajectory& traj, double t) {
  for (const auto& s : traj.snapshots)
    if (std::abs(s.time - t) <= 1e-12 * std::max(1.0, std::abs(t))) return s;
  throw InvalidArgument("trajectory has no snapshot at the requested time");
}

}  // namespace

// ---------------------------------------------------------------------------

PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("fit_power_law: sizes differ");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  PowerFit fit;
  fit.points = static_cast<int>(lx.size());
  if (lx.size() < 2) return fit;
  const Eigen::Map<const Eigen::ArrayXd> X(lx.data(), Index(lx.size())), Y(ly.data(), Index(ly.size()));
  const double mx = X.mean(), my = Y.mean();
  const double sxx = (X - mx).square().sum();
  const double syy = (Y - my).square().sum();
  const double sxy = ((X - mx) * (Y - my)).sum();
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.inconclusive = fit.points < 4 || fit.r2 < 0.8;
  return fit;
}

// ---------------------------------------------------------------------------

Field ab_quantity(const Field& p, const ModelSpec& spec, double t) {
  Field q = laplacian(p);
  for (Index k = 0; k < q.size(); ++k) {
    const Vec x = p.grid.center(k);
    q[k] += spec.drift.divergence(x, t) + spec.source.value(x, t, p[k]);
  }
  return q;
}

AbReport ab_check(const Trajectory& traj, const AbOptions& opts) {
  if (!opts.improved_floor && !(opts.eta0 > 0.0)) throw InvalidArgument("ab_check needs eta0 > 0");
  if (opts.improved_floor && opts.eta0 < 0.0) throw InvalidArgument("ab_check needs eta0 >= 0");
  AbReport rep;
  rep.eta0 = opts.eta0;
  rep.improved_floor = opts.improved_floor;
  rep.p_max = trajectory_p_max(traj);
  rep.c0 = ab_constant(traj.spec, rep.p_max, opts.sample_density);
  const double m1 = traj.spec.m.value() - 1.0;
  const double dx = traj.grid.dx();
  for (const auto& snap : traj.snapshots) {
    const double t = snap.time;
    if (t < opts.eta0 || t <= 0.0) continue;
    AbRow row;
    row.time = t;
    row.floor = opts.improved_floor ? -rep.c0 / m1 : -(rep.c0 + 1.0 / t) / m1;
    row.tolerance = std::max(0.1, 10.0 * dx) * (1.0 + linf_norm(snap.p));
    const Mask interior = erode(support_of(snap.p, default_threshold(snap.p)), 2.0 * dx);
    row.interior_cells = interior.count();
    if (row.interior_cells > 0) {
      const Field q = ab_quantity(snap.p, traj.spec, t);
      double best = kInf;
      for (Index k = 0; k < q.size(); ++k)
        if (interior.bits[k] && q[k] < best) {
          best = q[k];
          row.argmin = k;
        }
      row.min_q = best;
      row.margin = best - row.floor;
      row.pass = row.margin >= -row.tolerance;
    }
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------

MonotonicityReport streamline_monotonicity(const Trajectory& traj, double slack_cells, double threshold) {
  const auto rec = frontiers(traj, threshold);
  const double dx = traj.grid.dx();
  std::vector<Mask> dilated;
  dilated.reserve(rec.size());
  for (const auto& r : rec) dilated.push_back(dilate(r.support, slack_cells * dx));
  MonotonicityReport rep;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    for (std::size_t j = i + 1; j < rec.size(); ++j) {
      ++rep.pairs;
      const Mask flowed = flow_map_set(rec[i].support, rec[i].time, rec[j].time - rec[i].time, traj.spec);
      const Index excess = (flowed.bits && !dilated[j].bits).count();
      if (excess > 0) ++rep.failures;
      if (excess > rep.worst_excess) {
        rep.worst_excess = excess;
        rep.worst_t0 = rec[i].time;
        rep.worst_t1 = rec[j].time;
      }
    }
  }
  rep.pass = rep.failures == 0;
  return rep;
}

double sample_bilinear(const Field& u, const Vec& x) {
  const Grid& g = u.grid;
  const double dx = g.dx();
  const double fx = (x[0] - g.origin()[0]) / dx - 0.5;
  const int i0 = static_cast<int>(std::floor(fx));
  const double wx = fx - i0;
  if (g.dim() == 1) return (1.0 - wx) * u.at(i0) + wx * u.at(i0 + 1);
  const double fy = (x[1] - g.origin()[1]) / dx - 0.5;
  const int j0 = static_cast<int>(std::floor(fy));
  const double wy = fy - j0;
  return (1.0 - wx) * (1.0 - wy) * u.at(i0, j0) + wx * (1.0 - wy) * u.at(i0 + 1, j0) +
         (1.0 - wx) * wy * u.at(i0, j0 + 1) + wx * wy * u.at(i0 + 1, j0 + 1);
}

DecayReport streamline_decay(const Trajectory& traj, const DecayOptions& opts) {
  if (!(opts.t_min > 0.0)) throw InvalidArgument("streamline_decay needs t_min > 0");
  DecayReport rep;
  rep.c0 = ab_constant(traj.spec, trajectory_p_max(traj));
  const double slack = 10.0 * traj.grid.dx();
  const auto& snaps = traj.snapshots;
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const double t0 = snaps[i].time;
    if (t0 < opts.t_min) continue;
    const Field& p0 = snaps[i].p;
    const auto probes = every_kth(cells_of(support_of(p0, default_threshold(p0))), opts.max_probes);
    for (std::size_t j = i + 1; j < snaps.size(); ++j) {
      const double s = snaps[j].time - t0;
      const AffineFlow flow = flow_propagator(traj.spec, t0, s, traj.grid.dx());
      const double decay = std::exp(-(rep.c0 + 1.0 / t0) * s);
      for (Index c : probes) {
        const double lhs = sample_bilinear(snaps[j].p, flow.apply(traj.grid.center(c)));
        const double rhs = decay * p0[c] - slack;
        ++rep.probes;
        if (lhs >= rhs)
          ++rep.passed;
        else
          rep.worst_shortfall = std::max(rep.worst_shortfall, rhs - lhs);
      }
    }
  }
  rep.fraction = rep.probes > 0 ? double(rep.passed) / rep.probes : 1.0;
  rep.pass = rep.fraction >= opts.required_fraction;
  return rep;
}

// ---------------------------------------------------------------------------

const char* to_string(StreamlineBranch b) {
  switch (b) {
    case StreamlineBranch::on_boundary: return "on_boundary";
    case StreamlineBranch::inside_support: return "inside_support";
    case StreamlineBranch::outside_support: return "outside_support";
    case StreamlineBranch::no_previous: return "no_previous";
  }
  return "unknown";
}

double ball_average(const Field& p, const Vec& x, double r) {
  const Grid& g = p.grid;
  const Box box = g.box();
  for (int a = 0; a < g.dim(); ++a)
    if (x[a] - r < box.lower[a] || x[a] + r > box.upper[a]) return kNaN;
  const double dx = g.dx();
  const double r2 = (r + 1e-9 * dx) * (r + 1e-9 * dx);
  const int reach = static_cast<int>(std::ceil(r / dx)) + 1;
  const auto home = g.locate(x);
  if (!home) return kNaN;
  const auto [ci, cj] = g.coords(*home);
  double sum = 0.0;
  Index count = 0;
  const int jr = g.dim() == 2 ? reach : 0;
  for (int dj = -jr; dj <= jr; ++dj)
    for (int di = -reach; di <= reach; ++di) {
      const int i = ci + di, j = cj + dj;
      if (!g.contains(i, j)) continue;
      if ((g.center(i, j) - x).squaredNorm() > r2) continue;
      sum += p[g.index(i, j)];
      ++count;
    }
  return count > 0 ? sum / double(count) : kNaN;
}

std::vector<Vec> front_points(const Field& p, int max_probes, double threshold) {
  const Grid& g = p.grid;
  const double dx = g.dx();
  const double thr = threshold < 0.0 ? std::max(1e-10, 1e-3 * linf_norm(p)) : threshold;
  const Mask support = support_of(p, thr);
  std::vector<Vec> out;
  for (Index c : every_kth(cells_of(and_mask(boundary_band(support), support)), max_probes)) {
    const auto [i, j] = g.coords(c);
    const double pc = p[c];
    Vec grad = Vec::Zero(g.dim());
    for (int a = 0; a < g.dim(); ++a) {
      const double lo = a == 0 ? p.at(i - 1, j) : p.at(i, j - 1);
      const double hi = a == 0 ? p.at(i + 1, j) : p.at(i, j + 1);
      grad[a] = hi >= lo ? (hi - pc) / dx : (pc - lo) / dx;
    }
    Vec x = g.center(c);
    const double norm = grad.norm();
    if (norm > 0.0) x -= std::min(pc / norm, 1.5 * dx) * grad / norm;
    out.push_back(x);
  }
  return out;
}

AvgPressureTable avg_pressure_probe(const Trajectory& traj, std::size_t snapshot, const std::vector<Vec>& points,
                                    const std::vector<double>& radii, double threshold) {
  if (snapshot >= traj.snapshots.size()) throw InvalidArgument("avg_pressure_probe: snapshot out of range");
  const double dx = traj.grid.dx();
  for (double r : radii)
    if (r < 2.0 * dx - 1e-12) throw InvalidArgument("avg_pressure_probe: radii must be at least 2 dx");
  const Snapshot& snap = traj.snapshots[snapshot];
  AvgPressureTable tab;
  tab.time = snap.time;
  tab.radii = radii;

  std::optional<FrontierRecord> prev;
  AffineFlow back;
  if (snapshot > 0) {
    const Field& pp = traj.support_field(snapshot - 1);
    prev = threshold < 0.0 ? extract_frontier(pp) : extract_frontier(pp, threshold);
    back = flow_propagator(traj.spec, snap.time, traj.snapshots[snapshot - 1].time - snap.time, dx);
  }

  std::vector<double> sums(radii.size(), 0.0);
  int used = 0;
  for (const Vec& x : points) {
    ProbeRow row;
    row.x = x;
    for (double r : radii) {
      const double a = ball_average(snap.p, x, r);
      row.averages.push_back(a);
      if (std::isnan(a)) row.skipped = true;
    }
    if (prev) {
      const auto at = traj.grid.locate(back.apply(x));
      if (at && prev->boundary.bits[*at])
        row.branch = StreamlineBranch::on_boundary;
      else if (at && prev->support.bits[*at])
        row.branch = StreamlineBranch::inside_support;
      else
        row.branch = StreamlineBranch::outside_support;
    }
    if (row.skipped) {
      ++tab.skipped;
    } else {
      ++used;
      for (std::size_t i = 0; i < radii.size(); ++i) sums[i] += row.averages[i];
    }
    tab.probes.push_back(std::move(row));
  }
  for (double s : sums) tab.pooled.push_back(used > 0 ? s / used : kNaN);
  tab.fit = fit_power_law(radii, tab.pooled);
  return tab;
}

// ---------------------------------------------------------------------------

ExpansionReport strict_expansion_measure(const Trajectory& traj, const ExpansionOptions& opts) {
  const auto times = traj.times();
  if (times.size() < 3) throw InvalidArgument("strict_expansion_measure: insufficient snapshots");
  if (opts.eta0 < 2.0 * (times[1] - times[0]) - 1e-12)
    throw InvalidArgument("strict_expansion_measure: eta0 must be at least two frame spacings");
  const auto rec = frontiers(traj, opts.threshold);
  const Grid& g = traj.grid;
  const double dx = g.dx();
  const double frame = mean_spacing(times);
  ExpansionReport rep;
  rep.eta0 = opts.eta0;

  std::vector<std::pair<std::size_t, Index>> probes;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (times[k] < opts.eta0) continue;
    for (Index c : cells_of(and_mask(rec[k].boundary, rec[k].support))) probes.emplace_back(k, c);
  }
  {
    const std::size_t step = std::max<std::size_t>(1, (probes.size() + opts.max_probes - 1) / std::max(1, opts.max_probes));
    std::vector<std::pair<std::size_t, Index>> kept;
    for (std::size_t i = 0; i < probes.size(); i += step) kept.push_back(probes[i]);
    probes.swap(kept);
  }
  rep.probes = static_cast<int>(probes.size());

  auto round_s = [&](double s) { return std::max(1.0, std::round(s / frame)) * frame; };

  std::map<std::pair<std::size_t, std::size_t>, AffineFlow> flows;
  auto flow_between = [&](std::size_t from, std::size_t to) -> const AffineFlow& {
    auto it = flows.find({from, to});
    if (it == flows.end()) it = flows.emplace(std::make_pair(from, to), flow_propagator(traj.spec, times[from], times[to] - times[from], dx)).first;
    return it->second;
  };

  std::vector<double> fit_s, fit_d;
  for (double s_raw : opts.s_ladder) {
    if (!(s_raw > 0.0)) throw InvalidArgument("strict_expansion_measure: s ladder must be positive");
    ExpansionRow row;
    row.s = round_s(s_raw);
    std::vector<double> d;
    int positive = 0;
    for (const auto& [k, c] : probes) {
      if (times[k] - row.s < -1e-12) continue;
      const std::size_t j = nearest_frame(times, times[k] - row.s);
      if (j >= k) continue;
      const auto at = g.locate(flow_between(k, j).apply(g.center(c)));
      if (!at) continue;
      const double v = rec[j].dist_to_support[*at];
      if (!std::isfinite(v)) continue;
      d.push_back(v);
      if (v > 0.0) ++positive;
    }
    row.samples = static_cast<int>(d.size());
    if (!d.empty()) {
      row.median = median(d);
      row.min = *std::min_element(d.begin(), d.end());
      row.positive_fraction = double(positive) / double(d.size());
      if (row.median > dx) {
        fit_s.push_back(row.s);
        fit_d.push_back(row.median);
      }
    }
    rep.backward.push_back(row);
  }
  rep.fit = fit_power_law(fit_s, fit_d);
  rep.gamma = rep.fit.slope;
  if (std::isfinite(rep.gamma)) {
    rep.c_star = kInf;
    for (std::size_t i = 0; i < fit_s.size(); ++i) rep.c_star = std::min(rep.c_star, fit_d[i] / std::pow(fit_s[i], rep.gamma));
  }

  for (double s_raw : opts.s_ladder) {
    GrowthRow row;
    row.s = round_s(s_raw);
    double s_used = row.s;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      if (rec[k].support.empty() || times[k] + row.s > times.back() + 1e-12) continue;
      const std::size_t j = nearest_frame(times, times[k] + row.s);
      if (j <= k || rec[j].support.empty()) continue;
      const Mask flowed = flow_map_raster(rec[k].support, times[k], times[j] - times[k], traj.spec);
      if (flowed.empty()) continue;
      const double gr = directed_distance(rec[j].support, flowed);
      if (gr > row.growth) {
        row.growth = gr;
        s_used = times[j] - times[k];
      }
    }
    rep.speed_cap = std::max(rep.speed_cap, row.growth / std::sqrt(s_used));
    rep.forward.push_back(row);
  }

  const double varsigma0 = traj.spec.init.kind == InitKind::smooth_bump ? traj.spec.init.varsigma0 : 1.0;
  for (double tau : opts.tau_ladder) {
    InitialExpansionRow row;
    const std::size_t j = nearest_frame(times, tau);
    row.tau = times[j];
    row.required = opts.expansion_constant * std::pow(row.tau, 2.0 / varsigma0);
    const Mask flowed = flow_map_raster(rec[0].support, times[0], row.tau - times[0], traj.spec);
    double least = kInf;
    for (Index c = 0; c < flowed.size(); ++c)
      if (flowed.bits[c]) least = std::min(least, rec[j].dist_to_complement[c]);
    row.r_tau = std::isfinite(least) ? std::max(0.0, least - dx) : 0.0;
    row.pass = j > 0 && row.r_tau >= row.required;
    rep.initial_pass = rep.initial_pass && row.pass;
    rep.initial.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------

Mask good_boundary(const std::vector<FrontierRecord>& records, std::size_t k) {
  if (k >= records.size()) throw InvalidArgument("good_boundary: frame out of range");
  const FrontierRecord& r = records[k];
  const Grid& g = r.support.grid;
  const double dx = g.dx();
  Mask inner(g, true), outer(g, true);
  const std::size_t lo = k > 0 ? k - 1 : 0;
  const std::size_t hi = std::min(records.size() - 1, k + 1);
  for (std::size_t f = lo; f <= hi; ++f) {
    inner = and_mask(inner, erode(records[f].support, dx));
    outer = and_mask(outer, erode(records[f].support.complement(), dx));
  }
  if (inner.empty() || outer.empty()) return Mask(g);
  return and_mask(r.boundary, and_mask(dilate(inner, 3.0 * dx), dilate(outer, 3.0 * dx)));
}

ConvergenceTable convergence_report(const std::vector<const Trajectory*>& runs, const ConvergenceOptions& opts) {
  if (runs.empty()) throw InvalidArgument("convergence_report: no runs");
  const Trajectory& first = *runs.front();
  const auto times = first.times();
  for (const Trajectory* t : runs) {
    require_same_grid(first.grid, t->grid, "convergence_report");
    const auto ti = t->times();
    if (ti.size() != times.size()) throw InvalidArgument("convergence_report: snapshot times differ");
    for (std::size_t k = 0; k < ti.size(); ++k)
      if (std::abs(ti[k] - times[k]) > 1e-12 * std::max(1.0, times[k]))
        throw InvalidArgument("convergence_report: snapshot times differ");
  }
  for (std::size_t i = 0; i + 1 < runs.size(); ++i)
    if (runs[i]->spec.m.is_infinite()) throw InvalidArgument("convergence_report: the limit run must come last");

  const std::size_t n = runs.size();
  const Grid& g = first.grid;
  const double dx = g.dx();
  ConvergenceTable tab;
  tab.times = times;
  for (const Trajectory* t : runs) {
    if (t->spec.m.is_infinite()) {
      tab.labels.push_back("inf");
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", t->spec.m.value());
      tab.labels.push_back(buf);
    }
  }
  const bool has_limit = runs.back()->spec.m.is_infinite();

  std::vector<std::vector<FrontierRecord>> rec;
  for (const Trajectory* t : runs) rec.push_back(frontiers(*t, opts.threshold));

  auto safe_hausdorff = [](const Mask& a, const Mask& b) {
    return a.empty() || b.empty() ? kNaN : hausdorff_distance(a, b);
  };

  tab.beta = Eigen::MatrixXd::Zero(Index(n), Index(n));
  tab.gamma = Eigen::MatrixXd::Zero(Index(n), Index(n));
  tab.spacetime = Eigen::MatrixXd::Zero(Index(n), Index(n));
  tab.containment_cells = Eigen::MatrixXd::Zero(Index(n), Index(n));
  tab.early_containment_cells = Eigen::MatrixXd::Zero(Index(n), Index(n));
  tab.hausdorff.assign(times.size(), Eigen::MatrixXd::Zero(Index(n), Index(n)));
  tab.time_weight = opts.time_weight > 0.0 ? opts.time_weight : default_time_weight(g, times);
  tab.proximity_radius = opts.proximity_radius > 0.0 ? opts.proximity_radius : 4.0 * dx;

  std::vector<std::size_t> late;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] >= opts.eta0 - 1e-12) late.push_back(k);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double beta = 0.0;
      for (std::size_t k = 1; k < times.size(); ++k) {
        const double a = l1_distance(runs[i]->snapshots[k - 1].p, runs[j]->snapshots[k - 1].p);
        const double b = l1_distance(runs[i]->snapshots[k].p, runs[j]->snapshots[k].p);
        beta += 0.5 * (a + b) * (times[k] - times[k - 1]);
      }
      tab.beta(i, j) = tab.beta(j, i) = beta;
      tab.gamma(i, j) = tab.gamma(j, i) = safe_hausdorff(rec[i][0].support, rec[j][0].support);
      for (std::size_t k = 0; k < times.size(); ++k)
        tab.hausdorff[k](i, j) = tab.hausdorff[k](j, i) = safe_hausdorff(rec[i][k].support, rec[j][k].support);
      std::vector<FrontierRecord> a, b;
      for (std::size_t k : late) {
        a.push_back(rec[i][k]);
        b.push_back(rec[j][k]);
      }
      double st = kNaN;
      if (!a.empty()) {
        try {
          st = spacetime_frontier_distance(a, b, tab.time_weight).distance;
        } catch (const InvalidArgument&) {
          st = kNaN;
        }
      }
      tab.spacetime(i, j) = tab.spacetime(j, i) = st;
    }
  }

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double late_k = 0.0, early_k = 0.0;
      for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] <= 0.0 || rec[i][k].support.empty()) continue;
        const double d = rec[j][k].support.empty() ? kInf : directed_distance(rec[i][k].support, rec[j][k].support);
        const double cells = std::ceil(d / dx - 1e-9);
        if (times[k] >= opts.eta0 - 1e-12)
          late_k = std::max(late_k, cells);
        else
          early_k = std::max(early_k, cells);
      }
      tab.containment_cells(i, j) = late_k;
      tab.early_containment_cells(i, j) = early_k;
    }

  const auto tail = [&](const Eigen::MatrixXd& mat, std::size_t hi) {
    std::vector<double> out(n, kNaN);
    for (std::size_t M = 0; M < n; ++M) {
      double s = kNaN;
      for (std::size_t i = M; i < hi; ++i)
        for (std::size_t j = M; j < hi; ++j)
          if (i != j && !std::isnan(mat(i, j))) s = std::isnan(s) ? mat(i, j) : std::max(s, mat(i, j));
      out[M] = s;
    }
    return out;
  };
  const std::size_t finite = has_limit ? n - 1 : n;
  tab.beta_tail = tail(tab.beta, n);
  tab.gamma_tail = tail(tab.gamma, finite);
  tab.gamma_prime_tail.assign(n, kNaN);
  if (has_limit)
    for (std::size_t M = 0; M < finite; ++M) {
      double s = 0.0;
      for (std::size_t i = M; i < finite; ++i) s = std::max(s, tab.gamma(i, n - 1));
      tab.gamma_prime_tail[M] = s;
    }

  // Free-boundary proximity with slack r^2 in time rounded up to whole frames.
  const double r = tab.proximity_radius;
  std::vector<std::vector<Field>> to_support(n), to_complement(n);
  for (std::size_t j = 0; j < n; ++j)
    for (const auto& fr : rec[j]) {
      to_support[j].push_back(fr.dist_to_support);
      to_complement[j].push_back(fr.dist_to_complement);
    }
  tab.proximity.assign(n, std::vector<ProximityStats>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<Index>> points(times.size());
    for (std::size_t k : late) {
      const Mask fb = runs[i]->spec.m.is_infinite() ? good_boundary(rec[i], k) : rec[i][k].boundary;
      points[k] = cells_of(and_mask(fb, rec[i][k].support));
    }
    for (std::size_t j = 0; j < n; ++j) {
      ProximityStats& ps = tab.proximity[i][j];
      for (std::size_t k : late) {
        if (points[k].empty()) continue;
        const std::size_t j_lo = frame_at_or_before(times, times[k] - r * r);
        const std::size_t j_c = frame_at_or_before(times, times[k] - r);
        for (Index c : points[k]) {
          ++ps.points;
          for (std::size_t f = j_lo; f <= k; ++f) ps.to_support = std::max(ps.to_support, to_support[j][f][c]);
          ps.to_complement = std::max(ps.to_complement, to_complement[j][j_c][c]);
        }
      }
    }
  }
  return tab;
}

// ---------------------------------------------------------------------------

Index vitali_count(const Mask& set, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("vitali_count: radius must be positive");
  const Grid& g = set.grid;
  const double dx = g.dx();
  const double lim2 = 4.0 * radius * radius;
  const int reach = static_cast<int>(std::ceil(2.0 * radius / dx));
  Mask::Bits excluded = Mask::Bits::Constant(g.size(), false);
  Index count = 0;
  for (Index k = 0; k < g.size(); ++k) {
    if (!set.bits[k] || excluded[k]) continue;
    ++count;
    const auto [ci, cj] = g.coords(k);
    const Vec x = g.center(k);
    const int jr = g.dim() == 2 ? reach : 0;
    for (int dj = -jr; dj <= jr; ++dj)
      for (int di = -reach; di <= reach; ++di) {
        const int i = ci + di, j = cj + dj;
        if (!g.contains(i, j)) continue;
        const Index q = g.index(i, j);
        if ((g.center(q) - x).squaredNorm() < lim2) excluded[q] = true;
      }
  }
  return count;
}

double dimension_bound(int dim, double sigma_m, double mu, double m) {
  return dim - sigma_m + (std::isinf(m) ? 0.0 : mu / (m - 1.0));
}

DimensionEstimate covering_dimension(const FrontierRecord& frontier, const std::vector<double>& radii, double bound) {
  const Grid& g = frontier.support.grid;
  const double dx = g.dx();
  if (radii.size() < 4) throw InvalidArgument("covering_dimension: needs at least 4 radii");
  const Index cells = frontier.boundary.count();
  if (cells < 16) throw InvalidArgument("covering_dimension: frontier too small (fewer than 16 cells)");
  double extent = 0.0;
  {
    std::array<int, 2> lo{g.cells_per_axis(), g.cells_per_axis()}, hi{-1, -1};
    for (Index k = 0; k < g.size(); ++k) {
      if (!frontier.support.bits[k]) continue;
      const auto c = g.coords(k);
      for (int a = 0; a < 2; ++a) {
        lo[a] = std::min(lo[a], c[a]);
        hi[a] = std::max(hi[a], c[a]);
      }
    }
    for (int a = 0; a < g.dim(); ++a) extent = std::max(extent, (hi[a] - lo[a] + 1) * dx);
  }
  for (double r : radii) {
    if (r < 3.0 * dx - 1e-12) throw InvalidArgument("covering_dimension: radii must be at least 3 dx");
    if (r > 0.25 * extent + 1e-12) throw InvalidArgument("covering_dimension: radius exceeds a quarter of the support extent");
  }
  DimensionEstimate est;
  est.time = frontier.time;
  est.radii = radii;
  est.bound = bound;
  est.frontier_cells = cells;
  std::vector<double> inv, cnt;
  for (double r : radii) {
    est.counts.push_back(vitali_count(frontier.boundary, r));
    inv.push_back(1.0 / r);
    cnt.push_back(double(est.counts.back()));
  }
  std::vector<std::size_t> order(radii.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (est.counts[order[i]] > est.counts[order[i - 1]]) est.monotone = false;
  est.fit = fit_power_law(inv, cnt);
  est.dimension = est.fit.slope;
  return est;
}

// ---------------------------------------------------------------------------

double oscillation_integral(const Field& rho, double r) {
  if (r < rho.grid.dx() - 1e-12) throw InvalidArgument("oscillation_integral: radius must be at least dx");
  return (sup_convolve(rho, r).values - inf_convolve(rho, r).values).sum() * rho.grid.cell_volume();
}

PowerFit oscillation_exponent(const Field& rho, const std::vector<double>& radii) {
  std::vector<double> osc;
  for (double r : radii) osc.push_back(oscillation_integral(rho, r));
  return fit_power_law(radii, osc);
}

PropagationFit propagation_constant(const Trajectory& traj, const std::vector<double>& radii, double c_max) {
  if (traj.snapshots.empty()) throw InvalidArgument("propagation_constant: empty trajectory");
  if (radii.empty()) throw InvalidArgument("propagation_constant: empty radius ladder");
  if (!(c_max >= 1.0)) throw InvalidArgument("propagation_constant: c_max must be at least 1");
  PropagationFit fit;
  fit.times = traj.times();
  fit.radii = radii;
  fit.osc.resize(Index(fit.times.size()), Index(radii.size()));
  for (std::size_t k = 0; k < fit.times.size(); ++k)
    for (std::size_t j = 0; j < radii.size(); ++j)
      fit.osc(Index(k), Index(j)) = oscillation_integral(traj.snapshots[k].rho, radii[j]);
  const Field& rho0 = traj.snapshots.front().rho;
  auto holds = [&](double c) {
    for (std::size_t j = 0; j < radii.size(); ++j) {
      const double rhs = c * (radii[j] + oscillation_integral(rho0, c * radii[j]));
      if (fit.osc.col(Index(j)).maxCoeff() > rhs * (1.0 + 1e-12)) return false;
    }
    return true;
  };
  if (!holds(c_max)) return fit;
  double lo = 1.0, hi = c_max;
  if (holds(lo)) {
    hi = lo;
  } else {
    while (hi - lo > 1e-3 * c_max) {
      const double mid = 0.5 * (lo + hi);
      (holds(mid) ? hi : lo) = mid;
    }
  }
  fit.c = hi;
  fit.pass = true;
  return fit;
}

// ---------------------------------------------------------------------------

ConvolutionParams convolution_params(const AssumptionReport& audit, double r0, double horizon) {
  const double s = audit.sigma_tilde;
  if (!(s > 0.0)) throw UnsupportedRegime("convolution parameters need inf(div b + f) > 0");
  if (!(r0 > 0.0)) throw InvalidArgument("convolution radius must be positive");
  const double c1 = 1.0 + audit.norms.b_c21 + audit.norms.f_c1;
  ConvolutionParams p;
  p.r0 = r0;
  p.alpha = 4.0 * c1 * r0 / s;
  p.rate = 4.0 * c1 + 8.0 * M_E * c1 * c1 / s;
  p.tau0 = std::min({1.0 / p.rate, s / (4.0 * M_E * c1), 0.5 * horizon});
  if (!(p.alpha < 0.5)) throw UnsupportedRegime("convolution radius too large: alpha must stay below 1/2");
  return p;
}

OrderingReport convolution_ordering(const ModelSpec& spec, const Grid& grid, const ConvolutionParams& params,
                                   const std::vector<double>& times, const SolveConfig& cfg, double tolerance) {
  params.validate();
  if (spec.m.is_infinite()) throw InvalidArgument("convolution ordering needs finite m");
  if (times.empty()) throw InvalidArgument("convolution ordering needs check times");
  std::vector<double> checks = times;
  std::sort(checks.begin(), checks.end());
  if (checks.front() < 0.0 || checks.back() > params.tau0 + 1e-12)
    throw InvalidArgument("convolution ordering times must lie in [0, tau0]");

  std::vector<double> base_times{0.0};
  for (double t : checks) {
    base_times.push_back((1.0 - params.alpha) * t);
    base_times.push_back((1.0 + params.alpha) * t);
  }
  std::sort(base_times.begin(), base_times.end());
  base_times.erase(std::unique(base_times.begin(), base_times.end()), base_times.end());
  ModelSpec base_spec = spec;
  base_spec.horizon = std::max(base_times.back(), 1e-12);
  SolveConfig base_cfg = cfg;
  base_cfg.save_times = base_times;
  const Trajectory base = run(base_spec, grid, base_cfg);
  const ModifiedConvolutions mc = modified_convolutions(base, params, checks);
  const ModifiedConvolutions start = modified_convolutions(base, params, {0.0});

  ModelSpec run_spec = spec;
  run_spec.horizon = std::max(checks.back(), 1e-12);
  SolveConfig run_cfg = cfg;
  run_cfg.save_times = checks;
  const Trajectory rho1 = run(run_spec, start.u1.front(), run_cfg);
  const Trajectory rho2 = run(run_spec, start.u2.front(), run_cfg);

  OrderingReport rep;
  rep.params = params;
  rep.tolerance = tolerance;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    const double t = checks[k];
    rep.times.push_back(t);
    const double lower = (mc.u1[k].values - snapshot_at(rho1, t).rho.values).maxCoeff();
    const double upper = (snapshot_at(rho2, t).rho.values - mc.u2[k].values).maxCoeff();
    rep.lower_violation.push_back(lower);
    rep.upper_violation.push_back(upper);
    rep.pass = rep.pass && lower <= tolerance && upper <= tolerance;
  }
  return rep;
}

}  // namespace pmefb

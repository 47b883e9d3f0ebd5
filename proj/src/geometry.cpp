#include "pmefb/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace pmefb {

namespace {

constexpr double kBig = 1e30;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared distance transform of a sampled function along one line (lower envelope of parabolas).
void edt_line(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    auto cross = [&](int r) { return ((f[q] + double(q) * q) - (f[r] + double(r) * r)) / (2.0 * q - 2.0 * r); };
    double s = cross(v[k]);
    while (s <= z[k]) s = cross(v[--k]);
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Squared distance in cell units.
Eigen::ArrayXd squared_cell_distance(const Mask& mask) {
  const Grid& g = mask.grid;
  const int n = g.cells_per_axis();
  const int rows = g.rows();
  Eigen::ArrayXd out(g.size());
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < n; ++i) f[i] = mask.bits[g.index(i, j)] ? 0.0 : kBig;
    edt_line(f, d, v, z);
    for (int i = 0; i < n; ++i) out[g.index(i, j)] = d[i];
  }
  if (rows > 1) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < rows; ++j) f[j] = out[g.index(i, j)];
      edt_line(f, d, v, z);
      for (int j = 0; j < rows; ++j) out[g.index(i, j)] = d[j];
    }
  }
  return out;
}

Eigen::Vector2d embed(const Vec& x) {
  Eigen::Vector2d y = Eigen::Vector2d::Zero();
  for (Index a = 0; a < x.size(); ++a) y[a] = x[a];
  return y;
}

Vec project(const Eigen::Vector2d& y, int dim) { return dim == 1 ? make_vec(y[0]) : make_vec(y[0], y[1]); }

Vec rk4(const Vec& x, double t, double h, const ModelSpec& spec) {
  auto f = [&](const Vec& y, double s) -> Vec { return -spec.drift.value(y, s); };
  const Vec k1 = f(x, t);
  const Vec k2 = f(x + 0.5 * h * k1, t + 0.5 * h);
  const Vec k3 = f(x + 0.5 * h * k2, t + 0.5 * h);
  const Vec k4 = f(x + h * k3, t + h);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double domain_drift_sup(const ModelSpec& spec) {
  // Affine fields attain their sup norm over a box at a corner.
  const Box& box = spec.domain;
  double s = 0.0;
  const int corners = spec.dim() == 1 ? 2 : 4;
  for (int c = 0; c < corners; ++c) {
    Vec x = box.lower;
    if (c & 1) x[0] = box.upper[0];
    if (spec.dim() == 2 && (c & 2)) x[1] = box.upper[1];
    s = std::max(s, spec.drift.value(x, 0.0).norm());
  }
  return s;
}

template <typename Better>
Field ball_filter(const Field& u, double r, Better better) {
  if (!(r >= 0.0)) throw InvalidArgument("ball radius must be non-negative");
  const Grid& g = u.grid;
  const int n = g.cells_per_axis();
  const int rows = g.rows();
  const double rc = r / g.dx() + 1e-9;
  const int reach = static_cast<int>(std::floor(rc));
  const int dy_max = rows > 1 ? reach : 0;

  // Row-wise sliding extrema for each half-width that occurs.
  std::vector<int> width(dy_max + 1);
  for (int dy = 0; dy <= dy_max; ++dy) width[dy] = static_cast<int>(std::floor(std::sqrt(std::max(0.0, rc * rc - double(dy) * dy))));
  std::vector<int> distinct = width;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<Eigen::ArrayXd> rowext(distinct.size(), Eigen::ArrayXd(g.size()));
  std::deque<int> dq;
  for (std::size_t w_i = 0; w_i < distinct.size(); ++w_i) {
    const int w = distinct[w_i];
    for (int j = 0; j < rows; ++j) {
      dq.clear();
      const Index base = g.index(0, j);
      int next = 0;
      for (int i = 0; i < n; ++i) {
        const int hi = std::min(n - 1, i + w);
        while (next <= hi) {
          while (!dq.empty() && !better(u.values[base + dq.back()], u.values[base + next])) dq.pop_back();
          dq.push_back(next);
          ++next;
        }
        while (dq.front() < i - w) dq.pop_front();
        rowext[w_i][base + i] = u.values[base + dq.front()];
      }
    }
  }
  auto slot = [&](int w) { return static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), w) - distinct.begin()); };

  Field out(g, 0.0, u.time_stamp);
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < n; ++i) {
      double best = u.values[g.index(i, j)];
      for (int dy = -dy_max; dy <= dy_max; ++dy) {
        const int jj = j + dy;
        if (jj < 0 || jj >= rows) continue;
        const double v = rowext[slot(width[std::abs(dy)])][g.index(i, jj)];
        if (better(v, best)) best = v;
      }
      out[g.index(i, j)] = best;
    }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Streamlines

double streamline_step(const ModelSpec& spec, double dx) {
  const double b = domain_drift_sup(spec);
  const double cap = 0.01 * spec.horizon;
  return 0.5 * (b > 0.0 ? std::min(dx / b, cap) : cap);
}

StreamlineTrace integrate_streamline(const Vec& x0, double t0, double s_min, double s_max, const ModelSpec& spec,
                                     double dx) {
  if (s_min > 0.0 || s_max < 0.0) throw InvalidArgument("streamline range must contain s = 0");
  if (x0.size() != spec.dim()) throw InvalidArgument("streamline start has wrong dimension");
  StreamlineTrace tr;
  tr.x0 = x0;
  tr.t0 = t0;
  const double h = streamline_step(spec, dx);
  const Vec mid = 0.5 * (spec.domain.lower + spec.domain.upper);
  const Vec half = spec.domain.upper - mid;
  auto inside = [&](const Vec& x) { return ((x - mid).cwiseAbs().array() <= 2.0 * half.array()).all(); };

  auto walk = [&](double s_end, std::vector<std::pair<double, Vec>>& out) {
    const int steps = static_cast<int>(std::ceil(std::abs(s_end) / h - 1e-12));
    if (steps == 0) return;
    const double hs = s_end / steps;
    Vec x = x0;
    for (int k = 1; k <= steps; ++k) {
      x = rk4(x, t0 + (k - 1) * hs, hs, spec);
      if (!inside(x)) {
        tr.truncated = true;
        return;
      }
      out.emplace_back(k * hs, x);
    }
  };
  std::vector<std::pair<double, Vec>> back, fwd;
  walk(s_min, back);
  walk(s_max, fwd);
  for (auto it = back.rbegin(); it != back.rend(); ++it) tr.samples.push_back(*it);
  tr.samples.emplace_back(0.0, x0);
  for (auto& p : fwd) tr.samples.push_back(p);
  return tr;
}

Vec flow_point(const Vec& x0, double t0, double s, const ModelSpec& spec, double dx) {
  const double h = streamline_step(spec, dx);
  const int steps = static_cast<int>(std::ceil(std::abs(s) / h - 1e-12));
  Vec x = x0;
  if (steps == 0) return x;
  const double hs = s / steps;
  for (int k = 0; k < steps; ++k) x = rk4(x, t0 + k * hs, hs, spec);
  return x;
}

Vec AffineFlow::apply(const Vec& x) const { return project(a * embed(x) + c, static_cast<int>(x.size())); }

AffineFlow flow_propagator(const ModelSpec& spec, double t0, double s, double dx) {
  const int d = spec.dim();
  const double h = streamline_step(spec, dx);
  const int steps = static_cast<int>(std::ceil(std::abs(s) / h - 1e-12));
  AffineFlow total;
  if (steps == 0) return total;
  const double hs = s / steps;
  // One RK4 step as an affine map, read off from its action on 0 and the unit vectors.
  AffineFlow one;
  one.c = embed(rk4(Vec::Zero(d), t0, hs, spec));
  for (int a = 0; a < d; ++a) {
    Vec e = Vec::Zero(d);
    e[a] = 1.0;
    one.a.col(a) = embed(rk4(e, t0, hs, spec)) - one.c;
  }
  for (int k = 0; k < steps; ++k) {
    total.c = one.a * total.c + one.c;
    total.a = one.a * total.a;
  }
  return total;
}

Mask flow_map_raster(const Mask& mask, double t0, double s, const ModelSpec& spec) {
  const Grid& g = mask.grid;
  const AffineFlow flow = flow_propagator(spec, t0, s, g.dx());
  Mask out(g);
  for (Index k = 0; k < g.size(); ++k) {
    if (!mask.bits[k]) continue;
    if (const auto cell = g.locate(flow.apply(g.center(k)))) out.bits[*cell] = true;
  }
  return out;
}

Mask flow_map_set(const Mask& mask, double t0, double s, const ModelSpec& spec) {
  return dilate(flow_map_raster(mask, t0, s, spec), mask.grid.dx());
}

// ---------------------------------------------------------------------------
// Distances

Field distance_to(const Mask& mask) {
  const Grid& g = mask.grid;
  Field out(g);
  if (mask.empty()) {
    out.values.setConstant(kInf);
    return out;
  }
  const Eigen::ArrayXd d2 = squared_cell_distance(mask);
  out.values = d2.sqrt() * g.dx();
  return out;
}

Field distance_to_complement(const Mask& mask) {
  const Grid& g = mask.grid;
  const int n = g.cells_per_axis();
  Field out = distance_to(mask.complement());
  for (int j = 0; j < g.rows(); ++j)
    for (int i = 0; i < n; ++i) {
      int edge = std::min(i + 1, n - i);
      if (g.dim() == 2) edge = std::min({edge, j + 1, n - j});
      double& v = out.values[g.index(i, j)];
      v = std::min(v, edge * g.dx());
    }
  return out;
}

double directed_distance(const Mask& a, const Mask& b) {
  require_same_grid(a.grid, b.grid, "directed_distance");
  if (a.empty()) throw InvalidArgument("directed_distance: first set is empty");
  if (b.empty()) throw InvalidArgument("directed_distance: second set is empty");
  const Field d = distance_to(b);
  double s = 0.0;
  for (Index k = 0; k < a.size(); ++k)
    if (a.bits[k]) s = std::max(s, d[k]);
  return s;
}

double hausdorff_distance(const Mask& a, const Mask& b) {
  require_same_grid(a.grid, b.grid, "hausdorff_distance");
  if (a.empty()) throw InvalidArgument("hausdorff_distance: first set is empty");
  if (b.empty()) throw InvalidArgument("hausdorff_distance: second set is empty");
  return std::max(directed_distance(a, b), directed_distance(b, a));
}

// ---------------------------------------------------------------------------
// Frontiers

Mask support_of(const Field& p, double threshold) {
  if (!(threshold >= 0.0)) throw InvalidArgument("support threshold must be non-negative");
  return Mask(p.grid, Mask::Bits(p.values > threshold));
}

Mask boundary_band(const Mask& support) {
  const Grid& g = support.grid;
  const int n = g.cells_per_axis();
  Mask out(g);
  for (int j = 0; j < g.rows(); ++j)
    for (int i = 0; i < n; ++i) {
      // Cells outside the grid count as non-support.
      const bool in = support.at(i, j);
      bool differs = support.at(i - 1, j) != in || support.at(i + 1, j) != in;
      if (g.dim() == 2) differs = differs || support.at(i, j - 1) != in || support.at(i, j + 1) != in;
      out.bits[g.index(i, j)] = differs;
    }
  return out;
}

FrontierRecord extract_frontier(const Field& p, double threshold) {
  FrontierRecord r;
  r.time = p.time_stamp;
  r.support = support_of(p, threshold);
  r.boundary = boundary_band(r.support);
  r.dist_to_support = distance_to(r.support);
  r.dist_to_complement = distance_to_complement(r.support);
  return r;
}

FrontierRecord extract_frontier(const Field& p) { return extract_frontier(p, default_threshold(p)); }

std::vector<FrontierRecord> frontiers(const Trajectory& traj, double threshold) {
  std::vector<FrontierRecord> out;
  out.reserve(traj.snapshots.size());
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const Field& p = traj.support_field(k);
    FrontierRecord r = threshold < 0.0 ? extract_frontier(p) : extract_frontier(p, threshold);
    r.time = traj.snapshots[k].time;
    out.push_back(std::move(r));
  }
  return out;
}

double default_time_weight(const Grid& grid, const std::vector<double>& times) {
  if (times.size() < 2 || !(times.back() > times.front())) return 1.0;
  const double spacing = (times.back() - times.front()) / double(times.size() - 1);
  return grid.dx() / spacing;
}

SpacetimeDistance spacetime_frontier_distance(const std::vector<FrontierRecord>& a,
                                              const std::vector<FrontierRecord>& b, double time_weight) {
  if (a.size() != b.size()) throw InvalidArgument("spacetime_frontier_distance: time samples differ");
  if (!(time_weight >= 0.0)) throw InvalidArgument("time weight must be non-negative");
  SpacetimeDistance out;
  std::vector<std::size_t> frames;
  for (std::size_t k = 0; k < a.size(); ++k) {
    require_same_grid(a[k].support.grid, b[k].support.grid, "spacetime_frontier_distance");
    if (std::abs(a[k].time - b[k].time) > 1e-12 * std::max(1.0, std::abs(a[k].time)))
      throw InvalidArgument("spacetime_frontier_distance: time samples differ");
    if (a[k].boundary.empty() || b[k].boundary.empty())
      out.skipped_times.push_back(a[k].time);
    else
      frames.push_back(k);
  }
  if (frames.empty()) throw InvalidArgument("spacetime_frontier_distance: no frame with both frontiers present");

  auto directed = [&](const std::vector<FrontierRecord>& from, const std::vector<FrontierRecord>& to) {
    std::vector<Field> dist;
    dist.reserve(frames.size());
    for (std::size_t k : frames) dist.push_back(distance_to(to[k].boundary));
    double worst = 0.0;
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
      const FrontierRecord& fr = from[frames[fi]];
      for (Index c = 0; c < fr.boundary.size(); ++c) {
        if (!fr.boundary.bits[c]) continue;
        double best = kInf;
        for (std::size_t fj = 0; fj < frames.size(); ++fj) {
          const double dt = time_weight * (fr.time - to[frames[fj]].time);
          const double ds = dist[fj][c];
          best = std::min(best, std::sqrt(ds * ds + dt * dt));
        }
        worst = std::max(worst, best);
      }
    }
    return worst;
  };
  out.distance = std::max(directed(a, b), directed(b, a));
  return out;
}

// ---------------------------------------------------------------------------
// Morphology

Mask dilate(const Mask& mask, double r) {
  if (!(r >= 0.0)) throw InvalidArgument("dilation radius must be non-negative");
  if (mask.empty()) return mask;
  const Field d = distance_to(mask);
  return Mask(mask.grid, Mask::Bits(d.values <= r + 1e-9 * mask.grid.dx()));
}

Mask erode(const Mask& mask, double r) {
  if (!(r >= 0.0)) throw InvalidArgument("erosion radius must be non-negative");
  const Field d = distance_to_complement(mask);
  return Mask(mask.grid, Mask::Bits(mask.bits && (d.values > r + 1e-9 * mask.grid.dx())));
}

Field sup_convolve(const Field& u, double r) {
  return ball_filter(u, r, [](double a, double b) { return a > b; });
}

Field inf_convolve(const Field& u, double r) {
  return ball_filter(u, r, [](double a, double b) { return a < b; });
}

void ConvolutionParams::validate() const {
  if (!(r0 >= 0.0)) throw InvalidArgument("r0 must be non-negative");
  if (!(rate >= 0.0)) throw InvalidArgument("rate L must be non-negative");
  if (!(alpha >= 0.0 && alpha < 0.5)) throw InvalidArgument("alpha must lie in [0, 1/2)");
  if (!(tau0 >= 0.0)) throw InvalidArgument("tau0 must be non-negative");
}

Field interpolate_density(const Trajectory& traj, double t) {
  const auto& s = traj.snapshots;
  if (s.empty()) throw InvalidArgument("trajectory has no snapshots");
  const double tol = 1e-12 * std::max(1.0, std::abs(t));
  if (t < s.front().time - tol || t > s.back().time + tol) throw InvalidArgument("time outside the trajectory (horizon shortfall)");
  if (s.size() == 1 || t <= s.front().time) return Field(s.front().rho.grid, s.front().rho.values, t);
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (t <= s[k].time + tol) {
      const double span = s[k].time - s[k - 1].time;
      const double w = span > 0.0 ? std::clamp((t - s[k - 1].time) / span, 0.0, 1.0) : 1.0;
      return Field(s[k].rho.grid, (1.0 - w) * s[k - 1].rho.values + w * s[k].rho.values, t);
    }
  }
  return Field(s.back().rho.grid, s.back().rho.values, t);
}

ModifiedConvolutions modified_convolutions(const Trajectory& traj, const ConvolutionParams& params,
                                           const std::vector<double>& times) {
  params.validate();
  if (traj.spec.m.is_infinite()) throw InvalidArgument("modified convolutions need finite m");
  const double m = traj.spec.m.value();
  if (traj.snapshots.empty() || traj.snapshots.back().time < (1.0 + params.alpha) * params.tau0 - 1e-12)
    throw InvalidArgument("trajectory does not reach (1 + alpha) tau0 (horizon shortfall)");
  const double s1 = std::pow(1.0 - params.alpha, 1.0 / (m - 1.0));
  const double s2 = std::pow(1.0 + params.alpha, 1.0 / (m - 1.0));
  ModifiedConvolutions out;
  for (double t : times) {
    if (t < 0.0 || t > params.tau0 + 1e-12) throw InvalidArgument("modified convolution time outside [0, tau0]");
    const double r = params.radius(t);
    Field u1 = sup_convolve(interpolate_density(traj, (1.0 - params.alpha) * t), r);
    Field u2 = inf_convolve(interpolate_density(traj, (1.0 + params.alpha) * t), r);
    u1.values *= s1;
    u2.values *= s2;
    u1.time_stamp = u2.time_stamp = t;
    out.times.push_back(t);
    out.u1.push_back(std::move(u1));
    out.u2.push_back(std::move(u2));
  }
  return out;
}

bool satisfies_subquadratic_growth(const Field& p0, double gamma0, double varsigma0) {
  const Mask support = support_of(p0, 0.0);
  const Field dc = distance_to_complement(support);
  const double slack = std::sqrt(double(p0.grid.dim())) * p0.grid.dx();
  for (Index k = 0; k < p0.size(); ++k) {
    if (!support.bits[k]) continue;
    const double d = std::max(0.0, dc[k] - slack);
    if (p0[k] < gamma0 * std::pow(d, 2.0 - varsigma0) * (1.0 - 1e-12)) return false;
  }
  return true;
}

}  // namespace pmefb

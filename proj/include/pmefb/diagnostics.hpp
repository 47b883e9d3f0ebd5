#pragma once

// Measurements that tie simulated trajectories to the qualitative results about the
// model: semiconvexity margins of the pressure, monotonicity along streamlines,
// average-pressure growth at the free boundary, expansion rates of the support,
// convergence of supports in m, covering counts of the free boundary and
// oscillation integrals of the density.

#include <Eigen/Core>

#include <limits>
#include <string>
#include <vector>

#include "pmefb/geometry.hpp"
#include "pmefb/grid.hpp"
#include "pmefb/model.hpp"
#include "pmefb/pme_solver.hpp"

namespace pmefb {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Power laws.

/// Least-squares fit of log y = intercept + slope log x over the pairs with x, y > 0.
struct PowerFit {
  double slope = kNaN;
  double intercept = kNaN;
  double r2 = kNaN;
  int points = 0;
  /// Fewer than 4 usable points or R^2 < 0.8.
  bool inconclusive = true;
};

PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Semiconvexity of the pressure.

/// Delta_h p + div b + f(x, t, p) at every cell.
Field ab_quantity(const Field& p, const ModelSpec& spec, double t);

struct AbOptions {
  double eta0 = 0.1;
  /// Use the floor -C0 / (m - 1), valid when the initial data are compatible; eta0 may then be 0.
  bool improved_floor = false;
  int sample_density = 32;
};

struct AbRow {
  double time = 0.0;
  double min_q = kNaN;
  double floor = 0.0;
  double margin = kNaN;
  double tolerance = 0.0;
  Index argmin = -1;
  Index interior_cells = 0;
  bool pass = true;
};

struct AbReport {
  double eta0 = 0.0;
  double c0 = 0.0;
  double p_max = 0.0;
  bool improved_floor = false;
  std::vector<AbRow> rows;
  bool pass = true;
};

/// Minimum of Delta_h p + div b + f over erode(support, 2 dx) at every snapshot with t >= eta0
/// (t > 0 for the improved floor), against -(C0 + 1/t)/(m - 1) or -C0/(m - 1). A row passes when
/// the margin is at least -max(0.1, 10 dx)(1 + |p|_inf). C0 comes from `ab_constant` with p_max
/// the largest pressure of the trajectory (or the user bound).
AbReport ab_check(const Trajectory& traj, const AbOptions& opts);

// ---------------------------------------------------------------------------
// Monotonicity along streamlines.

struct MonotonicityReport {
  int pairs = 0;
  int failures = 0;
  /// Largest number of flowed cells outside the dilated later support, over all pairs.
  Index worst_excess = 0;
  double worst_t0 = kNaN;
  double worst_t1 = kNaN;
  bool pass = true;
};

/// flow_map_set(Omega(t_i), t_j - t_i) inside dilate(Omega(t_j), slack_cells dx) for all i < j.
MonotonicityReport streamline_monotonicity(const Trajectory& traj, double slack_cells = 2.0, double threshold = -1.0);

struct DecayOptions {
  double t_min = 0.1;
  int max_probes = 512;
  double required_fraction = 0.95;
};

struct DecayReport {
  double c0 = 0.0;
  int probes = 0;
  int passed = 0;
  double fraction = 0.0;
  double worst_shortfall = 0.0;
  bool pass = true;
};

/// p(X(x0, t0; s), t0 + s) >= exp(-(C0 + 1/t0) s) p(x0, t0) - 10 dx for support cells x0 at every
/// snapshot t0 >= t_min and every later snapshot, with bilinear sampling of the later pressure.
DecayReport streamline_decay(const Trajectory& traj, const DecayOptions& opts);

/// Pressure at an arbitrary point by bilinear interpolation of cell values (zero outside).
double sample_bilinear(const Field& u, const Vec& x);

// ---------------------------------------------------------------------------
// Average pressure at free-boundary points.

/// Where the backward streamline from a probe lands at the previous snapshot.
enum class StreamlineBranch { on_boundary, inside_support, outside_support, no_previous };

const char* to_string(StreamlineBranch b);

struct ProbeRow {
  Vec x;
  /// Ball averages per radius; NaN when the ball leaves the grid.
  std::vector<double> averages;
  bool skipped = false;
  StreamlineBranch branch = StreamlineBranch::no_previous;
};

struct AvgPressureTable {
  double time = 0.0;
  std::vector<double> radii;
  std::vector<ProbeRow> probes;
  /// Mean over non-skipped probes, per radius.
  std::vector<double> pooled;
  PowerFit fit;
  int skipped = 0;
};

/// Mean of p over the cells whose centres lie in the closed ball B(x, r); NaN when the ball leaves
/// the grid.
double ball_average(const Field& p, const Vec& x, double r);

/// Free-boundary points at sub-cell resolution. Takes every k-th support-side boundary cell of
/// {p > threshold} (k chosen so at most `max_probes` remain, raster order) and moves its centre
/// against the inward one-sided gradient to the zero of the linear extrapolation, by at most 1.5 dx.
/// A negative threshold selects 1e-3 |p|_inf, which keeps thin numerical precursors out.
std::vector<Vec> front_points(const Field& p, int max_probes = 512, double threshold = -1.0);

/// Ball averages around the given points of snapshot `snapshot`, their pooled mean, a log-log fit
/// of the pooled mean against r, and where each point's backward streamline lands in the previous
/// snapshot's support (extracted with `threshold`, default when negative).
AvgPressureTable avg_pressure_probe(const Trajectory& traj, std::size_t snapshot, const std::vector<Vec>& points,
                                    const std::vector<double>& radii, double threshold = -1.0);

// ---------------------------------------------------------------------------
// Expansion of the support.

struct ExpansionOptions {
  double eta0 = 0.1;
  /// Backward times; each is rounded to the nearest available frame.
  std::vector<double> s_ladder;
  int max_probes = 512;
  /// Times for the initial expansion test; empty skips it.
  std::vector<double> tau_ladder;
  double expansion_constant = 0.25;
  double threshold = -1.0;
};

struct ExpansionRow {
  double s = 0.0;
  int samples = 0;
  double median = kNaN;
  double min = kNaN;
  /// Fraction of samples with a positive distance.
  double positive_fraction = 0.0;
};

struct GrowthRow {
  double s = 0.0;
  /// max over t0 of the directed distance from Omega(t0 + s) to the raster flow of Omega(t0).
  double growth = 0.0;
};

struct InitialExpansionRow {
  double tau = 0.0;
  double r_tau = 0.0;
  double required = 0.0;
  bool pass = true;
};

struct ExpansionReport {
  double eta0 = 0.0;
  int probes = 0;
  std::vector<ExpansionRow> backward;
  PowerFit fit;
  double gamma = kNaN;
  double c_star = kNaN;
  std::vector<GrowthRow> forward;
  /// max over s of growth / sqrt(s).
  double speed_cap = 0.0;
  std::vector<InitialExpansionRow> initial;
  bool initial_pass = true;
};

/// Backward distances d(X(x0, t0; -s), Omega(t0 - s)) for support-side free-boundary cells with
/// t0 >= eta0, pooled by median; gamma is fitted on the medians exceeding dx and
/// C_* = min over those s of median / s^gamma. Forward growth is measured against the undilated
/// flow of the earlier support. The initial test measures
/// r_tau = max(0, min over the flowed Omega(0) of d(., Omega(tau)^c) - dx) and requires
/// r_tau >= expansion_constant tau^(2 / varsigma0).
ExpansionReport strict_expansion_measure(const Trajectory& traj, const ExpansionOptions& opts);

// ---------------------------------------------------------------------------
// Convergence in m.

struct ConvergenceOptions {
  double eta0 = 0.1;
  /// Weight w of the time axis; non-positive selects one cell per frame.
  double time_weight = 0.0;
  /// Radius r of the free-boundary proximity checks; non-positive selects 4 dx.
  double proximity_radius = 0.0;
  double threshold = -1.0;
};

struct ProximityStats {
  /// max over free-boundary points x0 and s in [0, r^2] of d(x0, Omega_l(t0 - s)).
  double to_support = 0.0;
  /// max over free-boundary points x0 of d(x0, Omega_l(t0 - r)^c).
  double to_complement = 0.0;
  Index points = 0;
};

struct ConvergenceTable {
  /// "10", "20", ..., "inf".
  std::vector<std::string> labels;
  std::vector<double> times;
  /// Space-time L1 distance of pressures (trapezoid in time).
  Eigen::MatrixXd beta;
  /// Hausdorff distance of initial supports.
  Eigen::MatrixXd gamma;
  /// Per label index M: sup over M <= m, l <= infinity of beta; sup over finite M <= m, l of the
  /// initial-support distance; sup over finite m >= M of the initial distance to the limit.
  std::vector<double> beta_tail, gamma_tail, gamma_prime_tail;
  /// One matrix per time.
  std::vector<Eigen::MatrixXd> hausdorff;
  Eigen::MatrixXd spacetime;
  /// (i, j): smallest k with Omega_i(t) in dilate(Omega_j(t), k dx) for all t >= eta0.
  Eigen::MatrixXd containment_cells;
  /// Same over 0 < t < eta0.
  Eigen::MatrixXd early_containment_cells;
  /// (i, j): free-boundary proximity of run i (the good part for the limit) to the sets of run j.
  std::vector<std::vector<ProximityStats>> proximity;
  double proximity_radius = 0.0;
  double time_weight = 0.0;
};

/// Good part of the limit free boundary at frame k: boundary-band cells within 3 dx of a cell that
/// is interior to the support at frames k-1..k+1 and of a cell interior to the complement there.
Mask good_boundary(const std::vector<FrontierRecord>& records, std::size_t k);

/// Runs must share grid and snapshot times. Pass the limit run last, or none.
ConvergenceTable convergence_report(const std::vector<const Trajectory*>& runs, const ConvergenceOptions& opts);

// ---------------------------------------------------------------------------
// Covering counts of the free boundary.

/// Size of a greedy disjoint family of balls B(x, R) centred at cells of `set`, picked in raster
/// order; every cell of the set lies within 2R of a pick, so the tripled balls cover it.
Index vitali_count(const Mask& set, double radius);

struct DimensionEstimate {
  double time = 0.0;
  std::vector<double> radii;
  std::vector<Index> counts;
  PowerFit fit;
  double dimension = kNaN;
  double bound = kNaN;
  Index frontier_cells = 0;
  bool monotone = true;
};

/// d - sigma_m + mu / (m - 1).
double dimension_bound(int dim, double sigma_m, double mu, double m);

/// Counts on the boundary band and the slope of log count against log(1/R). Requires at least 4
/// radii, each >= 3 dx and at most a quarter of the support extent, and 16 boundary cells.
DimensionEstimate covering_dimension(const FrontierRecord& frontier, const std::vector<double>& radii,
                                     double bound = kNaN);

// ---------------------------------------------------------------------------
// Oscillation of the density.

/// Integral of sup_{B(x, r)} rho - inf_{B(x, r)} rho. Requires r >= dx.
double oscillation_integral(const Field& rho, double r);

/// Fit of osc(r) ~ r^sigma over the ladder.
PowerFit oscillation_exponent(const Field& rho, const std::vector<double>& radii);

struct PropagationFit {
  std::vector<double> times;
  std::vector<double> radii;
  /// osc(t_k, r_j) at (k, j).
  Eigen::MatrixXd osc;
  /// Smallest C in [1, c_max] with osc(t, r) <= C (r + osc(0, C r)) everywhere; infinity if none.
  double c = std::numeric_limits<double>::infinity();
  bool pass = false;
};

PropagationFit propagation_constant(const Trajectory& traj, const std::vector<double>& radii, double c_max = 20.0);

// ---------------------------------------------------------------------------
// Ordering of the modified sup- and inf-convolutions.

/// alpha = 4 C1 r0 / s, L = 4 C1 + 8 e C1^2 / s, tau0 = min(1/L, s / (4 e C1), T/2) with
/// s = inf(div b + f) and C1 = 1 + |b|_{C21} + |f|_{C1}. Throws UnsupportedRegime when s <= 0
/// or alpha >= 1/2.
ConvolutionParams convolution_params(const AssumptionReport& audit, double r0, double horizon);

struct OrderingReport {
  ConvolutionParams params;
  std::vector<double> times;
  /// max(u1 - rho1) and max(rho2 - u2) per time.
  std::vector<double> lower_violation;
  std::vector<double> upper_violation;
  double tolerance = 1e-6;
  bool pass = true;
};

/// Runs rho from the model's initial data, builds u1, u2 at `times` in [0, tau0] from snapshots taken exactly
/// at (1 -+ alpha) t, runs rho1 from u1(., 0) and rho2 from u2(., 0), and compares.
OrderingReport convolution_ordering(const ModelSpec& spec, const Grid& grid, const ConvolutionParams& params,
                                   const std::vector<double>& times, const SolveConfig& cfg,
                                   double tolerance = 1e-6);

}  // namespace pmefb

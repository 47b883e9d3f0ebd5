#pragma once

// Streamlines of -b, flow maps of cell sets, supports and free-boundary bands, exact
// Euclidean distance transforms, Hausdorff distances and ball morphology.

#include <Eigen/Core>

#include <limits>
#include <utility>
#include <vector>

#include "pmefb/grid.hpp"
#include "pmefb/model.hpp"
#include "pmefb/pme_solver.hpp"

namespace pmefb {

// ---------------------------------------------------------------------------
// Streamlines: d/ds X(x0, t0; s) = -b(X, t0 + s), X(x0, t0; 0) = x0.

struct StreamlineTrace {
  Vec x0;
  double t0 = 0.0;
  /// (s, X) pairs sorted by s, containing s = 0.
  std::vector<std::pair<double, Vec>> samples;
  /// The path left the domain box scaled by 2 about its centre and was cut there.
  bool truncated = false;
};

/// RK4 step h = min(dx / |b|_inf, 0.01 T) / 2, where |b|_inf is taken over the domain.
double streamline_step(const ModelSpec& spec, double dx);

/// Integrates forward to s_max >= 0 and backward to s_min <= 0.
StreamlineTrace integrate_streamline(const Vec& x0, double t0, double s_min, double s_max, const ModelSpec& spec,
                                     double dx);

/// X(x0, t0; s) by RK4 with the step of `streamline_step`.
Vec flow_point(const Vec& x0, double t0, double s, const ModelSpec& spec, double dx);

/// X(., t0; s) as an affine map x -> A x + c. Every drift kind is affine and stationary, so the RK4
/// propagator over the whole interval is affine and is composed once instead of per point.
struct AffineFlow {
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  Vec apply(const Vec& x) const;
};
AffineFlow flow_propagator(const ModelSpec& spec, double t0, double s, double dx);

/// Cells containing X(x, t0; s) for the centres x of `mask`, without dilation.
Mask flow_map_raster(const Mask& mask, double t0, double s, const ModelSpec& spec);

/// Pushes every cell centre of `mask` to X(., t0; s), rasterizes, then dilates by a closed ball of
/// one cell (the 4-neighbourhood) to cover rasterization gaps.
Mask flow_map_set(const Mask& mask, double t0, double s, const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Distances.

/// Exact Euclidean distance from each cell centre to the nearest centre in `mask`
/// (separable lower-envelope transform). Infinite everywhere when the mask is empty.
Field distance_to(const Mask& mask);

/// Distance to the complement of `mask`, counting cells outside the grid as complement.
Field distance_to_complement(const Mask& mask);

/// sup over a of d(x, b). Throws InvalidArgument when either set is empty.
double directed_distance(const Mask& a, const Mask& b);
/// max of the two directed distances.
double hausdorff_distance(const Mask& a, const Mask& b);

// ---------------------------------------------------------------------------
// Supports and free boundaries.

struct FrontierRecord {
  double time = 0.0;
  Mask support;
  /// Support cells with a non-support 4-neighbour together with non-support cells with a
  /// support 4-neighbour.
  Mask boundary;
  Field dist_to_support;
  Field dist_to_complement;
};

Mask support_of(const Field& p, double threshold);
Mask boundary_band(const Mask& support);
FrontierRecord extract_frontier(const Field& p, double threshold);
/// Threshold max(1e-10, 1e-6 |p|_inf).
FrontierRecord extract_frontier(const Field& p);

/// Frontier records of every snapshot, using the support pressure of the trajectory.
std::vector<FrontierRecord> frontiers(const Trajectory& traj, double threshold = -1.0);

struct SpacetimeDistance {
  double distance = 0.0;
  /// Times skipped because one side had an empty free boundary.
  std::vector<double> skipped_times;
};

/// Hausdorff distance between {(x, w t) : x in Gamma_A(t)} and {(y, w s) : y in Gamma_B(s)}.
SpacetimeDistance spacetime_frontier_distance(const std::vector<FrontierRecord>& a,
                                              const std::vector<FrontierRecord>& b, double time_weight);

/// One frame spacing maps to one cell: dx / (mean frame spacing).
double default_time_weight(const Grid& grid, const std::vector<double>& times);

// ---------------------------------------------------------------------------
// Ball morphology. Radii are lengths; balls are closed and clipped to the grid.

Mask dilate(const Mask& mask, double r);
Mask erode(const Mask& mask, double r);
Field sup_convolve(const Field& u, double r);
Field inf_convolve(const Field& u, double r);

struct ConvolutionParams {
  double r0 = 0.0;
  double rate = 0.0;   // L
  double alpha = 0.0;
  double tau0 = 0.0;

  double radius(double t) const { return r0 * std::exp(-rate * t); }
  void validate() const;
};

struct ModifiedConvolutions {
  std::vector<double> times;
  std::vector<Field> u1;
  std::vector<Field> u2;
};

/// u1(x, t) = (1 - alpha)^(1/(m-1)) sup_{B(x, r(t))} rho(y, (1 - alpha) t) and
/// u2(x, t) = (1 + alpha)^(1/(m-1)) inf_{B(x, r(t))} rho(y, (1 + alpha) t), at the given times,
/// with rho interpolated linearly between snapshots.
ModifiedConvolutions modified_convolutions(const Trajectory& traj, const ConvolutionParams& params,
                                           const std::vector<double>& times);

/// Density of a trajectory at time t, linear between snapshots.
Field interpolate_density(const Trajectory& traj, double t);

/// p0(x) >= gamma0 d(x, Omega(0)^c)^(2 - varsigma0) on every cell, with d measured from cell centres
/// to the nearest non-support centre less one cell diagonal.
bool satisfies_subquadratic_growth(const Field& p0, double gamma0, double varsigma0);

}  // namespace pmefb

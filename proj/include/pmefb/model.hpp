#pragma once

// Problem instances for the porous medium equation with drift and source,
//
//   d_t rho = div(rho grad p) + div(rho b) + rho f(x, t, p),   p = m/(m-1) rho^(m-1),
//
// together with the m = infinity (Hele-Shaw) limit, the audit of the standing
// structural assumptions, and the a-priori constants that the diagnostics use.

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pmefb/grid.hpp"

namespace pmefb {

/// Porous-medium exponent m > 1, or the incompressible limit m = infinity.
class Exponent {
public:
  Exponent() = default;
  explicit Exponent(double m) : m_(m) {
    if (!(m > 1.0)) throw InvalidArgument("exponent m must exceed 1");
  }
  static Exponent infinite() { return Exponent(std::numeric_limits<double>::infinity()); }

  bool is_infinite() const { return std::isinf(m_); }
  double value() const { return m_; }
  bool operator==(const Exponent&) const = default;

private:
  double m_ = 2.0;
};

// ---------------------------------------------------------------------------
// Drift fields b(x, t). All kinds are affine in x and stationary in t, so the
// second spatial derivatives and the time derivative vanish identically.

enum class DriftKind { constant, rotation, shear, gradient_potential };

struct Drift {
  DriftKind kind = DriftKind::constant;
  Vec vector = Vec::Zero(1);  // constant kind: b itself
  Vec center = Vec::Zero(1);  // reference point of rotation / shear / potential
  double rate = 0.0;          // angular speed, shear rate, or potential stiffness

  static Drift zero(int dim);
  static Drift constant(const Vec& b);
  /// b = omega (-(x2 - c2), x1 - c1).
  static Drift rotation(double omega, const Vec& center);
  /// b = (kappa (x2 - c2), 0).
  static Drift shear(double kappa, const Vec& center);
  /// b = grad(k/2 |x - c|^2) = k (x - c).
  static Drift gradient_potential(double k, const Vec& center);

  int dim() const { return static_cast<int>(center.size()); }
  Vec value(const Vec& x, double t) const;
  double divergence(const Vec& x, double t) const;
  /// d x d Jacobian, entry (i, j) = d b_i / d x_j.
  Eigen::Matrix2d jacobian(const Vec& x, double t) const;
  bool is_zero() const;
  bool operator==(const Drift&) const = default;
};

// ---------------------------------------------------------------------------
// Sources f(x, t, p) = c0 + cx.x + cxx.x^2 + ct t - cp p. The named kinds are
// restrictions of this polynomial.

enum class SourceKind { constant, logistic, polynomial };

struct Source {
  SourceKind kind = SourceKind::constant;
  double c0 = 0.0;
  Vec cx = Vec::Zero(1);
  Vec cxx = Vec::Zero(1);
  double ct = 0.0;
  double cp = 0.0;

  static Source constant(int dim, double value);
  /// f(p) = a - p.
  static Source logistic(int dim, double a);
  static Source polynomial(double c0, const Vec& cx, const Vec& cxx, double ct, double cp);

  double value(const Vec& x, double t, double p) const;
  double dp(const Vec& x, double t, double p) const;
  Vec grad_x(const Vec& x, double t, double p) const;
  double dt(const Vec& x, double t, double p) const;
  /// f = f(p) only (no x or t dependence).
  bool depends_only_on_p() const;
  bool is_zero() const;
  bool operator==(const Source&) const = default;
};

// ---------------------------------------------------------------------------
// Initial data.

struct Barenblatt;

enum class InitKind { barenblatt, smooth_bump, patch, annulus_plus_core, custom_grid };

struct InitialData {
  InitKind kind = InitKind::smooth_bump;
  Vec center = Vec::Zero(1);
  /// Support radius for bump / patch; length scale for annulus_plus_core (core radius).
  double radius = 0.5;
  /// smooth_bump: p0 = gamma0 ((R^2 - |x - c|^2)_+ / R)^(2 - varsigma0) >= gamma0 d(x, Omega^c)^(2 - varsigma0).
  double gamma0 = 1.0;
  double varsigma0 = 1.0;
  /// barenblatt: profile of the self-similar solution at this time with this constant.
  double barenblatt_time = 1.0;
  double barenblatt_constant = 1.0;
  /// When positive, overrides the constant so that the front sits at this radius at barenblatt_time.
  double barenblatt_front = 0.0;
  /// patch: mollification radius (cells) applied for finite m.
  double mollify_cells = 2.0;
  /// custom_grid: pressure values on the run grid.
  std::vector<double> values;

  /// Self-similar profile selected by the barenblatt fields for exponent m.
  Barenblatt barenblatt(int dim, double m) const;
  /// Radius of a ball around `center` containing the support (for finite m).
  double support_radius(int dim, double m) const;
  bool operator==(const InitialData&) const = default;
};

/// Self-similar source-type solution of d_t rho = Lap rho^m in R^d:
/// rho = t^-alpha (C - k |x|^2 t^-2beta)_+^(1/(m-1)).
struct Barenblatt {
  int dim = 1;
  double m = 2.0;
  double constant = 1.0;

  double alpha() const { return dim / (dim * (m - 1.0) + 2.0); }
  double beta() const { return alpha() / dim; }
  double k() const { return alpha() * (m - 1.0) / (2.0 * m * dim); }
  double density(double r, double t) const;
  double pressure(double r, double t) const;
  double front(double t) const;
  /// Lap p inside the support; equals -alpha / t.
  double pressure_laplacian(double t) const;
};

// ---------------------------------------------------------------------------

struct ModelSpec {
  Exponent m;
  Drift drift;
  Source source;
  double horizon = 1.0;
  Box domain;
  InitialData init;
  /// Dimensional constant in the Aronson-Benilan constant.
  double c_d = 1.0;
  /// User bound on the pressure range; derived from the data when absent.
  std::optional<double> p_max_bound;

  int dim() const { return domain.dim(); }
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

/// p = m/(m-1) rho^(m-1). Rejects negative cells.
Field pressure_from_density(const Field& rho, double m);
/// rho = ((m-1)/m p)^(1/(m-1)). Rejects negative cells.
Field density_from_pressure(const Field& p, double m);

/// Scalar forms used in the inner loops. Integer exponents use repeated squaring.
double pressure_of(double rho, double m);
double density_of(double p, double m);

/// Initial pressure on `grid` for finite m.
Field initial_pressure(const ModelSpec& spec, const Grid& grid);
/// Initial density on `grid`; for m = infinity this is the L1 limit of the finite-m data.
Field initial_density(const ModelSpec& spec, const Grid& grid);

// ---------------------------------------------------------------------------

struct AssumptionNorms {
  double b_inf = 0.0;       // sup |b|
  double db_inf = 0.0;      // sup |grad b| (Frobenius)
  double divb_inf = 0.0;    // sup |div b|
  double b_c21 = 0.0;       // sup|b| + sup|Db| + sup|D^2 b| + sup|d_t b|
  double f_c1 = 0.0;        // sup (|grad_x f| + |d_t f| + |d_p f|)
  double f_c1_xt = 0.0;     // sup (|grad_x f| + |d_t f|)
  double f0_inf = 0.0;      // sup |f(., ., 0)|
  double fplus_inf = 0.0;   // sup f_+
  double f_inf = 0.0;       // sup |f|
  double fp_inf = 0.0;      // sup |d_p f|
};

struct AssumptionFlags {
  bool norms_finite = false;  // drift and source norms finite on the sample
  bool cond = false;          // sigma > 0
  bool h2 = false;            // div b + f >= sigma_tilde > 0 and d_p f <= 0
  bool r11 = false;           // initial compatibility: Lap p0 + div b(., 0) + f(., 0, p0) >= 0
  /// b = 0, f = f(p), f >= 0, -f_p >= 0: the AB estimate holds without sigma > 0.
  bool autonomous_waiver = false;
};

struct AssumptionReport {
  double sigma = 0.0;        // inf div b + f - p d_p f
  double sigma_tilde = 0.0;  // inf div b + f
  double fp_sup = 0.0;       // sup d_p f
  double r11_margin = std::numeric_limits<double>::quiet_NaN();
  double p_max = 0.0;        // top of the pressure range used for the constant
  double p_sample_max = 0.0; // top of the sampled pressure range
  AssumptionNorms norms;
  double c0_ab = std::numeric_limits<double>::quiet_NaN();
  AssumptionFlags satisfied;
  int sample_density = 0;
};

/// Samples drift and source on a nested lattice: (N+1)^d points of the domain box, N+1
/// times in [0, T], N+1 pressures in [0, 1.5 p_max]. Doubling N only adds points.
AssumptionReport audit_assumptions(const ModelSpec& spec, int sample_density, double p_max);
/// Same, with p_max derived from the initial data on `grid` and the initial-data compatibility flag filled.
AssumptionReport audit_assumptions(const ModelSpec& spec, const Grid& grid, int sample_density = 32);

/// sup p0 * exp(||f_+|| T), or the user bound when given.
double default_p_max(const ModelSpec& spec, const Field& p0);

/// inf over cells of Lap_h p0 + div b(x, 0) + f(x, 0, p0).
double r11_margin(const ModelSpec& spec, const Field& p0);

/// C0 = C_d (1 + 1/sigma)(1 + p_max)(1 + ||d_p f||)(1 + ||b||_{C21}^2 + ||f||_{C1_xt}^2 + ||f||_inf),
/// suprema over [0, p_max]. Under the autonomous waiver (b = 0, f = f(p) >= 0, f_p <= 0) with
/// sigma = 0 this falls back to C_d 2 (1 + ||d_p f||)(1 + p_max). Throws UnsupportedRegime otherwise.
double ab_constant(const ModelSpec& spec, double p_max, int sample_density = 32);

/// Radial barrier (C/2)(R(t)^2 - |x|^2)_+ dominating every p_m:
/// R' = C R + ||b||, C = max(1, (||div b|| + ||f_+||)/d).
struct SupportBarrier {
  double rate = 1.0;
  double r0 = 0.0;
  double b_inf = 0.0;

  double radius(double t) const;
};

/// R(0) is the smallest radius for which the barrier dominates p0 on the grid.
SupportBarrier support_barrier(const ModelSpec& spec, const Field& p0, int sample_density = 32);

/// R(t) of the barrier built from the initial data on `grid`.
double theoretical_support_radius(const ModelSpec& spec, const Grid& grid, double t);

}  // namespace pmefb

#include "pmefb/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pmefb {

namespace {

std::string where(const Vec& x, double t, double p) {
  std::ostringstream os;
  os << "x=(";
  for (Index a = 0; a < x.size(); ++a) os << (a ? "," : "") << x[a];
  os << ") t=" << t << " p=" << p;
  return os.str();
}

// x^e for integral e >= 0 by repeated squaring.
double ipow(double x, unsigned e) {
  double r = 1.0;
  while (e) {
    if (e & 1u) r *= x;
    x *= x;
    e >>= 1u;
  }
  return r;
}

bool integral(double e) { return e >= 0.0 && e <= 1024.0 && std::floor(e) == e; }

}  // namespace

// ---------------------------------------------------------------------------
// Drift

Drift Drift::zero(int dim) { return constant(Vec::Zero(dim)); }

Drift Drift::constant(const Vec& b) {
  Drift d;
  d.kind = DriftKind::constant;
  d.vector = b;
  d.center = Vec::Zero(b.size());
  return d;
}

Drift Drift::rotation(double omega, const Vec& center) {
  if (center.size() != 2) throw InvalidArgument("rotation drift needs d = 2");
  Drift d;
  d.kind = DriftKind::rotation;
  d.vector = Vec::Zero(2);
  d.center = center;
  d.rate = omega;
  return d;
}

Drift Drift::shear(double kappa, const Vec& center) {
  if (center.size() != 2) throw InvalidArgument("shear drift needs d = 2");
  Drift d;
  d.kind = DriftKind::shear;
  d.vector = Vec::Zero(2);
  d.center = center;
  d.rate = kappa;
  return d;
}

Drift Drift::gradient_potential(double k, const Vec& center) {
  Drift d;
  d.kind = DriftKind::gradient_potential;
  d.vector = Vec::Zero(center.size());
  d.center = center;
  d.rate = k;
  return d;
}

Vec Drift::value(const Vec& x, double) const {
  switch (kind) {
    case DriftKind::constant: return vector;
    case DriftKind::rotation: return make_vec(-rate * (x[1] - center[1]), rate * (x[0] - center[0]));
    case DriftKind::shear: return make_vec(rate * (x[1] - center[1]), 0.0);
    case DriftKind::gradient_potential: return rate * (x - center);
  }
  return vector;
}

double Drift::divergence(const Vec&, double) const {
  return kind == DriftKind::gradient_potential ? rate * dim() : 0.0;
}

Eigen::Matrix2d Drift::jacobian(const Vec&, double) const {
  Eigen::Matrix2d j = Eigen::Matrix2d::Zero();
  switch (kind) {
    case DriftKind::constant: break;
    case DriftKind::rotation:
      j(0, 1) = -rate;
      j(1, 0) = rate;
      break;
    case DriftKind::shear: j(0, 1) = rate; break;
    case DriftKind::gradient_potential:
      for (int a = 0; a < dim(); ++a) j(a, a) = rate;
      break;
  }
  return j;
}

bool Drift::is_zero() const {
  return kind == DriftKind::constant ? vector.isZero(0.0) : rate == 0.0;
}

// ---------------------------------------------------------------------------
// Source

Source Source::constant(int dim, double value) {
  Source s;
  s.kind = SourceKind::constant;
  s.c0 = value;
  s.cx = Vec::Zero(dim);
  s.cxx = Vec::Zero(dim);
  return s;
}

Source Source::logistic(int dim, double a) {
  Source s = constant(dim, a);
  s.kind = SourceKind::logistic;
  s.cp = 1.0;
  return s;
}

Source Source::polynomial(double c0, const Vec& cx, const Vec& cxx, double ct, double cp) {
  if (cx.size() != cxx.size()) throw InvalidArgument("source coefficients differ in dimension");
  Source s;
  s.kind = SourceKind::polynomial;
  s.c0 = c0;
  s.cx = cx;
  s.cxx = cxx;
  s.ct = ct;
  s.cp = cp;
  return s;
}

double Source::value(const Vec& x, double t, double p) const {
  double v = c0 + ct * t - cp * p;
  for (Index a = 0; a < x.size(); ++a) v += cx[a] * x[a] + cxx[a] * x[a] * x[a];
  return v;
}

double Source::dp(const Vec&, double, double) const { return -cp; }

Vec Source::grad_x(const Vec& x, double, double) const {
  Vec g(x.size());
  for (Index a = 0; a < x.size(); ++a) g[a] = cx[a] + 2.0 * cxx[a] * x[a];
  return g;
}

double Source::dt(const Vec&, double, double) const { return ct; }

bool Source::depends_only_on_p() const { return ct == 0.0 && cx.isZero(0.0) && cxx.isZero(0.0); }

bool Source::is_zero() const { return c0 == 0.0 && cp == 0.0 && depends_only_on_p(); }

// ---------------------------------------------------------------------------
// Barenblatt

double Barenblatt::density(double r, double t) const {
  const double base = constant - k() * r * r * std::pow(t, -2.0 * beta());
  if (base <= 0.0) return 0.0;
  return std::pow(t, -alpha()) * std::pow(base, 1.0 / (m - 1.0));
}

double Barenblatt::pressure(double r, double t) const {
  const double base = constant - k() * r * r * std::pow(t, -2.0 * beta());
  if (base <= 0.0) return 0.0;
  return m / (m - 1.0) * std::pow(t, -alpha() * (m - 1.0)) * base;
}

double Barenblatt::front(double t) const { return std::sqrt(constant / k()) * std::pow(t, beta()); }

double Barenblatt::pressure_laplacian(double t) const { return -alpha() / t; }

// ---------------------------------------------------------------------------

Barenblatt InitialData::barenblatt(int dim, double m) const {
  Barenblatt b{dim, m, barenblatt_constant};
  if (barenblatt_front > 0.0) b.constant = b.k() * std::pow(barenblatt_front / std::pow(barenblatt_time, b.beta()), 2.0);
  return b;
}

double InitialData::support_radius(int dim, double m) const {
  switch (kind) {
    case InitKind::barenblatt: return barenblatt(dim, m).front(barenblatt_time);
    case InitKind::smooth_bump:
    case InitKind::patch: return radius;
    case InitKind::annulus_plus_core: return 2.0 * radius;
    case InitKind::custom_grid: return std::numeric_limits<double>::infinity();
  }
  return radius;
}

void ModelSpec::validate() const {
  const int d = dim();
  if (d != 1 && d != 2) throw InvalidArgument("domain dimension must be 1 or 2");
  if (domain.upper.size() != d) throw InvalidArgument("domain corners differ in dimension");
  if (!(domain.volume() > 0.0)) throw InvalidArgument("domain must have positive volume");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be positive");
  if (drift.center.size() != d || (drift.kind == DriftKind::constant && drift.vector.size() != d))
    throw InvalidArgument("drift dimension does not match the domain");
  if ((drift.kind == DriftKind::rotation || drift.kind == DriftKind::shear) && d != 2)
    throw InvalidArgument("rotation and shear drifts need d = 2");
  if (source.cx.size() != d || source.cxx.size() != d)
    throw InvalidArgument("source dimension does not match the domain");
  if (init.center.size() != d) throw InvalidArgument("initial data centre dimension does not match the domain");
  if (!(init.radius > 0.0)) throw InvalidArgument("initial data radius must be positive");
  if (init.kind == InitKind::smooth_bump && !(init.varsigma0 > 0.0 && init.varsigma0 <= 1.0))
    throw InvalidArgument("smooth_bump exponent varsigma0 must lie in (0, 1]");
  if (init.kind == InitKind::smooth_bump && !(init.gamma0 > 0.0))
    throw InvalidArgument("smooth_bump amplitude gamma0 must be positive");
  if (init.kind == InitKind::barenblatt && !(init.barenblatt_time > 0.0 && init.barenblatt_constant > 0.0))
    throw InvalidArgument("barenblatt time and constant must be positive");
  if (!(c_d > 0.0)) throw InvalidArgument("c_d must be positive");
  if (p_max_bound && !(*p_max_bound > 0.0)) throw InvalidArgument("p_max bound must be positive");
}

// ---------------------------------------------------------------------------
// Density / pressure

double pressure_of(double rho, double m) {
  if (rho <= 0.0) return 0.0;
  const double e = m - 1.0;
  const double r = integral(e) ? ipow(rho, static_cast<unsigned>(e)) : std::pow(rho, e);
  return m / e * r;
}

double density_of(double p, double m) {
  if (p <= 0.0) return 0.0;
  const double e = m - 1.0;
  return std::pow(e / m * p, 1.0 / e);
}

Field pressure_from_density(const Field& rho, double m) {
  if (!(m > 1.0) || std::isinf(m)) throw InvalidArgument("pressure_from_density needs finite m > 1");
  Field p(rho.grid, 0.0, rho.time_stamp);
  for (Index k = 0; k < rho.size(); ++k) {
    if (rho[k] < 0.0) throw InvalidArgument("negative density at cell " + std::to_string(k));
    p[k] = pressure_of(rho[k], m);
  }
  return p;
}

Field density_from_pressure(const Field& p, double m) {
  if (!(m > 1.0) || std::isinf(m)) throw InvalidArgument("density_from_pressure needs finite m > 1");
  Field rho(p.grid, 0.0, p.time_stamp);
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] < 0.0) throw InvalidArgument("negative pressure at cell " + std::to_string(k));
    rho[k] = density_of(p[k], m);
  }
  return rho;
}

// ---------------------------------------------------------------------------
// Initial data

namespace {

Field patch_indicator(const InitialData& init, const Grid& grid) {
  return sample(grid, [&](const Vec& x) { return (x - init.center).norm() < init.radius ? 1.0 : 0.0; });
}

// Average over the discrete ball of radius `cells` cells.
Field mollify(const Field& u, double cells) {
  const Grid& g = u.grid;
  const int w = static_cast<int>(std::floor(cells));
  if (w <= 0) return u;
  Field out(g, 0.0, u.time_stamp);
  for (int j = 0; j < g.rows(); ++j) {
    for (int i = 0; i < g.cells_per_axis(); ++i) {
      double s = 0.0;
      int count = 0;
      const int wy = g.dim() == 2 ? w : 0;
      for (int dj = -wy; dj <= wy; ++dj)
        for (int di = -w; di <= w; ++di) {
          if (di * di + dj * dj > cells * cells) continue;
          s += u.at(i + di, j + dj);
          ++count;
        }
      out[g.index(i, j)] = s / count;
    }
  }
  return out;
}

double annulus_pressure(double r, double m) {
  if (r <= 1.0) return std::pow(0.5 + 0.5 * r * r, m - 1.0);
  if (r <= 1.5) return 1.0;
  if (r <= 2.0) return 4.0 - 2.0 * r;
  return 0.0;
}

double annulus_limit_density(double r) {
  if (r <= 1.0) return 0.5 + 0.5 * r * r;
  if (r < 2.0) return 1.0;
  return 0.0;
}

void require_custom(const InitialData& init, const Grid& grid) {
  if (static_cast<Index>(init.values.size()) != grid.size())
    throw InvalidArgument("custom_grid initial data does not match the grid size");
  for (double v : init.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("custom_grid pressure must be finite and non-negative");
}

}  // namespace

Field initial_pressure(const ModelSpec& spec, const Grid& grid) {
  const InitialData& init = spec.init;
  const double m = spec.m.value();
  if (spec.m.is_infinite()) throw InvalidArgument("initial_pressure needs finite m");
  switch (init.kind) {
    case InitKind::barenblatt: {
      const Barenblatt bb = init.barenblatt(grid.dim(), m);
      return sample(grid, [&](const Vec& x) { return bb.pressure((x - init.center).norm(), init.barenblatt_time); });
    }
    case InitKind::smooth_bump: {
      const double r2 = init.radius * init.radius;
      return sample(grid, [&](const Vec& x) {
        const double s = std::max(0.0, r2 - (x - init.center).squaredNorm()) / init.radius;
        return s > 0.0 ? init.gamma0 * std::pow(s, 2.0 - init.varsigma0) : 0.0;
      });
    }
    case InitKind::patch:
      return pressure_from_density(mollify(patch_indicator(init, grid), init.mollify_cells), m);
    case InitKind::annulus_plus_core:
      return sample(grid, [&](const Vec& x) { return annulus_pressure((x - init.center).norm() / init.radius, m); });
    case InitKind::custom_grid: {
      require_custom(init, grid);
      return Field(grid, Eigen::Map<const Eigen::ArrayXd>(init.values.data(), grid.size()));
    }
  }
  return Field(grid);
}

Field initial_density(const ModelSpec& spec, const Grid& grid) {
  const InitialData& init = spec.init;
  if (!spec.m.is_infinite()) return density_from_pressure(initial_pressure(spec, grid), spec.m.value());
  switch (init.kind) {
    case InitKind::patch: return patch_indicator(init, grid);
    case InitKind::annulus_plus_core:
      return sample(grid, [&](const Vec& x) { return annulus_limit_density((x - init.center).norm() / init.radius); });
    case InitKind::custom_grid: {
      require_custom(init, grid);
      Field out(grid);
      for (Index k = 0; k < grid.size(); ++k) out[k] = init.values[k] > 0.0 ? 1.0 : 0.0;
      return out;
    }
    case InitKind::barenblatt:
    case InitKind::smooth_bump: {
      // The finite-m densities converge to the indicator of the pressure support.
      ModelSpec finite = spec;
      finite.m = Exponent(2.0);
      const Field p = initial_pressure(finite, grid);
      Field out(grid);
      for (Index k = 0; k < grid.size(); ++k) out[k] = p[k] > 0.0 ? 1.0 : 0.0;
      return out;
    }
  }
  return Field(grid);
}

// ---------------------------------------------------------------------------
// Audit

namespace {

struct Sampled {
  AssumptionNorms norms;
  double sigma = std::numeric_limits<double>::infinity();
  double sigma_tilde = std::numeric_limits<double>::infinity();
  double fp_sup = -std::numeric_limits<double>::infinity();
  double f_min = std::numeric_limits<double>::infinity();
};

Sampled sample_model(const ModelSpec& spec, int n, double p_top) {
  if (n < 1) throw InvalidArgument("sample density must be at least 1");
  const int d = spec.dim();
  const Box& box = spec.domain;
  Sampled s;
  const int ny = d == 2 ? n : 0;
  for (int iy = 0; iy <= ny; ++iy) {
    for (int ix = 0; ix <= n; ++ix) {
      Vec x(d);
      x[0] = box.lower[0] + box.extent(0) * ix / n;
      if (d == 2) x[1] = box.lower[1] + box.extent(1) * iy / n;
      for (int it = 0; it <= n; ++it) {
        const double t = spec.horizon * it / n;
        const Vec b = spec.drift.value(x, t);
        const Eigen::Matrix2d jb = spec.drift.jacobian(x, t);
        const double divb = spec.drift.divergence(x, t);
        if (!b.allFinite() || !jb.allFinite() || !std::isfinite(divb))
          throw InvalidArgument("non-finite drift at " + where(x, t, 0.0));
        s.norms.b_inf = std::max(s.norms.b_inf, b.norm());
        s.norms.db_inf = std::max(s.norms.db_inf, jb.norm());
        s.norms.divb_inf = std::max(s.norms.divb_inf, std::abs(divb));
        for (int ip = 0; ip <= n; ++ip) {
          const double p = p_top * ip / n;
          const double f = spec.source.value(x, t, p);
          const double fp = spec.source.dp(x, t, p);
          const double gx = spec.source.grad_x(x, t, p).norm();
          const double ft = spec.source.dt(x, t, p);
          if (!std::isfinite(f) || !std::isfinite(fp) || !std::isfinite(gx) || !std::isfinite(ft))
            throw InvalidArgument("non-finite source at " + where(x, t, p));
          s.norms.f_c1 = std::max(s.norms.f_c1, gx + std::abs(ft) + std::abs(fp));
          s.norms.f_c1_xt = std::max(s.norms.f_c1_xt, gx + std::abs(ft));
          if (ip == 0) s.norms.f0_inf = std::max(s.norms.f0_inf, std::abs(f));
          s.norms.fplus_inf = std::max(s.norms.fplus_inf, std::max(f, 0.0));
          s.norms.f_inf = std::max(s.norms.f_inf, std::abs(f));
          s.norms.fp_inf = std::max(s.norms.fp_inf, std::abs(fp));
          s.sigma = std::min(s.sigma, divb + f - p * fp);
          s.sigma_tilde = std::min(s.sigma_tilde, divb + f);
          s.fp_sup = std::max(s.fp_sup, fp);
          s.f_min = std::min(s.f_min, f);
        }
      }
    }
  }
  // Affine drifts in x, stationary in t: second derivatives and d_t b vanish.
  s.norms.b_c21 = s.norms.b_inf + s.norms.db_inf;
  return s;
}

bool waiver_applies(const ModelSpec& spec, const Sampled& s) {
  return spec.drift.is_zero() && spec.source.depends_only_on_p() && s.f_min >= 0.0 && s.fp_sup <= 0.0;
}

}  // namespace

double default_p_max(const ModelSpec& spec, const Field& p0) {
  if (spec.p_max_bound) return *spec.p_max_bound;
  const Sampled s = sample_model(spec, 8, 0.0);
  return linf_norm(p0) * std::exp(s.norms.fplus_inf * spec.horizon);
}

double r11_margin(const ModelSpec& spec, const Field& p0) {
  const Field lap = laplacian(p0);
  double worst = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < p0.size(); ++k) {
    const Vec x = p0.grid.center(k);
    worst = std::min(worst, lap[k] + spec.drift.divergence(x, 0.0) + spec.source.value(x, 0.0, p0[k]));
  }
  return worst;
}

AssumptionReport audit_assumptions(const ModelSpec& spec, int sample_density, double p_max) {
  spec.validate();
  if (!(p_max >= 0.0)) throw InvalidArgument("p_max must be non-negative");
  const Sampled s = sample_model(spec, sample_density, 1.5 * p_max);
  AssumptionReport r;
  r.sample_density = sample_density;
  r.p_max = p_max;
  r.p_sample_max = 1.5 * p_max;
  r.norms = s.norms;
  r.sigma = s.sigma;
  r.sigma_tilde = s.sigma_tilde;
  r.fp_sup = s.fp_sup;
  r.satisfied.norms_finite = true;
  r.satisfied.cond = s.sigma > 0.0;
  r.satisfied.h2 = s.sigma_tilde > 0.0 && s.fp_sup <= 0.0;
  r.satisfied.autonomous_waiver = waiver_applies(spec, s);
  try {
    r.c0_ab = ab_constant(spec, p_max, sample_density);
  } catch (const UnsupportedRegime&) {
    r.c0_ab = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

AssumptionReport audit_assumptions(const ModelSpec& spec, const Grid& grid, int sample_density) {
  // The limit problem is audited with the m = 2 pressure of its data as a surrogate range.
  ModelSpec finite = spec;
  if (finite.m.is_infinite()) finite.m = Exponent(2.0);
  const Field p0 = initial_pressure(finite, grid);
  AssumptionReport r = audit_assumptions(spec, sample_density, default_p_max(spec, p0));
  r.r11_margin = r11_margin(spec, p0);
  r.satisfied.r11 = r.r11_margin >= 0.0;
  return r;
}

double ab_constant(const ModelSpec& spec, double p_max, int sample_density) {
  if (!(p_max >= 0.0)) throw InvalidArgument("p_max must be non-negative");
  // sigma is sampled over the extended pressure range; the norms over [0, p_max].
  const Sampled wide = sample_model(spec, sample_density, 1.5 * p_max);
  const Sampled s = sample_model(spec, sample_density, p_max);
  const AssumptionNorms& n = s.norms;
  if (!(wide.sigma > 0.0)) {
    if (waiver_applies(spec, wide)) return spec.c_d * 2.0 * (1.0 + n.fp_inf) * (1.0 + p_max);
    throw UnsupportedRegime("sigma <= 0: the Aronson-Benilan constant is not available");
  }
  return spec.c_d * (1.0 + 1.0 / wide.sigma) * (1.0 + p_max) * (1.0 + n.fp_inf) *
         (1.0 + n.b_c21 * n.b_c21 + n.f_c1_xt * n.f_c1_xt + n.f_inf);
}

// ---------------------------------------------------------------------------
// Support barrier

double SupportBarrier::radius(double t) const {
  const double e = std::exp(rate * t);
  return e * r0 + b_inf / rate * (e - 1.0);
}

SupportBarrier support_barrier(const ModelSpec& spec, const Field& p0, int sample_density) {
  const Sampled s = sample_model(spec, sample_density, linf_norm(p0));
  SupportBarrier bar;
  bar.rate = std::max(1.0, (s.norms.divb_inf + s.norms.fplus_inf) / spec.dim());
  bar.b_inf = s.norms.b_inf;
  double r2 = 0.0;
  for (Index k = 0; k < p0.size(); ++k)
    if (p0[k] > 0.0) r2 = std::max(r2, p0.grid.center(k).squaredNorm() + 2.0 * p0[k] / bar.rate);
  bar.r0 = std::sqrt(r2);
  return bar;
}

double theoretical_support_radius(const ModelSpec& spec, const Grid& grid, double t) {
  ModelSpec finite = spec;
  if (finite.m.is_infinite()) finite.m = Exponent(2.0);
  return support_barrier(finite, initial_pressure(finite, grid)).radius(t);
}

}  // namespace pmefb

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pmefb/geometry.hpp"

using namespace pmefb;

namespace {

Grid square(int n, double half = 1.0) { return Grid::over(Box{make_vec(-half, -half), make_vec(half, half)}, n); }

ModelSpec flow_spec(const Drift& b, double half = 1.0) {
  ModelSpec s;
  s.m = Exponent(2.0);
  s.domain = Box{make_vec(-half, -half), make_vec(half, half)};
  s.drift = b;
  s.source = Source::constant(2, 0.0);
  s.init.center = make_vec(0.0, 0.0);
  s.horizon = 1.0;
  return s;
}

Mask disk_mask(const Grid& g, const Vec& c, double r) {
  Mask m(g);
  for (Index k = 0; k < g.size(); ++k) m.bits[k] = (g.center(k) - c).norm() <= r;
  return m;
}

Mask random_blob(const Grid& g, std::mt19937& rng, int ring = 0) {
  std::uniform_real_distribution<double> u(-0.6, 0.6), rad(0.05, 0.3);
  Mask m(g);
  for (int b = 0; b < 3; ++b) {
    const Mask d = disk_mask(g, make_vec(u(rng), u(rng)), rad(rng));
    m.bits = m.bits || d.bits;
  }
  const int n = g.cells_per_axis();
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i < ring || j < ring || i >= n - ring || j >= n - ring) m.bits[g.index(i, j)] = false;
  return m;
}

// Brute-force distance between cell-centre sets.
double brute_directed(const Mask& a, const Mask& b) {
  double sup = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    if (!a[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < b.size(); ++j)
      if (b[j]) best = std::min(best, (a.grid.center(i) - b.grid.center(j)).norm());
    sup = std::max(sup, best);
  }
  return sup;
}

}  // namespace

TEST_CASE("streamlines follow -b") {
  const ModelSpec rot = flow_spec(Drift::rotation(1.0, make_vec(0.0, 0.0)));
  const Vec x0 = make_vec(0.5, 0.0);
  const double dx = 2.0 / 64;
  const StreamlineTrace tr = integrate_streamline(x0, 0.0, -1.0, 2.0 * M_PI, rot, dx);
  for (const auto& [s, x] : tr.samples) CHECK(std::abs(x.norm() - 0.5) <= 1e-8);
  const Vec back = flow_point(x0, 0.0, 2.0 * M_PI, rot, dx);
  CHECK((back - x0).norm() <= 1e-6);
  // -b at (0.5, 0) is (0, -0.5): a quarter turn clockwise.
  const Vec quarter = flow_point(x0, 0.0, M_PI / 2.0, rot, dx);
  CHECK(quarter[0] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(quarter[1] == doctest::Approx(-0.5).epsilon(1e-8));

  const Vec b = make_vec(1.0, 0.5);
  const ModelSpec lin = flow_spec(Drift::constant(b), 4.0);
  const Vec y = flow_point(make_vec(0.1, 0.2), 0.0, 0.7, lin, dx);
  CHECK((y - (make_vec(0.1, 0.2) - 0.7 * b)).norm() <= 1e-12);

  const AffineFlow af = flow_propagator(rot, 0.0, 0.3, dx);
  const Vec z = make_vec(-0.2, 0.4);
  CHECK((af.apply(z) - flow_point(z, 0.0, 0.3, rot, dx)).norm() <= 1e-12);
}

TEST_CASE("flow maps of sets") {
  const Grid g = square(64);
  const Mask a = disk_mask(g, make_vec(0.2, 0.0), 0.2);
  const ModelSpec still = flow_spec(Drift::zero(2));
  CHECK(flow_map_raster(a, 0.0, 0.5, still) == a);
  const Mask grown = flow_map_set(a, 0.0, 0.5, still);
  CHECK(a.subset_of(grown));
  CHECK(hausdorff_distance(a, grown) <= std::sqrt(2.0) * g.dx() + 1e-12);

  const ModelSpec rot = flow_spec(Drift::rotation(1.0, make_vec(0.0, 0.0)));
  const double s = 0.8;
  const Mask moved = flow_map_set(a, 0.0, s, rot);
  const Mask exact = disk_mask(g, flow_point(make_vec(0.2, 0.0), 0.0, s, rot, g.dx()), 0.2);
  // One-cell dilation plus half a cell diagonal of rasterization on each side.
  CHECK(hausdorff_distance(moved, exact) <= 2.0 * std::sqrt(2.0) * g.dx());
  // Approximate inverse: pushing back recovers the set up to the rasterization dilations.
  const Mask back = flow_map_set(moved, s, -s, rot);
  CHECK(a.subset_of(back));
  CHECK(hausdorff_distance(a, back) <= 3.0 * std::sqrt(2.0) * g.dx());
}

TEST_CASE("frontier extraction") {
  const Grid g = square(64);
  const Field cone = sample(g, [](const Vec& x) { return std::max(0.0, 0.5 - x.norm()); });
  const FrontierRecord fr = extract_frontier(cone);
  CHECK(hausdorff_distance(fr.support, disk_mask(g, make_vec(0.0, 0.0), 0.5)) <= g.dx());
  for (Index k = 0; k < g.size(); ++k) {
    if (!fr.boundary[k]) continue;
    // The band is one cell thick on each side.
    CHECK(std::abs(g.center(k).norm() - 0.5) <= 2.0 * g.dx());
    CHECK(std::min(fr.dist_to_support[k], fr.dist_to_complement[k]) <= g.dx() + 1e-12);
  }
  CHECK(extract_frontier(Field(g)).support.empty());

  // Barenblatt m = 2: the support hardly moves across thresholds.
  ModelSpec s;
  s.m = Exponent(2.0);
  s.init.barenblatt_time = 0.5;
  s.init.barenblatt_front = 0.6;
  const Barenblatt bb = s.init.barenblatt(2, 2.0);
  const Field p = sample(g, [&](const Vec& x) { return bb.pressure(x.norm(), 0.5); });
  const Mask lo = support_of(p, 1e-10), hi = support_of(p, 1e-6 * linf_norm(p));
  CHECK(hausdorff_distance(lo, hi) <= g.dx());
}

TEST_CASE("Hausdorff distances") {
  const Grid g = square(48);
  Mask a(g), b(g);
  a.bits[g.index(3, 4)] = true;
  b.bits[g.index(10, 40)] = true;
  CHECK(hausdorff_distance(a, b) == doctest::Approx(std::hypot(7.0, 36.0) * g.dx()));
  CHECK(hausdorff_distance(a, a) == 0.0);

  const Mask inner = disk_mask(g, make_vec(0.0, 0.0), 0.3);
  const Mask outer = disk_mask(g, make_vec(0.0, 0.0), 0.6);
  CHECK(directed_distance(inner, outer) == 0.0);
  CHECK(directed_distance(outer, inner) == doctest::Approx(0.3).epsilon(2.0 * g.dx()));
  CHECK_THROWS_AS(hausdorff_distance(inner, Mask(g)), InvalidArgument);

  std::mt19937 rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    const Mask x = random_blob(g, rng), y = random_blob(g, rng), z = random_blob(g, rng);
    if (x.empty() || y.empty() || z.empty()) continue;
    const double xy = hausdorff_distance(x, y), yz = hausdorff_distance(y, z), xz = hausdorff_distance(x, z);
    CHECK(xy == doctest::Approx(hausdorff_distance(y, x)));
    CHECK(xz <= xy + yz + 1e-12);
    CHECK(directed_distance(x, y) == doctest::Approx(brute_directed(x, y)));
  }
}

TEST_CASE("space-time frontier distance") {
  const Grid g = square(48);
  std::vector<FrontierRecord> a, b;
  for (int k = 0; k < 4; ++k) {
    const double t = 0.1 * k, r = 0.3 + 0.1 * t;
    const Field p = sample(g, [&](const Vec& x) { return std::max(0.0, r - x.norm()); }, t);
    const Field q = sample(g, [&](const Vec& x) { return std::max(0.0, r - (x - make_vec(4.0 * g.dx(), 0.0)).norm()); }, t);
    a.push_back(extract_frontier(p));
    b.push_back(extract_frontier(q));
  }
  CHECK(spacetime_frontier_distance(a, a, 1.0).distance == 0.0);
  const double d = spacetime_frontier_distance(a, b, 1.0).distance;
  CHECK(d > 0.0);
  CHECK(d <= 4.0 * g.dx() + 1e-12);
  CHECK(default_time_weight(g, {0.0, 0.1, 0.2, 0.3}) == doctest::Approx(g.dx() / 0.1));

  std::vector<FrontierRecord> c = a;
  c[2] = extract_frontier(Field(g, 0.0, 0.2));
  const SpacetimeDistance sd = spacetime_frontier_distance(a, c, 1.0);
  REQUIRE(sd.skipped_times.size() == 1);
  CHECK(sd.skipped_times[0] == doctest::Approx(0.2));
}

TEST_CASE("ball morphology") {
  const Grid g = square(48);
  std::mt19937 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const Mask a = random_blob(g, rng, 6);
    const double r = 0.05 + 0.03 * trial;
    CHECK(a.subset_of(dilate(a, r)));
    CHECK(erode(a, r).subset_of(a));
    // Duality for sets away from the edge.
    CHECK(erode(a, r) == dilate(a.complement(), r).complement());
    // Opening and closing.
    CHECK(dilate(erode(a, r), r).subset_of(a));
    CHECK(a.subset_of(erode(dilate(a, r), r)));
  }
  CHECK(dilate(Mask(g), 0.3).empty());
  CHECK_THROWS_AS(dilate(Mask(g), -1.0), InvalidArgument);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Grid small = square(20);
  Field f(small);
  for (Index k = 0; k < f.size(); ++k) f[k] = u(rng);
  const double r = 0.25;
  const Field sup = sup_convolve(f, r), inf = inf_convolve(f, r);
  for (Index k = 0; k < f.size(); ++k) {
    double hi = -1.0, lo = 2.0;
    for (Index j = 0; j < f.size(); ++j)
      if ((small.center(k) - small.center(j)).norm() <= r + 1e-12) {
        hi = std::max(hi, f[j]);
        lo = std::min(lo, f[j]);
      }
    CHECK(sup[k] == hi);
    CHECK(inf[k] == lo);
  }
}

TEST_CASE("modified convolutions reduce to the density") {
  ModelSpec s = flow_spec(Drift::zero(2), 2.0);
  s.init.kind = InitKind::smooth_bump;
  s.init.radius = 0.5;
  s.horizon = 0.1;
  const Grid g = square(32, 2.0);
  SolveConfig cfg;
  cfg.save_times = {0.0, 0.05, 0.1};
  const Trajectory tr = run(s, g, cfg);
  ConvolutionParams params;
  params.tau0 = 0.1;
  const std::vector<double> times{0.0, 0.03, 0.1};
  const ModifiedConvolutions mc = modified_convolutions(tr, params, times);
  REQUIRE(mc.u1.size() == 3);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Field rho = interpolate_density(tr, times[k]);
    CHECK((mc.u1[k].values == rho.values).all());
    CHECK((mc.u2[k].values == rho.values).all());
  }
  CHECK((interpolate_density(tr, 0.05).values == tr.snapshots[1].rho.values).all());
  CHECK_THROWS_AS(interpolate_density(tr, 0.2), InvalidArgument);

  params.alpha = 0.6;
  CHECK_THROWS_AS(params.validate(), InvalidArgument);
}

TEST_CASE("subquadratic growth check") {
  const Grid g = square(64);
  const Field quad = sample(g, [](const Vec& x) { return std::max(0.0, 0.25 - x.squaredNorm()); });
  // 0.25 - r^2 = (0.5 - r)(0.5 + r) >= 0.5 d: linear growth at the edge.
  CHECK(satisfies_subquadratic_growth(quad, 0.5, 1.0));
  const Field flat = sample(g, [](const Vec& x) { return std::pow(std::max(0.0, 0.5 - x.norm()), 3.0); });
  CHECK_FALSE(satisfies_subquadratic_growth(flat, 1.0, 0.5));
}

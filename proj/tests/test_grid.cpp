#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "pmefb/grid.hpp"

using namespace pmefb;

namespace {

Grid square(int n, double lo = -1.0, double hi = 1.0) { return Grid::over(Box{make_vec(lo, lo), make_vec(hi, hi)}, n); }
Grid line(int n, double lo = 0.0, double hi = 1.0) { return Grid::over(Box{make_vec(lo), make_vec(hi)}, n); }

Field random_field(const Grid& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g);
  for (Index k = 0; k < f.size(); ++k) f[k] = u(rng);
  return f;
}

FaceField random_faces(const Grid& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FaceField f(g);
  for (auto& a : f.axis)
    for (Index k = 0; k < a.size(); ++k) a[k] = u(rng);
  return f;
}

bool interior(const Grid& g, Index k, int width = 1) {
  const auto [i, j] = g.coords(k);
  const int n = g.cells_per_axis();
  if (i < width || i >= n - width) return false;
  return g.dim() == 1 || (j >= width && j < n - width);
}

}  // namespace

TEST_CASE("grid geometry") {
  const Grid g = square(32, -2.0, 2.0);
  CHECK(g.dx() == doctest::Approx(4.0 / 32));
  CHECK(g.size() == 32 * 32);
  const Vec c = g.center(3, 5);
  CHECK(c[0] == doctest::Approx(-2.0 + 3.5 * g.dx()));
  CHECK(c[1] == doctest::Approx(-2.0 + 5.5 * g.dx()));
  CHECK(g.locate(c).value() == g.index(3, 5));
  CHECK_FALSE(g.locate(make_vec(2.5, 0.0)).has_value());
  CHECK_THROWS_AS(Grid::over(Box{make_vec(0.0, 0.0), make_vec(1.0, 1.0)}, 8), InvalidArgument);
  CHECK_THROWS_AS(Grid::over(Box{make_vec(0.0, 0.0), make_vec(1.0, 2.0)}, 32), InvalidArgument);
}

TEST_CASE("laplacian of constants and quadratics") {
  const Grid g = square(32);
  const Field one(g, 3.0);
  const Field lap1 = laplacian(one);
  const Field quad = sample(g, [](const Vec& x) { return x[0] * x[0]; });
  const Field lap2 = laplacian(quad);
  for (Index k = 0; k < g.size(); ++k) {
    if (!interior(g, k)) continue;
    CHECK(std::abs(lap1[k]) < 1e-10);
    CHECK(std::abs(lap2[k] - 2.0) < 1e-10);
  }
}

TEST_CASE("laplacian converges at second order on a sine") {
  // Error against -pi^2 sin(pi x), interior cells only (the ghost value is not the odd extension).
  std::vector<double> h, err;
  for (int n : {32, 64, 128, 256}) {
    const Grid g = line(n);
    const Field u = sample(g, [](const Vec& x) { return std::sin(M_PI * x[0]); });
    const Field l = laplacian(u);
    double e = 0.0;
    for (Index k = 1; k + 1 < g.size(); ++k) {
      const double exact = -M_PI * M_PI * std::sin(M_PI * g.center(k)[0]);
      e = std::max(e, std::abs(l[k] - exact));
    }
    h.push_back(g.dx());
    err.push_back(e);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(order >= 1.9);
}

TEST_CASE("gradient and divergence") {
  const Grid g = square(32);
  const FaceField grad = gradient(Field(g, 2.0));
  // Interior faces only; the boundary faces see the zero ghost value.
  for (int j = 0; j < 32; ++j)
    for (int i = 1; i < 32; ++i) CHECK(grad.axis[0][grad.face_index(0, i, j)] == 0.0);

  const FaceField lin = sample_faces(g, [](int a, const Vec& x) { return x[a]; });
  const Field div = divergence(lin);
  for (Index k = 0; k < g.size(); ++k) CHECK(div[k] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("summation by parts") {
  std::mt19937 rng(7);
  for (const Grid& g : {line(40), square(24)}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Field u = random_field(g, rng);
      const FaceField f = random_faces(g, rng);
      // Direct summation oracle for <grad u, F> + <u, div F>.
      const FaceField gu = gradient(u);
      double lhs = 0.0;
      for (int a = 0; a < g.dim(); ++a)
        for (Index k = 0; k < gu.axis[a].size(); ++k) lhs += gu.axis[a][k] * f.axis[a][k];
      const Field df = divergence(f);
      double rhs = 0.0;
      for (Index k = 0; k < u.size(); ++k) rhs += u[k] * df[k];
      CHECK(std::abs((lhs + rhs) * g.cell_volume()) < 1e-10);
      CHECK(std::abs(inner(gu, f) + inner(u, df)) < 1e-10);
    }
  }
}

TEST_CASE("divergence of gradient is the laplacian") {
  std::mt19937 rng(11);
  for (const Grid& g : {line(40), square(24)}) {
    const Field u = random_field(g, rng);
    const Field a = divergence(gradient(u));
    const Field b = laplacian(u);
    const double scale = 1.0 / (g.dx() * g.dx());
    for (Index k = 0; k < u.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-13 * scale);
  }
}

TEST_CASE("operators are linear") {
  std::mt19937 rng(3);
  const Grid g = square(20);
  const Field u = random_field(g, rng), v = random_field(g, rng);
  const double a = 0.7, b = -1.3;
  const Field w(g, Eigen::ArrayXd(a * u.values + b * v.values));
  const Field lw = laplacian(w), lu = laplacian(u), lv = laplacian(v);
  const double scale = 1.0 / (g.dx() * g.dx());
  for (Index k = 0; k < g.size(); ++k) CHECK(std::abs(lw[k] - (a * lu[k] + b * lv[k])) < 1e-12 * scale);
  const FaceField gw = gradient(w), gu = gradient(u), gv = gradient(v);
  for (int ax = 0; ax < 2; ++ax)
    for (Index k = 0; k < gw.axis[ax].size(); ++k)
      CHECK(std::abs(gw.axis[ax][k] - (a * gu.axis[ax][k] + b * gv.axis[ax][k])) < 1e-12 / g.dx());
}

TEST_CASE("norms") {
  const Grid g = square(32);
  const Field zero(g);
  CHECK(mass(zero) == 0.0);
  CHECK(l1_norm(zero) == 0.0);
  CHECK(linf_norm(zero) == 0.0);
  CHECK(l1_distance(zero, zero) == 0.0);

  Field ind(g);
  for (Index k : {Index(3), Index(40), Index(500), Index(1000), Index(1023)}) ind[k] = 1.0;
  CHECK(mass(ind) == doctest::Approx(5 * g.dx() * g.dx()));

  std::mt19937 rng(5);
  const Field u = random_field(g, rng), v = random_field(g, rng);
  const Field diff(g, Eigen::ArrayXd(u.values - v.values));
  CHECK(l1_distance(u, v) == doctest::Approx(l1_norm(diff)).epsilon(1e-14));
  CHECK(linf_norm(u) == u.values.abs().maxCoeff());
  CHECK(mass(u) == mass(u));
  CHECK_THROWS_AS(l1_distance(u, Field(square(16))), InvalidArgument);
}

TEST_CASE("snapshot files round-trip") {
  const Grid g = square(16, -0.5, 1.5);
  std::mt19937 rng(9);
  Field u = random_field(g, rng);
  u.time_stamp = 0.25;
  const auto path = std::filesystem::temp_directory_path() / "pmefb_test_snapshot.bin";
  write_snapshot(path.string(), u, "rho");

  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  const auto h = nlohmann::json::parse(header);
  CHECK(h.at("d") == 2);
  CHECK(h.at("cells_per_axis") == 16);
  CHECK(h.at("name") == "rho");
  CHECK(h.at("time_stamp").get<double>() == 0.25);
  in.close();

  const NamedField back = read_snapshot(path.string());
  CHECK(back.name == "rho");
  CHECK(back.field.grid == g);
  CHECK((back.field.values == u.values).all());
  std::filesystem::remove(path);
}

TEST_CASE("mask run-length encoding round-trips") {
  const Grid g = square(16);
  std::mt19937 rng(13);
  std::bernoulli_distribution coin(0.3);
  Mask m(g);
  for (Index k = 0; k < m.size(); ++k) m.bits[k] = coin(rng);
  CHECK(mask_from_rle_json(mask_to_rle_json(m)) == m);
  const Mask full(g, true);
  CHECK(mask_from_rle_json(mask_to_rle_json(full)) == full);
}

#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "wbundle/error.hpp"
#include "wbundle/field3.hpp"

using namespace wb;

namespace {
constexpr double kFourPi = 4.0 * std::numbers::pi;

AnalyticField three_charges() {
  return AnalyticField({{Vec3(0.1, 0, 0), 1}, {Vec3(-0.3, 0.2, 0.1), -2}, {Vec3(0.2, -0.25, 0.3), 1}}, 0.3, 2.0);
}
}  // namespace

TEST_CASE("monopole fluxes") {
  auto m = build_icosphere(3);
  const Vec3 c(0.1, -0.2, 0.05);
  CHECK(flux(monopole(c, 1), c, 0.5, m) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(flux(monopole(c, 1), c + Vec3(0.1, 0.1, 0), 0.5, m) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(flux(monopole(c, -2), c + Vec3(0, 0.2, 0), 0.4, m) == doctest::Approx(-2.0).epsilon(1e-3));
  CHECK(flux(monopole(c, 3), c, 0.3, m) == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(std::abs(flux(monopole(c, 1), c + Vec3(0.6, 0, 0), 0.3, m)) <= 1e-3);
  CHECK_THROWS_AS(monopole(c, 0), Error);
  CHECK_THROWS_AS(monopole(c, 1).value(c), Error);
}

TEST_CASE("centered monopole slice is uniform") {
  auto m = build_icosphere(3);
  for (double r : {0.1, 0.7}) {
    const TwoCochain h = restrict_to_sphere(monopole(Vec3::Zero(), 1), Vec3::Zero(), r, m);
    CHECK(h.degree() == doctest::Approx(1.0).epsilon(1e-12));
    for (int f = 0; f < m->num_faces(); ++f) CHECK(std::abs(h.density(f) - 1.0 / kFourPi) < 1e-12);
  }
}

TEST_CASE("dipole slice and degree-flux identity") {
  auto m = build_icosphere(3);
  const AnalyticField f({{Vec3(0.2, 0, 0), 1}, {Vec3(-0.2, 0.1, 0), -1}});
  const TwoCochain h = restrict_to_sphere(f, Vec3::Zero(), 0.6, m);
  CHECK(std::abs(h.degree()) <= 1e-3);
  CHECK(h.densities().maxCoeff() - h.densities().minCoeff() > 0.1);
  CHECK(h.degree() == flux(f, Vec3::Zero(), 0.6, m));
}

TEST_CASE("degenerate slices are rejected") {
  auto m = build_icosphere(2);
  try {
    restrict_to_sphere(monopole(Vec3(0.5, 0, 0), 1), Vec3::Zero(), 0.502, m);
    FAIL("expected degenerate-slice error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerate);
  }
  CHECK(degenerate_sphere(monopole(Vec3(0.5, 0, 0), 1), Vec3::Zero(), 0.5));
  CHECK_FALSE(degenerate_sphere(monopole(Vec3(0.5, 0, 0), 1), Vec3::Zero(), 0.52));
}

TEST_CASE("integer flux audit") {
  const auto f = three_charges();
  const auto ok = integer_flux_audit(f, 200, 7, 3);
  CHECK(ok.passed());
  CHECK(ok.checks[0].value <= 1e-3);
  CHECK(ok.data["max_deviation_from_enclosed_charge"].get<double>() <= 1e-3);

  const auto half = integer_flux_audit(f.scaled(0.5), 200, 7, 3);
  CHECK_FALSE(half.passed());
  CHECK(half.checks[0].value == doctest::Approx(0.5).epsilon(0.01));

  const AnalyticField smooth({}, 0.7, 3.0);
  const auto zero = integer_flux_audit(smooth, 50, 1, 3);
  CHECK(zero.passed());
}

TEST_CASE("property P scan") {
  auto m = build_icosphere(2);
  std::vector<double> radii;
  for (double r = 0.3; r > 0.02; r *= 0.8) radii.push_back(r);

  const std::vector<Vec3> pts{Vec3::Zero(), Vec3(0.2, 0, 0), Vec3(0, -0.15, 0.1)};
  const auto mono = property_P_scan(monopole(Vec3::Zero(), 1), pts, radii, 0.3, m);
  CHECK(mono.rows[0].singular);
  CHECK_FALSE(mono.rows[1].singular);
  CHECK_FALSE(mono.rows[2].singular);
  CHECK(mono.singular_count() == 1);

  const auto smooth = property_P_scan(AnalyticField({}, 0.5, 2.0), pts, radii, 0.3, m);
  CHECK(smooth.singular_count() == 0);
  for (const auto& row : smooth.rows) CHECK(row.zero_radii.size() == static_cast<size_t>(row.radii_tested));

  // two charges: exactly the points sitting on a charge keep nonzero flux at all small radii
  const AnalyticField two({{Vec3(0.2, 0, 0), 1}, {Vec3(-0.2, 0, 0), -1}});
  const std::vector<Vec3> pts2{Vec3(0.2, 0, 0), Vec3(-0.2, 0, 0), Vec3::Zero(), Vec3(0.2, 0.1, 0)};
  const auto rep = property_P_scan(two, pts2, radii, 0.3, m);
  CHECK(rep.rows[0].singular);
  CHECK(rep.rows[1].singular);
  CHECK_FALSE(rep.rows[2].singular);
  CHECK_FALSE(rep.rows[3].singular);

  const auto grid = ball_grid_points(0.75, 5);
  int at_origin = 0;
  for (const auto& x : grid) at_origin += x.norm() < 1e-12 ? 1 : 0;
  CHECK(at_origin == 1);
}

TEST_CASE("dipole chain") {
  const double p = 1.25;
  const int n = 100;
  const auto ch = dipole_chain(p, n);
  double sum_a = 0.0;
  for (double a : ch.a) sum_a += a;
  CHECK(sum_a == doctest::Approx(1.0).epsilon(1e-12));
  // harmonic partial-sum oracle: a_i = c / i^2 at p = 1.25
  double harmonic = 0.0, zeta = 0.0;
  for (int i = 1; i <= n; ++i) {
    harmonic += 1.0 / i;
    zeta += 1.0 / (double(i) * i);
  }
  CHECK(ch.c == doctest::Approx(1.0 / zeta).epsilon(1e-12));
  CHECK(harmonic == doctest::Approx(5.187).epsilon(1e-3));
  CHECK(ch.partial_sum(n) == doctest::Approx(std::sqrt(ch.c) * harmonic).epsilon(1e-12));
  for (int i = 0; i + 1 < n; ++i) CHECK(ch.centers[i + 1].x() - ch.centers[i].x() >= ch.a[i] + ch.a[i + 1] - 1e-12);

  auto m = build_icosphere(3);
  for (int i : {0, 1, 4}) {
    CHECK(std::abs(flux(ch.field, ch.centers[i], ch.a[i], m)) <= 1e-3);
    CHECK(flux(ch.field, ch.centers[i] + Vec3(0.5 * ch.a[i], 0, 0), 0.4 * ch.a[i], m) ==
          doctest::Approx(1.0).epsilon(1e-3));
  }
  CHECK_THROWS_AS(dipole_chain(1.5, 10), Error);
  CHECK_THROWS_AS(dipole_chain(1.25, 20000), Error);
}

TEST_CASE("grid rasterization") {
  const double h = 1.0 / 7.5;
  const Vec3 origin(-1, -1, -1);
  const auto g = rasterize(monopole(Vec3::Zero(), 1), {16, 16, 16}, h, origin);
  // the origin is the center of cell (7, 7, 7)
  CHECK(g.cell_center(7, 7, 7).norm() < 1e-12);
  double total = 0.0, max_off = 0.0;
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        const double d = g.divergence(i, j, k);
        total += d;
        if (i != 7 || j != 7 || k != 7) max_off = std::max(max_off, std::abs(d));
      }
  CHECK(g.divergence(7, 7, 7) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(max_off < 1e-12);
  CHECK(g.box_flux({0, 0, 0}, {16, 16, 16}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.box_flux({3, 5, 6}, {9, 8, 10}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(g.box_flux({8, 0, 0}, {16, 16, 16})) < 1e-12);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // flux through a sphere of the interpolated grid field
  auto m = build_icosphere(3);
  CHECK(flux(g, Vec3::Zero(), 0.6, m) == doctest::Approx(1.0).epsilon(0.02));
  CHECK_THROWS_AS(flux(g, Vec3::Zero(), 1.5, m), Error);

  const auto s = rasterize(AnalyticField({}, 0.8, 2.5), {8, 8, 8}, 0.25, origin);
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 8; ++i) CHECK(std::abs(s.divergence(i, j, k)) < 1e-13);
  // interpolation reproduces the smooth field to second order
  const Vec3 x(0.13, -0.21, 0.34);
  CHECK((s.value(x) - AnalyticField({}, 0.8, 2.5).value(x)).norm() < 0.1);

  CHECK_THROWS_AS(rasterize(monopole(Vec3::Zero(), 1), {4, 4, 4}, 0.5, origin), Error);
}

TEST_CASE("grid file round trip") {
  auto g = rasterize(three_charges(), {6, 5, 4}, 0.3, Vec3(-0.95, -0.75, -0.65));
  g.p = 1.4;
  std::stringstream ss;
  write_grid(ss, g);
  const GridField back = read_grid(ss);
  CHECK(back.dims() == g.dims());
  CHECK(back.spacing() == g.spacing());
  CHECK(back.p == 1.4);
  for (int a = 0; a < 3; ++a) CHECK(back.fluxes(a) == g.fluxes(a));
  std::stringstream bad("{\"format\":\"other\"}\n");
  CHECK_THROWS_AS(read_grid(bad), Error);
}

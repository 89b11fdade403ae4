#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "wbundle/energy_reg.hpp"
#include "wbundle/error.hpp"

using namespace wb;

namespace {
constexpr double kPi = std::numbers::pi;

// 4 pi int_0^R r^2 (|k| / 4 pi r^2)^p dr by composite Simpson after r = R s^m, m = 2 / (3 - 2p),
// which turns the integrand into a linear function of s.
double radial_oracle(double k, double R, double p) {
  const double m = 2.0 / (3.0 - 2.0 * p);
  const int n = 2000;
  auto g = [&](double s) {
    if (s == 0.0) return 0.0;
    const double r = R * std::pow(s, m);
    return 4 * kPi * r * r * std::pow(std::abs(k) / (4 * kPi * r * r), p) * R * m * std::pow(s, m - 1);
  };
  double sum = g(0) + g(1);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4 : 2) * g(static_cast<double>(i) / n);
  return sum / (3.0 * n);
}

// Centered monopole in the cube [-L, L]^3: six pyramids, each
// (1/4pi)^p L^{3-2p} / (3-2p) * int_{[-1,1]^2} |(u, v, 1)|^{-2p} du dv (midpoint rule).
double cube_oracle(double L, double p) {
  const int n = 800;
  double face = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double u = -1 + (i + 0.5) * 2.0 / n, v = -1 + (j + 0.5) * 2.0 / n;
      face += std::pow(u * u + v * v + 1.0, -p);
    }
  face *= 4.0 / (n * n);
  return 6.0 * std::pow(1.0 / (4 * kPi), p) * std::pow(L, 3 - 2 * p) / (3 - 2 * p) * face;
}
}  // namespace

TEST_CASE("monopole closed form") {
  for (double p : {1.1, 1.25, 1.4}) {
    const double oracle = radial_oracle(1.0, 1.0, p);
    CHECK(jensen_constant(p) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(lp_energy(monopole(Vec3::Zero(), 1), Ball{Vec3::Zero(), 1.0}, p) ==
          doctest::Approx(oracle).epsilon(1e-10));
  }
  CHECK(jensen_constant(1.25) == doctest::Approx(1.062).epsilon(1e-3));
  CHECK(lp_energy(monopole(Vec3(0.2, 0, 0), -2), Ball{Vec3(0.2, 0, 0), 0.5}, 1.25) ==
        doctest::Approx(radial_oracle(2.0, 0.5, 1.25)).epsilon(1e-10));
}

TEST_CASE("zero field and p >= 3/2") {
  CHECK(lp_energy(AnalyticField(), Ball{Vec3::Zero(), 1.0}, 1.25) == 0.0);
  CHECK(lp_energy(AnalyticField(), Box{}, 1.25) == 0.0);
  CHECK(std::isinf(lp_energy(monopole(Vec3::Zero(), 1), Ball{Vec3::Zero(), 1.0}, 1.5)));
  const AnalyticField two({{Vec3(0.1, 0, 0), 1}, {Vec3(-0.2, 0, 0), -1}});
  CHECK(std::isinf(lp_energy(two, Ball{Vec3::Zero(), 1.0}, 2.0)));
  CHECK(std::isfinite(lp_energy(monopole(Vec3(2, 0, 0), 1), Ball{Vec3::Zero(), 1.0}, 2.0)));
  CHECK_THROWS_AS(lp_energy(monopole(Vec3::Zero(), 1), Ball{Vec3::Zero(), 1.0}, 0.5), Error);
}

TEST_CASE("partition-of-unity path agrees with the exact form") {
  const double p = 1.25;
  const Vec3 c(0.3, 0.1, 0.0);
  // a zero-weight singularity forces the general path
  const AnalyticField general({{c, 1}, {Vec3(5, 5, 5), 0}});
  const double exact = monopole_energy(1.0, c.norm(), 1.0, p);
  CHECK(exact < jensen_constant(p));
  CHECK(lp_energy(general, Ball{Vec3::Zero(), 1.0}, p) == doctest::Approx(exact).epsilon(1e-6));

  const AnalyticField outside({{Vec3(1.3, 0, 0), 1}, {Vec3(5, 5, 5), 0}});
  CHECK(lp_energy(outside, Ball{Vec3::Zero(), 1.0}, p) ==
        doctest::Approx(monopole_energy(1.0, 1.3, 1.0, p)).epsilon(1e-8));

  CHECK(lp_energy(monopole(Vec3::Zero(), 1), Box{}, p) == doctest::Approx(cube_oracle(1.0, p)).epsilon(1e-5));
}

TEST_CASE("far-separated charges superpose") {
  const double p = 1.25;
  const Vec3 a(-3, 0, 0), b(3, 0.5, 0);
  const AnalyticField two({{a, 1}, {b, -1}});
  const double e = lp_energy(two, Ball{a, 0.5}, p) + lp_energy(two, Ball{b, 0.5}, p);
  const double single = 2.0 * monopole_energy(1.0, 0.0, 0.5, p);
  CHECK(std::abs(e - single) <= 0.02 * single);
}

TEST_CASE("grid energy with charge cap") {
  const double p = 1.25;
  const GridField g = rasterize(monopole(Vec3::Zero(), 1), {48, 48, 48}, 1.0 / 23.5, Vec3::Constant(-1.0));
  const GridEnergy e = grid_energy(g, Ball{Vec3::Zero(), 1.0}, p);
  CHECK(e.charge_cells == 1);
  CHECK(e.cap > 0.0);
  CHECK(e.total() == doctest::Approx(jensen_constant(p)).epsilon(0.03));
  CHECK(lp_energy(g, Ball{Vec3::Zero(), 1.0}, p) == doctest::Approx(e.total()));
  // a box covering the whole grid keeps every cell at full weight
  const GridEnergy full = grid_energy(g, Box{Vec3::Constant(-1.0), Vec3::Constant(1.0)}, p);
  CHECK(full.total() == doctest::Approx(cube_oracle(1.0, p)).epsilon(0.03));
  CHECK(cell_cap_constant(p) > 0.0);
}

TEST_CASE("blow-up of the monopole reproduces the field") {
  const AnalyticField m = monopole(Vec3::Zero(), 1);
  for (double r : {0.5, 0.1, 1e-3})
    for (const Vec3& y : {Vec3(0.3, -0.2, 0.7), Vec3(1, 1, 1), Vec3(-0.05, 0.02, 0.01)}) {
      const Vec3 blown = r * r * m.value(r * y);
      CHECK((blown - m.value(y)).norm() <= 1e-14 * m.value(y).norm());
    }
}

TEST_CASE("rescaled energy profile") {
  const double p = 1.25;
  const double C = jensen_constant(p);
  const auto radii = geometric_radii(0.2, 1.1, 16);
  const auto prof = rescaled_energy_profile(monopole(Vec3::Zero(), 1), Vec3::Zero(), radii, p);
  for (size_t i = 0; i < radii.size(); ++i) {
    CHECK(prof.rescaled[i] == doctest::Approx(C).epsilon(1e-10));
    CHECK(std::abs(prof.surface[i]) <= 1e-12);
    if (i > 0) CHECK(prof.energy[i] >= prof.energy[i - 1]);
  }
  const auto zero = rescaled_energy_profile(AnalyticField(), Vec3::Zero(), radii, p);
  for (size_t i = 0; i < radii.size(); ++i) CHECK(zero.rescaled[i] == 0.0);

  // divergence-free perturbation has zero flux through the spheres, so the change is second order
  const double eps = 0.01;
  const AnalyticField pert({{Vec3::Zero(), 1}}, eps, 2.0);
  const auto pp = rescaled_energy_profile(pert, Vec3::Zero(), geometric_radii(0.2, 1.1, 12), p);
  for (size_t i = 0; i < pp.radii.size(); ++i) {
    CHECK(std::abs(pp.rescaled[i] - C) <= 10 * eps * C);
    if (i > 0) CHECK(pp.rescaled[i] >= pp.rescaled[i - 1] * (1 - 0.01));
  }

  std::ostringstream os;
  write_csv(os, prof);
  const std::string s = os.str();
  CHECK(s.rfind("r,E,E_rescaled,surface_term\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(radii.size() + 1));
}

TEST_CASE("monotonicity identity") {
  const double p = 1.25;
  const auto radii = geometric_radii(0.3, 1.05, 16);
  const auto centered = monotonicity_audit(monopole(Vec3::Zero(), 1), Vec3::Zero(), radii, p);
  CHECK(centered.passed());
  CHECK(centered.data["max_abs_residual"].get<double>() <= 1e-6);

  for (const Vec3& c : {Vec3(0.1, 0.05, 0), Vec3(0, -0.2, 0.1)}) {
    const auto off = monotonicity_audit(monopole(c, 1), Vec3::Zero(), radii, p);
    CHECK(off.passed());
    // the identity is nontrivial here
    CHECK(off.data["rows"][3]["rhs"].get<double>() > 1e-3);
  }
  const auto off14 = monotonicity_audit(monopole(Vec3(0.1, 0, 0), -1), Vec3::Zero(), radii, 1.4);
  CHECK(off14.passed());

  const auto zero = monotonicity_audit(AnalyticField(), Vec3::Zero(), radii, p);
  CHECK(zero.passed());
  CHECK(zero.data["max_abs_residual"].get<double>() == 0.0);

  CHECK_THROWS_AS(monotonicity_audit(monopole(Vec3::Zero(), 1), Vec3::Zero(), geometric_radii(0.3, 1.05, 7), p),
                  Error);
}

TEST_CASE("Jensen chain on monopole translates") {
  const double p = 1.25;
  const double C = jensen_constant(p);
  for (const Vec3& c : {Vec3(0.2, 0.1, -0.3), Vec3(-0.5, 0, 0)})
    for (double r0 : {0.1, 0.35}) {
      const AnalyticField m = monopole(c, 1);
      const double E = std::pow(r0, 2 * p - 3) * lp_energy(m, Ball{c, r0}, p);
      CHECK(E == doctest::Approx(C).epsilon(1e-10));
      CHECK(std::pow(r0, 2 * p - 3) * jensen_lower_bound(m, c, r0, p) == doctest::Approx(C).epsilon(1e-12));
      // off-center: the bound only sees the radii that enclose the charge
      const Vec3 x = c + Vec3(0.3 * r0, 0, 0);
      CHECK(jensen_lower_bound(m, x, r0, p) <= lp_energy(m, Ball{x, r0}, p));
      CHECK(jensen_lower_bound(m, x, r0, p) < jensen_lower_bound(m, c, r0, p));
    }
}

TEST_CASE("eps-regularity experiment") {
  const double p = 1.25;
  const auto rep = eps_regularity_experiment(monopole(Vec3::Zero(), 1), p);
  CHECK(rep.passed());
  CHECK(rep.data["scan"]["singular_count"] == 1);
  CHECK(rep.data["E1"].get<double>() == doctest::Approx(jensen_constant(p)).epsilon(0.02));
  CHECK(rep.data["equality_gap"].get<double>() <= 0.02);

  CHECK_THROWS_AS(eps_regularity_experiment(monopole(Vec3::Zero(), 1).scaled(0.5), p), Error);

  const AnalyticField smooth({}, 0.05, 1.0);
  const auto calm = eps_regularity_experiment(smooth, p);
  CHECK(calm.passed());
  CHECK(calm.data["E1"].get<double>() < jensen_constant(p));
  CHECK(calm.data["scan"]["singular_count"] == 0);
}

TEST_CASE("dipole chain Jensen sums") {
  const double H100 = 5.187377517639621;
  const auto rep = dipole_chain_experiment(1.25, 100);
  CHECK(rep.passed());
  const double c = rep.data["c"].get<double>();
  CHECK(rep.data["sum"].get<double>() == doctest::Approx(std::sqrt(c) * H100).epsilon(1e-9));
  CHECK(rep.data["slope"].get<double>() == doctest::Approx(std::sqrt(c)).epsilon(0.1));
}

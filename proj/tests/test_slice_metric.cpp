#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "doctest.h"
#include "wbundle/error.hpp"
#include "wbundle/flow_solver.hpp"
#include "wbundle/poisson.hpp"
#include "wbundle/slice_metric.hpp"

using namespace wb;

namespace {

constexpr double kPi = std::numbers::pi;

TwoCochain smooth(MeshPtr m, std::mt19937_64& rng, int degree, double amp = 0.2) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = n(rng), b = n(rng), c = n(rng);
  const Vec3 ctr = Vec3(n(rng), n(rng), n(rng)).normalized();
  TwoCochain h = integrate_density(
      m, [&](const Vec3& x) { return amp * (a * x.x() + b * x.y() * x.z() + c * std::exp(2.0 * x.dot(ctr)) / 7.0); });
  return with_degree(h, degree);
}

TwoCochain constant(MeshPtr m, double degree) {
  return integrate_density(m, [&](const Vec3&) { return degree / (4.0 * kPi); });
}

// Q(p)^p for one charge at the south pole absorbing the uniform density:
// (1/4pi)^p 2pi int_0^pi tan^p(theta/2) sin(theta) dtheta, substituted u = tan(theta/2).
double single_charge_competitor(double p) {
  const int n = 400000;
  const double umax = 1e14;
  // u = exp(s) maps (0, inf) to the real line
  const double s0 = std::log(1e-8), s1 = std::log(umax);
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = s0 + (s1 - s0) * i / n;
    const double u = std::exp(s);
    const double g = std::pow(u, p + 1.0) / std::pow(1.0 + u * u, 2) * u;
    sum += (i == 0 || i == n ? 0.5 : 1.0) * g;
  }
  sum *= (s1 - s0) / n;
  return std::pow(std::pow(1.0 / (4.0 * kPi), p) * 8.0 * kPi * sum, 1.0 / p);
}

}  // namespace

TEST_CASE("identical slices are at distance zero") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(1);
  const TwoCochain h = smooth(m, rng, 1);
  const auto r = slice_distance(h, h, 1.25);
  CHECK(r.value == 0.0);
  CHECK(r.charges.empty());
}

TEST_CASE("uniform degree-one slice against zero") {
  const double p = 1.25;
  const double q_closed =
      std::pow(std::pow(1.0 / (4.0 * kPi), p) * 4.0 * kPi * (p * kPi / 2.0) / std::sin(p * kPi / 2.0), 1.0 / p);
  const double q = single_charge_competitor(p);
  CHECK(q == doctest::Approx(q_closed).epsilon(1e-6));

  auto m = build_icosphere(3);
  const auto r = slice_distance(TwoCochain::zero(m), constant(m, 1.0), p);
  CHECK(r.value <= q);
  CHECK(r.charges.total() == 1);
  CHECK(r.feasibility <= 1e-8);
  CHECK(r.gap <= 1e-6);
  CHECK(lp_norm(r.alpha, p) == doctest::Approx(r.value).epsilon(1e-12));
}

TEST_CASE("zero-charge feasible point bounds the distance") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(4);
  const TwoCochain h1 = smooth(m, rng, 0), h2 = smooth(m, rng, 0);
  const double p = 1.25;
  const auto r = slice_distance(h1, h2, p);
  CHECK(r.value <= lp_norm(solve_poisson(h2 - h1).flow, p) * (1 + 1e-9));
  CHECK(r.value <= charge_configuration_value(h1, h2, p, {}).value * (1 + 1e-6));
}

TEST_CASE("certificates, symmetry and determinism") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(8);
  const TwoCochain h1 = smooth(m, rng, -1), h2 = smooth(m, rng, 1);
  DistanceOptions opts;
  opts.seed = 3;
  const auto a = slice_distance(h1, h2, 1.25, opts);
  const auto b = slice_distance(h2, h1, 1.25, opts);
  const auto c = slice_distance(h1, h2, 1.25, opts);
  CHECK(a.charges.total() == 2);
  CHECK(b.charges.total() == -2);
  CHECK(std::abs(a.value - b.value) <= 1e-12 * a.value);
  CHECK(a.value == c.value);
  CHECK(a.feasibility <= 1e-8);
  const Eigen::VectorXd res =
      codifferential(a.alpha).values + a.charges.as_cochain(m->num_faces()) - (h2 - h1).values;
  CHECK(res.cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(a.gap <= opts.tol);
  CHECK(a.lower_bound <= a.value);
}

TEST_CASE("explicit zero-total pairs do not improve the merged form") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(21);
  const TwoCochain h1 = smooth(m, rng, 0), h2 = smooth(m, rng, 1);
  const double p = 1.25, tol = 1e-6;
  const auto best = slice_distance(h1, h2, p);
  std::uniform_int_distribution<int> face(0, m->num_faces() - 1);
  for (int i = 0; i < 10; ++i) {
    const ChargeSet aug = best.charges.plus(face(rng), 1).plus(face(rng), -1);
    CHECK(charge_configuration_value(h1, h2, p, aug).value >= best.value * (1 - tol));
  }
}

TEST_CASE("homogeneity at fixed charges and the p = 2 oracle") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(5);
  const TwoCochain h1 = smooth(m, rng, 0), h2 = smooth(m, rng, 0);
  const double v1 = charge_configuration_value(h1, h2, 1.4, {}, 1e-9).value;
  const double v3 = charge_configuration_value(h1 * 3.0, h2 * 3.0, 1.4, {}, 1e-9).value;
  CHECK(v3 == doctest::Approx(3.0 * v1).epsilon(1e-6));

  const auto r2 = slice_distance(h1, h2, 2.0, [] {
    DistanceOptions o;
    o.tol = 1e-9;
    return o;
  }());
  const double oracle = lp_norm(solve_poisson(h2 - h1).flow, 2.0);
  CHECK(std::abs(r2.value - oracle) <= 1e-6 * oracle);

  CHECK_THROWS_AS(slice_distance(h1, constant(m, 1.0), 2.0), Error);
}

TEST_CASE("input validation") {
  auto m = build_icosphere(2);
  const TwoCochain half = constant(m, 0.5);
  try {
    slice_distance(TwoCochain::zero(m), half, 1.25);
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDomain);
  }
  CHECK_THROWS_AS(slice_distance(TwoCochain::zero(m), TwoCochain::zero(build_icosphere(3)), 1.25), Error);
  CHECK_THROWS_AS(slice_distance(TwoCochain::zero(m), TwoCochain::zero(m), 1.0), Error);
}

TEST_CASE("d2 curve") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(2);
  const double p = 1.25, tol = 1e-6;
  const std::vector<double> budgets{2.0, 1.0, 0.5, 0.25, 0.1, 0.05};

  const TwoCochain h = smooth(m, rng, 0);
  for (const auto& pt : distance_d2(h, h, p, budgets)) CHECK(pt.value == 0.0);

  const TwoCochain h1 = smooth(m, rng, 0), h2 = smooth(m, rng, 1);
  const double d = slice_distance(h1, h2, p).value;
  const auto curve = distance_d2(h1, h2, p, budgets);
  for (size_t i = 0; i < curve.size(); ++i) {
    CHECK(curve[i].value <= d + tol);
    CHECK(curve[i].area <= budgets[i]);
    if (i > 0) CHECK(curve[i].value >= curve[i - 1].value);
  }
  CHECK(curve.front().value <= curve.back().value);

  // below one face the constraint cannot be dropped anywhere
  const auto tiny = distance_d2(h1, h2, p, {1e-6});
  CHECK(std::isinf(tiny[0].value));
  const TwoCochain g1 = smooth(m, rng, 0), g2 = smooth(m, rng, 0);
  const auto tiny0 = distance_d2(g1, g2, p, {1e-6});
  CHECK(tiny0[0].value == doctest::Approx(convex_flow_min(g2 - g1, p).value).epsilon(1e-5));
}

TEST_CASE("d3 curve") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(6);
  const double p = 1.25;
  const TwoCochain h = smooth(m, rng, 1);
  for (const auto& pt : distance_d3(h, h, p, {0.1, 1.0})) CHECK(pt.value == 0.0);

  const TwoCochain h1 = smooth(m, rng, 0), h2 = smooth(m, rng, 0);
  const double maxd = (h2 - h1).densities().cwiseAbs().maxCoeff();
  const auto big = distance_d3(h1, h2, p, {2.0 * maxd});
  CHECK(big[0].excised.empty());
  CHECK(big[0].value == doctest::Approx(convex_flow_min(h2 - h1, p).value).epsilon(1e-5));

  TwoCochain spikes = TwoCochain::zero(m);
  spikes.values[m->locate(Vec3::UnitZ(), 0)] = 1.0;
  spikes.values[m->locate(-Vec3::UnitZ(), 0)] = -1.0;
  const double full = convex_flow_min(spikes, p).value;
  const auto cut = distance_d3(TwoCochain::zero(m), spikes, p, {1.0, 1e6});
  CHECK(cut[0].excised.size() == 2);
  CHECK(cut[0].value <= full);
  CHECK(cut[1].value == doctest::Approx(full).epsilon(1e-5));

  // matched excision sets: d2 at the d3 area with that set offered as a candidate
  const auto d3 = distance_d3(h1, h2, p, {0.5 * maxd});
  const auto d2 = distance_d2(h1, h2, p, {d3[0].area + 1e-12}, {}, {d3[0].excised});
  CHECK(d2[0].value <= d3[0].value + 1e-5);
}

TEST_CASE("pullback distance") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(12);
  const TwoCochain h1 = smooth(m, rng, 0), h2 = smooth(m, rng, 1);
  const auto id = identity_map(m);
  const auto a = pullback_distance(id, h1, h2, 1.25);
  const auto b = slice_distance(h1, h2, 1.25);
  CHECK(a.value == b.value);

  const auto psi = ellipsoid_map(m, Vec3(1.5, 1.0, 1.0));
  const TwoCochain g = smooth(psi.target, rng, 1);
  CHECK(pullback_distance(psi, g, g, 1.25).value == 0.0);
}

TEST_CASE("metric audit") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(30);
  const TwoCochain h = smooth(m, rng, 1);
  const auto same = metric_audit({{h, h, h}}, 1.25);
  CHECK(same.passed());
  for (const auto& c : same.checks) CHECK(c.value == 0.0);

  std::vector<std::array<TwoCochain, 3>> triples;
  for (int i = 0; i < 4; ++i) triples.push_back({smooth(m, rng, 0), smooth(m, rng, 0), smooth(m, rng, 0)});
  DistanceOptions o;
  o.tol = 1e-9;
  const auto rep = metric_audit(triples, 2.0, o, 1e-6);
  CHECK(rep.passed());
}

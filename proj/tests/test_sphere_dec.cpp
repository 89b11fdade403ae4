#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "doctest.h"
#include "wbundle/cochain.hpp"
#include "wbundle/error.hpp"
#include "wbundle/poisson.hpp"
#include "wbundle/sphere_mesh.hpp"
#include "wbundle/vertex_map.hpp"

using namespace wb;

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

// L'Huilier's theorem, independent of the Van Oosterom-Strackee path.
double lhuilier_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  auto arc = [](const Vec3& u, const Vec3& v) { return std::acos(std::clamp(u.dot(v), -1.0, 1.0)); };
  const double x = arc(b, c), y = arc(c, a), z = arc(a, b);
  const double s = 0.5 * (x + y + z);
  const double t = std::tan(s / 2) * std::tan((s - x) / 2) * std::tan((s - y) / 2) * std::tan((s - z) / 2);
  return 4.0 * std::atan(std::sqrt(std::max(t, 0.0)));
}

Eigen::MatrixXd dense_incidence(const SphereMesh& m) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m.num_faces(), m.num_edges());
  for (int f = 0; f < m.num_faces(); ++f)
    for (int k = 0; k < 3; ++k) B(f, m.face_edges[f][k]) += m.face_edge_signs[f][k];
  return B;
}

TwoCochain random_degree_zero(MeshPtr mesh, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(mesh->num_faces());
  for (int f = 0; f < v.size(); ++f) v[f] = n(rng) * mesh->face_area[f];
  return with_degree(TwoCochain(mesh, v), 0.0);
}

}  // namespace

TEST_CASE("icosphere combinatorics and geometry") {
  auto m0 = build_icosphere(0);
  CHECK(m0->num_vertices() == 12);
  CHECK(m0->num_edges() == 30);
  CHECK(m0->num_faces() == 20);

  auto m2 = build_icosphere(2);
  CHECK(m2->num_faces() == 320);
  double oracle = 0.0;
  for (const auto& f : m2->faces) oracle += lhuilier_area(m2->vertices[f[0]], m2->vertices[f[1]], m2->vertices[f[2]]);
  CHECK(oracle == doctest::Approx(kFourPi).epsilon(1e-3));
  CHECK(m2->total_area() == doctest::Approx(kFourPi).epsilon(1e-3));

  auto m4 = build_icosphere(4);
  CHECK(m4->num_faces() == 5120);
  CHECK(m4->num_vertices() - m4->num_edges() + m4->num_faces() == 2);

  auto m3 = build_icosphere(3);
  CHECK(std::abs(m3->total_area() - kFourPi) < 1e-6);
  for (const auto& v : m3->vertices) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  for (int e = 0; e < m3->num_edges(); ++e) CHECK(m3->edge_faces[e][0] != m3->edge_faces[e][1]);
}

TEST_CASE("icosphere level guard") {
  try {
    build_icosphere(9);
    FAIL("expected resource-limit error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kResourceLimit);
  }
}

TEST_CASE("point location finds the containing face") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 d = Vec3(n(rng), n(rng), n(rng)).normalized();
    const int f = m->locate(d, i % m->num_faces());
    const auto& t = m->faces[f];
    for (int k = 0; k < 3; ++k)
      CHECK(d.dot(m->vertices[t[k]].cross(m->vertices[t[(k + 1) % 3]])) >= -1e-14);
  }
}

TEST_CASE("codifferential") {
  auto m = build_icosphere(2);
  CHECK(codifferential(OneFormCochain::zero(m)).values.cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd a(m->num_edges());
  for (int e = 0; e < a.size(); ++e) a[e] = n(rng);
  CHECK(std::abs(codifferential(OneFormCochain(m, a)).degree()) <= 1e-12);

  // gradient of a face function: compare with the dense B B^T oracle
  Eigen::VectorXd g(m->num_faces());
  for (int f = 0; f < g.size(); ++f) g[f] = n(rng);
  const Eigen::MatrixXd B = dense_incidence(*m);
  const Eigen::VectorXd expected = B * (B.transpose() * g);
  const Eigen::VectorXd got = codifferential(OneFormCochain(m, dual_gradient(*m, g))).values;
  CHECK((expected - got).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lp norms") {
  auto m = build_icosphere(3);
  const TwoCochain c = integrate_density(m, [](const Vec3&) { return 1.0 / kFourPi; });
  CHECK(c.degree() == doctest::Approx(1.0).epsilon(1e-12));
  // summation oracle for the closed form (4 pi)^{1-p} / (4 pi)^{...}: (sum |1/4pi|^p A)^{1/p}
  const double p = 1.25;
  const double closed = std::pow(kFourPi, (1.0 - p) / p);
  CHECK(lp_norm(c, p) == doctest::Approx(closed).epsilon(1e-9));
  CHECK(std::pow(kFourPi, -0.25) == doctest::Approx(0.5312).epsilon(1e-3));
  CHECK(lp_norm(TwoCochain::zero(m), p) == 0.0);
  CHECK(lp_norm(c * -3.0, p) == doctest::Approx(3.0 * lp_norm(c, p)));
  CHECK_THROWS_AS(lp_norm(c, 1.0), Error);

  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(m->num_edges(), -1.0, 2.0);
  const OneFormCochain alpha(m, a);
  CHECK(lp_norm(alpha, 1.5) > 0.0);
  CHECK(lp_norm(OneFormCochain(m, a * -2.0), 1.5) == doctest::Approx(2.0 * lp_norm(alpha, 1.5)));
  CHECK(lp_norm(OneFormCochain::zero(m), 1.5) == 0.0);
  CHECK(edge_isotropy_constant(2.0) == doctest::Approx(2.0));
}

TEST_CASE("lp norm of a smooth form converges under refinement") {
  auto density = [](const Vec3& x) { return 1.0 + 0.5 * x.z() + 0.3 * x.x() * x.y(); };
  std::vector<double> vals, hs;
  for (int level = 2; level <= 6; ++level) {
    auto m = build_icosphere(level);
    vals.push_back(lp_norm(integrate_density(m, density), 1.25));
    hs.push_back(m->max_edge_length());
  }
  const double e1 = std::abs(vals[2] - vals[4]);
  const double e0 = std::abs(vals[0] - vals[4]);
  const double order = std::log(e0 / e1) / std::log(hs[0] / hs[2]);
  CHECK(order >= 1.0);
}

TEST_CASE("Poisson solve") {
  auto m3 = build_icosphere(3);
  const auto zero = solve_poisson(TwoCochain::zero(m3));
  CHECK(zero.potential.cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(5);
  const TwoCochain f = random_degree_zero(m3, rng) - random_degree_zero(m3, rng);
  const auto sol = solve_poisson(f);
  CHECK(sol.relative_residual <= 1e-10);
  double mean = 0.0;
  for (int i = 0; i < m3->num_faces(); ++i) mean += sol.potential[i] * m3->face_area[i];
  CHECK(std::abs(mean) < 1e-10);

  CHECK_THROWS_AS(solve_poisson(integrate_density(m3, [](const Vec3&) { return 1.0; })), Error);

  auto m4 = build_icosphere(4);
  const auto band = solve_poisson(l1_band(m4));
  // spectral oracle: eigenvalue l(l+1) = 2 gives ||dg||_2 = 1 / sqrt(2)
  CHECK(lp_norm(band.flow, 2.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.02));
}

TEST_CASE("Poisson flow is the L2 minimal-norm flow") {
  auto m = build_icosphere(2);
  std::mt19937_64 rng(17);
  const TwoCochain f = random_degree_zero(m, rng);
  const auto sol = solve_poisson(f);

  // dense KKT oracle: min alpha^T M alpha s.t. B alpha = f
  const Eigen::MatrixXd B = dense_incidence(*m);
  const Eigen::VectorXd w2 = edge_lp_weights(*m, 2.0);  // M = diag(w2)
  const Eigen::MatrixXd BMB = B * w2.cwiseInverse().asDiagonal() * B.transpose();
  const Eigen::VectorXd lam = BMB.completeOrthogonalDecomposition().solve(f.values);
  const Eigen::VectorXd alpha = w2.cwiseInverse().asDiagonal() * (B.transpose() * lam);
  const double oracle = std::sqrt(alpha.dot(w2.cwiseProduct(alpha)));
  CHECK(std::abs(lp_norm(sol.flow, 2.0) - oracle) <= 1e-8 * oracle);

  // adding a circulation never decreases the norm and keeps the constraint
  Eigen::VectorXd circ = Eigen::VectorXd::Zero(m->num_edges());
  const auto& t = m->faces[0];
  // circulation around vertex t[0]: orient each incident edge by which face traverses it
  for (int e = 0; e < m->num_edges(); ++e) {
    if (m->edges[e][0] != t[0] && m->edges[e][1] != t[0]) continue;
    circ[e] = (m->edges[e][0] == t[0]) ? 1.0 : -1.0;
  }
  const OneFormCochain perturbed(m, sol.flow.values + 0.1 * circ);
  CHECK((codifferential(perturbed).values - f.values).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(lp_norm(perturbed, 2.0) >= lp_norm(sol.flow, 2.0));
}

TEST_CASE("pullback") {
  auto m = build_icosphere(3);
  std::mt19937_64 rng(9);
  const TwoCochain c = random_degree_zero(m, rng) + integrate_density(m, [](const Vec3&) { return 1.0 / kFourPi; });
  const auto id = identity_map(m);
  CHECK((pullback(id, c).values - c.values).cwiseAbs().maxCoeff() == 0.0);

  const auto psi = ellipsoid_map(m, Vec3(1.5, 1.0, 1.0));
  CHECK(psi.lipschitz > 1.0);
  CHECK(psi.lipschitz_inv > 1.0);
  const TwoCochain on_target = integrate_density(psi.target, [](const Vec3&) { return 1.0 / kFourPi; });
  const TwoCochain back = pullback(psi, on_target);
  CHECK(back.degree() == doctest::Approx(on_target.degree()).epsilon(1e-14));

  // per-face area-ratio oracle: the pulled-back density is A_target / (4 pi A_source)
  const double p = 1.25;
  double s = 0.0;
  for (int f = 0; f < m->num_faces(); ++f)
    s += std::pow(psi.target->face_area[f] / (kFourPi * m->face_area[f]), p) * m->face_area[f];
  const double oracle = std::pow(s, 1.0 / p);
  CHECK(lp_norm(back, p) == doctest::Approx(oracle).epsilon(1e-12));
  const double ratio = lp_norm(back, p) / lp_norm(on_target, p);
  const double C = psi.lipschitz * std::pow(psi.lipschitz_inv, 2.0 / p);
  CHECK(ratio <= C);
  CHECK(ratio >= 1.0 / C);

  CHECK_THROWS_AS(pullback(psi, c), Error);
}

TEST_CASE("mesh and cochain files") {
  auto m = build_icosphere(2);
  std::stringstream off;
  write_off(off, *m);
  auto back = read_off(off);
  CHECK(back->level == 2);
  CHECK(back->content_hash() == m->content_hash());

  std::mt19937_64 rng(1);
  const TwoCochain c = random_degree_zero(m, rng);
  std::stringstream csv;
  write_cochain_csv(csv, c);
  const TwoCochain c2 = read_cochain_csv(csv, m);
  CHECK((c2.values - c.values).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream bad("face_id,value\n0,1.0\n");
  CHECK_THROWS_AS(read_cochain_csv(bad, m), Error);
}

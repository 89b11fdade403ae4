#include "wbundle/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "wbundle/error.hpp"
#include "wbundle/flow_solver.hpp"
#include "wbundle/poisson.hpp"
#include "wbundle/vertex_map.hpp"

namespace wb {

TwoCochain random_slice(MeshPtr mesh, std::mt19937_64& rng, int degree, double amp) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = n(rng), b = n(rng), c = n(rng);
  const Vec3 ctr = Vec3(n(rng), n(rng), n(rng)).normalized();
  TwoCochain h = integrate_density(mesh, [&](const Vec3& x) {
    return amp * (a * x.x() + b * x.y() * x.z() + c * std::exp(2.0 * x.dot(ctr)) / 7.0);
  });
  return with_degree(h, degree);
}

AnalyticField three_charge_field() {
  return AnalyticField({{Vec3(0.1, 0, 0), 1}, {Vec3(-0.3, 0.2, 0.1), -2}, {Vec3(0.2, -0.25, 0.3), 1}}, 0.3, 2.0);
}

AuditReport flow_oracle_experiment(int level, double rel_tol, double poisson_tol) {
  const MeshPtr mesh = build_icosphere(level);
  const TwoCochain band = l1_band(mesh);
  const FlowResult flow = convex_flow_min(band, 2.0, 1e-9);
  const double poisson = lp_norm(solve_poisson(band).flow, 2.0);
  const double expected = 1.0 / std::sqrt(2.0);
  AuditReport rep;
  rep.title = "p = 2 flow oracle";
  rep.at_most("relative error against 1/sqrt(2)", std::abs(flow.value - expected) / expected, rel_tol);
  rep.at_most("relative gap to the Poisson flow", std::abs(flow.value - poisson) / poisson, poisson_tol);
  rep.data = {{"level", level}, {"value", flow.value}, {"poisson", poisson}, {"expected", expected},
              {"gap", flow.gap}, {"iterations", flow.iterations}};
  return rep;
}

AuditReport metric_axioms_experiment(int n_triples, double p, int level, std::uint64_t seed,
                                     const DistanceOptions& opts) {
  require(n_triples > 0, ErrorCode::kInvalidArgument, "need at least one triple");
  const MeshPtr mesh = build_icosphere(level);
  std::mt19937_64 rng(seed);
  std::vector<std::array<TwoCochain, 3>> triples;
  for (int i = 0; i < n_triples; ++i)
    triples.push_back({random_slice(mesh, rng, 0), random_slice(mesh, rng, 1), random_slice(mesh, rng, 1)});
  AuditReport rep = metric_audit(triples, p, opts);
  rep.title = "metric axioms";
  rep.data["triples"] = n_triples;
  rep.data["seed"] = seed;
  rep.data["level"] = level;
  return rep;
}

AuditReport variant_ordering_experiment(int n_pairs, double p, int level, std::uint64_t seed, double tol,
                                        const DistanceOptions& opts) {
  require(n_pairs > 0, ErrorCode::kInvalidArgument, "need at least one pair");
  const MeshPtr mesh = build_icosphere(level);
  std::mt19937_64 rng(seed);
  const std::vector<double> budgets{2.0, 1.0, 0.5, 0.25, 0.1, 0.05};
  double worst_d2 = -std::numeric_limits<double>::infinity();
  double worst_matched = -std::numeric_limits<double>::infinity();
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < n_pairs; ++i) {
    const TwoCochain h1 = random_slice(mesh, rng, 0), h2 = random_slice(mesh, rng, i % 2);
    const double d = slice_distance(h1, h2, p, opts).value;
    const auto curve = distance_d2(h1, h2, p, budgets, opts);
    nlohmann::json d2 = nlohmann::json::array();
    for (const auto& c : curve) {
      worst_d2 = std::max(worst_d2, c.value - d);
      d2.push_back(std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(nullptr));
    }
    const double k = 0.5 * (h2 - h1).densities().cwiseAbs().maxCoeff();
    const auto d3 = distance_d3(h1, h2, p, {k}, opts.tol);
    double matched = std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(d3[0].value)) {
      matched = distance_d2(h1, h2, p, {d3[0].area + 1e-12}, opts, {d3[0].excised})[0].value;
      worst_matched = std::max(worst_matched, matched - d3[0].value);
    }
    rows.push_back({{"d", d},
                    {"d2", d2},
                    {"d3", std::isfinite(d3[0].value) ? nlohmann::json(d3[0].value) : nlohmann::json(nullptr)},
                    {"d2_matched", std::isfinite(matched) ? nlohmann::json(matched) : nlohmann::json(nullptr)}});
  }
  AuditReport rep;
  rep.title = "variant ordering";
  rep.at_most("max d2 - d over budgets", std::max(worst_d2, 0.0), tol);
  rep.at_most("max d2 - d3 on matched sets", std::max(worst_matched, 0.0), tol);
  rep.data = {{"pairs", n_pairs}, {"seed", seed}, {"level", level}, {"budgets", budgets}, {"rows", rows}};
  return rep;
}

AuditReport flux_integrality_experiment(int n_spheres, int level, std::uint64_t seed, double tol) {
  const AnalyticField f = three_charge_field();
  const AuditReport whole = integer_flux_audit(f, n_spheres, seed, level, tol);
  const AuditReport half = integer_flux_audit(f.scaled(0.5), n_spheres, seed, level, tol);
  AuditReport rep;
  rep.title = "flux integrality";
  rep.at_most("max distance of flux to an integer", whole.checks.at(0).value, tol);
  rep.expect("half-scaled field flagged", !half.passed());
  rep.data = {{"field", to_json(f)}, {"integer", to_json(whole)}, {"half", to_json(half)}};
  return rep;
}

AuditReport bilipschitz_experiment(int n_pairs, double p, int level, std::uint64_t seed, double stretch,
                                   const DistanceOptions& opts) {
  require(n_pairs > 0, ErrorCode::kInvalidArgument, "need at least one pair");
  const MeshPtr mesh = build_icosphere(level);
  const VertexMap psi = ellipsoid_map(mesh, Vec3(stretch, 1.0, 1.0));
  const double C = psi.lipschitz * std::pow(psi.lipschitz_inv, 2.0 / p);
  std::mt19937_64 rng(seed);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < n_pairs; ++i) {
    const TwoCochain g1 = random_slice(psi.target, rng, 0), g2 = random_slice(psi.target, rng, i % 2);
    const double d = slice_distance(g1, g2, p, opts).value;
    const double dpsi = pullback_distance(psi, g1, g2, p, opts).value;
    const double ratio = dpsi / d;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    rows.push_back({{"d", d}, {"d_psi", dpsi}, {"ratio", ratio}});
  }
  AuditReport rep;
  rep.title = "bilipschitz equivalence";
  rep.at_most("max ratio / C", hi / C, 1.0);
  rep.at_most("1 / (C min ratio)", 1.0 / (C * lo), 1.0);
  rep.data = {{"pairs", n_pairs}, {"seed", seed},  {"level", level}, {"stretch", stretch},
              {"L", psi.lipschitz}, {"L_inv", psi.lipschitz_inv}, {"C", C}, {"min_ratio", lo},
              {"max_ratio", hi},    {"rows", rows}};
  return rep;
}

}  // namespace wb

#pragma once

#include <cstdint>
#include <random>

#include "wbundle/cochain.hpp"
#include "wbundle/field3.hpp"
#include "wbundle/report.hpp"
#include "wbundle/slice_metric.hpp"

namespace wb {

/// Smooth seeded slice: a linear, a quadratic and an exponential bump term of
/// amplitude `amp`, shifted to the requested degree.
TwoCochain random_slice(MeshPtr mesh, std::mt19937_64& rng, int degree, double amp = 0.2);

/// Fixed three-charge field (+1, -2, +1) with an ABC background.
AnalyticField three_charge_field();

/// convex_flow_min of the l = 1 band at p = 2 against 1/sqrt(2) and the Poisson flow norm.
AuditReport flow_oracle_experiment(int level, double rel_tol = 0.02, double poisson_tol = 1e-6);

/// metric_audit over seeded triples of degrees (0, 1, 1).
AuditReport metric_axioms_experiment(int n_triples, double p, int level, std::uint64_t seed,
                                     const DistanceOptions& opts = {});

/// d2 <= d at every budget and d2 <= d3 on the d3 excision sets, over seeded pairs.
AuditReport variant_ordering_experiment(int n_pairs, double p, int level, std::uint64_t seed, double tol = 1e-5,
                                        const DistanceOptions& opts = {});

/// integer_flux_audit on three_charge_field and on its half-scaled copy, which
/// must be flagged.
AuditReport flux_integrality_experiment(int n_spheres, int level, std::uint64_t seed, double tol = 1e-3);

/// Ratios d_Psi / d for the x-stretching ellipsoid map with the given ratio; they
/// must lie in [1/C, C] with C = L L_inv^{2/p}.
AuditReport bilipschitz_experiment(int n_pairs, double p, int level, std::uint64_t seed, double stretch = 1.5,
                                   const DistanceOptions& opts = {});

}  // namespace wb

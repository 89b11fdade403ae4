#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wbundle/energy_reg.hpp"
#include "wbundle/field3.hpp"
#include "wbundle/slice_metric.hpp"

namespace wb {

/// Euclidean distance of (x, r) in R^4.
double ball_distance(const Ball& a, const Ball& b);

/// x in B_{1/2}, r > 0 and B(x, r) inside B_1.
bool admissible(const Ball& b);

/// |x - x'| <= (r - r') / 2 and r <= 1 after ordering by radius; false for equal radii.
bool hypothesis_H(const Ball& a, const Ball& b);

/// h(B): the slice of `field` on the sphere of B.
TwoCochain slice(const VectorField& field, const Ball& b, MeshPtr mesh);

struct PathSegment {
  bool h_ok = false;
  double gap = 0.0;  // |r - r'|
};

struct SegmentPath {
  std::vector<Ball> balls;  // consecutive balls are joined by a segment
  std::vector<PathSegment> segments;
  std::string shape;  // empty, direct, V, W, M

  int num_segments() const { return static_cast<int>(segments.size()); }
  double max_gap() const;
  /// <= 4 segments, (H) on each, max gap <= 2|B - B'|, every ball admissible.
  bool valid() const;
};

using BallPredicate = std::function<bool(const Ball&)>;

/// Polygonal path of (H)-segments inside the admissible set. Direct segments are
/// taken when (H) already holds; otherwise V (common apex), W (common valley) and
/// M (valley with an apex on either side) candidates are scanned and the valid one
/// with the least sum of |S_r|^{1-1/p} wins. `reject` vetoes intermediate balls
/// (used to keep slices away from singularities).
SegmentPath plan_path(const Ball& from, const Ball& to, double p = 1.25, const BallPredicate& reject = {});

struct RadialCompetitor {
  TwoCochain average;    // mean over t of h(x_t, r_t)
  OneFormCochain alpha;  // flux of the field through the surface swept by each edge
  double residual = 0.0;  // max_f |d*alpha - (h(B') - h(B))|, quadrature error only
};

/// Sweeps A(s, t) = x_t + r_t s between B' (t = 0) and B (t = 1) with n_t
/// Gauss points in t. alpha is feasible for d(h(B), h(B')) without charges.
/// Throws Domain when (H) fails and Degenerate when a singularity lies in the shell.
RadialCompetitor radial_average_competitor(const VectorField& field, const Ball& b, const Ball& b2, MeshPtr mesh,
                                           int n_t = 32);

/// 2 |r - r'|^{1-1/p} (integral over the shell of |F|^p)^{1/p}. Throws Domain when (H) fails.
double segment_holder_bound(const VectorField& field, const Ball& b, const Ball& b2, double p);

struct HolderOptions {
  int level = 3;
  double r_min = 0.05;
  double tol = 1e-6;  // absolute slack on every inequality
  DistanceOptions distance;
};

/// Random admissible pairs: d(h(B), h(B')) against 16 ||F||_p |B - B'|^{1-1/p},
/// against the chained bound over plan_path, and every path segment against its
/// factor-2 bound. Spheres within the degenerate band of a singularity are redrawn.
AuditReport holder_audit(const VectorField& field, int n_pairs, double p, std::uint64_t seed,
                         const HolderOptions& opts = {});

/// Fixed smooth test densities for the weak-convergence proxy.
std::vector<std::string> test_pairing_names();
std::vector<double> test_pairings(const TwoCochain& h);

struct MetrizationRow {
  int l = 0;
  double norm = 0.0;  // ||h_n||_p
  double distance = 0.0;
  double max_pairing = 0.0;  // max_j |<h_n - h_star, psi_j>|
  std::vector<double> pairings;
};

struct MetrizationOptions {
  bool equibounded = true;  // false: band amplitude l^{2p-2}
  DistanceOptions distance;
};

/// h_n = h_star + unit-L^p degree-l sectoral band for each l. Checks d strictly
/// decreasing, l d <= 2 l_0 d_0 and pairings shrinking; the non-equibounded variant
/// reports the norm growth instead of asserting convergence.
AuditReport metrization_experiment(const TwoCochain& h_star, const std::vector<int>& bands, double p,
                                   const MetrizationOptions& opts = {});

struct BlowupOptions {
  int level = 8;
  double cap = 3.0;            // cap angular radius in units of rho
  double resolution = 3.0;     // rho / (1 + rho) must exceed this many max edge lengths
  double slope_tol = 0.15;
};

/// Unit monopole at the origin, slices on the spheres about (0, 0, 1) of radius
/// 1 + rho. Fits log of the slice L^p energy on the cap facing the origin against
/// log rho with a linear-in-rho correction column; the expected slope is 2 - 2p.
/// Radii below the mesh resolution are excluded and listed.
AuditReport blowup_experiment(double p, const std::vector<double>& rho_grid, const BlowupOptions& opts = {});

/// Integer-flux fields whose charges converge to a limit configuration: every member
/// and the limit keep integer slice degrees on random admissible spheres.
AuditReport closure_replay(int n_members, int n_spheres, std::uint64_t seed, int level = 3, double tol = 1e-3);

nlohmann::json to_json(const Ball& b);
nlohmann::json to_json(const SegmentPath& path);

}  // namespace wb

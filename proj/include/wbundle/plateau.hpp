#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wbundle/error.hpp"
#include "wbundle/field3.hpp"
#include "wbundle/slice_metric.hpp"

namespace wb {

/// Cubic n^3 grid over [-1, 1]^3. The solver domain is the set of cells whose
/// centers lie in the open unit ball; boundary faces separate it from the rest.
struct BallGrid;
using BallGridPtr = std::shared_ptr<const BallGrid>;

/// Cached per n (thread-safe). Throws Domain for n < 4 or n > 128.
BallGridPtr ball_grid(int n);

int active_cells(const BallGrid& g);
int boundary_faces(const BallGrid& g);
int interior_faces(const BallGrid& g);

struct ChargeSite {
  std::array<int, 3> cell{0, 0, 0};
  Vec3 position = Vec3::Zero();  // cell center
  int charge = 0;
};

struct ChargeConfig3 {
  int n = 0;  // grid size the cells refer to
  std::vector<ChargeSite> sites;

  int total() const;
  /// Canonical text form: sorted "i,j,k:q" entries.
  std::string key() const;
};

/// Snaps positions to the cells of the n-grid, merging entries that share a cell
/// and dropping zero sums. Throws Domain when a position is outside the domain.
ChargeConfig3 snap_charges(const std::vector<std::pair<Vec3, int>>& charges, int n);

/// Rounded total of phi. Throws Domain beyond `tol` of an integer.
int datum_degree(const TwoCochain& phi, double tol = 1e-3);

/// Presets on the unit sphere: constant density k / 4pi; two lobes around the
/// poles with density proportional to exp(kappa z^2), total k.
TwoCochain constant_datum(MeshPtr mesh, int k);
TwoCochain two_lobe_datum(MeshPtr mesh, int k = 2, double kappa = 6.0);

/// Outward fluxes through the boundary faces: the density of phi at the radial
/// projection of 2x2 sub-squares times their signed solid angles, then shifted
/// along the solid angles so the sum equals the rounded degree exactly.
std::vector<double> boundary_fluxes(const BallGrid& g, const TwoCochain& phi);

struct InnerOptions {
  double tol = 1e-5;  // relative duality gap on the cell energy
  int max_iter = 4000;
  int memory = 12;  // L-BFGS pairs
};

struct InnerResult {
  GridField field;
  double energy = 0.0;  // cells + cap
  double cells = 0.0;   // sum over domain cells of h^3 |X_c|^p
  double cap = 0.0;     // |q|^p h^{3-2p} K(p) per charge cell
  double gap = 0.0;     // relative to `cells`
  double divergence_residual = 0.0;  // max over domain cells of |div - q|
  double boundary_residual = 0.0;    // max over boundary faces of |flux - prescribed|
  int iterations = 0;
  bool converged = false;
};

class InnerNotConverged : public Error {
 public:
  InnerNotConverged(const std::string& msg, InnerResult best)
      : Error(ErrorCode::kNotConverged, msg), best_(std::move(best)) {}
  const InnerResult& best() const noexcept { return best_; }

 private:
  InnerResult best_;
};

/// Minimizes sum_c h^3 |X_c|^p over face fluxes with div = charges on every
/// domain cell and the boundary fluxes of phi. Warm start is the least-squares
/// (p = 2) solution; L-BFGS runs in the null space of the divergence, and the
/// dual certificate corrects the gradient multipliers cell by cell along grid
/// lines. Throws Infeasible on a charge/degree mismatch, InnerNotConverged with
/// the best iterate when the gap stays above tol.
InnerResult inner_solve(const ChargeConfig3& charges, const TwoCochain& phi, double p, int n,
                        const InnerOptions& opts = {});

struct OuterOptions {
  std::vector<int> levels;  // coarse to fine, the last one is the output grid; default from n
  int restarts = 4;
  std::uint64_t seed = 1;
  int max_moves = 40;         // accepted moves per restart and level
  int pair_proposals = 4;     // random +-1 pair creations per round
  int local_search_max_n = 32;  // finer levels only solve the carried configuration
  int threads = 1;
  bool boundary_trace = true;  // run membership_check on the result
  InnerOptions inner;
};

struct OuterStep {
  int level = 0;  // grid size
  int restart = 0;
  std::string move;
  std::string config;
  double energy = 0.0;
};

struct ExploredConfig {
  int level = 0;
  std::string config;
  double energy = 0.0;
  double gap = 0.0;
};

struct PlateauResult {
  InnerResult solution;
  ChargeConfig3 charges;
  double p = 1.25;
  int degree = 0;
  std::vector<OuterStep> trace;       // accepted moves
  std::vector<ExploredConfig> explored;
  nlohmann::json trace_table;         // boundary trace convergence (trace_profile)
};

/// Coarse-to-fine greedy search over charge configurations: relocation to the six
/// neighbor cells, unit transfers between sites and to neighbors, +-1 pair creation
/// and annihilation. Starts from the whole degree at the flux-weighted centroid
/// (restart 0) or scattered around it (seeded), keeps every explored energy.
PlateauResult outer_search(const TwoCochain& phi, double p, int n, const OuterOptions& opts = {});

struct TraceOptions {
  double tol = 0.1;  // extrapolated d at rho -> 0
  DistanceOptions distance;
};

struct TraceProfile {
  std::vector<double> rho;       // decreasing
  std::vector<double> distance;  // d(F(. + rho), phi)
  std::vector<double> degree;    // slice fluxes
  double exponent = 0.0;         // s in d ~ d_0 + b rho^s
  double intercept = 0.0;        // d_0
  bool degree_match = true;
  bool member = false;
  std::string verdict;
};

/// Slices on the spheres of radius 1 - rho about the origin against phi. The
/// verdict is membership when every slice degree rounds to deg(phi) and the
/// fitted d_0 is at most tol.
TraceProfile trace_profile(const VectorField& field, const TwoCochain& phi, std::vector<double> rho_grid, double p,
                           const TraceOptions& opts = {});

/// trace_profile on a default rho grid (eight geometric values from 0.4 down to
/// the larger of 0.02 and two grid cells for grid fields).
TraceProfile membership_check(const VectorField& field, const TwoCochain& phi, double p,
                              const TraceOptions& opts = {});

/// Charges at distance 1/n from the center for each n, all solved against the
/// constant degree-1 datum; the limit is the centered unit monopole. Checks
/// membership of every member and the limit, rejection of a mismatched datum and
/// limit energy <= min member energy + tolerance.
AuditReport trace_preservation_experiment(const std::vector<int>& ns, double p, int grid_n, int mesh_level = 3,
                                          double energy_tol = 0.02);

nlohmann::json to_json(const ChargeConfig3& c);
nlohmann::json to_json(const InnerResult& r);
nlohmann::json to_json(const TraceProfile& t);
nlohmann::json to_json(const PlateauResult& r);

}  // namespace wb

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wbundle/field3.hpp"
#include "wbundle/report.hpp"

namespace wb {

struct Ball {
  Vec3 x = Vec3::Zero();
  double r = 1.0;
};

struct Box {
  Vec3 lo = Vec3::Constant(-1.0);
  Vec3 hi = Vec3::Constant(1.0);
};

struct EnergyOptions {
  int radial = 60;     // Gauss-Legendre nodes per radial interval
  int polar = 48;      // Gauss-Legendre nodes in cos(theta)
  int azimuthal = 96;  // trapezoid nodes in phi
};

/// (4 pi)^{1-p} / (3 - 2p): energy of the unit monopole in any ball centered at its charge,
/// and the Jensen lower bound forced by a point of nonzero flux at every scale.
double jensen_constant(double p);

/// Integral of |X|^p over the region. Returns +inf when a charge lies in the
/// closed region and p >= 3/2. A single monopole uses the exact axisymmetric
/// form; other analytic fields use a smooth partition of unity around each
/// charge (polar coordinates with u = t^{3-2p}) plus a regular remainder.
/// GridField input is dispatched to the grid overload.
double lp_energy(const VectorField& field, const Ball& region, double p, const EnergyOptions& opts = {});
double lp_energy(const VectorField& field, const Box& region, double p, const EnergyOptions& opts = {});

/// Exact energy of k (x - c)/(4 pi |x - c|^3) in B(x, R) with D = |c - x|.
double monopole_energy(double k, double D, double R, double p);

/// Self-energy correction for a unit charge at a cell center on a unit grid:
/// sum over nearby cells of (integral of |Phi|^p) - |face-averaged Phi|^p.
/// Scales as |q|^p h^{3-2p}.
double cell_cap_constant(double p);

struct GridEnergy {
  double cells = 0.0;  // sum of w_c h^3 |V_c|^p with fractional ball weights w_c
  double cap = 0.0;    // charge-cell corrections
  int charge_cells = 0;
  double total() const { return cells + cap; }
};

/// Cell-summed energy with face-to-center averaging and a capped correction
/// for every cell carrying nonzero divergence.
GridEnergy grid_energy(const GridField& g, const Ball& region, double p);
GridEnergy grid_energy(const GridField& g, const Box& region, double p);

/// p r^{2p-3} times the integral over the sphere of |X|^{p-2} |X_tan|^2:
/// the radial derivative of the rescaled energy for stationary fields.
double surface_term(const VectorField& field, const Vec3& x, double r, double p, const EnergyOptions& opts = {});

struct EnergyProfile {
  Vec3 x = Vec3::Zero();
  double p = 1.25;
  std::vector<double> radii;
  std::vector<double> energy;
  std::vector<double> rescaled;
  std::vector<double> surface;
};

EnergyProfile rescaled_energy_profile(const VectorField& field, const Vec3& x, const std::vector<double>& radii,
                                      double p, const EnergyOptions& opts = {});

/// r, E, E_rescaled, surface_term
void write_csv(std::ostream& os, const EnergyProfile& prof);
nlohmann::json to_json(const EnergyProfile& prof);

/// n radii r0, r0 q, r0 q^2, ...
std::vector<double> geometric_radii(double r0, double ratio, int n);

/// Central differences of the rescaled energy against the surface term at the
/// interior radii. A node passes when |lhs - rhs| <= abs_tol or the relative
/// residual is <= rel_tol. Throws Domain for fewer than 8 radii.
AuditReport monotonicity_audit(const VectorField& field, const Vec3& x, const std::vector<double>& radii, double p,
                               double rel_tol = 0.05, double abs_tol = 1e-6, const EnergyOptions& opts = {});

struct EpsRegularityOptions {
  int scan_points = 9;  // per axis over [-3/4, 3/4]^3
  int mesh_level = 2;
  double threshold = 0.25;
  int scan_radii = 8;     // geometric radii in [0.02, threshold]
  double jensen_tol = 0.02;
};

/// E_1(F, B_1), the Jensen constant, a property-(P) scan of B_{3/4}, and the
/// rescaled energy at every flagged point. Throws Domain when a charge is not
/// an integer (the field is outside the integral class).
AuditReport eps_regularity_experiment(const AnalyticField& field, double p, const EpsRegularityOptions& opts = {});

/// (4 pi)^{1-p} integral over (0, r0) of r^{2-2p} |flux(x, r)|^p dr, with the
/// enclosed charge as flux: a lower bound for the energy of B(x, r0).
double jensen_lower_bound(const AnalyticField& field, const Vec3& x, double r0, double p);

/// Per-ball Jensen bounds around the + charge of each dipole (radius a_i / 2),
/// normalized by C(p) 2^{2p-3}, against c^{3-2p} H_N and a log fit of partial sums.
AuditReport dipole_chain_experiment(double p, int n, double tol = 0.05, double slope_tol = 0.10);

}  // namespace wb

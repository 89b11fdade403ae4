#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "wbundle/sphere_mesh.hpp"

namespace wb {

/// Discrete 2-form on a sphere mesh. Each entry is the integral of the form over
/// the face, so the degree is a plain sum and densities are value / area.
struct TwoCochain {
  MeshPtr mesh;
  Eigen::VectorXd values;

  TwoCochain() = default;
  TwoCochain(MeshPtr m, Eigen::VectorXd v);
  static TwoCochain zero(MeshPtr m);

  double degree() const { return values.sum(); }
  double density(int face) const { return values[face] / mesh->face_area[face]; }
  Eigen::VectorXd densities() const;

  TwoCochain operator+(const TwoCochain& o) const;
  TwoCochain operator-(const TwoCochain& o) const;
  TwoCochain operator*(double s) const;
};

/// Discrete 1-form: one value per edge, read as the flux of the dual flow
/// across that edge (from edge_faces[e][0] into edge_faces[e][1]).
struct OneFormCochain {
  MeshPtr mesh;
  Eigen::VectorXd values;

  OneFormCochain() = default;
  OneFormCochain(MeshPtr m, Eigen::VectorXd v);
  static OneFormCochain zero(MeshPtr m);
};

using DensityFn = std::function<double(const Vec3&)>;

/// Face-integrates a density on S^2 with the centroid rule on the four
/// midpoint sub-triangles of each face.
TwoCochain integrate_density(MeshPtr mesh, const DensityFn& density);

/// Divergence of the dual flow: per-face signed sum of boundary edge values.
TwoCochain codifferential(const OneFormCochain& alpha);

/// Transposed incidence: (grad g)_e = g[f0] - g[f1] for a face function g.
Eigen::VectorXd dual_gradient(const SphereMesh& mesh, const Eigen::VectorXd& face_fn);

/// Isotropy constant c_p = sqrt(pi) Gamma(p/2+1) / Gamma((p+1)/2) that makes the
/// edge quadrature of |alpha|^p exact on average over directions (c_2 = 2).
double edge_isotropy_constant(double p);

/// (sum_f |v_f/A_f|^p A_f)^(1/p). Throws Domain for p <= 1.
double lp_norm(const TwoCochain& c, double p);

/// (c_p sum_e |alpha_e/l_e|^p A_e^diam)^(1/p). Throws Domain for p <= 1.
double lp_norm(const OneFormCochain& alpha, double p);

/// Per-edge weights w_e with ||alpha||_p^p = sum_e w_e |alpha_e|^p.
Eigen::VectorXd edge_lp_weights(const SphereMesh& mesh, double p);

/// Unit-L^2 projection of the coordinate function axis . x (an l = 1 band).
TwoCochain l1_band(MeshPtr mesh, const Vec3& axis = Vec3::UnitZ());

/// Re (x + i y)^l, a degree-l spherical harmonic, scaled to unit L^p norm.
TwoCochain sectoral_band(MeshPtr mesh, int l, double p);

/// Distributes `target - degree` proportionally to face area.
TwoCochain with_degree(const TwoCochain& c, double target);

void write_cochain_csv(std::ostream& os, const TwoCochain& c);
TwoCochain read_cochain_csv(std::istream& is, MeshPtr mesh);
nlohmann::json cochain_sidecar(const TwoCochain& c, double p);

void write_oneform_csv(std::ostream& os, const OneFormCochain& alpha);

}  // namespace wb

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wbundle/cochain.hpp"
#include "wbundle/report.hpp"

namespace wb {

struct PointCharge {
  Vec3 center = Vec3::Zero();
  double k = 0.0;  // integer for members of the class; scaled fields may break this
};

/// 3D vector field; fluxes through closed surfaces are the 2-form integrals.
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual Vec3 value(const Vec3& x) const = 0;
  /// Point singularities, used for degenerate-slice checks and adaptive quadrature.
  virtual std::vector<PointCharge> singularities() const { return {}; }
  /// Throws Domain when the closed ball B(x, r) leaves the field's domain.
  virtual void check_ball(const Vec3& x, double r) const;
};

/// Sum of normalized monopoles (k / 4pi)(x - c)/|x - c|^3, an optional ABC flow
///   A (sin kz + cos ky, sin kx + cos kz, sin ky + cos kx)
/// (divergence free, equal to its own curl up to 1/k), and a global scale.
class AnalyticField : public VectorField {
 public:
  AnalyticField() = default;
  AnalyticField(std::vector<PointCharge> charges, double abc_amplitude = 0.0, double abc_wavenumber = 1.0,
                double scale = 1.0);

  Vec3 value(const Vec3& x) const override;
  std::vector<PointCharge> singularities() const override;

  /// Sum of scaled charges strictly inside B(x, r).
  double enclosed_charge(const Vec3& x, double r) const;
  AnalyticField scaled(double s) const;

  const std::vector<PointCharge>& charges() const { return charges_; }
  double abc_amplitude() const { return abc_amp_; }
  double abc_wavenumber() const { return abc_k_; }
  double scale() const { return scale_; }

 private:
  std::vector<PointCharge> charges_;
  double abc_amp_ = 0.0;
  double abc_k_ = 1.0;
  double scale_ = 1.0;
};

/// Throws InvalidArgument for k = 0.
AnalyticField monopole(const Vec3& center, int k);

nlohmann::json to_json(const AnalyticField& f);
AnalyticField analytic_field_from_json(const nlohmann::json& j);

/// Charges within this fraction of r from the sphere make the slice degenerate.
constexpr double kDegenerateBand = 1e-2;

/// Slice r^2 X(x + r sigma) . sigma integrated over each face: centroid rule on
/// the four midpoint sub-triangles, refined adaptively near point singularities.
/// Throws Degenerate when a singularity lies in the surface band.
TwoCochain restrict_to_sphere(const VectorField& field, const Vec3& x, double r, MeshPtr mesh);

double flux(const VectorField& field, const Vec3& x, double r, MeshPtr mesh);

/// True when some singularity lies within the degenerate band of the sphere.
bool degenerate_sphere(const VectorField& field, const Vec3& x, double r);

/// Random admissible spheres with centers in B_{1/2} inside B_1.
AuditReport integer_flux_audit(const VectorField& field, int n_spheres, std::uint64_t seed, int level = 3,
                               double tol = 1e-3);

struct PScanRow {
  Vec3 x;
  std::vector<double> zero_radii;  // radii below the threshold with |flux| <= tol
  int radii_tested = 0;
  bool singular = false;
};

struct PScanReport {
  double threshold = 0.0;
  double tol = 0.0;
  std::vector<PScanRow> rows;
  int singular_count() const;
};

/// A point is singular when no tested radius below `threshold` has zero flux.
PScanReport property_P_scan(const VectorField& field, const std::vector<Vec3>& points,
                            const std::vector<double>& radii, double threshold, MeshPtr mesh,
                            double tol = 1e-3);

/// Cell centers of an n^3 grid over [-R, R]^3 that fall inside B_R (n odd puts
/// a point at the origin).
std::vector<Vec3> ball_grid_points(double R, int n);

nlohmann::json to_json(const PScanReport& r);

struct DipoleChain {
  double p = 0.0;
  double c = 0.0;  // a_i = c i^{-1/(3-2p)}, sum a_i = 1
  int n = 0;
  std::vector<double> a;
  std::vector<Vec3> centers;  // balls of radius a_i, tangent along the x axis from -1
  AnalyticField field;        // +1 at center + a_i/2, -1 at center - a_i/2

  /// sum_{i <= m} a_i^{3-2p}
  double partial_sum(int m) const;
};

/// Throws Domain for p outside (1, 1.5) or n outside [1, 10^4].
DipoleChain dipole_chain(double p, int n);

/// Staggered (MAC) grid: one flux value per cell face, X.n integrated over the face.
/// fx has (nx+1) ny nz entries indexed (i, j, k) with i fastest, likewise fy, fz.
class GridField : public VectorField {
 public:
  GridField() = default;
  GridField(std::array<int, 3> dims, double spacing, const Vec3& origin);

  const std::array<int, 3>& dims() const { return dims_; }
  double spacing() const { return h_; }
  const Vec3& origin() const { return origin_; }
  int num_cells() const { return dims_[0] * dims_[1] * dims_[2]; }

  // face indexing per axis
  int face_index(int axis, int i, int j, int k) const;
  int num_faces(int axis) const;
  double& face(int axis, int i, int j, int k) { return flux_[axis][face_index(axis, i, j, k)]; }
  double face(int axis, int i, int j, int k) const { return flux_[axis][face_index(axis, i, j, k)]; }
  std::vector<double>& fluxes(int axis) { return flux_[axis]; }
  const std::vector<double>& fluxes(int axis) const { return flux_[axis]; }

  int cell_index(int i, int j, int k) const { return i + dims_[0] * (j + dims_[1] * k); }
  Vec3 cell_center(int i, int j, int k) const;
  /// Outward flux sum of the cell, i.e. the stored charge.
  double divergence(int i, int j, int k) const;
  /// Face-averaged field in the cell.
  Vec3 cell_vector(int i, int j, int k) const;
  /// Outward flux through the boundary of the cell box [lo, hi) (cell indices).
  double box_flux(const std::array<int, 3>& lo, const std::array<int, 3>& hi) const;

  /// Staggered interpolation: each component linear along its own axis between
  /// face values and trilinear across the others.
  Vec3 value(const Vec3& x) const override;
  std::vector<PointCharge> singularities() const override;
  void check_ball(const Vec3& x, double r) const override;

  double p = 1.25;
  nlohmann::json meta;

 private:
  std::array<int, 3> dims_{0, 0, 0};
  double h_ = 0.0;
  Vec3 origin_ = Vec3::Zero();
  std::array<std::vector<double>, 3> flux_;
};

/// Exact face fluxes: monopoles by the solid angle each face subtends, the ABC
/// term by closed-form face integrals. Throws Degenerate if a charge lies on a face.
GridField rasterize(const AnalyticField& field, std::array<int, 3> dims, double spacing, const Vec3& origin);

/// One-line JSON header, newline, then little-endian float64 x-, y-, z-face blocks.
void write_grid(std::ostream& os, const GridField& g);
GridField read_grid(std::istream& is);
void write_grid(const std::string& path, const GridField& g);
GridField read_grid(const std::string& path);

}  // namespace wb

#include "wbundle/cochain.hpp"

#include <cmath>
#include <complex>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "wbundle/error.hpp"

namespace wb {

namespace {

void check_p(double p) {
  require(std::isfinite(p) && p > 1.0, ErrorCode::kDomain, "L^p exponent must exceed 1");
}

void check_same(const MeshPtr& a, const MeshPtr& b) {
  require(a && b && (a == b || a->content_hash() == b->content_hash()), ErrorCode::kDomain,
          "cochains live on different meshes");
}

}  // namespace

TwoCochain::TwoCochain(MeshPtr m, Eigen::VectorXd v) : mesh(std::move(m)), values(std::move(v)) {
  require(mesh && values.size() == mesh->num_faces(), ErrorCode::kDomain, "2-cochain size does not match mesh");
}

TwoCochain TwoCochain::zero(MeshPtr m) {
  const int n = m->num_faces();
  return TwoCochain(std::move(m), Eigen::VectorXd::Zero(n));
}

Eigen::VectorXd TwoCochain::densities() const {
  Eigen::VectorXd d(values.size());
  for (int f = 0; f < values.size(); ++f) d[f] = density(f);
  return d;
}

TwoCochain TwoCochain::operator+(const TwoCochain& o) const {
  check_same(mesh, o.mesh);
  return TwoCochain(mesh, values + o.values);
}

TwoCochain TwoCochain::operator-(const TwoCochain& o) const {
  check_same(mesh, o.mesh);
  return TwoCochain(mesh, values - o.values);
}

TwoCochain TwoCochain::operator*(double s) const { return TwoCochain(mesh, values * s); }

OneFormCochain::OneFormCochain(MeshPtr m, Eigen::VectorXd v) : mesh(std::move(m)), values(std::move(v)) {
  require(mesh && values.size() == mesh->num_edges(), ErrorCode::kDomain, "1-form size does not match mesh");
}

OneFormCochain OneFormCochain::zero(MeshPtr m) {
  const int n = m->num_edges();
  return OneFormCochain(std::move(m), Eigen::VectorXd::Zero(n));
}

TwoCochain integrate_density(MeshPtr mesh, const DensityFn& density) {
  Eigen::VectorXd v(mesh->num_faces());
  for (int f = 0; f < mesh->num_faces(); ++f) {
    const auto& t = mesh->faces[f];
    const Vec3& a = mesh->vertices[t[0]];
    const Vec3& b = mesh->vertices[t[1]];
    const Vec3& c = mesh->vertices[t[2]];
    const Vec3 ab = (a + b).normalized();
    const Vec3 bc = (b + c).normalized();
    const Vec3 ca = (c + a).normalized();
    const std::array<std::array<Vec3, 3>, 4> sub = {{{a, ab, ca}, {b, bc, ab}, {c, ca, bc}, {ab, bc, ca}}};
    double s = 0.0;
    for (const auto& tri : sub)
      s += density((tri[0] + tri[1] + tri[2]).normalized()) * spherical_triangle_area(tri[0], tri[1], tri[2]);
    v[f] = s;
  }
  return TwoCochain(std::move(mesh), std::move(v));
}

TwoCochain codifferential(const OneFormCochain& alpha) {
  const SphereMesh& m = *alpha.mesh;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.num_faces());
  for (int e = 0; e < m.num_edges(); ++e) {
    out[m.edge_faces[e][0]] += alpha.values[e];
    out[m.edge_faces[e][1]] -= alpha.values[e];
  }
  return TwoCochain(alpha.mesh, std::move(out));
}

Eigen::VectorXd dual_gradient(const SphereMesh& m, const Eigen::VectorXd& g) {
  Eigen::VectorXd out(m.num_edges());
  for (int e = 0; e < m.num_edges(); ++e) out[e] = g[m.edge_faces[e][0]] - g[m.edge_faces[e][1]];
  return out;
}

double edge_isotropy_constant(double p) {
  return std::sqrt(std::numbers::pi) * std::tgamma(p / 2.0 + 1.0) / std::tgamma((p + 1.0) / 2.0);
}

double lp_norm(const TwoCochain& c, double p) {
  check_p(p);
  const SphereMesh& m = *c.mesh;
  double s = 0.0;
  for (int f = 0; f < m.num_faces(); ++f) s += std::pow(std::abs(c.values[f] / m.face_area[f]), p) * m.face_area[f];
  return std::pow(s, 1.0 / p);
}

Eigen::VectorXd edge_lp_weights(const SphereMesh& m, double p) {
  check_p(p);
  const double cp = edge_isotropy_constant(p);
  Eigen::VectorXd w(m.num_edges());
  for (int e = 0; e < m.num_edges(); ++e) w[e] = cp * m.diamond_area[e] / std::pow(m.edge_length[e], p);
  return w;
}

double lp_norm(const OneFormCochain& alpha, double p) {
  const Eigen::VectorXd w = edge_lp_weights(*alpha.mesh, p);
  double s = 0.0;
  for (int e = 0; e < w.size(); ++e) s += w[e] * std::pow(std::abs(alpha.values[e]), p);
  return std::pow(s, 1.0 / p);
}

TwoCochain with_degree(const TwoCochain& c, double target) {
  const double shift = (target - c.degree()) / c.mesh->total_area();
  Eigen::VectorXd v = c.values;
  for (int f = 0; f < v.size(); ++f) v[f] += shift * c.mesh->face_area[f];
  return TwoCochain(c.mesh, std::move(v));
}

TwoCochain l1_band(MeshPtr mesh, const Vec3& axis) {
  const Vec3 n = axis.normalized();
  TwoCochain c = with_degree(integrate_density(std::move(mesh), [&](const Vec3& x) { return n.dot(x); }), 0.0);
  return c * (1.0 / lp_norm(c, 2.0));
}

TwoCochain sectoral_band(MeshPtr mesh, int l, double p) {
  require(l >= 1, ErrorCode::kDomain, "harmonic band degree must be at least 1");
  TwoCochain c = with_degree(integrate_density(std::move(mesh),
                                               [l](const Vec3& x) {
                                                 return std::pow(std::complex<double>(x.x(), x.y()), l).real();
                                               }),
                             0.0);
  return c * (1.0 / lp_norm(c, p));
}

void write_cochain_csv(std::ostream& os, const TwoCochain& c) {
  os << "face_id,value\n";
  os.precision(17);
  for (int f = 0; f < c.values.size(); ++f) os << f << ',' << c.values[f] << '\n';
}

TwoCochain read_cochain_csv(std::istream& is, MeshPtr mesh) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::kIo, "empty cochain CSV");
  Eigen::VectorXd v = Eigen::VectorXd::Constant(mesh->num_faces(), std::nan(""));
  int count = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    long id;
    char comma;
    double value;
    require(static_cast<bool>(ls >> id >> comma >> value) && comma == ',', ErrorCode::kIo,
            "malformed cochain CSV row: " + line);
    require(id >= 0 && id < mesh->num_faces(), ErrorCode::kIo, "cochain CSV face id out of range");
    v[id] = value;
    ++count;
  }
  require(count == mesh->num_faces() && v.allFinite(), ErrorCode::kIo, "cochain CSV does not cover every face");
  return TwoCochain(std::move(mesh), std::move(v));
}

nlohmann::json cochain_sidecar(const TwoCochain& c, double p) {
  return {{"mesh_hash", c.mesh->content_hash()},
          {"level", c.mesh->level},
          {"faces", c.mesh->num_faces()},
          {"p", p},
          {"degree", c.degree()}};
}

void write_oneform_csv(std::ostream& os, const OneFormCochain& alpha) {
  os << "edge_id,value\n";
  os.precision(17);
  for (int e = 0; e < alpha.values.size(); ++e) os << e << ',' << alpha.values[e] << '\n';
}

}  // namespace wb

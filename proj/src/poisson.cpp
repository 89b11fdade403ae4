#include "wbundle/poisson.hpp"

#include <cmath>
#include <vector>

#include <Eigen/SparseCholesky>

#include "wbundle/error.hpp"

namespace wb {

Eigen::SparseMatrix<double> face_laplacian(const SphereMesh& m, const Eigen::VectorXd& w) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * static_cast<std::size_t>(m.num_edges()));
  for (int e = 0; e < m.num_edges(); ++e) {
    const int a = m.edge_faces[e][0];
    const int b = m.edge_faces[e][1];
    trip.emplace_back(a, a, w[e]);
    trip.emplace_back(b, b, w[e]);
    trip.emplace_back(a, b, -w[e]);
    trip.emplace_back(b, a, -w[e]);
  }
  Eigen::SparseMatrix<double> L(m.num_faces(), m.num_faces());
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

Eigen::VectorXd poisson_edge_weights(const SphereMesh& m) {
  Eigen::VectorXd w(m.num_edges());
  const double c2 = edge_isotropy_constant(2.0);
  for (int e = 0; e < m.num_edges(); ++e) w[e] = m.edge_length[e] * m.edge_length[e] / (c2 * m.diamond_area[e]);
  return w;
}

PoissonResult solve_poisson(const TwoCochain& f, double degree_tol) {
  const SphereMesh& m = *f.mesh;
  const double deg = f.degree();
  require(std::abs(deg) <= degree_tol * std::max(1.0, f.values.cwiseAbs().sum()), ErrorCode::kInfeasible,
          "Poisson right-hand side has nonzero degree " + std::to_string(deg));
  const int n = m.num_faces();
  const Eigen::VectorXd w = poisson_edge_weights(m);
  PoissonResult out;
  if (f.values.cwiseAbs().maxCoeff() == 0.0) {
    out.potential = Eigen::VectorXd::Zero(n);
    out.flow = OneFormCochain::zero(f.mesh);
    return out;
  }
  const Eigen::SparseMatrix<double> L = face_laplacian(m, w);
  // ground face 0; the system is consistent because the degree vanishes
  const Eigen::SparseMatrix<double> Lg = L.bottomRightCorner(n - 1, n - 1);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(Lg);
  require(solver.info() == Eigen::Success, ErrorCode::kNotConverged, "face Laplacian factorization failed");
  Eigen::VectorXd rhs = f.values.tail(n - 1);
  rhs.array() -= deg / n;  // exact compatibility
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  g.tail(n - 1) = solver.solve(rhs);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += g[i] * m.face_area[i];
  g.array() -= mean / m.total_area();

  Eigen::VectorXd flow = dual_gradient(m, g).cwiseProduct(w);
  out.flow = OneFormCochain(f.mesh, std::move(flow));
  out.potential = std::move(g);
  const Eigen::VectorXd r = codifferential(out.flow).values - f.values;
  out.relative_residual = r.norm() / f.values.norm();
  return out;
}

}  // namespace wb

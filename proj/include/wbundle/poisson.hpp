#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "wbundle/cochain.hpp"

namespace wb {

struct PoissonResult {
  Eigen::VectorXd potential;  // per face, area-weighted mean zero
  OneFormCochain flow;        // alpha = W grad(potential), codifferential(alpha) = f
  double relative_residual = 0.0;
};

/// Face Laplacian B diag(w) B^T on the dual graph.
Eigen::SparseMatrix<double> face_laplacian(const SphereMesh& mesh, const Eigen::VectorXd& edge_weights);

/// Dual-graph weights l_e^2 / (c_2 A_e^diam). With them the Poisson flow is the
/// exact minimizer of the discrete L^2 norm of alpha under codifferential(alpha) = f.
Eigen::VectorXd poisson_edge_weights(const SphereMesh& mesh);

/// Solves codifferential(W grad g) = f. Throws Infeasible if |degree f| exceeds
/// `degree_tol`.
PoissonResult solve_poisson(const TwoCochain& f, double degree_tol = 1e-8);

}  // namespace wb

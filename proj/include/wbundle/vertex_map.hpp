#pragma once

#include <vector>

#include "wbundle/cochain.hpp"

namespace wb {

/// Combinatorial bijection between two sphere meshes given by moving the
/// vertices of `source`. Lipschitz constants are estimated from edge-length ratios.
struct VertexMap {
  MeshPtr source;
  MeshPtr target;
  double lipschitz = 1.0;      // max l_target / l_source
  double lipschitz_inv = 1.0;  // max l_source / l_target
};

VertexMap make_vertex_map(MeshPtr source, const std::vector<Vec3>& image_points);

VertexMap identity_map(MeshPtr source);

/// x -> normalize(diag(axes) x), a bilipschitz self-map of the sphere.
VertexMap ellipsoid_map(MeshPtr source, const Vec3& axes);

/// Transports face integrals from psi.target back onto psi.source.
TwoCochain pullback(const VertexMap& psi, const TwoCochain& c);

}  // namespace wb

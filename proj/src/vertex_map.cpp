#include "wbundle/vertex_map.hpp"

#include <algorithm>
#include <memory>

#include "wbundle/error.hpp"

namespace wb {

VertexMap make_vertex_map(MeshPtr source, const std::vector<Vec3>& image_points) {
  require(static_cast<int>(image_points.size()) == source->num_vertices(), ErrorCode::kDomain,
          "vertex map needs one image point per source vertex");
  auto target = std::make_shared<SphereMesh>();
  target->vertices = image_points;
  target->faces = source->faces;
  target->level = source->level;
  finalize_mesh(*target);
  VertexMap psi{source, target, 0.0, 0.0};
  for (int e = 0; e < source->num_edges(); ++e) {
    const double ratio = target->edge_length[e] / source->edge_length[e];
    psi.lipschitz = std::max(psi.lipschitz, ratio);
    psi.lipschitz_inv = std::max(psi.lipschitz_inv, 1.0 / ratio);
  }
  return psi;
}

VertexMap identity_map(MeshPtr source) {
  return VertexMap{source, source, 1.0, 1.0};
}

VertexMap ellipsoid_map(MeshPtr source, const Vec3& axes) {
  std::vector<Vec3> img(source->vertices.size());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = axes.cwiseProduct(source->vertices[i]).normalized();
  return make_vertex_map(std::move(source), img);
}

TwoCochain pullback(const VertexMap& psi, const TwoCochain& c) {
  require(c.mesh == psi.target || c.mesh->content_hash() == psi.target->content_hash(), ErrorCode::kDomain,
          "cochain is not defined on the target mesh of the map");
  return TwoCochain(psi.source, c.values);
}

}  // namespace wb

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace wb {

using Vec3 = Eigen::Vector3d;

/// Geodesic triangulation of the unit sphere with the primal/dual incidence
/// data needed for 2-cochains (faces) and 1-forms (edges, i.e. dual-graph flows).
///
/// Edges are stored with i < j. For each edge, `edge_faces[e][0]` is the face
/// whose counter-clockwise boundary traverses the edge as i -> j and
/// `edge_faces[e][1]` the face traversing it as j -> i. A flow value on an edge
/// leaves the first face and enters the second.
struct SphereMesh {
  int level = 0;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 2>> edge_faces;
  std::vector<std::array<int, 3>> face_edges;
  std::vector<std::array<int, 3>> face_edge_signs;
  std::vector<std::array<int, 3>> face_neighbors;
  std::vector<double> face_area;     // steradians, spherical excess
  std::vector<Vec3> face_centroid;   // normalized to the sphere
  std::vector<double> edge_length;   // geodesic
  std::vector<double> dual_length;   // geodesic distance between adjacent centroids
  std::vector<double> diamond_area;  // (A_f1 + A_f2) / 3

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  double total_area() const;
  double max_edge_length() const;

  /// FNV-1a over vertex coordinates and face indices.
  std::uint64_t content_hash() const;

  /// Face containing the direction `dir` (need not be normalized).
  int locate(const Vec3& dir, int hint = 0) const;
};

using MeshPtr = std::shared_ptr<const SphereMesh>;

constexpr int kMaxIcosphereLevel = 8;

MeshPtr build_icosphere(int level);

/// Completes all derived data (edges, areas, adjacency) from vertices + faces.
/// Throws Domain if the surface is not a valid sphere triangulation.
void finalize_mesh(SphereMesh& mesh);

/// Spherical triangle area by the Van Oosterom-Strackee formula.
double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

void write_off(std::ostream& os, const SphereMesh& mesh);
MeshPtr read_off(std::istream& is);

}  // namespace wb

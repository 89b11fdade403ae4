#include "wbundle/sphere_mesh.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "wbundle/error.hpp"

namespace wb {

namespace {

std::uint64_t edge_key(int i, int j) {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
}

void icosahedron(SphereMesh& m) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  const double raw[12][3] = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1}};
  for (const auto& r : raw) m.vertices.push_back(Vec3(r[0], r[1], r[2]).normalized());
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
}

void subdivide(SphereMesh& m) {
  std::unordered_map<std::uint64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = edge_key(a, b);
    if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
    const int idx = static_cast<int>(m.vertices.size());
    m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
    midpoint.emplace(key, idx);
    return idx;
  };
  std::vector<std::array<int, 3>> next;
  next.reserve(m.faces.size() * 4);
  for (const auto& f : m.faces) {
    const int a = mid(f[0], f[1]);
    const int b = mid(f[1], f[2]);
    const int c = mid(f[2], f[0]);
    next.push_back({f[0], a, c});
    next.push_back({f[1], b, a});
    next.push_back({f[2], c, b});
    next.push_back({a, b, c});
  }
  m.faces = std::move(next);
}

}  // namespace

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double num = std::abs(a.dot(b.cross(c)));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

void finalize_mesh(SphereMesh& m) {
  const int nf = m.num_faces();
  require(nf > 0, ErrorCode::kDomain, "mesh has no faces");
  for (const auto& v : m.vertices)
    require(std::abs(v.norm() - 1.0) <= 1e-12, ErrorCode::kDomain, "mesh vertex not on the unit sphere");

  m.edges.clear();
  m.edge_faces.clear();
  m.face_edges.assign(nf, {-1, -1, -1});
  m.face_edge_signs.assign(nf, {0, 0, 0});
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(static_cast<std::size_t>(nf) * 2);
  for (int f = 0; f < nf; ++f) {
    const auto& tri = m.faces[f];
    for (int k = 0; k < 3; ++k) {
      const int i = tri[k];
      const int j = tri[(k + 1) % 3];
      require(i != j && i >= 0 && j >= 0 && i < m.num_vertices() && j < m.num_vertices(), ErrorCode::kDomain,
              "invalid face index");
      const auto key = edge_key(i, j);
      auto [it, inserted] = index.emplace(key, static_cast<int>(m.edges.size()));
      if (inserted) {
        m.edges.push_back({std::min(i, j), std::max(i, j)});
        m.edge_faces.push_back({-1, -1});
      }
      const int e = it->second;
      const int sign = (i < j) ? 1 : -1;
      auto& slot = m.edge_faces[e][sign > 0 ? 0 : 1];
      require(slot == -1, ErrorCode::kDomain, "edge shared by two faces with the same orientation");
      slot = f;
      m.face_edges[f][k] = e;
      m.face_edge_signs[f][k] = sign;
    }
  }
  for (const auto& ef : m.edge_faces)
    require(ef[0] >= 0 && ef[1] >= 0, ErrorCode::kDomain, "mesh is not closed");
  require(m.num_vertices() - m.num_edges() + nf == 2, ErrorCode::kDomain, "Euler characteristic is not 2");

  m.face_neighbors.assign(nf, {-1, -1, -1});
  for (int f = 0; f < nf; ++f)
    for (int k = 0; k < 3; ++k) {
      const auto& ef = m.edge_faces[m.face_edges[f][k]];
      m.face_neighbors[f][k] = (ef[0] == f) ? ef[1] : ef[0];
    }

  m.face_area.resize(nf);
  m.face_centroid.resize(nf);
  for (int f = 0; f < nf; ++f) {
    const auto& t = m.faces[f];
    const Vec3& a = m.vertices[t[0]];
    const Vec3& b = m.vertices[t[1]];
    const Vec3& c = m.vertices[t[2]];
    require(a.dot(b.cross(c)) > 0.0, ErrorCode::kDomain, "face is not outward oriented");
    m.face_area[f] = spherical_triangle_area(a, b, c);
    m.face_centroid[f] = (a + b + c).normalized();
  }

  const int ne = m.num_edges();
  m.edge_length.resize(ne);
  m.dual_length.resize(ne);
  m.diamond_area.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const Vec3& a = m.vertices[m.edges[e][0]];
    const Vec3& b = m.vertices[m.edges[e][1]];
    m.edge_length[e] = std::atan2(a.cross(b).norm(), a.dot(b));
    const Vec3& c0 = m.face_centroid[m.edge_faces[e][0]];
    const Vec3& c1 = m.face_centroid[m.edge_faces[e][1]];
    m.dual_length[e] = std::atan2(c0.cross(c1).norm(), c0.dot(c1));
    m.diamond_area[e] = (m.face_area[m.edge_faces[e][0]] + m.face_area[m.edge_faces[e][1]]) / 3.0;
  }

  // dual graph connectivity
  std::vector<char> seen(nf, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int f = q.front();
    q.pop();
    for (int g : m.face_neighbors[f])
      if (!seen[g]) {
        seen[g] = 1;
        ++count;
        q.push(g);
      }
  }
  require(count == nf, ErrorCode::kDomain, "dual graph is disconnected");
}

double SphereMesh::total_area() const {
  double s = 0.0;
  for (double a : face_area) s += a;
  return s;
}

double SphereMesh::max_edge_length() const {
  double s = 0.0;
  for (double l : edge_length) s = std::max(s, l);
  return s;
}

std::uint64_t SphereMesh::content_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& v : vertices) mix(v.data(), 3 * sizeof(double));
  for (const auto& f : faces) mix(f.data(), 3 * sizeof(int));
  return h;
}

int SphereMesh::locate(const Vec3& dir, int hint) const {
  const Vec3 d = dir.normalized();
  int f = (hint >= 0 && hint < num_faces()) ? hint : 0;
  const int max_steps = 4 * num_faces() + 16;
  for (int step = 0; step < max_steps; ++step) {
    const auto& t = faces[f];
    int worst = -1;
    double worst_val = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double s = d.dot(vertices[t[k]].cross(vertices[t[(k + 1) % 3]]));
      if (s < worst_val) {
        worst_val = s;
        worst = k;
      }
    }
    if (worst < 0) return f;
    f = face_neighbors[f][worst];
  }
  // cycling on a degenerate configuration: fall back to the nearest centroid
  int best = 0;
  double best_dot = -2.0;
  for (int g = 0; g < num_faces(); ++g) {
    const double s = face_centroid[g].dot(d);
    if (s > best_dot) {
      best_dot = s;
      best = g;
    }
  }
  return best;
}

MeshPtr build_icosphere(int level) {
  require(level >= 0, ErrorCode::kInvalidArgument, "icosphere level must be nonnegative");
  require(level <= kMaxIcosphereLevel, ErrorCode::kResourceLimit,
          "icosphere level " + std::to_string(level) + " exceeds the limit of 8");
  auto mesh = std::make_shared<SphereMesh>();
  icosahedron(*mesh);
  for (int l = 0; l < level; ++l) subdivide(*mesh);
  mesh->level = level;
  finalize_mesh(*mesh);
  return mesh;
}

void write_off(std::ostream& os, const SphereMesh& mesh) {
  os << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << ' ' << mesh.num_edges() << '\n';
  os.precision(17);
  for (const auto& v : mesh.vertices) os << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

MeshPtr read_off(std::istream& is) {
  std::string magic;
  require(static_cast<bool>(is >> magic) && magic == "OFF", ErrorCode::kIo, "missing OFF header");
  long nv = 0, nf = 0, ne = 0;
  require(static_cast<bool>(is >> nv >> nf >> ne) && nv > 0 && nf > 0, ErrorCode::kIo, "bad OFF counts");
  auto mesh = std::make_shared<SphereMesh>();
  mesh->vertices.resize(nv);
  for (auto& v : mesh->vertices) {
    double x, y, z;
    require(static_cast<bool>(is >> x >> y >> z), ErrorCode::kIo, "truncated OFF vertex block");
    v = Vec3(x, y, z);
  }
  mesh->faces.resize(nf);
  for (auto& f : mesh->faces) {
    int n;
    require(static_cast<bool>(is >> n >> f[0] >> f[1] >> f[2]) && n == 3, ErrorCode::kIo,
            "OFF face is not a triangle");
  }
  mesh->level = -1;
  for (int l = 0; l <= kMaxIcosphereLevel; ++l)
    if (nf == 20L << (2 * l)) mesh->level = l;
  finalize_mesh(*mesh);
  return mesh;
}

}  // namespace wb

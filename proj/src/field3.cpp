#include "wbundle/field3.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "wbundle/error.hpp"

namespace wb {

namespace {
constexpr double kFourPi = 4.0 * std::numbers::pi;
}

void VectorField::check_ball(const Vec3&, double r) const {
  require(r > 0.0, ErrorCode::kDomain, "sphere radius must be positive");
}

AnalyticField::AnalyticField(std::vector<PointCharge> charges, double abc_amplitude, double abc_wavenumber,
                             double scale)
    : charges_(std::move(charges)), abc_amp_(abc_amplitude), abc_k_(abc_wavenumber), scale_(scale) {
  require(abc_wavenumber > 0.0, ErrorCode::kInvalidArgument, "ABC wavenumber must be positive");
}

Vec3 AnalyticField::value(const Vec3& x) const {
  Vec3 v = Vec3::Zero();
  for (const auto& c : charges_) {
    const Vec3 d = x - c.center;
    const double n2 = d.squaredNorm();
    require(n2 > 0.0, ErrorCode::kDomain, "field evaluated at a charge center");
    v += (c.k / kFourPi) * d / (n2 * std::sqrt(n2));
  }
  if (abc_amp_ != 0.0) {
    const double k = abc_k_;
    v += abc_amp_ * Vec3(std::sin(k * x.z()) + std::cos(k * x.y()), std::sin(k * x.x()) + std::cos(k * x.z()),
                         std::sin(k * x.y()) + std::cos(k * x.x()));
  }
  return scale_ * v;
}

std::vector<PointCharge> AnalyticField::singularities() const {
  std::vector<PointCharge> out = charges_;
  for (auto& c : out) c.k *= scale_;
  return out;
}

double AnalyticField::enclosed_charge(const Vec3& x, double r) const {
  double s = 0.0;
  for (const auto& c : charges_)
    if ((c.center - x).norm() < r) s += c.k;
  return scale_ * s;
}

AnalyticField AnalyticField::scaled(double s) const {
  AnalyticField f = *this;
  f.scale_ *= s;
  return f;
}

AnalyticField monopole(const Vec3& center, int k) {
  require(k != 0, ErrorCode::kInvalidArgument, "monopole charge must be nonzero");
  return AnalyticField({{center, static_cast<double>(k)}});
}

nlohmann::json to_json(const AnalyticField& f) {
  nlohmann::json charges = nlohmann::json::array();
  for (const auto& c : f.charges())
    charges.push_back({{"center", {c.center.x(), c.center.y(), c.center.z()}}, {"k", c.k}});
  return {{"charges", charges},
          {"abc", {{"amplitude", f.abc_amplitude()}, {"wavenumber", f.abc_wavenumber()}}},
          {"scale", f.scale()}};
}

AnalyticField analytic_field_from_json(const nlohmann::json& j) {
  try {
    std::vector<PointCharge> charges;
    for (const auto& c : j.at("charges")) {
      const auto& p = c.at("center");
      charges.push_back({Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()),
                         c.at("k").get<double>()});
    }
    double amp = 0.0, wave = 1.0;
    if (j.contains("abc")) {
      amp = j["abc"].value("amplitude", 0.0);
      wave = j["abc"].value("wavenumber", 1.0);
    }
    return AnalyticField(std::move(charges), amp, wave, j.value("scale", 1.0));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad field description: ") + e.what());
  }
}

bool degenerate_sphere(const VectorField& field, const Vec3& x, double r) {
  for (const auto& c : field.singularities())
    if (std::abs((c.center - x).norm() - r) < kDegenerateBand * r) return true;
  return false;
}

namespace {

constexpr int kMaxRefine = 12;
constexpr double kRefineRatio = 0.07;

double tri_flux(const VectorField& field, const Vec3& x, double r, const Vec3& a, const Vec3& b, const Vec3& c,
                const std::vector<PointCharge>& sing, int depth) {
  const Vec3 cen = (a + b + c).normalized();
  if (depth < kMaxRefine && !sing.empty()) {
    const double size = r * std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& q : sing) dmin = std::min(dmin, (x + r * cen - q.center).norm());
    if (size > kRefineRatio * dmin) {
      const Vec3 ab = (a + b).normalized(), bc = (b + c).normalized(), ca = (c + a).normalized();
      return tri_flux(field, x, r, a, ab, ca, sing, depth + 1) + tri_flux(field, x, r, ab, b, bc, sing, depth + 1) +
             tri_flux(field, x, r, ca, bc, c, sing, depth + 1) + tri_flux(field, x, r, ab, bc, ca, sing, depth + 1);
    }
  }
  return r * r * field.value(x + r * cen).dot(cen) * spherical_triangle_area(a, b, c);
}

}  // namespace

TwoCochain restrict_to_sphere(const VectorField& field, const Vec3& x, double r, MeshPtr mesh) {
  field.check_ball(x, r);
  require(!degenerate_sphere(field, x, r), ErrorCode::kDegenerate, "a charge lies on the slicing sphere");
  const auto sing = field.singularities();
  Eigen::VectorXd v(mesh->num_faces());
  for (int f = 0; f < mesh->num_faces(); ++f) {
    const Vec3& a = mesh->vertices[mesh->faces[f][0]];
    const Vec3& b = mesh->vertices[mesh->faces[f][1]];
    const Vec3& c = mesh->vertices[mesh->faces[f][2]];
    const Vec3 ab = (a + b).normalized(), bc = (b + c).normalized(), ca = (c + a).normalized();
    v[f] = tri_flux(field, x, r, a, ab, ca, sing, 0) + tri_flux(field, x, r, ab, b, bc, sing, 0) +
           tri_flux(field, x, r, ca, bc, c, sing, 0) + tri_flux(field, x, r, ab, bc, ca, sing, 0);
  }
  return TwoCochain(mesh, std::move(v));
}

double flux(const VectorField& field, const Vec3& x, double r, MeshPtr mesh) {
  return restrict_to_sphere(field, x, r, mesh).degree();
}

AuditReport integer_flux_audit(const VectorField& field, int n_spheres, std::uint64_t seed, int level, double tol) {
  require(n_spheres > 0, ErrorCode::kInvalidArgument, "need at least one sphere");
  const MeshPtr mesh = build_icosphere(level);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), unit(0.0, 1.0);
  const auto* analytic = dynamic_cast<const AnalyticField*>(&field);
  double max_dev = 0.0, max_gauss = 0.0;
  int skipped = 0;
  nlohmann::json failures = nlohmann::json::array();
  for (int s = 0; s < n_spheres;) {
    Vec3 x(u(rng), u(rng), u(rng));
    x *= 0.5;
    if (x.norm() >= 0.5) continue;
    const double r = 0.05 + (1.0 - x.norm() - 0.05) * unit(rng);
    if (degenerate_sphere(field, x, r)) {
      ++skipped;
      continue;
    }
    ++s;
    const double phi = flux(field, x, r, mesh);
    const double dev = std::abs(phi - std::round(phi));
    max_dev = std::max(max_dev, dev);
    if (analytic) max_gauss = std::max(max_gauss, std::abs(phi - analytic->enclosed_charge(x, r)));
    if (dev > tol && failures.size() < 20)
      failures.push_back({{"x", {x.x(), x.y(), x.z()}}, {"r", r}, {"flux", phi}});
  }
  AuditReport rep;
  rep.title = "integer flux";
  rep.at_most("max distance of flux to an integer", max_dev, tol);
  rep.data = {{"spheres", n_spheres}, {"seed", seed},         {"level", level},
              {"tol", tol},           {"skipped_degenerate", skipped}, {"failures", failures}};
  if (analytic) rep.data["max_deviation_from_enclosed_charge"] = max_gauss;
  return rep;
}

int PScanReport::singular_count() const {
  int n = 0;
  for (const auto& r : rows) n += r.singular ? 1 : 0;
  return n;
}

PScanReport property_P_scan(const VectorField& field, const std::vector<Vec3>& points,
                            const std::vector<double>& radii, double threshold, MeshPtr mesh, double tol) {
  PScanReport rep;
  rep.threshold = threshold;
  rep.tol = tol;
  for (const auto& x : points) {
    PScanRow row{x, {}, 0, false};
    for (double r : radii) {
      if (r > threshold || degenerate_sphere(field, x, r)) continue;
      try {
        field.check_ball(x, r);
      } catch (const Error&) {
        continue;
      }
      ++row.radii_tested;
      if (std::abs(flux(field, x, r, mesh)) <= tol) row.zero_radii.push_back(r);
    }
    row.singular = row.zero_radii.empty();
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::vector<Vec3> ball_grid_points(double R, int n) {
  std::vector<Vec3> out;
  const double h = 2.0 * R / n;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 x(-R + (i + 0.5) * h, -R + (j + 0.5) * h, -R + (k + 0.5) * h);
        if (x.norm() < R) out.push_back(x);
      }
  return out;
}

nlohmann::json to_json(const PScanReport& r) {
  nlohmann::json singular = nlohmann::json::array();
  for (const auto& row : r.rows)
    if (row.singular) singular.push_back({row.x.x(), row.x.y(), row.x.z()});
  return {{"threshold", r.threshold},
          {"tol", r.tol},
          {"points", r.rows.size()},
          {"singular_count", r.singular_count()},
          {"singular_points", singular}};
}

double DipoleChain::partial_sum(int m) const {
  double s = 0.0;
  for (int i = 0; i < std::min(m, n); ++i) s += std::pow(a[i], 3.0 - 2.0 * p);
  return s;
}

DipoleChain dipole_chain(double p, int n) {
  require(p > 1.0 && p < 1.5, ErrorCode::kDomain, "dipole chain needs p in (1, 1.5)");
  require(n >= 1 && n <= 10000, ErrorCode::kDomain, "dipole chain length must be in [1, 10^4]");
  DipoleChain ch;
  ch.p = p;
  ch.n = n;
  const double e = -1.0 / (3.0 - 2.0 * p);
  double s = 0.0;
  for (int i = 1; i <= n; ++i) s += std::pow(i, e);
  ch.c = 1.0 / s;
  std::vector<PointCharge> charges;
  double left = -1.0;
  for (int i = 1; i <= n; ++i) {
    const double a = ch.c * std::pow(i, e);
    ch.a.push_back(a);
    const Vec3 center(left + a, 0.0, 0.0);
    ch.centers.push_back(center);
    charges.push_back({center + Vec3(0.5 * a, 0, 0), 1.0});
    charges.push_back({center - Vec3(0.5 * a, 0, 0), -1.0});
    left += 2.0 * a;
  }
  require(left <= 1.0 + 1e-12, ErrorCode::kDomain, "dipole balls leave the unit ball");
  ch.field = AnalyticField(std::move(charges));
  return ch;
}

GridField::GridField(std::array<int, 3> dims, double spacing, const Vec3& origin)
    : dims_(dims), h_(spacing), origin_(origin) {
  for (int d : dims) require(d > 0, ErrorCode::kInvalidArgument, "grid dimensions must be positive");
  require(spacing > 0.0, ErrorCode::kInvalidArgument, "grid spacing must be positive");
  require(static_cast<double>(dims[0]) * dims[1] * dims[2] <= 2.0e8, ErrorCode::kResourceLimit, "grid too large");
  for (int a = 0; a < 3; ++a) flux_[a].assign(num_faces(a), 0.0);
}

int GridField::num_faces(int axis) const {
  std::array<int, 3> n = dims_;
  n[axis] += 1;
  return n[0] * n[1] * n[2];
}

int GridField::face_index(int axis, int i, int j, int k) const {
  std::array<int, 3> n = dims_;
  n[axis] += 1;
  return i + n[0] * (j + n[1] * k);
}

Vec3 GridField::cell_center(int i, int j, int k) const {
  return origin_ + h_ * Vec3(i + 0.5, j + 0.5, k + 0.5);
}

double GridField::divergence(int i, int j, int k) const {
  return face(0, i + 1, j, k) - face(0, i, j, k) + face(1, i, j + 1, k) - face(1, i, j, k) + face(2, i, j, k + 1) -
         face(2, i, j, k);
}

Vec3 GridField::cell_vector(int i, int j, int k) const {
  const double s = 0.5 / (h_ * h_);
  return s * Vec3(face(0, i, j, k) + face(0, i + 1, j, k), face(1, i, j, k) + face(1, i, j + 1, k),
                  face(2, i, j, k) + face(2, i, j, k + 1));
}

double GridField::box_flux(const std::array<int, 3>& lo, const std::array<int, 3>& hi) const {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const int u = (a + 1) % 3, v = (a + 2) % 3;
    for (int iu = lo[u]; iu < hi[u]; ++iu)
      for (int iv = lo[v]; iv < hi[v]; ++iv) {
        std::array<int, 3> top{}, bot{};
        top[a] = hi[a];
        bot[a] = lo[a];
        top[u] = bot[u] = iu;
        top[v] = bot[v] = iv;
        s += face(a, top[0], top[1], top[2]) - face(a, bot[0], bot[1], bot[2]);
      }
  }
  return s;
}

Vec3 GridField::value(const Vec3& x) const {
  const Vec3 g = (x - origin_) / h_;
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    std::array<int, 3> n = dims_;
    n[a] += 1;
    std::array<int, 3> i0{};
    std::array<double, 3> t{};
    for (int b = 0; b < 3; ++b) {
      const double s = (b == a) ? g[b] : g[b] - 0.5;
      const double c = std::clamp(s, 0.0, static_cast<double>(n[b] - 1));
      i0[b] = std::min(static_cast<int>(std::floor(c)), std::max(n[b] - 2, 0));
      t[b] = n[b] > 1 ? c - i0[b] : 0.0;
    }
    double acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      std::array<int, 3> idx{};
      double w = 1.0;
      for (int b = 0; b < 3; ++b) {
        const int bit = (corner >> b) & 1;
        if (bit && n[b] == 1) {
          w = 0.0;
          break;
        }
        idx[b] = i0[b] + bit;
        w *= bit ? t[b] : 1.0 - t[b];
      }
      if (w != 0.0) acc += w * face(a, idx[0], idx[1], idx[2]);
    }
    out[a] = acc / (h_ * h_);
  }
  return out;
}

std::vector<PointCharge> GridField::singularities() const { return {}; }

void GridField::check_ball(const Vec3& x, double r) const {
  VectorField::check_ball(x, r);
  for (int a = 0; a < 3; ++a)
    require(x[a] - r >= origin_[a] && x[a] + r <= origin_[a] + h_ * dims_[a], ErrorCode::kDomain,
            "sphere leaves the grid box");
}

namespace {

double triangle_solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double la = a.norm(), lb = b.norm(), lc = c.norm();
  const double num = a.dot(b.cross(c));
  const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
  return 2.0 * std::atan2(num, den);
}

// Flux of the analytic field through the axis-aligned face with lower corner
// `lo`, side h, normal +axis.
double face_flux(const AnalyticField& f, int axis, const Vec3& lo, double h) {
  const int u = (axis + 1) % 3, v = (axis + 2) % 3;
  Vec3 eu = Vec3::Zero(), ev = Vec3::Zero();
  eu[u] = h;
  ev[v] = h;
  const Vec3 p0 = lo, p1 = lo + eu, p2 = lo + eu + ev, p3 = lo + ev;
  double s = 0.0;
  for (const auto& c : f.charges()) {
    const Vec3 d = c.center - lo;
    if (std::abs(d[axis]) < 1e-14 * std::max(1.0, h) && d[u] >= 0 && d[u] <= h && d[v] >= 0 && d[v] <= h)
      fail(ErrorCode::kDegenerate, "charge lies on a grid face");
    const Vec3 a = p0 - c.center, b = p1 - c.center, cc = p2 - c.center, dd = p3 - c.center;
    s += c.k / kFourPi * (triangle_solid_angle(a, b, cc) + triangle_solid_angle(a, cc, dd));
  }
  if (f.abc_amplitude() != 0.0) {
    const double k = f.abc_wavenumber();
    const double u0 = lo[u], u1 = lo[u] + h, v0 = lo[v], v1 = lo[v] + h;
    s += f.abc_amplitude() *
         ((u1 - u0) * (std::cos(k * v0) - std::cos(k * v1)) / k + (v1 - v0) * (std::sin(k * u1) - std::sin(k * u0)) / k);
  }
  return f.scale() * s;
}

}  // namespace

GridField rasterize(const AnalyticField& field, std::array<int, 3> dims, double spacing, const Vec3& origin) {
  GridField g(dims, spacing, origin);
  for (int a = 0; a < 3; ++a) {
    std::array<int, 3> n = dims;
    n[a] += 1;
    for (int k = 0; k < n[2]; ++k)
      for (int j = 0; j < n[1]; ++j)
        for (int i = 0; i < n[0]; ++i)
          g.face(a, i, j, k) = face_flux(field, a, origin + spacing * Vec3(i, j, k), spacing);
  }
  g.meta = {{"source", "rasterized analytic field"}, {"field", to_json(field)}};
  return g;
}

namespace {

void write_le(std::ostream& os, const std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    for (double d : v) {
      auto bits = std::bit_cast<std::uint64_t>(d);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      os.write(buf, 8);
    }
  }
}

void read_le(std::istream& is, std::vector<double>& v) {
  std::vector<char> buf(v.size() * 8);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(static_cast<size_t>(is.gcount()) == buf.size(), ErrorCode::kIo, "grid file truncated");
  for (size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[8 * i + b])) << (8 * b);
    v[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace

void write_grid(std::ostream& os, const GridField& g) {
  nlohmann::json charges = nlohmann::json::array();
  const auto& n = g.dims();
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        const double q = g.divergence(i, j, k);
        if (std::abs(q) > 1e-9) charges.push_back({{"cell", {i, j, k}}, {"q", q}});
      }
  const nlohmann::json header{{"format", "wbundle-grid"},
                              {"version", 1},
                              {"dims", {n[0], n[1], n[2]}},
                              {"spacing", g.spacing()},
                              {"origin", {g.origin().x(), g.origin().y(), g.origin().z()}},
                              {"p", g.p},
                              {"charges", charges},
                              {"layout", "x-faces, y-faces, z-faces; float64 little-endian; i fastest"},
                              {"meta", g.meta}};
  os << header.dump() << '\n';
  for (int a = 0; a < 3; ++a) write_le(os, g.fluxes(a));
  require(static_cast<bool>(os), ErrorCode::kIo, "grid write failed");
}

GridField read_grid(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::kIo, "grid file has no header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, std::string("grid header is not JSON: ") + e.what());
  }
  require(h.value("format", "") == "wbundle-grid", ErrorCode::kIo, "not a grid file");
  const auto& d = h.at("dims");
  const auto& o = h.at("origin");
  GridField g({d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()}, h.at("spacing").get<double>(),
              Vec3(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()));
  g.p = h.value("p", 1.25);
  if (h.contains("meta")) g.meta = h["meta"];
  for (int a = 0; a < 3; ++a) read_le(is, g.fluxes(a));
  return g;
}

void write_grid(const std::string& path, const GridField& g) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::kIo, "cannot open " + path);
  write_grid(os, g);
}

GridField read_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::kIo, "cannot open " + path);
  return read_grid(is);
}

}  // namespace wb

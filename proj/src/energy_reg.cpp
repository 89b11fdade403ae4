#include "wbundle/energy_reg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <nlohmann/json.hpp>

#include "quadrature.hpp"
#include "wbundle/error.hpp"
#include "wbundle/sphere_mesh.hpp"

namespace wb {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFourPi = 4.0 * kPi;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_p(double p) { require(p >= 1.0 && std::isfinite(p), ErrorCode::kDomain, "p must be >= 1"); }

// C-infinity cutoff: 1 on [0, 1/2], 0 on [1, inf).
double bump(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double t = 2.0 * (s - 0.5);
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return 1.0 - a / (a + b);
}

struct Bump {
  Vec3 c;
  double delta;
};

// Unit directions with weights: Gauss-Legendre in cos(theta) about `axis`, trapezoid in phi.
std::vector<std::pair<Vec3, double>> sphere_rule(int n_polar, int n_az, const Vec3& axis) {
  Vec3 e3 = axis.norm() > 0 ? axis.normalized() : Vec3(0, 0, 1);
  Vec3 e1 = std::abs(e3.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  e1 = (e1 - e1.dot(e3) * e3).normalized();
  const Vec3 e2 = e3.cross(e1);
  std::vector<std::pair<Vec3, double>> out;
  const double dphi = 2.0 * kPi / n_az;
  for (auto [z, w] : quad::gauss_legendre(n_polar, -1.0, 1.0)) {
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < n_az; ++j) {
      const double phi = (j + 0.5) * dphi;
      out.emplace_back(z * e3 + s * (std::cos(phi) * e1 + std::sin(phi) * e2), w * dphi);
    }
  }
  return out;
}

double weight_outside_bumps(const std::vector<Bump>& bumps, const Vec3& y) {
  double w = 1.0;
  for (const auto& b : bumps) {
    const double s = (y - b.c).norm() / b.delta;
    if (s < 1.0) w -= bump(s);
  }
  return w;
}

// Integral of bump * |X|^p over B(c, delta), u = t^{3-2p} radially.
double bump_integral(const VectorField& f, const Bump& b, double p, const EnergyOptions& o) {
  const double a = 3.0 - 2.0 * p;
  const auto dirs = sphere_rule(o.polar, o.azimuthal, Vec3(0, 0, 1));
  const auto vr = quad::gauss_legendre(o.radial, 0.0, 1.0);
  double sum = 0.0;
  for (const auto& [w_dir, ww] : dirs) {
    double ray = 0.0;
    for (auto [v, wv] : vr) {
      const double s = std::pow(v, 1.0 / a);
      const double psi = bump(s);
      if (psi == 0.0) continue;
      ray += wv * psi * std::pow(f.value(b.c + b.delta * s * w_dir).norm(), p) * std::pow(s, 2.0 * p);
    }
    sum += ww * ray;
  }
  return sum * b.delta * b.delta * b.delta / a;
}

std::vector<Bump> make_bumps(const std::vector<PointCharge>& sing, const std::vector<int>& inside,
                             const std::vector<double>& room) {
  std::vector<Bump> out;
  for (size_t n = 0; n < inside.size(); ++n) {
    const auto& c = sing[inside[n]];
    double sep = kInf;
    for (size_t j = 0; j < sing.size(); ++j)
      if (static_cast<int>(j) != inside[n]) sep = std::min(sep, (sing[j].center - c.center).norm());
    const double delta = std::min(0.5 * sep, 0.9 * room[n]);
    require(delta > 1e-10, ErrorCode::kDegenerate, "charge too close to the region boundary or another charge");
    out.push_back({c.center, delta});
  }
  return out;
}

double general_ball(const VectorField& f, const Ball& B, double p, const EnergyOptions& o) {
  const auto sing = f.singularities();
  std::vector<int> inside;
  std::vector<double> room;
  for (size_t i = 0; i < sing.size(); ++i) {
    if (sing[i].k == 0.0) continue;
    const double d = (sing[i].center - B.x).norm();
    if (d <= B.r && p >= 1.5) return kInf;
    if (d < B.r) {
      inside.push_back(static_cast<int>(i));
      room.push_back(B.r - d);
    }
  }
  const auto bumps = make_bumps(sing, inside, room);
  double total = 0.0;
  for (const auto& b : bumps) total += bump_integral(f, b, p, o);

  // Remainder in polar coordinates about the ball center, with radial breakpoints at each bump shell.
  std::vector<double> cuts{0.0, B.r};
  double ang = 0.0;
  for (const auto& b : bumps) {
    const double d = (b.c - B.x).norm();
    for (double t : {d - b.delta, d + b.delta})
      if (t > 0.0 && t < B.r) cuts.push_back(t);
    if (d > b.delta) ang = std::max(ang, d / b.delta);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const int n_pol = std::min(100, std::max(o.polar, static_cast<int>(std::ceil(6.0 * ang))));
  const int n_az = std::min(200, std::max(o.azimuthal, 2 * n_pol));
  const auto dirs = sphere_rule(n_pol, n_az, Vec3(0, 0, 1));
  std::vector<std::pair<double, double>> rad;
  for (size_t i = 0; i + 1 < cuts.size(); ++i)
    for (auto q : quad::gauss_legendre(o.radial, cuts[i], cuts[i + 1])) rad.push_back(q);
  double rem = 0.0;
  for (const auto& [w_dir, ww] : dirs) {
    double ray = 0.0;
    for (auto [t, wt] : rad) {
      const Vec3 y = B.x + t * w_dir;
      const double w = weight_outside_bumps(bumps, y);
      if (w <= 0.0) continue;
      ray += wt * t * t * w * std::pow(f.value(y).norm(), p);
    }
    rem += ww * ray;
  }
  return total + rem;
}

double general_box(const VectorField& f, const Box& B, double p, const EnergyOptions& o) {
  for (int a = 0; a < 3; ++a) require(B.hi[a] > B.lo[a], ErrorCode::kInvalidArgument, "empty box");
  const auto sing = f.singularities();
  std::vector<int> inside;
  std::vector<double> room;
  for (size_t i = 0; i < sing.size(); ++i) {
    if (sing[i].k == 0.0) continue;
    const Vec3& c = sing[i].center;
    bool in_closed = true, in_open = true;
    double m = kInf;
    for (int a = 0; a < 3; ++a) {
      in_closed = in_closed && c[a] >= B.lo[a] && c[a] <= B.hi[a];
      in_open = in_open && c[a] > B.lo[a] && c[a] < B.hi[a];
      m = std::min({m, c[a] - B.lo[a], B.hi[a] - c[a]});
    }
    if (in_closed && p >= 1.5) return kInf;
    if (in_open) {
      inside.push_back(static_cast<int>(i));
      room.push_back(m);
    }
  }
  const auto bumps = make_bumps(sing, inside, room);
  double total = 0.0;
  for (const auto& b : bumps) total += bump_integral(f, b, p, o);

  std::array<std::vector<std::pair<double, double>>, 3> ax;
  for (int a = 0; a < 3; ++a) {
    std::vector<double> cuts{B.lo[a], B.hi[a]};
    for (const auto& b : bumps)
      for (double t : {b.c[a] - b.delta, b.c[a], b.c[a] + b.delta})
        if (t > B.lo[a] && t < B.hi[a]) cuts.push_back(t);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (size_t i = 0; i + 1 < cuts.size(); ++i)
      for (auto q : quad::gauss_legendre(std::max(10, o.radial / 2), cuts[i], cuts[i + 1])) ax[a].push_back(q);
  }
  double rem = 0.0;
  for (auto [z, wz] : ax[2])
    for (auto [y, wy] : ax[1])
      for (auto [x, wx] : ax[0]) {
        const Vec3 q(x, y, z);
        const double w = weight_outside_bumps(bumps, q);
        if (w <= 0.0) continue;
        rem += wx * wy * wz * w * std::pow(f.value(q).norm(), p);
      }
  return total + rem;
}

}  // namespace

double jensen_constant(double p) {
  check_p(p);
  if (p >= 1.5) return kInf;
  return std::pow(kFourPi, 1.0 - p) / (3.0 - 2.0 * p);
}

double monopole_energy(double k, double D, double R, double p) {
  check_p(p);
  require(R > 0.0 && D >= 0.0, ErrorCode::kDomain, "bad ball");
  if (k == 0.0) return 0.0;
  const double a = 3.0 - 2.0 * p;
  const double pre = std::pow(std::abs(k) / kFourPi, p) * 2.0 * kPi;
  auto prim = [&](double t) { return a == 0.0 ? std::log(t) : std::pow(t, a) / a; };
  boost::math::quadrature::tanh_sinh<double> ts;
  if (D < R) {
    if (p >= 1.5) return kInf;
    if (D == 0.0) return pre * 2.0 * prim(R);
    auto g = [&](double th) {
      const double c = std::cos(th), s = std::sin(th);
      const double t = -D * c + std::sqrt(std::max(0.0, R * R - D * D * s * s));
      return s * prim(t);
    };
    return pre * ts.integrate(g, 0.0, kPi, 1e-14);
  }
  if (D == R && p >= 1.5) return kInf;
  const double bmax = std::asin(R / D);
  auto g = [&](double b) {
    const double c = std::cos(b), s = std::sin(b);
    const double q = std::sqrt(std::max(0.0, R * R - D * D * s * s));
    const double t1 = D * c - q, t2 = D * c + q;
    if (t1 <= 0.0) return s * prim(t2);
    return s * (prim(t2) - prim(t1));
  };
  return pre * ts.integrate(g, 0.0, bmax, 1e-14);
}

double lp_energy(const VectorField& field, const Ball& region, double p, const EnergyOptions& opts) {
  check_p(p);
  require(region.r > 0.0, ErrorCode::kDomain, "ball radius must be positive");
  field.check_ball(region.x, region.r);
  if (const auto* g = dynamic_cast<const GridField*>(&field)) return grid_energy(*g, region, p).total();
  if (const auto* a = dynamic_cast<const AnalyticField*>(&field)) {
    if (a->abc_amplitude() == 0.0 && a->charges().size() <= 1) {
      if (a->charges().empty()) return 0.0;
      const auto c = a->singularities().front();
      return monopole_energy(c.k, (c.center - region.x).norm(), region.r, p);
    }
  }
  return general_ball(field, region, p, opts);
}

double lp_energy(const VectorField& field, const Box& region, double p, const EnergyOptions& opts) {
  check_p(p);
  if (const auto* g = dynamic_cast<const GridField*>(&field)) return grid_energy(*g, region, p).total();
  return general_box(field, region, p, opts);
}

double cell_cap_constant(double p) {
  check_p(p);
  if (p >= 1.5) return kInf;
  static std::mutex mu;
  static std::map<double, double> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(p); it != cache.end()) return it->second;

  constexpr int M = 8;
  const int n = 2 * M + 1;
  const GridField g = rasterize(monopole(Vec3::Zero(), 1), {n, n, n}, 1.0, Vec3::Constant(-(M + 0.5)));
  const double a = 3.0 - 2.0 * p;
  const double unit = std::pow(1.0 / kFourPi, p);
  auto phi_p = [&](const Vec3& y) { return unit * std::pow(y.squaredNorm(), -p); };

  double center = 0.0;
  for (auto [u, wu] : quad::gauss_legendre(30, -0.5, 0.5))
    for (auto [v, wv] : quad::gauss_legendre(30, -0.5, 0.5)) center += wu * wv * std::pow(u * u + v * v + 0.25, -p);
  double sum = unit * 6.0 * 0.5 / a * center - std::pow(g.cell_vector(M, M, M).norm(), p);

  const auto gl8 = quad::gauss_legendre(10, 0.0, 1.0);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (i == M && j == M && k == M) continue;
        const Vec3 c = g.cell_center(i, j, k);
        const int cheb = std::max({std::abs(i - M), std::abs(j - M), std::abs(k - M)});
        const int split = cheb == 1 ? 4 : (cheb == 2 ? 2 : 1);
        const double hs = 1.0 / split;
        double I = 0.0;
        for (int sz = 0; sz < split; ++sz)
          for (int sy = 0; sy < split; ++sy)
            for (int sx = 0; sx < split; ++sx) {
              const Vec3 lo = c - Vec3::Constant(0.5) + hs * Vec3(sx, sy, sz);
              for (auto [z, wz] : gl8)
                for (auto [y, wy] : gl8)
                  for (auto [x, wx] : gl8)
                    I += wx * wy * wz * phi_p(lo + hs * Vec3(x, y, z));
            }
        I *= hs * hs * hs;
        sum += I - std::pow(g.cell_vector(i, j, k).norm(), p);
      }
  cache[p] = sum;
  return sum;
}

namespace {

template <class Weight>
GridEnergy grid_energy_impl(const GridField& g, double p, Weight weight) {
  check_p(p);
  const auto& d = g.dims();
  const double h = g.spacing();
  GridEnergy out;
  double cap_unit = -1.0;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const double w = weight(g.cell_center(i, j, k));
        if (w <= 0.0) continue;
        out.cells += w * h * h * h * std::pow(g.cell_vector(i, j, k).norm(), p);
        const double q = g.divergence(i, j, k);
        if (std::abs(q) > 1e-9) {
          if (cap_unit < 0.0) cap_unit = cell_cap_constant(p);
          out.cap += w * std::pow(std::abs(q), p) * std::pow(h, 3.0 - 2.0 * p) * cap_unit;
          ++out.charge_cells;
        }
      }
  return out;
}

}  // namespace

GridEnergy grid_energy(const GridField& g, const Ball& region, double p) {
  const double h = g.spacing();
  const double half_diag = 0.5 * std::sqrt(3.0) * h;
  constexpr int S = 4;
  return grid_energy_impl(g, p, [&](const Vec3& c) {
    const double d = (c - region.x).norm();
    if (d + half_diag <= region.r) return 1.0;
    if (d - half_diag >= region.r) return 0.0;
    int in = 0;
    for (int a = 0; a < S; ++a)
      for (int b = 0; b < S; ++b)
        for (int e = 0; e < S; ++e) {
          const Vec3 y = c + h * Vec3((a + 0.5) / S - 0.5, (b + 0.5) / S - 0.5, (e + 0.5) / S - 0.5);
          if ((y - region.x).norm() < region.r) ++in;
        }
    return static_cast<double>(in) / (S * S * S);
  });
}

GridEnergy grid_energy(const GridField& g, const Box& region, double p) {
  const double h = g.spacing();
  return grid_energy_impl(g, p, [&](const Vec3& c) {
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      const double lo = std::max(region.lo[a], c[a] - 0.5 * h), hi = std::min(region.hi[a], c[a] + 0.5 * h);
      w *= std::max(0.0, hi - lo) / h;
    }
    return w;
  });
}

double surface_term(const VectorField& field, const Vec3& x, double r, double p, const EnergyOptions& opts) {
  check_p(p);
  require(r > 0.0, ErrorCode::kDomain, "radius must be positive");
  Vec3 axis(0, 0, 1);
  double best = kInf;
  for (const auto& c : field.singularities()) {
    const Vec3 d = c.center - x;
    const double gap = std::abs(d.norm() - r);
    if (gap < best && d.norm() > 0.0) {
      best = gap;
      axis = d;
    }
  }
  double sum = 0.0;
  for (const auto& [s, w] : sphere_rule(2 * opts.polar, 2 * opts.azimuthal, axis)) {
    const Vec3 X = field.value(x + r * s);
    const double n = X.norm();
    if (n == 0.0) continue;
    const Vec3 tan = X - X.dot(s) * s;
    sum += w * std::pow(n, p - 2.0) * tan.squaredNorm();
  }
  // area element r^2 on the sphere
  return p * std::pow(r, 2.0 * p - 3.0) * r * r * sum;
}

EnergyProfile rescaled_energy_profile(const VectorField& field, const Vec3& x, const std::vector<double>& radii,
                                      double p, const EnergyOptions& opts) {
  EnergyProfile prof;
  prof.x = x;
  prof.p = p;
  for (double r : radii) {
    const double e = lp_energy(field, Ball{x, r}, p, opts);
    prof.radii.push_back(r);
    prof.energy.push_back(e);
    prof.rescaled.push_back(std::pow(r, 2.0 * p - 3.0) * e);
    prof.surface.push_back(surface_term(field, x, r, p, opts));
  }
  return prof;
}

void write_csv(std::ostream& os, const EnergyProfile& prof) {
  os << "r,E,E_rescaled,surface_term\n";
  os.precision(17);
  for (size_t i = 0; i < prof.radii.size(); ++i)
    os << prof.radii[i] << ',' << prof.energy[i] << ',' << prof.rescaled[i] << ',' << prof.surface[i] << '\n';
}

nlohmann::json to_json(const EnergyProfile& prof) {
  return {{"x", {prof.x.x(), prof.x.y(), prof.x.z()}},
          {"p", prof.p},
          {"radii", prof.radii},
          {"energy", prof.energy},
          {"rescaled", prof.rescaled},
          {"surface_term", prof.surface}};
}

std::vector<double> geometric_radii(double r0, double ratio, int n) {
  require(r0 > 0.0 && ratio > 1.0 && n >= 1, ErrorCode::kInvalidArgument, "bad geometric grid");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(r0 * std::pow(ratio, i));
  return out;
}

AuditReport monotonicity_audit(const VectorField& field, const Vec3& x, const std::vector<double>& radii, double p,
                               double rel_tol, double abs_tol, const EnergyOptions& opts) {
  require(radii.size() >= 8, ErrorCode::kDomain, "radius grid too coarse (need at least 8 radii)");
  std::vector<double> r = radii;
  std::sort(r.begin(), r.end());
  require(std::adjacent_find(r.begin(), r.end()) == r.end(), ErrorCode::kDomain, "repeated radius");
  const auto prof = rescaled_energy_profile(field, x, r, p, opts);
  const auto& E = prof.rescaled;

  AuditReport rep;
  rep.title = "monotonicity";
  double max_rel = 0.0, max_abs = 0.0, max_drop = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 1; i + 1 < r.size(); ++i) {
    const double h1 = r[i] - r[i - 1], h2 = r[i + 1] - r[i];
    const double lhs = -h2 / (h1 * (h1 + h2)) * E[i - 1] + (h2 - h1) / (h1 * h2) * E[i] +
                       h1 / (h2 * (h1 + h2)) * E[i + 1];
    const double rhs = prof.surface[i];
    const double ab = std::abs(lhs - rhs);
    const double rel = ab / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    max_abs = std::max(max_abs, ab);
    if (ab > abs_tol) max_rel = std::max(max_rel, rel);
    rows.push_back({{"r", r[i]}, {"lhs", lhs}, {"rhs", rhs}, {"residual", ab}, {"relative", rel}});
  }
  for (size_t i = 0; i + 1 < r.size(); ++i)
    if (E[i] > 0.0) max_drop = std::max(max_drop, (E[i] - E[i + 1]) / E[i]);
  rep.at_most("max_relative_residual", max_rel, rel_tol, "nodes with |lhs - rhs| above the absolute floor");
  rep.data["max_abs_residual"] = max_abs;
  rep.at_most("max_relative_decrease", max_drop, 0.01, "rescaled energy nondecreasing");
  rep.data["rows"] = rows;
  rep.data["profile"] = to_json(prof);
  return rep;
}

double jensen_lower_bound(const AnalyticField& field, const Vec3& x, double r0, double p) {
  check_p(p);
  require(r0 > 0.0, ErrorCode::kDomain, "radius must be positive");
  require(p < 1.5, ErrorCode::kDomain, "Jensen bound needs p < 3/2");
  // enclosed charge is piecewise constant in r with jumps at charge distances
  std::vector<std::pair<double, double>> jumps;
  for (const auto& c : field.singularities()) {
    const double d = (c.center - x).norm();
    if (d < r0) jumps.emplace_back(d, c.k);
  }
  std::sort(jumps.begin(), jumps.end());
  const double a = 3.0 - 2.0 * p;
  double q = 0.0, sum = 0.0, prev = 0.0;
  for (size_t i = 0; i <= jumps.size(); ++i) {
    const double next = i < jumps.size() ? jumps[i].first : r0;
    sum += std::pow(std::abs(q), p) * (std::pow(next, a) - std::pow(prev, a)) / a;
    if (i < jumps.size()) q += jumps[i].second;
    prev = next;
  }
  return std::pow(kFourPi, 1.0 - p) * sum;
}

AuditReport eps_regularity_experiment(const AnalyticField& field, double p, const EpsRegularityOptions& opts) {
  check_p(p);
  require(p < 1.5, ErrorCode::kDomain, "energy is infinite for p >= 3/2");
  for (const auto& c : field.singularities())
    require(std::abs(c.k - std::round(c.k)) <= 1e-9, ErrorCode::kDomain,
            "field has non-integer charge; not in the integral class");
  AuditReport rep;
  rep.title = "eps_regularity";
  const double C = jensen_constant(p);
  const double E1 = lp_energy(field, Ball{Vec3::Zero(), 1.0}, p);

  const auto points = ball_grid_points(0.75, opts.scan_points);
  const double ratio = std::pow(opts.threshold / 0.02, 1.0 / std::max(1, opts.scan_radii - 1));
  const auto radii = geometric_radii(0.02, ratio, opts.scan_radii);
  const auto scan = property_P_scan(field, points, radii, opts.threshold * (1 + 1e-12), build_icosphere(opts.mesh_level));

  double min_ratio = kInf, equality_gap = kInf;
  nlohmann::json flagged = nlohmann::json::array();
  for (const auto& row : scan.rows) {
    if (!row.singular) continue;
    const double r0 = opts.threshold;
    const double Er = std::pow(r0, 2.0 * p - 3.0) * lp_energy(field, Ball{row.x, r0}, p);
    const double jb = std::pow(r0, 2.0 * p - 3.0) * jensen_lower_bound(field, row.x, r0, p);
    min_ratio = std::min(min_ratio, Er / C);
    equality_gap = std::min(equality_gap, std::abs(Er / C - 1.0));
    flagged.push_back({{"x", {row.x.x(), row.x.y(), row.x.z()}}, {"E_r0", Er}, {"jensen_bound", jb}});
  }
  const int n_sing = scan.singular_count();
  rep.data["E1"] = E1;
  rep.data["jensen_constant"] = C;
  rep.data["scan"] = to_json(scan);
  rep.data["flagged"] = flagged;
  rep.data["equality_gap"] = n_sing > 0 ? nlohmann::json(equality_gap) : nlohmann::json(nullptr);
  rep.expect("small_energy_implies_no_violation", E1 >= C * (1.0 - opts.jensen_tol) || n_sing == 0,
             "E1 < C(p) must leave no flagged point");
  if (n_sing > 0)
    rep.at_most("jensen_shortfall", std::max(0.0, 1.0 - min_ratio), opts.jensen_tol,
                "rescaled energy at flagged points >= C(p)");
  return rep;
}

AuditReport dipole_chain_experiment(double p, int n, double tol, double slope_tol) {
  const DipoleChain ch = dipole_chain(p, n);
  const double a = 3.0 - 2.0 * p;
  const double norm = jensen_constant(p) * std::pow(0.5, a);
  std::vector<double> partial;
  double s = 0.0, harmonic = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 plus = ch.centers[i] + Vec3(0.5 * ch.a[i], 0, 0);
    s += jensen_lower_bound(ch.field, plus, 0.5 * ch.a[i], p) / norm;
    harmonic += 1.0 / (i + 1);
    partial.push_back(s);
  }
  const double expected = std::pow(ch.c, a) * harmonic;
  AuditReport rep;
  rep.title = "dipole_chain";
  rep.at_most("sum_relative_error", std::abs(s - expected) / expected, tol, "per-ball bounds vs c^{3-2p} H_N");

  // least squares of partial sums against ln m
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int m = 1; m <= n; ++m) {
    const double lx = std::log(m), ly = partial[m - 1];
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
  const double ref = std::pow(ch.c, a);
  rep.at_most("log_slope_relative_error", std::abs(slope - ref) / ref, slope_tol, "slope vs c^{3-2p}");
  rep.data["c"] = ch.c;
  rep.data["sum"] = s;
  rep.data["expected"] = expected;
  rep.data["slope"] = slope;
  rep.data["partial_sums"] = partial;
  return rep;
}

}  // namespace wb

#include "wbundle/plateau.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <random>
#include <thread>
#include <atomic>
#include <limits>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "wbundle/energy_reg.hpp"

namespace wb {

namespace {
constexpr double kFourPi = 4.0 * std::numbers::pi;

double triangle_solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double la = a.norm(), lb = b.norm(), lc = c.norm();
  const double num = a.dot(b.cross(c));
  const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
  return 2.0 * std::atan2(num, den);
}

// face reference: >= 0 interior variable, < 0 boundary face -(b + 1)
constexpr int kNone = std::numeric_limits<int>::min();
}  // namespace

struct BallGrid {
  struct InteriorFace {
    int axis = 0;
    int lo = 0, hi = 0;  // active cells below / above along the axis
    int grid_index = 0;
  };
  struct BoundaryFace {
    int axis = 0;
    int cell = 0;
    int sign = 1;  // +1 when the outward normal is +e_axis
    int grid_index = 0;
    std::array<int, 3> corner{0, 0, 0};  // lowest grid vertex of the face
  };

  int n = 0;
  double h = 0.0;
  Vec3 origin{-1.0, -1.0, -1.0};
  std::vector<int> cell_id;                 // n^3 -> active index or -1
  std::vector<std::array<int, 3>> cells;    // active index -> (i, j, k)
  std::vector<std::array<int, 6>> cell_faces;  // (axis, lo/hi) -> face reference
  std::vector<InteriorFace> ifaces;
  std::vector<BoundaryFace> bfaces;
  std::vector<std::vector<int>> lines;  // interior faces along one grid line, in order
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> laplacian;

  int flat(int i, int j, int k) const { return i + n * (j + n * k); }
  Vec3 center(const std::array<int, 3>& c) const { return origin + h * Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5); }
  Vec3 vertex(const std::array<int, 3>& v) const { return origin + h * Vec3(v[0], v[1], v[2]); }

  // (D F)_c: outward flux of the interior faces
  Eigen::VectorXd div(const Eigen::VectorXd& F) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(cells.size());
    for (size_t f = 0; f < ifaces.size(); ++f) {
      d[ifaces[f].lo] += F[f];
      d[ifaces[f].hi] -= F[f];
    }
    return d;
  }
  Eigen::VectorXd div_adjoint(const Eigen::VectorXd& u) const {
    Eigen::VectorXd g(ifaces.size());
    for (size_t f = 0; f < ifaces.size(); ++f) g[f] = u[ifaces[f].lo] - u[ifaces[f].hi];
    return g;
  }
  Eigen::VectorXd solve_laplacian(const Eigen::VectorXd& r) const { return laplacian.solve(r); }
  // projection onto the null space of D; u receives the multiplier
  Eigen::VectorXd project(const Eigen::VectorXd& g, Eigen::VectorXd* u = nullptr) const {
    Eigen::VectorXd uu = solve_laplacian(div(g));
    Eigen::VectorXd out = g - div_adjoint(uu);
    if (u) *u = std::move(uu);
    return out;
  }
};

namespace {

std::shared_ptr<BallGrid> build_ball_grid(int n) {
  auto g = std::make_shared<BallGrid>();
  g->n = n;
  g->h = 2.0 / n;
  g->cell_id.assign(static_cast<size_t>(n) * n * n, -1);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (g->center({i, j, k}).norm() < 1.0) {
          g->cell_id[g->flat(i, j, k)] = static_cast<int>(g->cells.size());
          g->cells.push_back({i, j, k});
        }
  const int nc = static_cast<int>(g->cells.size());
  g->cell_faces.assign(nc, std::array<int, 6>{kNone, kNone, kNone, kNone, kNone, kNone});
  auto active = [&](std::array<int, 3> c) {
    for (int a = 0; a < 3; ++a)
      if (c[a] < 0 || c[a] >= n) return -1;
    return g->cell_id[g->flat(c[0], c[1], c[2])];
  };
  GridField layout({n, n, n}, g->h, g->origin);
  // faces swept axis by axis along grid lines so every line is contiguous
  for (int a = 0; a < 3; ++a) {
    const int u = (a + 1) % 3, v = (a + 2) % 3;
    for (int iv = 0; iv < n; ++iv)
      for (int iu = 0; iu < n; ++iu) {
        std::vector<int> line;
        for (int s = 0; s <= n; ++s) {
          std::array<int, 3> below{0, 0, 0};
          below[a] = s - 1;
          below[u] = iu;
          below[v] = iv;
          std::array<int, 3> above = below;
          above[a] = s;
          const int cb = active(below), ca = active(above);
          if (cb < 0 && ca < 0) continue;
          std::array<int, 3> fi = above;
          const int gidx = layout.face_index(a, fi[0], fi[1], fi[2]);
          if (cb >= 0 && ca >= 0) {
            const int id = static_cast<int>(g->ifaces.size());
            g->ifaces.push_back({a, cb, ca, gidx});
            g->cell_faces[cb][2 * a + 1] = id;
            g->cell_faces[ca][2 * a] = id;
            line.push_back(id);
          } else {
            const int id = static_cast<int>(g->bfaces.size());
            BallGrid::BoundaryFace bf;
            bf.axis = a;
            bf.cell = cb >= 0 ? cb : ca;
            bf.sign = cb >= 0 ? 1 : -1;
            bf.grid_index = gidx;
            bf.corner = fi;
            g->bfaces.push_back(bf);
            if (cb >= 0)
              g->cell_faces[cb][2 * a + 1] = -(id + 1);
            else
              g->cell_faces[ca][2 * a] = -(id + 1);
          }
        }
        if (!line.empty()) g->lines.push_back(std::move(line));
      }
  }
  // graph Laplacian D D^T, grounded at cell 0
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * g->ifaces.size() + 1);
  for (const auto& f : g->ifaces) {
    trip.emplace_back(f.lo, f.lo, 1.0);
    trip.emplace_back(f.hi, f.hi, 1.0);
    trip.emplace_back(f.lo, f.hi, -1.0);
    trip.emplace_back(f.hi, f.lo, -1.0);
  }
  trip.emplace_back(0, 0, 1.0);
  Eigen::SparseMatrix<double> L(nc, nc);
  L.setFromTriplets(trip.begin(), trip.end());
  g->laplacian.compute(L);
  require(g->laplacian.info() == Eigen::Success, ErrorCode::kDegenerate, "ball grid Laplacian factorization failed");
  return g;
}

}  // namespace

BallGridPtr ball_grid(int n) {
  require(n >= 4 && n <= 128, ErrorCode::kDomain, "grid size must lie in [4, 128]");
  static std::mutex mu;
  static std::map<int, BallGridPtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  BallGridPtr g = build_ball_grid(n);
  cache.emplace(n, g);
  return g;
}

int active_cells(const BallGrid& g) { return static_cast<int>(g.cells.size()); }
int boundary_faces(const BallGrid& g) { return static_cast<int>(g.bfaces.size()); }
int interior_faces(const BallGrid& g) { return static_cast<int>(g.ifaces.size()); }

int ChargeConfig3::total() const {
  int t = 0;
  for (const auto& s : sites) t += s.charge;
  return t;
}

std::string ChargeConfig3::key() const {
  std::vector<ChargeSite> s = sites;
  std::sort(s.begin(), s.end(), [](const ChargeSite& a, const ChargeSite& b) { return a.cell < b.cell; });
  std::ostringstream os;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ' ';
    os << s[i].cell[0] << ',' << s[i].cell[1] << ',' << s[i].cell[2] << ':' << s[i].charge;
  }
  return os.str();
}

ChargeConfig3 snap_charges(const std::vector<std::pair<Vec3, int>>& charges, int n) {
  const BallGridPtr g = ball_grid(n);
  std::map<std::array<int, 3>, int> merged;
  for (const auto& [x, q] : charges) {
    std::array<int, 3> c{0, 0, 0};
    for (int a = 0; a < 3; ++a) c[a] = static_cast<int>(std::floor((x[a] - g->origin[a]) / g->h));
    bool inside = true;
    for (int a = 0; a < 3; ++a) inside = inside && c[a] >= 0 && c[a] < n;
    require(inside && g->cell_id[g->flat(c[0], c[1], c[2])] >= 0, ErrorCode::kDomain,
            "charge position outside the solver domain");
    merged[c] += q;
  }
  ChargeConfig3 out;
  out.n = n;
  for (const auto& [c, q] : merged)
    if (q != 0) out.sites.push_back({c, g->center(c), q});
  return out;
}

int datum_degree(const TwoCochain& phi, double tol) {
  require(phi.mesh != nullptr, ErrorCode::kInvalidArgument, "boundary datum has no mesh");
  const double d = phi.degree();
  const double r = std::round(d);
  require(std::abs(d - r) <= tol, ErrorCode::kDomain, "boundary datum degree is not an integer");
  return static_cast<int>(r);
}

TwoCochain constant_datum(MeshPtr mesh, int k) {
  Eigen::VectorXd v(mesh->num_faces());
  double total = 0.0;
  for (int f = 0; f < mesh->num_faces(); ++f) total += mesh->face_area[f];
  for (int f = 0; f < mesh->num_faces(); ++f) v[f] = k * mesh->face_area[f] / total;
  return TwoCochain(std::move(mesh), std::move(v));
}

TwoCochain two_lobe_datum(MeshPtr mesh, int k, double kappa) {
  TwoCochain raw = integrate_density(mesh, [kappa](const Vec3& s) { return std::exp(kappa * s.z() * s.z()); });
  return raw * (k / raw.degree());
}

std::vector<double> boundary_fluxes(const BallGrid& g, const TwoCochain& phi) {
  const int deg = datum_degree(phi);
  const SphereMesh& mesh = *phi.mesh;
  std::vector<double> b(g.bfaces.size(), 0.0), omega(g.bfaces.size(), 0.0);
  int hint = 0;
  double sum = 0.0, omega_sum = 0.0;
  for (size_t f = 0; f < g.bfaces.size(); ++f) {
    const auto& bf = g.bfaces[f];
    const int a = bf.axis, u = (a + 1) % 3, v = (a + 2) % 3;
    const Vec3 p0 = g.vertex(bf.corner);
    Vec3 eu = Vec3::Zero(), ev = Vec3::Zero();
    eu[u] = 0.5 * g.h;
    ev[v] = 0.5 * g.h;
    if (bf.sign < 0) std::swap(eu, ev);  // (eu x ev) points outward
    for (int su = 0; su < 2; ++su)
      for (int sv = 0; sv < 2; ++sv) {
        const Vec3 c0 = p0 + su * eu + sv * ev;
        const Vec3 c1 = c0 + eu, c2 = c0 + eu + ev, c3 = c0 + ev;
        const double w = triangle_solid_angle(c0, c1, c2) + triangle_solid_angle(c0, c2, c3);
        const int face = mesh.locate(c0 + 0.5 * (eu + ev), hint);
        hint = face;
        b[f] += w * phi.density(face);
        omega[f] += w;
      }
    sum += b[f];
    omega_sum += omega[f];
  }
  const double shift = (deg - sum) / omega_sum;
  for (size_t f = 0; f < b.size(); ++f) b[f] += shift * omega[f];
  return b;
}

namespace {

struct Problem {
  const BallGrid* g = nullptr;
  double p = 1.25;
  double vol = 0.0;                 // h^3
  double avg = 0.0;                 // 1 / (2 h^2)
  std::vector<double> bplus;        // boundary fluxes along +axis
  Eigen::VectorXd rhs;              // q - outward boundary flux per cell

  double face_value(const Eigen::VectorXd& F, int ref) const {
    if (ref >= 0) return F[ref];
    return bplus[-ref - 1];
  }
  Vec3 cell_vector(const Eigen::VectorXd& F, int c) const {
    const auto& cf = g->cell_faces[c];
    return avg * Vec3(face_value(F, cf[0]) + face_value(F, cf[1]), face_value(F, cf[2]) + face_value(F, cf[3]),
                      face_value(F, cf[4]) + face_value(F, cf[5]));
  }
  double energy(const Eigen::VectorXd& F, Eigen::VectorXd* grad) const {
    double e = 0.0;
    if (grad) grad->setZero(F.size());
    for (int c = 0; c < static_cast<int>(g->cells.size()); ++c) {
      const Vec3 X = cell_vector(F, c);
      const double r = X.norm();
      if (r == 0.0) continue;
      e += vol * std::pow(r, p);
      if (!grad) continue;
      const Vec3 L = vol * p * std::pow(r, p - 2.0) * X;
      const auto& cf = g->cell_faces[c];
      for (int s = 0; s < 6; ++s)
        if (cf[s] >= 0) (*grad)[cf[s]] += avg * L[s / 2];
    }
    return e;
  }
  // Fenchel-Young gap after correcting the multipliers so that A^T Lambda = D^T u
  double gap(const Eigen::VectorXd& F, const Eigen::VectorXd& pg) const {
    // (A^T A) w = pg, tridiagonal [2 1] / (4 h^4) along every grid line
    Eigen::VectorXd w = Eigen::VectorXd::Zero(F.size());
    const double s = avg * avg;
    std::vector<double> cp, dp;
    for (const auto& line : g->lines) {
      const size_t m = line.size();
      cp.assign(m, 0.0);
      dp.assign(m, 0.0);
      for (size_t i = 0; i < m; ++i) {
        const double diag = 2.0 * s - (i ? s * cp[i - 1] : 0.0);
        cp[i] = s / diag;
        dp[i] = (pg[line[i]] - (i ? s * dp[i - 1] : 0.0)) / diag;
      }
      for (size_t i = m; i-- > 0;) w[line[i]] = dp[i] - (i + 1 < m ? cp[i] * w[line[i + 1]] : 0.0);
    }
    const double q = p / (p - 1.0);
    double total = 0.0;
    for (int c = 0; c < static_cast<int>(g->cells.size()); ++c) {
      const Vec3 X = cell_vector(F, c);
      const double r = X.norm();
      Vec3 L = r > 0.0 ? Vec3(vol * p * std::pow(r, p - 2.0) * X) : Vec3::Zero();
      const auto& cf = g->cell_faces[c];
      for (int a = 0; a < 3; ++a) {
        double corr = 0.0;
        if (cf[2 * a] >= 0) corr += w[cf[2 * a]];
        if (cf[2 * a + 1] >= 0) corr += w[cf[2 * a + 1]];
        L[a] -= avg * corr;
      }
      const double conj = (p - 1.0) * vol * std::pow(L.norm() / (vol * p), q);
      total += vol * std::pow(r, p) + conj - L.dot(X);
    }
    return total;
  }
};

double lbfgs_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); }

}  // namespace

InnerResult inner_solve(const ChargeConfig3& charges, const TwoCochain& phi, double p, int n,
                        const InnerOptions& opts) {
  require(p > 1.0 && p <= 1.5, ErrorCode::kDomain, "p must lie in (1, 1.5]");
  const BallGridPtr gp = ball_grid(n);
  const BallGrid& g = *gp;
  require(charges.n == n || charges.sites.empty(), ErrorCode::kInvalidArgument, "charge cells refer to another grid");
  const int deg = datum_degree(phi);
  require(charges.total() == deg, ErrorCode::kInfeasible,
          "total charge differs from the boundary degree (discrete divergence theorem)");

  Problem prob;
  prob.g = &g;
  prob.p = p;
  prob.vol = g.h * g.h * g.h;
  prob.avg = 0.5 / (g.h * g.h);
  const std::vector<double> b = boundary_fluxes(g, phi);
  prob.bplus.resize(b.size());
  prob.rhs = Eigen::VectorXd::Zero(g.cells.size());
  for (size_t f = 0; f < b.size(); ++f) {
    prob.bplus[f] = g.bfaces[f].sign * b[f];
    prob.rhs[g.bfaces[f].cell] -= b[f];
  }
  for (const auto& s : charges.sites) {
    const int c = g.cell_id[g.flat(s.cell[0], s.cell[1], s.cell[2])];
    require(c >= 0, ErrorCode::kDomain, "charge outside the solver domain");
    prob.rhs[c] += s.charge;
  }

  // p = 2 warm start
  Eigen::VectorXd F = g.div_adjoint(g.solve_laplacian(prob.rhs));
  Eigen::VectorXd grad(F.size());
  double f = prob.energy(F, &grad);
  Eigen::VectorXd pg = g.project(grad);
  double gap = prob.gap(F, pg);

  std::vector<Eigen::VectorXd> S, Y;
  std::vector<double> rho;
  InnerResult res;
  int it = 0;
  auto done = [&] { return f <= 1e-300 || gap <= opts.tol * f; };
  while (!done() && it < opts.max_iter) {
    ++it;
    // two-loop recursion
    Eigen::VectorXd d = -pg;
    std::vector<double> alpha(S.size());
    for (size_t i = S.size(); i-- > 0;) {
      alpha[i] = rho[i] * lbfgs_dot(S[i], d);
      d -= alpha[i] * Y[i];
    }
    if (!S.empty()) d *= lbfgs_dot(S.back(), Y.back()) / lbfgs_dot(Y.back(), Y.back());
    for (size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * lbfgs_dot(Y[i], d);
      d += (alpha[i] - beta) * S[i];
    }
    double slope = d.dot(pg);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      d = -pg;
      slope = d.dot(pg);
    }
    double t = 1.0;
    if (S.empty()) t = std::min(1.0, 1e-2 * f / std::max(-slope, 1e-300));
    Eigen::VectorXd Fn;
    double fn = f;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      Fn = F + t * d;
      fn = prob.energy(Fn, nullptr);
      if (fn <= f + 1e-4 * t * slope) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) {
      if (S.empty()) break;
      S.clear();
      Y.clear();
      rho.clear();
      continue;
    }
    Eigen::VectorXd gn(F.size());
    fn = prob.energy(Fn, &gn);
    Eigen::VectorXd pgn = g.project(gn);
    Eigen::VectorXd s = Fn - F, y = pgn - pg;
    const double sy = s.dot(y);
    if (sy > 1e-16 * s.norm() * y.norm()) {
      if (static_cast<int>(S.size()) == opts.memory) {
        S.erase(S.begin());
        Y.erase(Y.begin());
        rho.erase(rho.begin());
      }
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
    }
    F = std::move(Fn);
    f = fn;
    pg = std::move(pgn);
    gap = prob.gap(F, pg);
  }

  // restore the constraints to round-off
  F -= g.div_adjoint(g.solve_laplacian(g.div(F) - prob.rhs));
  Eigen::VectorXd gfin(F.size());
  f = prob.energy(F, &gfin);
  gap = prob.gap(F, g.project(gfin));

  GridField field({n, n, n}, g.h, g.origin);
  for (size_t i = 0; i < g.ifaces.size(); ++i) field.fluxes(g.ifaces[i].axis)[g.ifaces[i].grid_index] = F[i];
  for (size_t i = 0; i < g.bfaces.size(); ++i) field.fluxes(g.bfaces[i].axis)[g.bfaces[i].grid_index] = prob.bplus[i];
  field.p = p;

  res.cells = f;
  res.cap = 0.0;
  if (!charges.sites.empty()) {
    const double K = cell_cap_constant(p);
    for (const auto& s : charges.sites) res.cap += std::pow(std::abs(s.charge), p) * std::pow(g.h, 3.0 - 2.0 * p) * K;
  }
  res.energy = res.cells + res.cap;
  res.gap = f > 1e-300 ? std::max(gap, 0.0) / f : 0.0;
  res.iterations = it;
  res.converged = res.gap <= opts.tol;
  std::vector<double> q(g.cells.size(), 0.0);
  for (const auto& s : charges.sites) q[g.cell_id[g.flat(s.cell[0], s.cell[1], s.cell[2])]] = s.charge;
  for (size_t c = 0; c < g.cells.size(); ++c) {
    const auto& ijk = g.cells[c];
    res.divergence_residual = std::max(res.divergence_residual, std::abs(field.divergence(ijk[0], ijk[1], ijk[2]) - q[c]));
  }
  for (size_t i = 0; i < g.bfaces.size(); ++i)
    res.boundary_residual = std::max(
        res.boundary_residual, std::abs(g.bfaces[i].sign * field.fluxes(g.bfaces[i].axis)[g.bfaces[i].grid_index] - b[i]));
  field.meta = nlohmann::json{{"kind", "plateau"}, {"charges", charges.key()}, {"energy", res.energy}};
  res.field = std::move(field);
  if (!res.converged)
    throw InnerNotConverged("inner solve stopped at relative gap " + std::to_string(res.gap), std::move(res));
  return res;
}

namespace {

std::vector<int> default_levels(int n) {
  std::vector<int> out{n};
  int m = n;
  while (m / 2 >= 10) {
    m /= 2;
    if (m % 2 == 0) --m;
    out.insert(out.begin(), m);
  }
  return out;
}

Vec3 flux_centroid(const TwoCochain& phi) {
  Vec3 c = Vec3::Zero();
  double w = 0.0;
  for (int f = 0; f < phi.mesh->num_faces(); ++f) {
    c += phi.values[f] * phi.mesh->face_centroid[f];
    w += std::abs(phi.values[f]);
  }
  if (w <= 0.0) return Vec3::Zero();
  c /= w;
  if (c.norm() > 0.5) c *= 0.5 / c.norm();
  return c;
}

struct Evaluation {
  double energy = std::numeric_limits<double>::infinity();
  double gap = 0.0;
  std::shared_ptr<InnerResult> result;  // kept on the output level only
  ChargeConfig3 config;
};

class Evaluator {
 public:
  Evaluator(const TwoCochain& phi, double p, int n, const InnerOptions& opts, bool keep)
      : phi_(phi), p_(p), n_(n), opts_(opts), keep_(keep) {}

  Evaluation get(const ChargeConfig3& c) {
    const std::string key = c.key();
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    InnerResult r;
    try {
      r = inner_solve(c, phi_, p_, n_, opts_);
    } catch (const InnerNotConverged& e) {
      r = e.best();
    }
    Evaluation ev;
    ev.energy = r.energy;
    ev.gap = r.gap;
    ev.config = c;
    if (keep_) ev.result = std::make_shared<InnerResult>(std::move(r));
    std::lock_guard<std::mutex> lock(mu_);
    cache_.emplace(key, ev);
    return ev;
  }

  const std::map<std::string, Evaluation>& cache() const { return cache_; }

 private:
  const TwoCochain& phi_;
  double p_;
  int n_;
  InnerOptions opts_;
  bool keep_;
  std::mutex mu_;
  std::map<std::string, Evaluation> cache_;
};

struct Move {
  std::string name;
  ChargeConfig3 config;
};

ChargeConfig3 with_change(const ChargeConfig3& c, const std::array<int, 3>& cell, int dq) {
  ChargeConfig3 out = c;
  bool found = false;
  for (auto& s : out.sites)
    if (s.cell == cell) {
      s.charge += dq;
      found = true;
    }
  if (!found) out.sites.push_back({cell, ball_grid(c.n)->center(cell), dq});
  out.sites.erase(std::remove_if(out.sites.begin(), out.sites.end(), [](const ChargeSite& s) { return s.charge == 0; }),
                  out.sites.end());
  return out;
}

std::string cell_text(const std::array<int, 3>& c) {
  return std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]);
}

std::vector<Move> propose(const ChargeConfig3& c, bool pairs, int pair_proposals, std::mt19937_64& rng) {
  const BallGridPtr g = ball_grid(c.n);
  auto active = [&](const std::array<int, 3>& x) {
    for (int a = 0; a < 3; ++a)
      if (x[a] < 0 || x[a] >= c.n) return false;
    return g->cell_id[g->flat(x[0], x[1], x[2])] >= 0;
  };
  std::vector<Move> out;
  for (const auto& s : c.sites) {
    const int unit = s.charge > 0 ? 1 : -1;
    for (int a = 0; a < 3; ++a)
      for (int d : {-1, 1}) {
        std::array<int, 3> nb = s.cell;
        nb[a] += d;
        if (!active(nb)) continue;
        out.push_back({"relocate " + cell_text(s.cell) + " -> " + cell_text(nb),
                       with_change(with_change(c, s.cell, -s.charge), nb, s.charge)});
        if (std::abs(s.charge) >= 2)
          out.push_back({"split " + cell_text(s.cell) + " -> " + cell_text(nb),
                         with_change(with_change(c, s.cell, -unit), nb, unit)});
      }
    for (const auto& t : c.sites) {
      if (t.cell == s.cell) continue;
      out.push_back({"transfer " + cell_text(s.cell) + " -> " + cell_text(t.cell),
                     with_change(with_change(c, s.cell, -unit), t.cell, unit)});
      if (s.charge > 0 && t.charge < 0)
        out.push_back({"annihilate " + cell_text(s.cell) + " " + cell_text(t.cell),
                       with_change(with_change(c, s.cell, -1), t.cell, 1)});
    }
  }
  if (pairs) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(g->cells.size()) - 1), axis(0, 5);
    for (int k = 0; k < pair_proposals; ++k) {
      const auto cell = g->cells[pick(rng)];
      std::array<int, 3> nb = cell;
      const int a = axis(rng);
      nb[a / 2] += (a % 2) ? 1 : -1;
      if (!active(nb)) continue;
      out.push_back({"pair " + cell_text(cell) + " " + cell_text(nb), with_change(with_change(c, cell, 1), nb, -1)});
    }
  }
  return out;
}

std::vector<Evaluation> evaluate_all(Evaluator& ev, const std::vector<Move>& moves, int threads) {
  std::vector<Evaluation> out(moves.size());
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i; (i = next.fetch_add(1)) < moves.size();) out[i] = ev.get(moves[i].config);
  };
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(moves.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return out;
}

// greedy descent from `start`; returns the final configuration and energy
std::pair<ChargeConfig3, double> descend(Evaluator& ev, ChargeConfig3 start, bool pairs, const OuterOptions& opts,
                                         int restart, std::mt19937_64& rng, std::vector<OuterStep>& trace) {
  double e = ev.get(start).energy;
  trace.push_back({start.n, restart, "start", start.key(), e});
  for (int m = 0; m < opts.max_moves; ++m) {
    const auto moves = propose(start, pairs, opts.pair_proposals, rng);
    if (moves.empty()) break;
    const auto vals = evaluate_all(ev, moves, opts.threads);
    size_t best = 0;
    for (size_t i = 1; i < vals.size(); ++i)
      if (vals[i].energy < vals[best].energy) best = i;
    if (!(vals[best].energy < e - 1e-10 * std::max(1.0, std::abs(e)))) break;
    start = moves[best].config;
    e = vals[best].energy;
    trace.push_back({start.n, restart, moves[best].name, start.key(), e});
  }
  return {start, e};
}

ChargeConfig3 carry(const ChargeConfig3& c, int n) {
  std::vector<std::pair<Vec3, int>> q;
  for (const auto& s : c.sites) q.emplace_back(s.position, s.charge);
  return snap_charges(q, n);
}

}  // namespace

PlateauResult outer_search(const TwoCochain& phi, double p, int n, const OuterOptions& opts) {
  require(p > 1.0 && p <= 1.5, ErrorCode::kDomain, "p must lie in (1, 1.5]");
  const int deg = datum_degree(phi);
  std::vector<int> levels = opts.levels.empty() ? default_levels(n) : opts.levels;
  require(!levels.empty() && levels.back() == n, ErrorCode::kInvalidArgument, "the last level must be the output grid");

  PlateauResult out;
  out.p = p;
  out.degree = deg;
  const Vec3 centroid = flux_centroid(phi);

  ChargeConfig3 carried;
  for (size_t li = 0; li < levels.size(); ++li) {
    const int m = levels[li];
    const bool last = li + 1 == levels.size();
    Evaluator ev(phi, p, m, opts.inner, last);
    std::vector<ChargeConfig3> starts;
    if (li == 0) {
      for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        std::vector<std::pair<Vec3, int>> q;
        std::mt19937_64 rng(opts.seed + 7919 * r);
        std::uniform_real_distribution<double> u(-0.3, 0.3);
        const int unit = deg >= 0 ? 1 : -1;
        for (int k = 0; k < std::abs(deg); ++k) {
          Vec3 x = centroid;
          if (r > 0) {
            Vec3 off;
            do off = Vec3(u(rng), u(rng), u(rng));
            while (off.norm() > 0.3);
            x += off;
          }
          q.emplace_back(x, unit);
        }
        starts.push_back(snap_charges(q, m));
      }
    } else {
      starts.push_back(carry(carried, m));
    }
    const bool search = li == 0 || m <= opts.local_search_max_n;
    double best_e = std::numeric_limits<double>::infinity();
    for (size_t r = 0; r < starts.size(); ++r) {
      std::mt19937_64 rng(opts.seed * 1000003 + 31 * m + r);
      std::pair<ChargeConfig3, double> res;
      if (search) {
        res = descend(ev, starts[r], li == 0, opts, static_cast<int>(r), rng, out.trace);
      } else {
        res = {starts[r], ev.get(starts[r]).energy};
        out.trace.push_back({m, static_cast<int>(r), "start", starts[r].key(), res.second});
      }
      if (res.second < best_e) {
        best_e = res.second;
        carried = res.first;
      }
    }
    for (const auto& [key, e] : ev.cache()) out.explored.push_back({m, key, e.energy, e.gap});
    if (last) {
      // minimum over everything explored on the output grid
      const Evaluation* best = nullptr;
      for (const auto& [key, e] : ev.cache())
        if (!best || e.energy < best->energy) best = &e;
      out.solution = *best->result;
      out.charges = best->config;
    }
  }
  if (opts.boundary_trace) {
    TraceOptions to;
    to.distance.restarts = 1;
    out.trace_table = to_json(membership_check(out.solution.field, phi, p, to));
  }
  return out;
}

TraceProfile trace_profile(const VectorField& field, const TwoCochain& phi, std::vector<double> rho_grid, double p,
                           const TraceOptions& opts) {
  const int deg = datum_degree(phi);
  require(rho_grid.size() >= 2, ErrorCode::kDomain, "trace profile needs at least two radii");
  for (double r : rho_grid) require(r > 0.0 && r < 1.0, ErrorCode::kDomain, "rho must lie in (0, 1)");
  std::sort(rho_grid.begin(), rho_grid.end(), std::greater<>());
  TraceProfile t;
  t.rho = rho_grid;
  const MeshPtr mesh = phi.mesh;
  for (double r : rho_grid) {
    TwoCochain s = restrict_to_sphere(field, Vec3::Zero(), 1.0 - r, mesh);
    const double dg = s.degree();
    t.degree.push_back(dg);
    if (std::lround(dg) != deg) t.degree_match = false;
  }
  if (!t.degree_match) {
    t.member = false;
    t.verdict = "slice degree differs from the boundary degree";
    t.distance.assign(rho_grid.size(), std::numeric_limits<double>::quiet_NaN());
    return t;
  }
  double area = 0.0;
  for (int f = 0; f < mesh->num_faces(); ++f) area += mesh->face_area[f];
  for (size_t i = 0; i < rho_grid.size(); ++i) {
    TwoCochain s = restrict_to_sphere(field, Vec3::Zero(), 1.0 - rho_grid[i], mesh);
    // spread the non-integer part of the flux uniformly
    const double fix = (deg - s.degree()) / area;
    for (int f = 0; f < mesh->num_faces(); ++f) s.values[f] += fix * mesh->face_area[f];
    t.distance.push_back(slice_distance(s, phi, p, opts.distance).value);
  }
  // d ~ d_0 + b rho^s: least squares in (d_0, b) for each s on a grid
  double best_sse = std::numeric_limits<double>::infinity();
  const int m = static_cast<int>(rho_grid.size());
  for (int k = 0; k <= 290; ++k) {
    const double s = 0.1 + 0.01 * k;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
      const double x = std::pow(rho_grid[i], s), y = t.distance[i];
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double den = m * sxx - sx * sx;
    if (den <= 0.0) continue;
    const double b = std::max(0.0, (m * sxy - sx * sy) / den);
    const double d0 = (sy - b * sx) / m;
    double sse = 0.0;
    for (int i = 0; i < m; ++i) sse += std::pow(d0 + b * std::pow(rho_grid[i], s) - t.distance[i], 2);
    if (sse < best_sse) {
      best_sse = sse;
      t.exponent = s;
      t.intercept = d0;
    }
  }
  t.member = t.intercept <= opts.tol;
  t.verdict = t.member ? "member" : "extrapolated slice distance above tolerance";
  return t;
}

TraceProfile membership_check(const VectorField& field, const TwoCochain& phi, double p, const TraceOptions& opts) {
  double rho_min = 0.02;
  if (const auto* g = dynamic_cast<const GridField*>(&field)) rho_min = std::max(rho_min, 2.0 * g->spacing());
  std::vector<double> rho;
  const int m = 8;
  for (int i = 0; i < m; ++i) rho.push_back(0.4 * std::pow(rho_min / 0.4, static_cast<double>(i) / (m - 1)));
  return trace_profile(field, phi, rho, p, opts);
}

AuditReport trace_preservation_experiment(const std::vector<int>& ns, double p, int grid_n, int mesh_level,
                                          double energy_tol) {
  require(!ns.empty(), ErrorCode::kDomain, "need at least one sequence member");
  AuditReport rep;
  rep.title = "trace preservation";
  const MeshPtr mesh = build_icosphere(mesh_level);
  const TwoCochain phi = constant_datum(mesh, 1);
  nlohmann::json rows = nlohmann::json::array();
  bool all_members = true;
  double min_energy = std::numeric_limits<double>::infinity();
  for (int k : ns) {
    require(k >= 2, ErrorCode::kDomain, "sequence index must be at least 2");
    const ChargeConfig3 c = snap_charges({{Vec3(1.0 / k, 0.0, 0.0), 1}}, grid_n);
    const InnerResult r = inner_solve(c, phi, p, grid_n);
    const TraceProfile t = membership_check(r.field, phi, p);
    all_members = all_members && t.member;
    min_energy = std::min(min_energy, r.energy);
    rows.push_back({{"n", k}, {"charge", to_json(c)}, {"energy", r.energy}, {"trace", to_json(t)}});
  }
  const InnerResult lim = inner_solve(snap_charges({{Vec3::Zero(), 1}}, grid_n), phi, p, grid_n);
  const TraceProfile lim_grid = membership_check(lim.field, phi, p);
  const TraceProfile lim_exact = membership_check(monopole(Vec3::Zero(), 1), phi, p);
  const TraceProfile wrong = membership_check(monopole(Vec3(0.5, 0, 0), 1), phi, p);
  const TraceProfile wrong_degree = membership_check(monopole(Vec3::Zero(), 1), constant_datum(mesh, 2), p);
  rep.expect("every member passes", all_members);
  rep.expect("limit field passes", lim_exact.member && lim_grid.member);
  rep.expect("mismatched datum rejected", !wrong.member && !wrong_degree.member);
  rep.at_most("limit energy minus min member energy", lim.energy - min_energy, energy_tol);
  rep.data["rows"] = rows;
  rep.data["limit_grid"] = {{"energy", lim.energy}, {"trace", to_json(lim_grid)}};
  rep.data["limit_exact"] = to_json(lim_exact);
  rep.data["mismatched"] = to_json(wrong);
  rep.data["mismatched_degree"] = to_json(wrong_degree);
  return rep;
}

nlohmann::json to_json(const ChargeConfig3& c) {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& s : c.sites)
    sites.push_back({{"cell", s.cell}, {"position", {s.position.x(), s.position.y(), s.position.z()}}, {"charge", s.charge}});
  return {{"n", c.n}, {"total", c.total()}, {"sites", sites}};
}

nlohmann::json to_json(const InnerResult& r) {
  return {{"energy", r.energy},
          {"cells", r.cells},
          {"cap", r.cap},
          {"gap", r.gap},
          {"divergence_residual", r.divergence_residual},
          {"boundary_residual", r.boundary_residual},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

nlohmann::json to_json(const TraceProfile& t) {
  auto clean = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return a;
  };
  return {{"rho", t.rho},
          {"distance", clean(t.distance)},
          {"degree", t.degree},
          {"exponent", t.exponent},
          {"intercept", t.intercept},
          {"degree_match", t.degree_match},
          {"member", t.member},
          {"verdict", t.verdict}};
}

nlohmann::json to_json(const PlateauResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& s : r.trace)
    trace.push_back({{"level", s.level}, {"restart", s.restart}, {"move", s.move}, {"config", s.config}, {"energy", s.energy}});
  nlohmann::json explored = nlohmann::json::array();
  for (const auto& e : r.explored)
    explored.push_back({{"level", e.level}, {"config", e.config}, {"energy", e.energy}, {"gap", e.gap}});
  return {{"p", r.p},
          {"degree", r.degree},
          {"charges", to_json(r.charges)},
          {"solution", to_json(r.solution)},
          {"trace", trace},
          {"explored", explored},
          {"boundary_trace", r.trace_table}};
}

}  // namespace wb

#include "wbundle/slice_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "quadrature.hpp"
#include "wbundle/error.hpp"

namespace wb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlack = 1e-12;

const Ball& bigger(const Ball& a, const Ball& b) { return a.r >= b.r ? a : b; }
const Ball& smaller(const Ball& a, const Ball& b) { return a.r >= b.r ? b : a; }

// Lowest ball reachable from both by ascending (H)-segments, on the line between them.
Ball apex(const Ball& a, const Ball& b) {
  const Vec3 dx = b.x - a.x;
  const double D = dx.norm();
  const double d1 = std::clamp((b.r - a.r + 2.0 * D) / 4.0, 0.0, D);
  const Vec3 x = D > 0 ? Vec3(a.x + (d1 / D) * dx) : a.x;
  const double r = std::max(a.r + 2.0 * d1, b.r + 2.0 * (D - d1));
  return {x, r * (1 + kSlack) + kSlack};
}

// Highest ball reachable from both by descending (H)-segments.
Ball valley(const Ball& a, const Ball& b) {
  const Vec3 dx = b.x - a.x;
  const double D = dx.norm();
  const double rv = 0.5 * (a.r + b.r - 2.0 * D);
  const double d = std::clamp(0.5 * (a.r - rv), 0.0, D);
  const Vec3 x = D > 0 ? Vec3(a.x + (d / D) * dx) : a.x;
  return {x, rv * (1 - kSlack) - kSlack};
}

// Intermediate balls joining a to b: none when (H) holds, else the apex.
std::vector<Ball> connect(const Ball& a, const Ball& b) {
  if (hypothesis_H(a, b)) return {};
  return {apex(a, b)};
}

SegmentPath make_path(std::vector<Ball> balls) {
  SegmentPath path;
  for (size_t i = 0; i + 1 < balls.size(); ++i)
    path.segments.push_back({hypothesis_H(balls[i], balls[i + 1]), std::abs(balls[i].r - balls[i + 1].r)});
  path.balls = std::move(balls);
  const int n = path.num_segments();
  if (n == 0) path.shape = "empty";
  else if (n == 1) path.shape = "direct";
  else if (n == 2) path.shape = path.balls[1].r > path.balls[0].r ? "V" : "W";
  else path.shape = "M";
  return path;
}

}  // namespace

double ball_distance(const Ball& a, const Ball& b) {
  return std::sqrt((a.x - b.x).squaredNorm() + (a.r - b.r) * (a.r - b.r));
}

bool admissible(const Ball& b) { return b.r > 0.0 && b.x.norm() < 0.5 && b.x.norm() + b.r <= 1.0 + 1e-12; }

bool hypothesis_H(const Ball& a, const Ball& b) {
  const Ball& B = bigger(a, b);
  const Ball& S = smaller(a, b);
  if (!(B.r > S.r) || B.r > 1.0 + 1e-12) return false;
  return (B.x - S.x).norm() <= 0.5 * (B.r - S.r) * (1 + 1e-12) + 1e-14;
}

TwoCochain slice(const VectorField& field, const Ball& b, MeshPtr mesh) {
  return restrict_to_sphere(field, b.x, b.r, std::move(mesh));
}

double SegmentPath::max_gap() const {
  double g = 0.0;
  for (const auto& s : segments) g = std::max(g, s.gap);
  return g;
}

bool SegmentPath::valid() const {
  if (segments.size() > 4) return false;
  for (const auto& b : balls)
    if (!admissible(b)) return false;
  for (const auto& s : segments)
    if (!s.h_ok) return false;
  if (balls.size() >= 2 && max_gap() > 2.0 * ball_distance(balls.front(), balls.back()) * (1 + 1e-9)) return false;
  return true;
}

SegmentPath plan_path(const Ball& from, const Ball& to, double p, const BallPredicate& reject) {
  require(admissible(from) && admissible(to), ErrorCode::kDomain, "path endpoints must lie in the admissible set");
  if (ball_distance(from, to) == 0.0) return make_path({from});
  if (hypothesis_H(from, to)) return make_path({from, to});

  const double e = 1.0 - 1.0 / p;
  SegmentPath best;
  double best_cost = kInf;
  auto consider = [&](std::vector<Ball> balls) {
    for (size_t i = 1; i + 1 < balls.size(); ++i)
      if (reject && reject(balls[i])) return;
    SegmentPath path = make_path(std::move(balls));
    if (!path.valid()) return;
    double cost = 0.0;
    for (const auto& s : path.segments) cost += std::pow(s.gap, e);
    if (cost < best_cost) {
      best_cost = cost;
      best = std::move(path);
    }
  };

  consider({from, apex(from, to), to});
  consider({from, valley(from, to), to});

  std::vector<Vec3> centers{Vec3::Zero(), 0.25 * (from.x + to.x)};
  for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) centers.push_back(from.x + f * (to.x - from.x));
  constexpr int kRadii = 40;
  for (const auto& xv : centers) {
    const double room = 1.0 - xv.norm();
    if (xv.norm() >= 0.5) continue;
    for (int k = 0; k < kRadii; ++k) {
      const Ball v{xv, room * std::pow(1e-3, static_cast<double>(k) / (kRadii - 1)) * (1 - 1e-9)};
      std::vector<Ball> balls{from};
      for (const auto& b : connect(from, v)) balls.push_back(b);
      if (ball_distance(from, v) > 0.0) balls.push_back(v);
      for (const auto& b : connect(v, to)) balls.push_back(b);
      if (ball_distance(v, to) > 0.0) balls.push_back(to);
      consider(std::move(balls));
    }
  }
  if (best_cost < kInf) return best;

  // Fallback: shortest path with at most 4 segments over a node grid on the
  // straight line and on the two legs through the origin.
  std::vector<Ball> nodes{from, to};
  constexpr int kSteps = 16;
  for (int leg = 0; leg < 3; ++leg) {
    const Vec3 a = leg == 2 ? Vec3::Zero() : from.x;
    const Vec3 b = leg == 1 ? Vec3::Zero() : to.x;
    for (int i = 0; i <= kSteps; ++i) {
      const Vec3 x = a + (static_cast<double>(i) / kSteps) * (b - a);
      const double room = 1.0 - x.norm();
      for (int k = 0; k < kRadii; ++k) {
        const Ball n{x, room * std::pow(1e-3, static_cast<double>(k) / (kRadii - 1)) * (1 - 1e-9)};
        if (admissible(n) && !(reject && reject(n))) nodes.push_back(n);
      }
    }
  }
  const int N = static_cast<int>(nodes.size());
  const double max_gap = 2.0 * ball_distance(from, to);
  std::vector<std::vector<int>> prev(4, std::vector<int>(N, -1));
  std::vector<std::vector<double>> layer(5, std::vector<double>(N, kInf));
  layer[0][0] = 0.0;
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < N; ++i) {
      if (layer[s][i] == kInf || i == 1) continue;
      for (int j = 1; j < N; ++j) {
        const double gap = std::abs(nodes[i].r - nodes[j].r);
        if (gap > max_gap || !hypothesis_H(nodes[i], nodes[j])) continue;
        const double c = layer[s][i] + std::pow(gap, e);
        if (c < layer[s + 1][j]) {
          layer[s + 1][j] = c;
          prev[s][j] = i;
        }
      }
    }
  int steps = -1;
  for (int s = 1; s <= 4; ++s)
    if (layer[s][1] < kInf && (steps < 0 || layer[s][1] < layer[steps][1])) steps = s;
  require(steps > 0, ErrorCode::kNotConverged, "no admissible segment path found");
  std::vector<Ball> balls(steps + 1);
  for (int s = steps, j = 1; s >= 0; --s) {
    balls[s] = nodes[j];
    if (s > 0) j = prev[s - 1][j];
  }
  return make_path(std::move(balls));
}

RadialCompetitor radial_average_competitor(const VectorField& field, const Ball& b, const Ball& b2, MeshPtr mesh,
                                           int n_t) {
  require(hypothesis_H(b, b2), ErrorCode::kDomain, "segment violates hypothesis (H)");
  require(n_t >= 1, ErrorCode::kInvalidArgument, "need at least one quadrature point");
  const Ball& B = bigger(b, b2);
  const Ball& S = smaller(b, b2);
  field.check_ball(B.x, B.r);
  for (const auto& c : field.singularities()) {
    if (c.k == 0.0) continue;
    const bool in_big = (c.center - B.x).norm() < B.r * (1 + kDegenerateBand);
    const bool out_small = (c.center - S.x).norm() > S.r * (1 - kDegenerateBand);
    require(!(in_big && out_small), ErrorCode::kDegenerate, "singularity inside the quadrature tube");
  }
  const SphereMesh& m = *mesh;
  const auto tq = quad::gauss_legendre(n_t, 0.0, 1.0);

  RadialCompetitor out;
  out.average = TwoCochain::zero(mesh);
  for (auto [t, w] : tq) {
    const Ball bt{S.x + t * (B.x - S.x), S.r + t * (B.r - S.r)};
    out.average = out.average + slice(field, bt, mesh) * w;
  }

  const auto sq = quad::gauss_legendre(10, 0.0, 1.0);
  const Vec3 dx = B.x - S.x;
  const double dr = B.r - S.r;
  Eigen::VectorXd alpha(m.num_edges());
  for (int e = 0; e < m.num_edges(); ++e) {
    const Vec3& v0 = m.vertices[m.edges[e][0]];
    const Vec3& v1 = m.vertices[m.edges[e][1]];
    const double th = std::acos(std::clamp(v0.dot(v1), -1.0, 1.0));
    const double sth = std::sin(th);
    const Vec3 mid = (v0 + v1).normalized();
    const double orient = mid.cross(v1 - v0).dot(mid - m.face_centroid[m.edge_faces[e][0]]) > 0 ? 1.0 : -1.0;
    double sum = 0.0;
    for (auto [s, ws] : sq) {
      const Vec3 g = (std::sin((1 - s) * th) * v0 + std::sin(s * th) * v1) / sth;
      const Vec3 dg = th * (-std::cos((1 - s) * th) * v0 + std::cos(s * th) * v1) / sth;
      for (auto [t, wt] : tq) {
        const double rt = S.r + t * dr;
        const Vec3 A = S.x + t * dx + rt * g;
        const Vec3 n = (dx + dr * g).cross(rt * dg);
        sum += ws * wt * field.value(A).dot(n);
      }
    }
    alpha[e] = orient * sum;
  }
  // alpha is the outflow through the swept side walls from B' towards B; it
  // satisfies d*alpha = h(B') - h(B) with B the larger ball.
  if (&B != &b) alpha = -alpha;
  out.alpha = OneFormCochain(mesh, std::move(alpha));
  const TwoCochain target = slice(field, b2, mesh) - slice(field, b, mesh);
  out.residual = (codifferential(out.alpha).values - target.values).cwiseAbs().maxCoeff();
  return out;
}

double segment_holder_bound(const VectorField& field, const Ball& b, const Ball& b2, double p) {
  if (ball_distance(b, b2) == 0.0) return 0.0;
  require(hypothesis_H(b, b2), ErrorCode::kDomain, "segment violates hypothesis (H)");
  const Ball& B = bigger(b, b2);
  const Ball& S = smaller(b, b2);
  const double shell = std::max(0.0, lp_energy(field, B, p) - lp_energy(field, S, p));
  return 2.0 * std::pow(B.r - S.r, 1.0 - 1.0 / p) * std::pow(shell, 1.0 / p);
}

AuditReport holder_audit(const VectorField& field, int n_pairs, double p, std::uint64_t seed,
                         const HolderOptions& opts) {
  require(n_pairs > 0, ErrorCode::kInvalidArgument, "need at least one pair");
  const MeshPtr mesh = build_icosphere(opts.level);
  const double fnorm = std::pow(lp_energy(field, Ball{Vec3::Zero(), 1.0}, p), 1.0 / p);
  const double e = 1.0 - 1.0 / p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5), unit(0.0, 1.0);
  auto degenerate = [&](const Ball& b) { return degenerate_sphere(field, b.x, b.r); };
  auto draw = [&]() {
    for (;;) {
      const Vec3 x(u(rng), u(rng), u(rng));
      if (x.norm() >= 0.5) continue;
      const Ball b{x, opts.r_min + (1.0 - x.norm() - opts.r_min) * unit(rng)};
      if (!degenerate(b)) return b;
    }
  };
  auto dist = [&](const Ball& a, const Ball& b) {
    return slice_distance(slice(field, a, mesh), slice(field, b, mesh), p, opts.distance).value;
  };

  double max_ratio = 0.0, max_seg_ratio = 0.0, max_excess = -kInf, observed = 0.0;
  bool paths_ok = true;
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < n_pairs; ++i) {
    const Ball a = draw(), b = draw();
    const double D = ball_distance(a, b);
    const double d = dist(a, b);
    const double global = 16.0 * fnorm * std::pow(D, e);
    const double ratio = D == 0.0 ? 0.0 : d / global;
    const SegmentPath path = plan_path(a, b, p, degenerate);
    paths_ok = paths_ok && path.valid();
    double chain = 0.0;
    nlohmann::json segs = nlohmann::json::array();
    for (int s = 0; s < path.num_segments(); ++s) {
      const Ball& s0 = path.balls[s];
      const Ball& s1 = path.balls[s + 1];
      const double bound = segment_holder_bound(field, s0, s1, p);
      const double ds = path.num_segments() == 1 ? d : dist(s0, s1);
      const double sr = ds <= opts.tol ? 0.0 : ds / bound;
      chain += bound;
      max_seg_ratio = std::max(max_seg_ratio, sr);
      segs.push_back({{"distance", ds}, {"bound", bound}, {"ratio", sr}});
    }
    max_ratio = std::max(max_ratio, ratio);
    max_excess = std::max(max_excess, d - chain);
    if (D > 0.0) observed = std::max(observed, d / (fnorm * std::pow(D, e)));
    rows.push_back({{"B", to_json(a)}, {"B2", to_json(b)}, {"distance", d}, {"global_bound", global},
                    {"ratio", ratio}, {"chain_bound", chain}, {"shape", path.shape}, {"segments", segs}});
  }
  AuditReport rep;
  rep.title = "holder";
  rep.at_most("max d / (16 ||F||_p |B-B'|^(1-1/p))", max_ratio, 1.0);
  rep.at_most("max segment d / factor-2 bound", max_seg_ratio, 1.0);
  rep.at_most("max d - chained bound", max_excess, opts.tol);
  rep.expect("paths valid", paths_ok);
  rep.data = {{"pairs", n_pairs}, {"p", p},           {"seed", seed}, {"level", opts.level},
              {"field_norm", fnorm}, {"observed_constant", observed}, {"rows", rows}};
  return rep;
}

std::vector<std::string> test_pairing_names() {
  return {"exp(x)", "exp(y)", "exp(z)", "cos(2x+y)", "sin(3y-z)", "xyz+z^2"};
}

std::vector<double> test_pairings(const TwoCochain& h) {
  const SphereMesh& m = *h.mesh;
  std::vector<double> out(6, 0.0);
  for (int f = 0; f < m.num_faces(); ++f) {
    const Vec3& s = m.face_centroid[f];
    const double v = h.values[f];
    out[0] += v * std::exp(s.x());
    out[1] += v * std::exp(s.y());
    out[2] += v * std::exp(s.z());
    out[3] += v * std::cos(2 * s.x() + s.y());
    out[4] += v * std::sin(3 * s.y() - s.z());
    out[5] += v * (s.x() * s.y() * s.z() + s.z() * s.z());
  }
  return out;
}

AuditReport metrization_experiment(const TwoCochain& h_star, const std::vector<int>& bands, double p,
                                   const MetrizationOptions& opts) {
  require(!bands.empty(), ErrorCode::kInvalidArgument, "need at least one band");
  for (int l : bands) require(l >= 1, ErrorCode::kDomain, "band index must be >= 1");
  const double star_norm = lp_norm(h_star, p);
  std::vector<MetrizationRow> rows;
  for (int l : bands) {
    const double amp = opts.equibounded ? 1.0 : std::pow(l, 2 * p - 2);
    const TwoCochain diff = sectoral_band(h_star.mesh, l, p) * amp;
    const TwoCochain hn = h_star + diff;
    MetrizationRow row;
    row.l = l;
    row.norm = lp_norm(hn, p);
    row.distance = slice_distance(hn, h_star, p, opts.distance).value;
    row.pairings = test_pairings(diff);
    for (double q : row.pairings) row.max_pairing = std::max(row.max_pairing, std::abs(q));
    rows.push_back(std::move(row));
  }
  AuditReport rep;
  rep.title = "metrization";
  double max_norm = 0.0;
  for (const auto& r : rows) max_norm = std::max(max_norm, r.norm);
  if (opts.equibounded) {
    bool decreasing = true;
    double worst_ld = 0.0;
    const double ld0 = rows.front().l * rows.front().distance;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (i > 0) decreasing = decreasing && rows[i].distance < rows[i - 1].distance;
      worst_ld = std::max(worst_ld, rows[i].l * rows[i].distance);
    }
    rep.at_most("max norm - (||h_star|| + 1)", max_norm - star_norm - 1.0, 1e-9, "equibounded");
    rep.expect("d strictly decreasing", decreasing);
    rep.at_most("max l d / (2 l_0 d_0)", ld0 > 0 ? worst_ld / (2 * ld0) : 0.0, 1.0);
    rep.at_most("last max pairing / first", rows.front().max_pairing > 0
                                                ? rows.back().max_pairing / rows.front().max_pairing
                                                : 0.0,
                1e-2, "weak-convergence proxy: 6 fixed smooth test densities");
  } else {
    rep.data["hypothesis_violated"] = max_norm > star_norm + 1.0 + 1e-9;
    rep.data["norm_growth"] = rows.back().norm / rows.front().norm;
  }
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : rows)
    table.push_back({{"l", r.l}, {"norm", r.norm}, {"distance", r.distance}, {"max_pairing", r.max_pairing},
                     {"pairings", r.pairings}});
  rep.data["rows"] = table;
  rep.data["pairing_proxy"] = test_pairing_names();
  rep.data["equibounded"] = opts.equibounded;
  rep.data["p"] = p;
  return rep;
}

AuditReport blowup_experiment(double p, const std::vector<double>& rho_grid, const BlowupOptions& opts) {
  require(p > 1.0 && p < 1.5, ErrorCode::kDomain, "blow-up experiment needs p in (1, 1.5)");
  require(!rho_grid.empty(), ErrorCode::kInvalidArgument, "empty rho grid");
  const MeshPtr mesh = build_icosphere(opts.level);
  const AnalyticField field = monopole(Vec3::Zero(), 1);
  const Vec3 c(0, 0, 1);
  const double hmax = mesh->max_edge_length();
  std::vector<double> lx, ly;
  nlohmann::json rows = nlohmann::json::array(), excluded = nlohmann::json::array();
  for (double rho : rho_grid) {
    require(rho > 0.0, ErrorCode::kDomain, "rho must be positive");
    const double r = 1.0 + rho;
    if (rho / r < opts.resolution * hmax || degenerate_sphere(field, c, r)) {
      excluded.push_back({{"rho", rho}, {"warning", "below mesh resolution; excluded from fit"}});
      continue;
    }
    const TwoCochain h = restrict_to_sphere(field, c, r, mesh);
    const double cap_angle = opts.cap * rho / r;
    double cap = 0.0;
    for (int f = 0; f < mesh->num_faces(); ++f) {
      const double ang = std::acos(std::clamp(-mesh->face_centroid[f].z(), -1.0, 1.0));
      if (ang < cap_angle) cap += std::pow(std::abs(h.density(f)), p) * mesh->face_area[f];
    }
    const double norm = lp_norm(h, p);
    lx.push_back(std::log(rho));
    ly.push_back(std::log(cap));
    rows.push_back({{"rho", rho}, {"cap_energy", cap}, {"slice_norm", norm}});
  }
  AuditReport rep;
  rep.title = "blowup";
  const int n = static_cast<int>(lx.size());
  rep.expect("at least 4 radii in the fit", n >= 4);
  // log E = a + s log(rho) + b rho; the rho column absorbs the curvature correction
  double slope = std::nan(""), plain = std::nan(""), r2 = std::nan("");
  if (n >= 4) {
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      A(i, 0) = lx[i];
      A(i, 1) = std::exp(lx[i]);
      A(i, 2) = 1.0;
      y[i] = ly[i];
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    slope = c[0];
    const Eigen::VectorXd res = y - A * c;
    const double ybar = y.mean();
    r2 = 1.0 - res.squaredNorm() / (y.array() - ybar).matrix().squaredNorm();
    const Eigen::MatrixXd A2 = A(Eigen::all, std::vector<int>{0, 2});
    plain = A2.colPivHouseholderQr().solve(y)[0];
  }
  const double expected = 2.0 - 2.0 * p;
  rep.at_most("|slope - (2 - 2p)|", n >= 4 ? std::abs(slope - expected) : kInf, opts.slope_tol);
  rep.data = {{"p", p},         {"slope", slope},       {"plain_slope", plain}, {"expected", expected},
              {"r2", r2},       {"rows", rows},         {"excluded", excluded}, {"level", opts.level},
              {"cap", opts.cap}};
  return rep;
}

AuditReport closure_replay(int n_members, int n_spheres, std::uint64_t seed, int level, double tol) {
  require(n_members >= 1, ErrorCode::kInvalidArgument, "need at least one member");
  const std::vector<PointCharge> limit{{Vec3(0.1, 0.0, 0.05), 1}, {Vec3(-0.2, 0.15, 0.0), -1},
                                       {Vec3(0.0, -0.1, 0.2), 2}};
  const std::vector<Vec3> drift{Vec3(0.3, 0.1, 0.0), Vec3(-0.1, 0.2, 0.2), Vec3(0.0, -0.2, 0.3)};
  const std::vector<Vec3> probes{Vec3(0.7, 0.0, 0.0), Vec3(0.0, 0.6, -0.3), Vec3(-0.5, -0.5, 0.2)};
  const AnalyticField lim(limit);
  AuditReport rep;
  rep.title = "closure";
  double worst = 0.0, prev_gap = kInf;
  bool converging = true;
  nlohmann::json rows = nlohmann::json::array();
  for (int n = 1; n <= n_members; ++n) {
    std::vector<PointCharge> q = limit;
    for (size_t i = 0; i < q.size(); ++i) q[i].center += drift[i] / (2.0 * n);
    const AnalyticField member(q);
    const AuditReport a = integer_flux_audit(member, n_spheres, seed + n, level, tol);
    worst = std::max(worst, a.checks.front().value);
    double gap = 0.0;
    for (const auto& x : probes) gap = std::max(gap, (member.value(x) - lim.value(x)).norm());
    converging = converging && gap < prev_gap;
    prev_gap = gap;
    rows.push_back({{"n", n}, {"max_integer_deviation", a.checks.front().value}, {"probe_gap", gap}});
  }
  const AuditReport l = integer_flux_audit(lim, n_spheres, seed, level, tol);
  rep.at_most("members: max distance of slice degree to an integer", worst, tol);
  rep.at_most("limit: max distance of slice degree to an integer", l.checks.front().value, tol);
  rep.expect("fields converge at probe points", converging);
  rep.data = {{"members", rows}, {"limit", to_json(lim)}};
  return rep;
}

nlohmann::json to_json(const Ball& b) { return {{"x", {b.x.x(), b.x.y(), b.x.z()}}, {"r", b.r}}; }

nlohmann::json to_json(const SegmentPath& path) {
  nlohmann::json balls = nlohmann::json::array(), segs = nlohmann::json::array();
  for (const auto& b : path.balls) balls.push_back(to_json(b));
  for (const auto& s : path.segments) segs.push_back({{"h", s.h_ok}, {"gap", s.gap}});
  return {{"shape", path.shape}, {"balls", balls}, {"segments", segs}};
}

}  // namespace wb

// Acceptance run: one PASS/FAIL line per criterion. Reference values are derived
// here from closed forms; the library only supplies the measurements.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wbundle/energy_reg.hpp"
#include "wbundle/experiments.hpp"
#include "wbundle/field3.hpp"
#include "wbundle/flow_solver.hpp"
#include "wbundle/plateau.hpp"
#include "wbundle/poisson.hpp"
#include "wbundle/slice_analysis.hpp"
#include "wbundle/slice_metric.hpp"

using namespace wb;

namespace {

constexpr double kP = 1.25;
constexpr int kLevel = 3;
constexpr std::uint64_t kSeed = 7;
const double kFourPi = 4.0 * std::numbers::pi;

// ||Phi_1||_p^p on the unit ball: (4 pi)^{-p} int_0^1 4 pi r^2 r^{-2p} dr
double monopole_energy_oracle(double p) { return std::pow(kFourPi, 1.0 - p) / (3.0 - 2.0 * p); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [violated]");
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void c1(Outcome& o) {
  const MeshPtr mesh = build_icosphere(4);
  const TwoCochain band = l1_band(mesh);
  // premise of the oracle: unit L2 norm, so the minimal flow is 1/sqrt(l(l+1))
  double l2 = 0.0;
  for (int f = 0; f < mesh->num_faces(); ++f) l2 += std::pow(band.density(f), 2) * mesh->face_area[f];
  const double expected = 1.0 / std::sqrt(2.0);
  const double v = convex_flow_min(band, 2.0, 1e-9).value;
  const double poisson = lp_norm(solve_poisson(band).flow, 2.0);
  o.check(std::abs(std::sqrt(l2) - 1.0) < 1e-9, "band L2 norm " + fmt(std::sqrt(l2)));
  o.check(std::abs(v - expected) / expected <= 0.02, "flow " + fmt(v) + " vs 0.7071");
  o.check(std::abs(v - poisson) / poisson <= 1e-6, "Poisson rel diff " + fmt(std::abs(v - poisson) / poisson));
}

void c2(Outcome& o) {
  const MeshPtr mesh = build_icosphere(kLevel);
  std::mt19937_64 rng(kSeed);
  double self = 0.0, sym = 0.0, tri = 0.0;
  for (int t = 0; t < 50; ++t) {
    const TwoCochain h[3] = {random_slice(mesh, rng, 0), random_slice(mesh, rng, 1), random_slice(mesh, rng, 1)};
    auto d = [&](int i, int j) { return slice_distance(h[i], h[j], kP).value; };
    const double d01 = d(0, 1), d12 = d(1, 2), d02 = d(0, 2);
    self = std::max(self, d(2, 2));
    sym = std::max(sym, std::abs(d01 - d(1, 0)));
    tri = std::max(tri, d02 - d01 - d12);
  }
  o.check(self <= 1e-8, "max d(h,h) " + fmt(self));
  o.check(sym <= 1e-6, "symmetry gap " + fmt(sym));
  o.check(tri <= 1e-5, "triangle violation " + fmt(tri));
}

void c3(Outcome& o) {
  const auto rep = variant_ordering_experiment(20, kP, kLevel, kSeed);
  double worst = -1e300, worst_matched = -1e300;
  int matched = 0;
  for (const auto& row : rep.data["rows"]) {
    const double d = row["d"];
    for (const auto& v : row["d2"])
      if (!v.is_null()) worst = std::max(worst, v.get<double>() - d);
    if (!row["d3"].is_null() && !row["d2_matched"].is_null()) {
      ++matched;
      worst_matched = std::max(worst_matched, row["d2_matched"].get<double>() - row["d3"].get<double>());
    }
  }
  o.check(rep.data["rows"].size() == 20, "20 pairs");
  o.check(worst <= 1e-5, "max d2 - d " + fmt(worst));
  o.check(matched > 0 && worst_matched <= 1e-5, "max d2 - d3 " + fmt(worst_matched) + " over " +
                                                    std::to_string(matched) + " matched sets");
}

void c4(Outcome& o) {
  const double expected = monopole_energy_oracle(kP);
  const AnalyticField m = monopole(Vec3::Zero(), 1);
  const GridField g = rasterize(m, {96, 96, 96}, 2.0 / 95.0, Vec3(-1, -1, -1));
  const double grid = lp_energy(g, Ball{Vec3::Zero(), 1.0}, kP);
  const double exact = lp_energy(m, Ball{Vec3::Zero(), 1.0}, kP);
  o.check(std::abs(grid - expected) / expected <= 0.03, "grid " + fmt(grid) + " vs " + fmt(expected));
  o.check(std::abs(exact - expected) / expected <= 1e-10,
          "closed form rel err " + fmt(std::abs(exact - expected) / expected));
}

void c5(Outcome& o) {
  const auto radii = geometric_radii(0.3, 1.05, 16);
  o.check(radii.size() == 16 && std::abs(radii[1] / radii[0] - 1.05) < 1e-12, "16-point geometric grid");
  const auto cen = monotonicity_audit(monopole(Vec3::Zero(), 1), Vec3::Zero(), radii, kP);
  double worst = 0.0;
  for (const auto& r : cen.data["rows"]) worst = std::max(worst, std::abs(r["residual"].get<double>()));
  o.check(worst <= 1e-6, "centered |residual| " + fmt(worst));

  const auto off = monotonicity_audit(monopole(Vec3(0.1, 0.05, 0.0), 1), Vec3::Zero(), radii, kP);
  double worst_rel = 0.0;
  for (const auto& r : off.data["rows"]) {
    const double lhs = r["lhs"], rhs = r["rhs"];
    if (std::abs(lhs - rhs) > 1e-6) worst_rel = std::max(worst_rel, std::abs(lhs - rhs) / std::abs(rhs));
  }
  o.check(worst_rel <= 0.05, "off-center relative residual " + fmt(worst_rel));

  std::vector<double> rs;
  for (int i = 0; i < 16; ++i) rs.push_back(0.2 * std::pow(0.9 / 0.2, i / 15.0));
  const auto prof = rescaled_energy_profile(monopole(Vec3::Zero(), 1), Vec3::Zero(), rs, kP);
  double mean = 0.0, var = 0.0;
  for (double v : prof.rescaled) mean += v / prof.rescaled.size();
  for (double v : prof.rescaled) var += (v - mean) * (v - mean) / prof.rescaled.size();
  o.check(std::sqrt(var) / mean < 0.01, "std/mean " + fmt(std::sqrt(var) / mean));
  o.check(std::abs(mean - monopole_energy_oracle(kP)) / monopole_energy_oracle(kP) < 1e-6,
          "mean rescaled energy " + fmt(mean));
}

void c6(Outcome& o) {
  HolderOptions opts;
  opts.level = kLevel;
  const auto rep = holder_audit(monopole(Vec3::Zero(), 1), 100, kP, kSeed, opts);
  const double fnorm = std::pow(monopole_energy_oracle(kP), 1.0 / kP);
  double worst = 0.0, worst_seg = 0.0;
  int segs = 0, seg_bad = 0;
  for (const auto& row : rep.data["rows"]) {
    const auto& a = row["B"];
    const auto& b = row["B2"];
    const auto ac = a["x"].get<std::vector<double>>(), bc = b["x"].get<std::vector<double>>();
    double D2 = std::pow(a["r"].get<double>() - b["r"].get<double>(), 2);
    for (int i = 0; i < 3; ++i) D2 += std::pow(ac[i] - bc[i], 2);
    const double D = std::sqrt(D2);
    if (D > 0) worst = std::max(worst, row["distance"].get<double>() / (16 * fnorm * std::pow(D, 1 - 1 / kP)));
    for (const auto& s : row["segments"]) {
      ++segs;
      const double r = s["ratio"];
      worst_seg = std::max(worst_seg, r);
      if (r > 1.0) ++seg_bad;
    }
  }
  o.check(rep.data["rows"].size() == 100, "100 pairs");
  o.check(worst <= 1.0, "max global ratio " + fmt(worst));
  o.check(worst_seg <= 1.0, "max segment ratio " + fmt(worst_seg) + " (" + std::to_string(seg_bad) + "/" +
                                std::to_string(segs) + " segments above 1)");
}

void c7(Outcome& o) {
  std::vector<double> rho;
  for (int i = 0; i < 8; ++i) rho.push_back(0.01 * std::pow(10.0, i / 7.0));
  for (double p : {1.25, 1.4}) {
    const auto rep = blowup_experiment(p, rho);
    const double slope = rep.data["slope"];
    const double expected = 2.0 - 2.0 * p;
    o.check(rep.data["rows"].size() >= 4, "p=" + fmt(p) + " fit points " + std::to_string(rep.data["rows"].size()));
    o.check(std::abs(slope - expected) <= 0.15, "p=" + fmt(p) + " slope " + fmt(slope) + " vs " + fmt(expected));
  }
}

void c8(Outcome& o) {
  const MeshPtr mesh = build_icosphere(5);
  const TwoCochain hs = restrict_to_sphere(monopole(Vec3(0.1, 0, 0.2), 1), Vec3::Zero(), 0.8, mesh);
  MetrizationOptions opts;
  opts.distance.restarts = 1;
  const auto rep = metrization_experiment(hs, {2, 4, 8, 16, 32}, kP, opts);
  const auto& rows = rep.data["rows"];
  bool decreasing = true;
  double ld_max = 0.0;
  const double ld0 = rows[0]["l"].get<double>() * rows[0]["distance"].get<double>();
  for (size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) decreasing = decreasing && rows[i]["distance"].get<double>() < rows[i - 1]["distance"].get<double>();
    ld_max = std::max(ld_max, rows[i]["l"].get<double>() * rows[i]["distance"].get<double>());
  }
  const double pair_ratio = rows.back()["max_pairing"].get<double>() / rows.front()["max_pairing"].get<double>();
  o.check(decreasing, "d strictly decreasing");
  o.check(ld_max <= 2 * ld0, "max l d / l0 d0 " + fmt(ld_max / ld0));
  o.check(pair_ratio <= 1e-2, "pairing proxy last/first " + fmt(pair_ratio));
}

void c9(Outcome& o) {
  const AnalyticField f = three_charge_field();
  const MeshPtr mesh = build_icosphere(kLevel);
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(-0.5, 0.5), unit(0.0, 1.0);
  double worst_int = 0.0, worst_gauss = 0.0, worst_half = 0.0;
  int n = 0;
  while (n < 200) {
    const Vec3 x(u(rng), u(rng), u(rng));
    if (x.norm() >= 0.5) continue;
    const double r = 0.05 + (0.99 - x.norm() - 0.05) * unit(rng);
    double enclosed = 0.0, margin = 1e300;
    for (const auto& c : f.charges()) {
      const double dist = (c.center - x).norm();
      margin = std::min(margin, std::abs(dist - r));
      if (dist < r) enclosed += c.k;
    }
    if (margin < 0.02) continue;  // keep the charges off the quadrature sphere
    ++n;
    const double q = flux(f, x, r, mesh);
    worst_int = std::max(worst_int, std::abs(q - std::round(q)));
    worst_gauss = std::max(worst_gauss, std::abs(q - enclosed));
    const double qh = flux(f.scaled(0.5), x, r, mesh);
    worst_half = std::max(worst_half, std::abs(qh - std::round(qh)));
  }
  o.check(worst_int <= 1e-3, "max deviation from integers " + fmt(worst_int));
  o.check(worst_gauss <= 1e-3, "max deviation from enclosed charge " + fmt(worst_gauss));
  o.check(worst_half > 0.4, "half-scaled max deviation " + fmt(worst_half));
  o.check(!integer_flux_audit(f.scaled(0.5), 200, kSeed, kLevel).passed(), "half-scaled field flagged by audit");
}

void c10(Outcome& o) {
  const auto rep = bilipschitz_experiment(10, kP, kLevel, kSeed, 1.5);
  const double L = rep.data["L"], Linv = rep.data["L_inv"];
  const double C = L * std::pow(Linv, 2.0 / kP);
  // radial projection onto the 1.5:1 ellipsoid and back stretches by at most 1.5 each way
  o.check(L >= 1.0 && L <= 1.5 + 1e-9 && Linv >= 1.0 && Linv <= 1.5 + 1e-9, "L " + fmt(L) + ", L_inv " + fmt(Linv));
  double lo = 1e300, hi = 0.0;
  for (const auto& r : rep.data["rows"]) {
    const double ratio = r["d_psi"].get<double>() / r["d"].get<double>();
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  o.check(rep.data["rows"].size() == 10, "10 pairs");
  o.check(lo >= 1.0 / C && hi <= C, "ratios in [" + fmt(lo) + ", " + fmt(hi) + "], C = " + fmt(C));
}

void c11(Outcome& o) {
  const double expected = monopole_energy_oracle(kP);
  o.check(std::abs(expected - 1.062) < 5e-4, "reference energy " + fmt(expected));
  const TwoCochain phi = constant_datum(build_icosphere(kLevel), 1);
  const PlateauResult r = outer_search(phi, kP, 48);
  const bool single = r.charges.sites.size() == 1 && r.charges.sites[0].charge == 1;
  o.check(single, "single +1 charge");
  if (single) o.check(r.charges.sites[0].position.norm() <= 0.1, "offset " + fmt(r.charges.sites[0].position.norm()));
  o.check(std::abs(r.solution.energy - expected) / expected <= 0.1, "energy " + fmt(r.solution.energy));
  o.check(r.solution.gap <= 1e-5, "inner gap " + fmt(r.solution.gap));
  o.check(r.solution.boundary_residual <= 1e-12, "boundary residual " + fmt(r.solution.boundary_residual));

  // divergence and cell energy recomputed from the face fluxes
  const GridField& g = r.solution.field;
  const int n = g.dims()[0];
  const double h = g.spacing();
  std::set<std::array<int, 3>> sites;
  for (const auto& s : r.charges.sites) sites.insert(s.cell);
  double div_res = 0.0, cells = 0.0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (g.cell_center(i, j, k).norm() >= 1.0) continue;
        const double div = g.face(0, i + 1, j, k) - g.face(0, i, j, k) + g.face(1, i, j + 1, k) - g.face(1, i, j, k) +
                           g.face(2, i, j, k + 1) - g.face(2, i, j, k);
        const double q = sites.count({i, j, k}) ? 1.0 : 0.0;
        div_res = std::max(div_res, std::abs(div - q));
        const Vec3 v((g.face(0, i, j, k) + g.face(0, i + 1, j, k)) / 2, (g.face(1, i, j, k) + g.face(1, i, j + 1, k)) / 2,
                     (g.face(2, i, j, k) + g.face(2, i, j, k + 1)) / 2);
        cells += h * h * h * std::pow(v.norm() / (h * h), kP);
      }
  o.check(div_res <= 1e-12, "divergence residual " + fmt(div_res));
  o.check(std::abs(cells - r.solution.cells) <= 1e-8 * cells, "cell energy recomputed " + fmt(cells));
}

void c12(Outcome& o) {
  const auto rep = trace_preservation_experiment({2, 4, 8}, kP, 32);
  bool members = true;
  for (const auto& row : rep.data["rows"]) members = members && row["trace"]["member"].get<bool>();
  o.check(rep.data["rows"].size() == 3 && members, "members n = 2, 4, 8");
  o.check(rep.data["limit_exact"]["member"].get<bool>() && rep.data["limit_grid"]["trace"]["member"].get<bool>(),
          "limit field");
  o.check(!rep.data["mismatched"]["member"].get<bool>() && !rep.data["mismatched_degree"]["member"].get<bool>(),
          "mismatched data rejected");
}

void c13(Outcome& o) {
  const double C = monopole_energy_oracle(kP);
  const auto rep = eps_regularity_experiment(monopole(Vec3::Zero(), 1), kP);
  const double E1 = rep.data["E1"];
  o.check(std::abs(E1 - C) / C <= 0.02, "E1 " + fmt(E1) + " vs Jensen bound " + fmt(C));
  const auto& pts = rep.data["scan"]["singular_points"];
  bool at_charge = pts.size() == 1;
  if (at_charge)
    for (double c : pts[0].get<std::vector<double>>()) at_charge = at_charge && std::abs(c) < 1e-12;
  o.check(at_charge, "flagged points " + std::to_string(pts.size()) + ", at the charge");
}

void c14(Outcome& o) {
  const double p = 1.25, a = 3.0 - 2.0 * p;
  const int N = 100;
  // a_i = c i^{-1/a}, sum a_i = 1  =>  a_i^a = c^a / i
  double s = 0.0, H = 0.0;
  for (int i = 1; i <= N; ++i) {
    s += std::pow(i, -1.0 / a);
    H += 1.0 / i;
  }
  const double c = 1.0 / s, ca = std::pow(c, a);
  const auto rep = dipole_chain_experiment(p, N);
  const auto partial = rep.data["partial_sums"].get<std::vector<double>>();
  o.check(std::abs(rep.data["c"].get<double>() - c) <= 1e-12 * c, "c = " + fmt(c));
  o.check(std::abs(partial.back() - ca * H) / (ca * H) <= 0.05, "sum " + fmt(partial.back()) + " vs " + fmt(ca * H));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int m = 1; m <= N; ++m) {
    const double x = std::log(m), y = partial[m - 1];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (N * sxy - sx * sy) / (N * sxx - sx * sx);
  o.check(std::abs(slope - ca) / ca <= 0.10, "log slope " + fmt(slope) + " vs " + fmt(ca));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"p=2 flow oracle", c1},      {"metric axioms", c2},        {"variant ordering", c3},
      {"monopole energy", c4},      {"monotonicity", c5},         {"Hoelder audit", c6},
      {"blow-up exponent", c7},     {"metrization", c8},          {"flux integrality", c9},
      {"bilipschitz equivalence", c10}, {"plateau solve", c11},   {"trace preservation", c12},
      {"eps-regularity mechanism", c13}, {"counterexample chain", c14}};
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("criterion %2zu %-26s %s (%.1f s): %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                secs, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

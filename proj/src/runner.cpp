#include "wbundle/runner.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <algorithm>
#include <atomic>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "wbundle/energy_reg.hpp"
#include "wbundle/error.hpp"
#include "wbundle/experiments.hpp"
#include "wbundle/field3.hpp"
#include "wbundle/plateau.hpp"
#include "wbundle/report.hpp"
#include "wbundle/slice_analysis.hpp"
#include "wbundle/slice_metric.hpp"
#include "wbundle/sphere_mesh.hpp"

namespace wb {

using json = nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"mesh",  "dist",    "flux",    "slice",   "holder",
                                              "energy", "monotonicity", "blowup", "metrize", "plateau",
                                              "trace", "audit-all"};
  return names;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::kIo, "cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

class Ctx {
 public:
  explicit Ctx(json cfg) : cfg_(std::move(cfg)) {
    require(cfg_.is_object(), ErrorCode::kInvalidArgument, "configuration must be a JSON object");
  }

  template <class T>
  T get(const std::string& key, T def) {
    if (!cfg_.contains(key) || cfg_[key].is_null()) cfg_[key] = def;
    try {
      return cfg_[key].get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::kInvalidArgument, "bad value for '" + key + "'");
    }
  }
  template <class T>
  T need(const std::string& key) {
    require(cfg_.contains(key), ErrorCode::kInvalidArgument, "missing '" + key + "'");
    try {
      return cfg_[key].get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::kInvalidArgument, "bad value for '" + key + "'");
    }
  }
  json raw(const std::string& key, json def) {
    if (!cfg_.contains(key) || cfg_[key].is_null()) cfg_[key] = def;
    return cfg_[key];
  }
  bool has(const std::string& key) const { return cfg_.contains(key) && !cfg_[key].is_null(); }

  double p_distance(double def = 1.25) {
    const double p = get("p", def);
    require(p > 1.0 && p < 2.0, ErrorCode::kInvalidArgument, "p must lie in (1, 2) for distance pipelines");
    return p;
  }
  double p_energy(double def = 1.25) {
    const double p = get("p", def);
    require(p > 1.0 && p <= 1.5, ErrorCode::kInvalidArgument, "p must lie in (1, 1.5] for 3D energy pipelines");
    return p;
  }
  double positive(const std::string& key, double def) {
    const double v = get(key, def);
    require(v > 0.0, ErrorCode::kInvalidArgument, "'" + key + "' must be positive");
    return v;
  }
  int level(int def) {
    const int l = get("level", def);
    require(l >= 0 && l <= kMaxIcosphereLevel, ErrorCode::kInvalidArgument, "mesh level out of range");
    return l;
  }

  std::string input(const std::string& path) {
    std::string bytes = read_file(path);
    inputs_.emplace_back(path, fnv1a(bytes));
    return bytes;
  }

  MeshPtr mesh(int def_level) {
    if (has("mesh")) {
      std::istringstream is(input(need<std::string>("mesh")));
      return read_off(is);
    }
    return build_icosphere(level(def_level));
  }

  std::shared_ptr<VectorField> field(const std::string& def) {
    const json spec = raw("field", def);
    if (spec.is_object()) return std::make_shared<AnalyticField>(analytic_field_from_json(spec));
    require(spec.is_string(), ErrorCode::kInvalidArgument, "field must be a name, a path or an object");
    const std::string s = spec.get<std::string>();
    if (s == "monopole") return std::make_shared<AnalyticField>(monopole(Vec3::Zero(), 1));
    if (s == "three-charge") return std::make_shared<AnalyticField>(three_charge_field());
    if (s == "zero") return std::make_shared<AnalyticField>();
    if (ends_with(s, ".json")) {
      const std::string text = input(s);
      try {
        return std::make_shared<AnalyticField>(analytic_field_from_json(json::parse(text)));
      } catch (const json::parse_error& e) {
        fail(ErrorCode::kIo, std::string("bad field file: ") + e.what());
      }
    }
    std::istringstream is(input(s));
    return std::make_shared<GridField>(read_grid(is));
  }

  TwoCochain cochain(const std::string& key, MeshPtr mesh) {
    std::istringstream is(input(need<std::string>(key)));
    return read_cochain_csv(is, mesh);
  }

  TwoCochain datum(MeshPtr mesh, const VectorField* self = nullptr) {
    const std::string kind = get<std::string>("phi", "constant");
    if (kind == "constant") return constant_datum(mesh, get("k", 1));
    if (kind == "two-lobe") return two_lobe_datum(mesh, get("k", 2), get("kappa", 6.0));
    if (kind == "self") {
      require(self != nullptr, ErrorCode::kInvalidArgument, "'self' datum needs a field");
      return restrict_to_sphere(*self, Vec3::Zero(), 1.0, mesh);
    }
    std::istringstream is(input(kind));
    return read_cochain_csv(is, mesh);
  }

  Vec3 vec(const std::string& key, Vec3 def) {
    const auto v = get<std::vector<double>>(key, {def.x(), def.y(), def.z()});
    require(v.size() == 3, ErrorCode::kInvalidArgument, "'" + key + "' must have three entries");
    return Vec3(v[0], v[1], v[2]);
  }

  const json& config() const { return cfg_; }
  std::string input_hash() const {
    std::uint64_t h = fnv1a(cfg_.dump());
    for (const auto& [path, fh] : inputs_) h = fnv1a(path + ":" + std::to_string(fh), h);
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
  }

 private:
  json cfg_;
  std::vector<std::pair<std::string, std::uint64_t>> inputs_;
};

void maybe_plot(Ctx& ctx, const std::vector<std::pair<double, double>>& table, const json& meta) {
  if (!ctx.has("plot")) return;
  emit_plot_data(table, ctx.need<std::string>("plot"), meta);
}

void write_text(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::kIo, "cannot write " + path);
  body(os);
  require(static_cast<bool>(os), ErrorCode::kIo, "write failed: " + path);
}

AuditReport cmd_mesh(Ctx& ctx) {
  const MeshPtr m = ctx.mesh(3);
  AuditReport rep;
  rep.title = "mesh";
  const int euler = m->num_vertices() - m->num_edges() + m->num_faces();
  rep.expect("Euler characteristic 2", euler == 2);
  rep.at_most("|total area - 4 pi|", std::abs(m->total_area() - 4.0 * M_PI), 1e-9);
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << m->content_hash();
  rep.data = {{"level", m->level},         {"vertices", m->num_vertices()}, {"edges", m->num_edges()},
              {"faces", m->num_faces()},   {"total_area", m->total_area()}, {"max_edge_length", m->max_edge_length()},
              {"content_hash", hash.str()}};
  if (ctx.has("write")) write_text(ctx.need<std::string>("write"), [&](std::ostream& os) { write_off(os, *m); });
  return rep;
}

DistanceOptions distance_options(Ctx& ctx, int def_restarts = 4) {
  DistanceOptions o;
  o.tol = ctx.positive("tol", 1e-6);
  o.restarts = ctx.get("restarts", def_restarts);
  o.seed = ctx.get<std::uint64_t>("seed", 0);
  o.max_moves = ctx.get("max_moves", 200);
  require(o.restarts >= 1 && o.max_moves >= 0, ErrorCode::kInvalidArgument, "bad search budget");
  return o;
}

AuditReport cmd_dist(Ctx& ctx) {
  const double p = ctx.p_distance();
  const MeshPtr m = ctx.mesh(3);
  const TwoCochain h1 = ctx.cochain("h1", m), h2 = ctx.cochain("h2", m);
  const DistanceOptions o = distance_options(ctx);
  const DistanceResult r = slice_distance(h1, h2, p, o);
  AuditReport rep;
  rep.title = "slice distance";
  rep.at_most("relative duality gap", r.gap, o.tol);
  rep.at_most("feasibility", r.feasibility, 1e-8);
  rep.data = to_json(r);
  return rep;
}

AuditReport cmd_flux(Ctx& ctx) {
  auto f = ctx.field("three-charge");
  const double scale = ctx.get("scale", 1.0);
  const int n = ctx.get("spheres", 200);
  const int level = ctx.level(3);
  const auto seed = ctx.get<std::uint64_t>("seed", 7);
  const double tol = ctx.positive("tol", 1e-3);
  if (scale != 1.0) {
    const auto* a = dynamic_cast<const AnalyticField*>(f.get());
    require(a != nullptr, ErrorCode::kInvalidArgument, "scale applies to analytic fields only");
    return integer_flux_audit(a->scaled(scale), n, seed, level, tol);
  }
  return integer_flux_audit(*f, n, seed, level, tol);
}

AuditReport cmd_slice(Ctx& ctx) {
  auto f = ctx.field("monopole");
  const MeshPtr m = ctx.mesh(3);
  const Vec3 x = ctx.vec("center", Vec3::Zero());
  const double r = ctx.positive("radius", 0.5);
  const double p = ctx.p_distance();
  const TwoCochain h = restrict_to_sphere(*f, x, r, m);
  AuditReport rep;
  rep.title = "slice";
  rep.data = {{"degree", h.degree()}, {"lp_norm", lp_norm(h, p)}, {"sidecar", cochain_sidecar(h, p)}};
  if (ctx.has("write")) write_text(ctx.need<std::string>("write"), [&](std::ostream& os) { write_cochain_csv(os, h); });
  return rep;
}

AuditReport cmd_holder(Ctx& ctx) {
  auto f = ctx.field("monopole");
  const double p = ctx.p_distance();
  HolderOptions o;
  o.level = ctx.level(3);
  o.r_min = ctx.positive("r_min", 0.05);
  o.tol = ctx.positive("tol", 1e-6);
  o.distance.restarts = ctx.get("restarts", 4);
  return holder_audit(*f, ctx.get("pairs", 100), p, ctx.get<std::uint64_t>("seed", 7), o);
}

AuditReport cmd_energy(Ctx& ctx) {
  auto f = ctx.field("monopole");
  const double p = ctx.p_energy();
  AuditReport rep;
  rep.title = "energy";
  double e = 0.0;
  if (ctx.has("box")) {
    const json b = ctx.raw("box", json::object());
    try {
      const auto lo = b.at("lo").get<std::vector<double>>(), hi = b.at("hi").get<std::vector<double>>();
      require(lo.size() == 3 && hi.size() == 3, ErrorCode::kInvalidArgument, "box corners need three entries");
      e = lp_energy(*f, Box{Vec3(lo[0], lo[1], lo[2]), Vec3(hi[0], hi[1], hi[2])}, p);
    } catch (const json::exception&) {
      fail(ErrorCode::kInvalidArgument, "box needs 'lo' and 'hi'");
    }
  } else {
    e = lp_energy(*f, Ball{ctx.vec("center", Vec3::Zero()), ctx.positive("radius", 1.0)}, p);
  }
  rep.data["energy"] = std::isfinite(e) ? json(e) : json("inf");
  if (ctx.has("expected")) {
    const double expected = ctx.need<double>("expected");
    rep.at_most("relative error against expected", std::abs(e - expected) / std::abs(expected),
                ctx.positive("rel_tol", 0.03));
  }
  if (ctx.has("profile")) {
    const json pr = ctx.raw("profile", json::object());
    const auto radii = geometric_radii(pr.value("r0", 0.2), pr.value("ratio", 1.1), pr.value("n", 16));
    const auto c = pr.value("center", std::vector<double>{0, 0, 0});
    require(c.size() == 3, ErrorCode::kInvalidArgument, "profile center needs three entries");
    const EnergyProfile prof = rescaled_energy_profile(*f, Vec3(c[0], c[1], c[2]), radii, p);
    rep.data["profile"] = to_json(prof);
    if (ctx.has("csv")) write_text(ctx.need<std::string>("csv"), [&](std::ostream& os) { write_csv(os, prof); });
    std::vector<std::pair<double, double>> t;
    for (size_t i = 0; i < radii.size(); ++i) t.emplace_back(radii[i], prof.rescaled[i]);
    maybe_plot(ctx, t, {{"x", "r"}, {"y", "E_rescaled"}, {"p", p}});
  }
  return rep;
}

AuditReport cmd_monotonicity(Ctx& ctx) {
  auto f = ctx.field("monopole");
  const double p = ctx.p_energy();
  const auto radii = geometric_radii(ctx.positive("r0", 0.3), ctx.positive("ratio", 1.05), ctx.get("n", 16));
  AuditReport rep = monotonicity_audit(*f, ctx.vec("center", Vec3::Zero()), radii, p, ctx.positive("rel_tol", 0.05),
                                       ctx.positive("abs_tol", 1e-6));
  std::vector<std::pair<double, double>> t;
  const auto& prof = rep.data["profile"];
  for (size_t i = 0; i < radii.size(); ++i) t.emplace_back(radii[i], prof["rescaled"][i].get<double>());
  maybe_plot(ctx, t, {{"x", "r"}, {"y", "E_rescaled"}, {"p", p}});
  return rep;
}

std::vector<double> geometric_between(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(a * std::pow(b / a, n > 1 ? static_cast<double>(i) / (n - 1) : 0.0));
  return out;
}

AuditReport cmd_blowup(Ctx& ctx) {
  const double p = ctx.p_energy();
  BlowupOptions o;
  o.level = ctx.level(8);
  o.cap = ctx.positive("cap", 3.0);
  o.resolution = ctx.positive("resolution", 3.0);
  o.slope_tol = ctx.positive("slope_tol", 0.15);
  const auto rho = ctx.get<std::vector<double>>("rho", geometric_between(0.01, 0.1, 8));
  AuditReport rep = blowup_experiment(p, rho, o);
  std::vector<std::pair<double, double>> t;
  for (const auto& row : rep.data["rows"])
    t.emplace_back(std::log(row["rho"].get<double>()), std::log(row["cap_energy"].get<double>()));
  maybe_plot(ctx, t, {{"x", "log rho"}, {"y", "log cap energy"}, {"p", p}});
  return rep;
}

AuditReport cmd_metrize(Ctx& ctx) {
  const double p = ctx.p_distance();
  const MeshPtr m = ctx.mesh(5);
  const TwoCochain hs = restrict_to_sphere(monopole(ctx.vec("charge", Vec3(0.1, 0.0, 0.2)), 1), Vec3::Zero(), 0.8, m);
  MetrizationOptions o;
  o.equibounded = ctx.get("equibounded", true);
  o.distance = distance_options(ctx, 1);
  return metrization_experiment(hs, ctx.get<std::vector<int>>("bands", {2, 4, 8, 16, 32}), p, o);
}

AuditReport cmd_plateau(Ctx& ctx, int threads) {
  const double p = ctx.p_energy();
  const MeshPtr m = ctx.mesh(3);
  const TwoCochain phi = ctx.datum(m);
  const int n = ctx.get("grid", 24);
  OuterOptions o;
  o.levels = ctx.get<std::vector<int>>("levels", {});
  o.restarts = ctx.get("restarts", 4);
  o.seed = ctx.get<std::uint64_t>("seed", 1);
  o.max_moves = ctx.get("max_moves", 40);
  o.inner.tol = ctx.positive("tol", 1e-5);
  o.threads = threads;
  const PlateauResult r = outer_search(phi, p, n, o);
  AuditReport rep;
  rep.title = "plateau";
  rep.at_most("inner relative gap", r.solution.gap, o.inner.tol);
  rep.at_most("divergence residual", r.solution.divergence_residual, 1e-12);
  rep.at_most("boundary residual", r.solution.boundary_residual, 1e-12);
  rep.expect("boundary trace membership", r.trace_table.value("member", false));
  rep.data = to_json(r);
  if (ctx.has("write")) write_grid(ctx.need<std::string>("write"), r.solution.field);
  return rep;
}

AuditReport cmd_trace(Ctx& ctx) {
  auto f = ctx.field("monopole");
  const double p = ctx.p_distance();
  const MeshPtr m = ctx.mesh(3);
  const TwoCochain phi = ctx.datum(m, f.get());
  TraceOptions o;
  o.tol = ctx.positive("tol", 0.1);
  o.distance.restarts = ctx.get("restarts", 1);
  const TraceProfile t = ctx.has("rho") ? trace_profile(*f, phi, ctx.need<std::vector<double>>("rho"), p, o)
                                        : membership_check(*f, phi, p, o);
  AuditReport rep;
  rep.title = "boundary trace";
  if (ctx.has("expect_member")) rep.expect("verdict as expected", t.member == ctx.need<bool>("expect_member"));
  rep.data = to_json(t);
  std::vector<std::pair<double, double>> tab;
  for (size_t i = 0; i < t.rho.size(); ++i)
    if (i < t.distance.size() && std::isfinite(t.distance[i])) tab.emplace_back(t.rho[i], t.distance[i]);
  maybe_plot(ctx, tab, {{"x", "rho"}, {"y", "d"}, {"p", p}});
  return rep;
}

// acceptance criteria 1..14 at their stated settings; `level`, `p` and `seed` feed
// the criteria that name a mesh level, the base exponent and a sample seed
std::map<int, std::function<AuditReport()>> criteria(int level, double p, std::uint64_t seed) {
  std::map<int, std::function<AuditReport()>> c;
  c[1] = [] { return flow_oracle_experiment(4); };
  c[2] = [=] { return metric_axioms_experiment(50, p, level, seed); };
  c[3] = [=] { return variant_ordering_experiment(20, p, level, seed); };
  c[4] = [=] {
    const double expected = std::pow(4.0 * M_PI, 1.0 - p) / (3.0 - 2.0 * p);
    const AnalyticField m = monopole(Vec3::Zero(), 1);
    const double h = 2.0 / 95.0;  // the origin is a cell center
    const GridField g = rasterize(m, {96, 96, 96}, h, Vec3(-1, -1, -1));
    const double grid = lp_energy(g, Ball{Vec3::Zero(), 1.0}, p);
    const double exact = lp_energy(m, Ball{Vec3::Zero(), 1.0}, p);
    AuditReport rep;
    rep.title = "monopole energy";
    rep.at_most("grid relative error", std::abs(grid - expected) / expected, 0.03);
    rep.at_most("closed-form relative error", std::abs(exact - expected) / expected, 1e-10);
    rep.data = {{"expected", expected}, {"grid", grid}, {"closed_form", exact}};
    return rep;
  };
  c[5] = [=] {
    const auto radii = geometric_radii(0.3, 1.05, 16);
    const AuditReport centered = monotonicity_audit(monopole(Vec3::Zero(), 1), Vec3::Zero(), radii, p);
    const AuditReport off = monotonicity_audit(monopole(Vec3(0.1, 0.05, 0.0), 1), Vec3::Zero(), radii, p);
    const EnergyProfile prof =
        rescaled_energy_profile(monopole(Vec3::Zero(), 1), Vec3::Zero(), geometric_between(0.2, 0.9, 16), p);
    double mean = 0.0, var = 0.0;
    for (double v : prof.rescaled) mean += v / prof.rescaled.size();
    for (double v : prof.rescaled) var += (v - mean) * (v - mean) / prof.rescaled.size();
    AuditReport rep;
    rep.title = "monotonicity";
    rep.at_most("centered max |residual|", centered.data["max_abs_residual"].get<double>(), 1e-6);
    rep.at_most("off-center max relative residual", off.checks.at(0).value, 0.05);
    rep.at_most("rescaled energy std/mean", std::sqrt(var) / mean, 0.01);
    rep.data = {{"centered", to_json(centered)}, {"off_center", to_json(off)}, {"profile", to_json(prof)}};
    return rep;
  };
  c[6] = [=] {
    HolderOptions o;
    o.level = level;
    return holder_audit(monopole(Vec3::Zero(), 1), 100, p, seed, o);
  };
  c[7] = [] {
    AuditReport rep;
    rep.title = "blowup exponents";
    for (double q : {1.25, 1.4}) {
      const AuditReport r = blowup_experiment(q, geometric_between(0.01, 0.1, 8));
      rep.at_most("p = " + std::to_string(q).substr(0, 4) + " |slope - (2 - 2p)|", r.checks.back().value, 0.15);
      rep.data[std::to_string(q).substr(0, 4)] = to_json(r);
    }
    return rep;
  };
  c[8] = [=] {
    const MeshPtr m = build_icosphere(5);
    const TwoCochain hs = restrict_to_sphere(monopole(Vec3(0.1, 0.0, 0.2), 1), Vec3::Zero(), 0.8, m);
    MetrizationOptions o;
    o.distance.restarts = 1;
    return metrization_experiment(hs, {2, 4, 8, 16, 32}, p, o);
  };
  c[9] = [=] { return flux_integrality_experiment(200, level, seed); };
  c[10] = [=] { return bilipschitz_experiment(10, p, level, seed); };
  c[11] = [=] {
    const double expected = std::pow(4.0 * M_PI, 1.0 - p) / (3.0 - 2.0 * p);
    const TwoCochain phi = constant_datum(build_icosphere(3), 1);
    const PlateauResult r = outer_search(phi, p, 48);
    AuditReport rep;
    rep.title = "plateau solve";
    const bool single = r.charges.sites.size() == 1 && r.charges.sites[0].charge == 1;
    rep.expect("single +1 charge", single);
    rep.at_most("charge distance to the center", single ? r.charges.sites[0].position.norm() : 1e300, 0.1);
    rep.at_most("relative energy error", std::abs(r.solution.energy - expected) / expected, 0.1);
    rep.at_most("inner relative gap", r.solution.gap, 1e-5);
    rep.at_most("divergence residual", r.solution.divergence_residual, 1e-12);
    rep.at_most("boundary residual", r.solution.boundary_residual, 1e-12);
    rep.data = to_json(r);
    rep.data["expected_energy"] = expected;
    return rep;
  };
  c[12] = [=] { return trace_preservation_experiment({2, 4, 8}, p, 32); };
  c[13] = [=] { return eps_regularity_experiment(monopole(Vec3::Zero(), 1), p); };
  c[14] = [=] { return dipole_chain_experiment(p, 100); };
  return c;
}

AuditReport cmd_audit_all(Ctx& ctx, int threads) {
  const int level = ctx.level(3);
  const double p = ctx.p_energy();
  const auto seed = ctx.get<std::uint64_t>("seed", 7);
  auto only = ctx.get<std::vector<int>>("only", {});
  const auto skip = ctx.get<std::vector<int>>("skip", {});
  const auto all = criteria(level, p, seed);
  if (only.empty())
    for (const auto& [id, fn] : all) only.push_back(id);
  std::vector<int> ids;
  for (int id : only) {
    require(all.count(id) == 1, ErrorCode::kInvalidArgument, "unknown criterion " + std::to_string(id));
    if (std::find(skip.begin(), skip.end(), id) == skip.end()) ids.push_back(id);
  }
  std::vector<json> results(ids.size());
  std::vector<bool> passed(ids.size(), false);
  auto run_one = [&](size_t i) {
    try {
      const AuditReport r = all.at(ids[i])();
      results[i] = to_json(r);
      passed[i] = r.passed();
    } catch (const Error& e) {
      results[i] = {{"error", e.what()}, {"code", static_cast<int>(e.code())}};
    }
  };
  // independent criteria, scheduled over the thread budget
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < ids.size();) run_one(i);
  };
  for (int t = 1; t < std::min<int>(threads, static_cast<int>(ids.size())); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  AuditReport rep;
  rep.title = "audit-all";
  json list = json::array();
  for (size_t i = 0; i < ids.size(); ++i) {
    rep.expect("criterion " + std::to_string(ids[i]), passed[i]);
    list.push_back(json{{"criterion", ids[i]}, {"passed", static_cast<bool>(passed[i])}, {"report", results[i]}});
  }
  rep.data["criteria"] = list;
  return rep;
}

}  // namespace

json run_command(const std::string& command, const json& config, int threads) {
  Ctx ctx(config.is_null() ? json::object() : config);
  threads = std::max(1, threads);
  AuditReport rep;
  if (command == "mesh")
    rep = cmd_mesh(ctx);
  else if (command == "dist")
    rep = cmd_dist(ctx);
  else if (command == "flux")
    rep = cmd_flux(ctx);
  else if (command == "slice")
    rep = cmd_slice(ctx);
  else if (command == "holder")
    rep = cmd_holder(ctx);
  else if (command == "energy")
    rep = cmd_energy(ctx);
  else if (command == "monotonicity")
    rep = cmd_monotonicity(ctx);
  else if (command == "blowup")
    rep = cmd_blowup(ctx);
  else if (command == "metrize")
    rep = cmd_metrize(ctx);
  else if (command == "plateau")
    rep = cmd_plateau(ctx, threads);
  else if (command == "trace")
    rep = cmd_trace(ctx);
  else if (command == "audit-all")
    rep = cmd_audit_all(ctx, threads);
  else
    fail(ErrorCode::kInvalidArgument, "unknown command '" + command + "'");
  return {{"command", command},         {"config", ctx.config()},     {"input_hash", ctx.input_hash()},
          {"passed", rep.passed()},     {"failures", rep.failures()}, {"report", to_json(rep)}};
}

}  // namespace wb

#include "wbundle/slice_metric.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "wbundle/flow_solver.hpp"

namespace wb {

ChargeSet::ChargeSet(std::vector<Charge> entries) {
  std::map<int, int> acc;
  for (const auto& c : entries) acc[c.face] += c.n;
  for (const auto& [f, n] : acc)
    if (n != 0) entries_.push_back({f, n});
}

int ChargeSet::total() const {
  int t = 0;
  for (const auto& c : entries_) t += c.n;
  return t;
}

Eigen::VectorXd ChargeSet::as_cochain(int num_faces) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(num_faces);
  for (const auto& c : entries_) v[c.face] = c.n;
  return v;
}

ChargeSet ChargeSet::negated() const {
  std::vector<Charge> e = entries_;
  for (auto& c : e) c.n = -c.n;
  return ChargeSet(std::move(e));
}

ChargeSet ChargeSet::plus(int face, int n) const {
  std::vector<Charge> e = entries_;
  e.push_back({face, n});
  return ChargeSet(std::move(e));
}

namespace {

using Clock = std::chrono::steady_clock;

void check_p(double p) {
  require(p > 1.0 && p <= 2.0, ErrorCode::kDomain, "slice distance needs p in (1, 2]");
}

int integral_degree(const TwoCochain& h, double tol) {
  const double d = h.degree();
  const double r = std::round(d);
  require(std::abs(d - r) <= tol, ErrorCode::kDomain,
          "cochain degree " + std::to_string(d) + " is not an integer; input is not a slice");
  return static_cast<int>(r);
}

struct Prepared {
  TwoCochain diff;  // h2 - h1 with the sub-tolerance degree defect spread by area
  int mismatch = 0;
};

Prepared prepare(const TwoCochain& h1, const TwoCochain& h2, double p, double degree_tol) {
  check_p(p);
  require(h1.mesh && h2.mesh && h1.mesh->content_hash() == h2.mesh->content_hash(), ErrorCode::kDomain,
          "slices live on different meshes");
  Prepared out;
  out.mismatch = integral_degree(h2, degree_tol) - integral_degree(h1, degree_tol);
  out.diff = with_degree(h2 - h1, out.mismatch);
  return out;
}

struct Eval {
  double value = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;
  Eigen::VectorXd lambda;
};

using Key = std::vector<std::pair<int, int>>;

Key key_of(const ChargeSet& c) {
  Key k;
  for (const auto& e : c.entries()) k.emplace_back(e.face, e.n);
  return k;
}

class ChargeSearch {
 public:
  ChargeSearch(const TwoCochain& diff, double p, double tol)
      : diff_(diff), solver_(diff.mesh, p), tol_(tol), nf_(diff.mesh->num_faces()) {}

  const Eval& eval(const ChargeSet& c, const Eigen::VectorXd* warm) {
    const Key k = key_of(c);
    if (auto it = cache_.find(k); it != cache_.end()) return it->second;
    FlowOptions o;
    o.tol = tol_;
    o.warm_lambda = warm;
    const Eigen::VectorXd target = diff_.values - c.as_cochain(nf_);
    FlowResult r;
    try {
      r = solver_.solve(target, o);
    } catch (const FlowNotConverged& e) {
      r = e.best();
    }
    ++evaluations;
    Eval ev{r.value, r.lower_bound, r.gap, std::move(r.lambda)};
    if (!best_alpha_.size() || ev.value < best_value) {
      best_value = ev.value;
      best_charges = c;
      best_gap = ev.gap;
      best_lb = ev.lower_bound;
      best_alpha_ = r.alpha.values;
    }
    return cache_.emplace(k, std::move(ev)).first->second;
  }

  // Lower bound on the value of configuration c from the multiplier of another solve.
  double bound(const Eval& from, const ChargeSet& c) const {
    double b = from.lambda.dot(diff_.values);
    for (const auto& e : c.entries()) b -= from.lambda[e.face] * e.n;
    return b;
  }

  const Eigen::VectorXd& best_alpha() const { return best_alpha_; }

  int evaluations = 0;
  double best_value = std::numeric_limits<double>::infinity();
  double best_gap = 0.0;
  double best_lb = 0.0;
  ChargeSet best_charges;

 private:
  const TwoCochain& diff_;
  FlowSolver solver_;
  double tol_;
  int nf_;
  std::map<Key, Eval> cache_;
  Eigen::VectorXd best_alpha_;
};

struct Candidate {
  ChargeSet charges;
  SearchMove move;
  double bound = 0.0;
};

std::vector<Candidate> neighbourhood(const SphereMesh& m, const ChargeSet& cur, const Eval& ev,
                                     const ChargeSearch& search, bool pairs) {
  std::vector<Candidate> out;
  const Eigen::VectorXd& lam = ev.lambda;
  int fmax = 0, fmin = 0;
  lam.maxCoeff(&fmax);
  lam.minCoeff(&fmin);
  auto add = [&](ChargeSet c, const char* kind, int from, int to) {
    Candidate cand{std::move(c), {kind, from, to, 0.0}, 0.0};
    cand.bound = search.bound(ev, cand.charges);
    out.push_back(std::move(cand));
  };
  for (const auto& e : cur.entries()) {
    const int s = e.n > 0 ? 1 : -1;
    for (int g : m.face_neighbors[e.face]) add(cur.plus(e.face, -s).plus(g, s), "relocate", e.face, g);
    const int target = s > 0 ? fmax : fmin;
    if (target != e.face) add(cur.plus(e.face, -s).plus(target, s), "jump", e.face, target);
  }
  if (pairs && fmax != fmin) add(cur.plus(fmax, 1).plus(fmin, -1), "create", fmin, fmax);
  for (const auto& a : cur.entries())
    for (const auto& b : cur.entries())
      if (a.n > 0 && b.n < 0) add(cur.plus(a.face, -1).plus(b.face, 1), "annihilate", a.face, b.face);
  return out;
}

ChargeSet initial_charges(const TwoCochain& diff, int mismatch, int restart, std::uint64_t seed, bool pairs) {
  const int nf = diff.mesh->num_faces();
  const int s = mismatch >= 0 ? 1 : -1;
  std::vector<Charge> e;
  if (restart == 0) {
    const Eigen::VectorXd dens = diff.densities() * s;
    std::vector<int> order(nf);
    for (int f = 0; f < nf; ++f) order[f] = f;
    const int k = std::min(std::abs(mismatch), nf);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) { return dens[a] > dens[b] || (dens[a] == dens[b] && a < b); });
    for (int i = 0; i < k; ++i) e.push_back({order[i], s});
  } else {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(restart));
    std::uniform_int_distribution<int> pick(0, nf - 1);
    for (int i = 0; i < std::abs(mismatch); ++i) e.push_back({pick(rng), s});
    if (mismatch == 0 && pairs) {
      e.push_back({pick(rng), 1});
      e.push_back({pick(rng), -1});
    }
  }
  return ChargeSet(std::move(e));
}

double feasibility_of(const TwoCochain& diff, const Eigen::VectorXd& alpha, const ChargeSet& c) {
  if (!alpha.size()) return 0.0;
  const Eigen::VectorXd r =
      codifferential(OneFormCochain(diff.mesh, alpha)).values + c.as_cochain(diff.mesh->num_faces()) - diff.values;
  return r.cwiseAbs().maxCoeff();
}

}  // namespace

namespace {

// d(h1, h2) = d(h2, h1): the search always runs on the orientation with a
// positive mismatch (or, at zero mismatch, a positive largest-magnitude entry).
bool flip_orientation(const Prepared& prep) {
  if (prep.mismatch != 0) return prep.mismatch < 0;
  int f = 0;
  prep.diff.values.cwiseAbs().maxCoeff(&f);
  return prep.diff.values[f] < 0.0;
}

}  // namespace

DistanceResult slice_distance(const TwoCochain& h1, const TwoCochain& h2, double p, const DistanceOptions& opts) {
  const auto t0 = Clock::now();
  Prepared prep = prepare(h1, h2, p, opts.degree_tol);
  const bool flipped = flip_orientation(prep);
  if (flipped) {
    prep.diff.values = -prep.diff.values;
    prep.mismatch = -prep.mismatch;
  }
  require(p < 2.0 || prep.mismatch == 0, ErrorCode::kDomain,
          "point charges have infinite cost for p >= 2; degrees must agree");
  const bool pairs = p < 2.0;
  const SphereMesh& m = *prep.diff.mesh;

  ChargeSearch search(prep.diff, p, opts.tol);
  DistanceResult best_run;
  best_run.value = std::numeric_limits<double>::infinity();

  const int restarts = (prep.mismatch == 0 && !pairs) ? 1 : std::max(1, opts.restarts);
  for (int r = 0; r < restarts; ++r) {
    ChargeSet cur = initial_charges(prep.diff, prep.mismatch, r, opts.seed, pairs);
    const Eval* ev = &search.eval(cur, nullptr);
    std::vector<SearchMove> trace{{"init", -1, -1, ev->value}};
    for (int step = 0; step < opts.max_moves; ++step) {
      auto cands = neighbourhood(m, cur, *ev, search, pairs);
      std::stable_sort(cands.begin(), cands.end(),
                       [](const Candidate& a, const Candidate& b) { return a.bound < b.bound; });
      const double cut = ev->value - opts.accept;
      int tried = 0;
      const Candidate* pick = nullptr;
      const Eval* pick_ev = nullptr;
      for (const auto& c : cands) {
        if (c.bound >= cut || tried >= opts.candidates_per_move) break;
        if (c.charges.total() != prep.mismatch) continue;
        ++tried;
        const Eval& ce = search.eval(c.charges, &ev->lambda);
        if (ce.value < cut && (!pick_ev || ce.value < pick_ev->value)) {
          pick = &c;
          pick_ev = &ce;
        }
      }
      if (!pick) break;
      cur = pick->charges;
      ev = pick_ev;
      trace.push_back(pick->move);
      trace.back().value = ev->value;
    }
    if (ev->value < best_run.value) {
      best_run.value = ev->value;
      best_run.trace = std::move(trace);
    }
  }

  DistanceResult out;
  out.value = search.best_value;
  out.charges = search.best_charges;
  out.gap = search.best_gap;
  out.lower_bound = search.best_lb;
  out.alpha = OneFormCochain(prep.diff.mesh, search.best_alpha());
  out.feasibility = feasibility_of(prep.diff, search.best_alpha(), out.charges);
  out.trace = std::move(best_run.trace);
  if (flipped) {
    out.alpha.values = -out.alpha.values;
    out.charges = out.charges.negated();
  }
  out.evaluations = search.evaluations;
  out.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

DistanceResult charge_configuration_value(const TwoCochain& h1, const TwoCochain& h2, double p,
                                          const ChargeSet& charges, double tol) {
  const auto t0 = Clock::now();
  const Prepared prep = prepare(h1, h2, p, 1e-3);
  require(charges.total() == prep.mismatch, ErrorCode::kInfeasible,
          "charge total does not match the degree mismatch");
  ChargeSearch search(prep.diff, p, tol);
  search.eval(charges, nullptr);
  DistanceResult out;
  out.value = search.best_value;
  out.charges = charges;
  out.gap = search.best_gap;
  out.lower_bound = search.best_lb;
  out.alpha = OneFormCochain(prep.diff.mesh, search.best_alpha());
  out.feasibility = feasibility_of(prep.diff, search.best_alpha(), charges);
  out.evaluations = 1;
  out.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

namespace {

struct ExcisionEval {
  double value;
  Eigen::VectorXd lambda;
};

ExcisionEval solve_excised(const TwoCochain& diff, double p, const std::vector<int>& excised, double tol) {
  const int nf = diff.mesh->num_faces();
  std::vector<char> mask(nf, 1);
  for (int f : excised) mask[f] = 0;
  const bool all = excised.empty();
  if (all && std::abs(diff.degree()) > 1e-8 * std::max(1.0, diff.values.cwiseAbs().sum()))
    return {std::numeric_limits<double>::infinity(), Eigen::VectorXd::Zero(nf)};
  FlowSolver solver(diff.mesh, p, all ? std::vector<char>{} : mask);
  FlowOptions o;
  o.tol = tol;
  FlowResult r;
  try {
    r = solver.solve(diff.values, o);
  } catch (const FlowNotConverged& e) {
    r = e.best();
  }
  return {r.value, std::move(r.lambda)};
}

double area_of(const SphereMesh& m, const std::vector<int>& faces) {
  double a = 0.0;
  for (int f : faces) a += m.face_area[f];
  return a;
}

}  // namespace

double excised_value(const TwoCochain& diff, double p, const std::vector<int>& excised, double tol) {
  check_p(p);
  return solve_excised(diff, p, excised, tol).value;
}

std::vector<CurvePoint> distance_d2(const TwoCochain& h1, const TwoCochain& h2, double p,
                                    const std::vector<double>& budgets, const DistanceOptions& opts,
                                    const std::vector<std::vector<int>>& extra_sets) {
  for (double b : budgets) require(b > 0.0, ErrorCode::kInvalidArgument, "d2 budgets must be positive");
  const Prepared prep = prepare(h1, h2, p, opts.degree_tol);
  const SphereMesh& m = *prep.diff.mesh;
  const double max_budget = budgets.empty() ? 0.0 : *std::max_element(budgets.begin(), budgets.end());

  struct Cand {
    std::vector<int> faces;
    double area;
    double value;
  };
  std::vector<Cand> cands;
  // fully constrained
  cands.push_back({{}, 0.0, solve_excised(prep.diff, p, {}, opts.tol).value});

  if (prep.diff.values.cwiseAbs().maxCoeff() > 0.0) {
    std::vector<int> set;
    if (p < 2.0 || prep.mismatch == 0) {
      const DistanceResult d = slice_distance(h1, h2, p, opts);
      for (const auto& c : d.charges.entries()) set.push_back(c.face);
    }
    std::vector<char> in(m.num_faces(), 0);
    for (int f : set) in[f] = 1;
    Eigen::VectorXd lam;
    if (!set.empty() && area_of(m, set) <= max_budget) {
      ExcisionEval ev = solve_excised(prep.diff, p, set, opts.tol);
      cands.push_back({set, area_of(m, set), ev.value});
      lam = std::move(ev.lambda);
    } else {
      lam = solve_excised(prep.diff, p, {}, opts.tol).lambda;
      if (!lam.size() || !std::isfinite(lam.sum())) lam = prep.diff.densities();
    }
    // grow by doubling the number of excised faces, ordered by multiplier size
    int grow = 1;
    while (true) {
      std::vector<int> order;
      for (int f = 0; f < m.num_faces(); ++f)
        if (!in[f]) order.push_back(f);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return std::abs(lam[a]) > std::abs(lam[b]); });
      std::vector<int> next = set;
      double area = area_of(m, set);
      for (int i = 0; i < static_cast<int>(order.size()) && i < grow; ++i) {
        if (area + m.face_area[order[i]] > max_budget) break;
        next.push_back(order[i]);
        area += m.face_area[order[i]];
      }
      if (next.size() == set.size()) break;
      set = std::move(next);
      for (int f : set) in[f] = 1;
      ExcisionEval ev = solve_excised(prep.diff, p, set, opts.tol);
      cands.push_back({set, area, ev.value});
      lam = std::move(ev.lambda);
      grow *= 2;
    }
  }
  for (const auto& s : extra_sets) {
    if (s.empty()) continue;
    const double a = area_of(m, s);
    if (a <= max_budget) cands.push_back({s, a, solve_excised(prep.diff, p, s, opts.tol).value});
  }

  std::vector<CurvePoint> out;
  for (double b : budgets) {
    CurvePoint pt{b, std::numeric_limits<double>::infinity(), 0.0, {}};
    for (const auto& c : cands)
      if (c.area <= b && c.value < pt.value) {
        pt.value = c.value;
        pt.area = c.area;
        pt.excised = c.faces;
      }
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<CurvePoint> distance_d3(const TwoCochain& h1, const TwoCochain& h2, double p,
                                    const std::vector<double>& thresholds, double tol) {
  const Prepared prep = prepare(h1, h2, p, 1e-3);
  const SphereMesh& m = *prep.diff.mesh;
  // the raw difference decides which faces are excised
  const Eigen::VectorXd dens = (h2 - h1).densities().cwiseAbs();
  std::vector<CurvePoint> out;
  for (double k : thresholds) {
    require(k > 0.0, ErrorCode::kInvalidArgument, "d3 thresholds must be positive");
    CurvePoint pt{k, 0.0, 0.0, {}};
    for (int f = 0; f < m.num_faces(); ++f)
      if (dens[f] > k) pt.excised.push_back(f);
    pt.area = area_of(m, pt.excised);
    pt.value = solve_excised(prep.diff, p, pt.excised, tol).value;
    out.push_back(std::move(pt));
  }
  return out;
}

DistanceResult pullback_distance(const VertexMap& psi, const TwoCochain& h1, const TwoCochain& h2, double p,
                                 const DistanceOptions& opts) {
  return slice_distance(pullback(psi, h1), pullback(psi, h2), p, opts);
}

AuditReport metric_audit(const std::vector<std::array<TwoCochain, 3>>& samples, double p,
                         const DistanceOptions& opts, double threshold) {
  AuditReport rep;
  rep.title = "metric axioms";
  double self = 0.0, sym = 0.0, tri = 0.0, max_gap = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples) {
    auto d = [&](int i, int j) {
      const DistanceResult r = slice_distance(s[i], s[j], p, opts);
      max_gap = std::max(max_gap, r.gap);
      return r.value;
    };
    const double d00 = d(0, 0);
    const double d01 = d(0, 1), d10 = d(1, 0);
    const double d12 = d(1, 2), d02 = d(0, 2);
    self = std::max(self, d00);
    sym = std::max(sym, std::abs(d01 - d10) / std::max(1.0, d01));
    const double scale = std::max(1.0, d02);
    tri = std::max(tri, (d02 - d01 - d12) / scale);
    rows.push_back({d01, d10, d12, d02});
  }
  rep.at_most("max d(h,h)", self, 1e-8);
  rep.at_most("max relative symmetry gap", sym, 1e-6);
  rep.at_most("max relative triangle violation", std::max(tri, 0.0), threshold);
  rep.data = {{"p", p}, {"samples", samples.size()}, {"max_inner_gap", max_gap},
              {"distances", rows}, {"columns", {"d01", "d10", "d12", "d02"}}};
  return rep;
}

nlohmann::json to_json(const ChargeSet& c) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& e : c.entries()) a.push_back({{"face", e.face}, {"n", e.n}});
  return a;
}

nlohmann::json to_json(const DistanceResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& mv : r.trace) trace.push_back({{"move", mv.kind}, {"from", mv.from}, {"to", mv.to}, {"value", mv.value}});
  return {{"value", r.value},           {"gap", r.gap},
          {"lower_bound", r.lower_bound}, {"feasibility", r.feasibility},
          {"charges", to_json(r.charges)}, {"total_charge", r.charges.total()},
          {"evaluations", r.evaluations}, {"trace", trace}};
}

}  // namespace wb

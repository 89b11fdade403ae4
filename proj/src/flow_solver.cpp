#include "wbundle/flow_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "wbundle/poisson.hpp"

namespace wb {

using SpMat = Eigen::SparseMatrix<double>;

struct FlowSolver::Impl {
  MeshPtr mesh;
  double p = 2.0;
  double q = 2.0;
  bool all_constrained = true;
  std::vector<int> var_of_face;  // -1 for grounded / unconstrained faces
  std::vector<int> face_of_var;
  std::vector<std::array<int, 2>> edge_vars;
  Eigen::VectorXd w;   // primal weights, ||alpha||^p = sum w |alpha|^p
  Eigen::VectorXd v;   // w^{1-q}
  Eigen::VectorXd w2;  // Poisson weights for projection and warm start
  Eigen::SimplicialLDLT<SpMat> l2;
  Eigen::SimplicialLDLT<SpMat> newton;
  bool newton_analyzed = false;

  int nvar() const { return static_cast<int>(face_of_var.size()); }

  SpMat assemble(const Eigen::VectorXd& h, double shift) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * edge_vars.size() + face_of_var.size());
    for (std::size_t e = 0; e < edge_vars.size(); ++e) {
      const int a = edge_vars[e][0];
      const int b = edge_vars[e][1];
      if (a >= 0) trip.emplace_back(a, a, h[e]);
      if (b >= 0) trip.emplace_back(b, b, h[e]);
      if (a >= 0 && b >= 0) {
        trip.emplace_back(a, b, -h[e]);
        trip.emplace_back(b, a, -h[e]);
      }
    }
    for (int i = 0; i < nvar(); ++i) trip.emplace_back(i, i, shift);
    SpMat M(nvar(), nvar());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
  }

  // y = B^T lambda (lambda over variables)
  Eigen::VectorXd edge_diff(const Eigen::VectorXd& lam) const {
    Eigen::VectorXd y(edge_vars.size());
    for (std::size_t e = 0; e < edge_vars.size(); ++e) {
      const int a = edge_vars[e][0];
      const int b = edge_vars[e][1];
      y[e] = (a >= 0 ? lam[a] : 0.0) - (b >= 0 ? lam[b] : 0.0);
    }
    return y;
  }

  // restricted divergence (B alpha)_S
  Eigen::VectorXd divergence(const Eigen::VectorXd& alpha) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(nvar());
    for (std::size_t e = 0; e < edge_vars.size(); ++e) {
      if (edge_vars[e][0] >= 0) d[edge_vars[e][0]] += alpha[e];
      if (edge_vars[e][1] >= 0) d[edge_vars[e][1]] -= alpha[e];
    }
    return d;
  }

  Eigen::VectorXd primal_of(const Eigen::VectorXd& y) const {
    Eigen::VectorXd a(y.size());
    for (int e = 0; e < y.size(); ++e) a[e] = v[e] * std::pow(std::abs(y[e]), q - 1.0) * (y[e] < 0 ? -1.0 : 1.0);
    return a;
  }

  double dual_value(const Eigen::VectorXd& t, const Eigen::VectorXd& lam, const Eigen::VectorXd& y) const {
    double s = 0.0;
    for (int e = 0; e < y.size(); ++e) s += v[e] * std::pow(std::abs(y[e]), q);
    return t.dot(lam) - s / q;
  }

  double primal_norm(const Eigen::VectorXd& alpha) const {
    double s = 0.0;
    for (int e = 0; e < alpha.size(); ++e) s += w[e] * std::pow(std::abs(alpha[e]), p);
    return std::pow(s, 1.0 / p);
  }

  double dual_norm(const Eigen::VectorXd& y) const {
    double s = 0.0;
    for (int e = 0; e < y.size(); ++e) s += v[e] * std::pow(std::abs(y[e]), q);
    return std::pow(s, 1.0 / q);
  }

  // Least-change correction in the Poisson metric: returns an exactly feasible flow.
  Eigen::VectorXd project(const Eigen::VectorXd& alpha, const Eigen::VectorXd& t) const {
    const Eigen::VectorXd r = t - divergence(alpha);
    const Eigen::VectorXd z = l2.solve(r);
    return alpha + w2.cwiseProduct(edge_diff(z));
  }
};

FlowSolver::FlowSolver(MeshPtr mesh, double p, std::vector<char> constrained) : impl_(std::make_unique<Impl>()) {
  require(std::isfinite(p) && p > 1.0, ErrorCode::kDomain, "flow exponent must exceed 1");
  auto& s = *impl_;
  s.mesh = std::move(mesh);
  s.p = p;
  s.q = p / (p - 1.0);
  const SphereMesh& m = *s.mesh;
  const int nf = m.num_faces();
  if (constrained.empty()) constrained.assign(nf, 1);
  require(static_cast<int>(constrained.size()) == nf, ErrorCode::kDomain, "constraint mask size mismatch");
  s.all_constrained = std::all_of(constrained.begin(), constrained.end(), [](char c) { return c != 0; });
  s.var_of_face.assign(nf, -1);
  bool grounded = !s.all_constrained;
  for (int f = 0; f < nf; ++f) {
    if (!constrained[f]) continue;
    if (!grounded) {
      grounded = true;  // first constrained face carries the gauge
      continue;
    }
    s.var_of_face[f] = static_cast<int>(s.face_of_var.size());
    s.face_of_var.push_back(f);
  }
  s.edge_vars.resize(m.num_edges());
  for (int e = 0; e < m.num_edges(); ++e)
    s.edge_vars[e] = {s.var_of_face[m.edge_faces[e][0]], s.var_of_face[m.edge_faces[e][1]]};
  s.w = edge_lp_weights(m, p);
  s.v.resize(s.w.size());
  for (int e = 0; e < s.w.size(); ++e) s.v[e] = std::pow(s.w[e], 1.0 - s.q);
  s.w2 = poisson_edge_weights(m);
  if (s.nvar() > 0) {
    s.l2.compute(s.assemble(s.w2, 0.0));
    require(s.l2.info() == Eigen::Success, ErrorCode::kNotConverged, "projection Laplacian factorization failed");
  }
}

FlowSolver::~FlowSolver() = default;
FlowSolver::FlowSolver(FlowSolver&&) noexcept = default;
FlowSolver& FlowSolver::operator=(FlowSolver&&) noexcept = default;

double FlowSolver::p() const { return impl_->p; }
const MeshPtr& FlowSolver::mesh() const { return impl_->mesh; }

FlowResult FlowSolver::solve(const Eigen::VectorXd& target, const FlowOptions& opts) {
  auto& s = *impl_;
  const SphereMesh& m = *s.mesh;
  const int nf = m.num_faces();
  require(target.size() == nf, ErrorCode::kDomain, "flow target size mismatch");

  double scale = 0.0;
  Eigen::VectorXd t(s.nvar());
  for (int i = 0; i < s.nvar(); ++i) t[i] = target[s.face_of_var[i]];
  if (s.all_constrained) {
    scale = target.cwiseAbs().sum();
    require(std::abs(target.sum()) <= 1e-8 * std::max(1.0, scale), ErrorCode::kInfeasible,
            "divergence target has nonzero degree; no flow can match it");
  } else {
    scale = t.cwiseAbs().sum();
  }

  FlowResult res;
  res.lambda = Eigen::VectorXd::Zero(nf);
  if (s.nvar() == 0 || t.cwiseAbs().maxCoeff() == 0.0) {
    res.alpha = OneFormCochain::zero(s.mesh);
    res.converged = true;
    if (s.nvar() > 0 && s.all_constrained) res.alpha = OneFormCochain(s.mesh, s.project(res.alpha.values, t));
    return res;
  }

  // initial dual point
  Eigen::VectorXd lam(s.nvar());
  if (opts.warm_lambda && opts.warm_lambda->size() == nf) {
    double base = 0.0;
    if (s.all_constrained)
      for (int f = 0; f < nf; ++f)
        if (s.var_of_face[f] < 0) {
          base = (*opts.warm_lambda)[f];
          break;
        }
    for (int i = 0; i < s.nvar(); ++i) lam[i] = (*opts.warm_lambda)[s.face_of_var[i]] - base;
  } else {
    lam = s.l2.solve(t);
  }
  {
    // best multiple of the starting direction
    const Eigen::VectorXd y = s.edge_diff(lam);
    const double a = t.dot(lam);
    double b = 0.0;
    for (int e = 0; e < y.size(); ++e) b += s.v[e] * std::pow(std::abs(y[e]), s.q);
    if (a > 0.0 && b > 0.0) lam *= std::pow(a / b, 1.0 / (s.q - 1.0));
    else lam = s.l2.solve(t) * 1e-3;
  }

  double best_primal = std::numeric_limits<double>::infinity();
  double best_lb = 0.0;
  Eigen::VectorXd best_alpha;
  Eigen::VectorXd best_lam = lam;
  double best_dn = 1.0;
  double mu_rel = 1e-10;
  int it = 0;
  bool converged = false;

  Eigen::VectorXd y = s.edge_diff(lam);
  double dval = s.dual_value(t, lam, y);
  for (; it < opts.max_iter; ++it) {
    const Eigen::VectorXd alpha = s.primal_of(y);
    const Eigen::VectorXd feas = s.project(alpha, t);
    const double pv = s.primal_norm(feas);
    if (pv < best_primal) {
      best_primal = pv;
      best_alpha = feas;
    }
    const double dn = s.dual_norm(y);
    if (dn > 0.0) {
      const double lb = t.dot(lam) / dn;
      if (lb > best_lb) {
        best_lb = lb;
        best_lam = lam;
        best_dn = dn;
      }
    }
    if (best_primal - best_lb <= opts.tol * best_primal) {
      converged = true;
      break;
    }

    const Eigen::VectorXd grad = t - s.divergence(alpha);
    Eigen::VectorXd h(y.size());
    for (int e = 0; e < y.size(); ++e) h[e] = (s.q - 1.0) * s.v[e] * std::pow(std::abs(y[e]), s.q - 2.0);
    const double diag_scale = std::max(h.maxCoeff(), 1e-300);
    bool stepped = false;
    for (int attempt = 0; attempt < 40 && !stepped; ++attempt) {
      const SpMat H = s.assemble(h, mu_rel * diag_scale);
      if (!s.newton_analyzed) {
        s.newton.analyzePattern(H);
        s.newton_analyzed = true;
      }
      s.newton.factorize(H);
      if (s.newton.info() != Eigen::Success) {
        mu_rel = std::min(mu_rel * 100.0, 1e6);
        continue;
      }
      const Eigen::VectorXd dir = s.newton.solve(grad);
      const double slope = grad.dot(dir);
      double step = 1.0;
      for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
        const Eigen::VectorXd cand = lam + step * dir;
        const Eigen::VectorXd yc = s.edge_diff(cand);
        const double dc = s.dual_value(t, cand, yc);
        if (dc >= dval + 1e-4 * step * slope) {
          lam = cand;
          y = yc;
          const bool gained = dc > dval;
          dval = dc;
          stepped = gained;
          break;
        }
      }
      if (!stepped) mu_rel = std::min(mu_rel * 100.0, 1e6);
      else if (step == 1.0) mu_rel = std::max(mu_rel * 0.1, 1e-12);
    }
    if (!stepped) break;  // no ascent possible at working precision
  }

  res.iterations = it;
  res.alpha = OneFormCochain(s.mesh, best_alpha);
  res.value = best_primal;
  res.lower_bound = best_lb;
  res.gap = best_primal > 0.0 ? (best_primal - best_lb) / best_primal : 0.0;
  for (int i = 0; i < s.nvar(); ++i) res.lambda[s.face_of_var[i]] = best_lam[i] / best_dn;
  const Eigen::VectorXd r = t - s.divergence(best_alpha);
  res.feasibility = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  res.converged = converged || res.gap <= opts.tol;
  if (!res.converged)
    throw FlowNotConverged("flow solver stopped at relative gap " + std::to_string(res.gap), std::move(res));
  return res;
}

FlowResult convex_flow_min(const TwoCochain& f, double p, double tol) {
  FlowSolver solver(f.mesh, p);
  FlowOptions opts;
  opts.tol = tol;
  return solver.solve(f.values, opts);
}

}  // namespace wb

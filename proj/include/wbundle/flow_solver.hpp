#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "wbundle/cochain.hpp"
#include "wbundle/error.hpp"

namespace wb {

struct FlowOptions {
  double tol = 1e-6;    // relative duality gap
  int max_iter = 5000;
  const Eigen::VectorXd* warm_lambda = nullptr;  // per-face dual potential
};

struct FlowResult {
  OneFormCochain alpha;
  double value = 0.0;        // ||alpha||_p, primal
  double lower_bound = 0.0;  // Hoelder dual bound
  double gap = 0.0;          // (value - lower_bound) / value
  double feasibility = 0.0;  // max_f |(d* alpha)_f - target_f| over constrained faces
  int iterations = 0;
  bool converged = false;
  // Normalized dual potential, per face (zero on unconstrained faces). For any
  // admissible target t', value(t') >= lambda . t'.
  Eigen::VectorXd lambda;
};

class FlowNotConverged : public Error {
 public:
  FlowNotConverged(const std::string& msg, FlowResult best)
      : Error(ErrorCode::kNotConverged, msg), best_(std::move(best)) {}
  const FlowResult& best() const noexcept { return best_; }

 private:
  FlowResult best_;
};

/// Minimizes ||alpha||_p over dual-graph flows with prescribed divergence on a
/// set of constrained faces (all faces by default). The smooth dual
///   max_lambda  t.lambda - (1/q) sum_e w_e^{1-q} |(B^T lambda)_e|^q
/// is solved by damped Newton steps, each a reweighted face-Laplacian solve;
/// the damping grows towards plain gradient ascent when a step stalls. Every
/// primal iterate is projected onto the constraint set before evaluation, and
/// the Hoelder bound t.lambda / ||B^T lambda||_q* certifies the gap.
///
/// Not thread-safe; one instance per task. Reusable across targets.
class FlowSolver {
 public:
  FlowSolver(MeshPtr mesh, double p, std::vector<char> constrained = {});
  ~FlowSolver();
  FlowSolver(FlowSolver&&) noexcept;
  FlowSolver& operator=(FlowSolver&&) noexcept;

  /// `target` is per face; entries on unconstrained faces are ignored.
  /// Throws Infeasible (all faces constrained, nonzero degree) or FlowNotConverged.
  FlowResult solve(const Eigen::VectorXd& target, const FlowOptions& opts = {});

  double p() const;
  const MeshPtr& mesh() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// min ||alpha||_p subject to codifferential(alpha) = f.
FlowResult convex_flow_min(const TwoCochain& f, double p, double tol = 1e-6);

}  // namespace wb

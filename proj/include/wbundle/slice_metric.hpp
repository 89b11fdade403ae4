#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wbundle/cochain.hpp"
#include "wbundle/report.hpp"
#include "wbundle/vertex_map.hpp"

namespace wb {

struct Charge {
  int face = -1;
  int n = 0;
};

/// Integer atomic measure on the faces, at most one entry per face.
class ChargeSet {
 public:
  ChargeSet() = default;
  explicit ChargeSet(std::vector<Charge> entries);  // merges repeats, drops zeros

  const std::vector<Charge>& entries() const { return entries_; }
  int total() const;
  bool empty() const { return entries_.empty(); }
  Eigen::VectorXd as_cochain(int num_faces) const;
  ChargeSet negated() const;
  ChargeSet plus(int face, int n) const;

 private:
  std::vector<Charge> entries_;  // sorted by face
};

struct SearchMove {
  std::string kind;  // init, relocate, jump, create, annihilate
  int from = -1;
  int to = -1;
  double value = 0.0;
};

struct DistanceOptions {
  double tol = 1e-6;           // inner relative duality gap
  int restarts = 4;
  std::uint64_t seed = 0;
  int max_moves = 200;         // per restart
  int candidates_per_move = 6;
  double accept = 1e-8;        // strict decrease needed to accept a move
  double degree_tol = 1e-3;    // integrality tolerance on input degrees
};

struct DistanceResult {
  double value = 0.0;
  OneFormCochain alpha;
  ChargeSet charges;
  double gap = 0.0;
  double lower_bound = 0.0;
  double feasibility = 0.0;  // max_f |d*alpha + charges - (h2 - h1)|
  std::vector<SearchMove> trace;
  int evaluations = 0;
  double wall_time = 0.0;  // seconds; not part of the JSON form
};

/// Slice distance in the merged-atom form: min over integer charge sets with the
/// prescribed total and over flows alpha with d*alpha + charges = h2 - h1.
DistanceResult slice_distance(const TwoCochain& h1, const TwoCochain& h2, double p,
                              const DistanceOptions& opts = {});

/// Inner value for one fixed charge configuration (no search).
DistanceResult charge_configuration_value(const TwoCochain& h1, const TwoCochain& h2, double p,
                                          const ChargeSet& charges, double tol = 1e-6);

struct CurvePoint {
  double parameter = 0.0;  // budget (d2) or threshold (d3)
  double value = 0.0;      // +inf when no admissible set exists
  double area = 0.0;       // area of the excised set that realized the value
  std::vector<int> excised;
};

/// d2 curve. Candidate excision sets are nested greedy prefixes grown from the
/// optimal d charges by multiplier size, plus any `extra_sets`; each budget
/// reports the best candidate whose area fits.
std::vector<CurvePoint> distance_d2(const TwoCochain& h1, const TwoCochain& h2, double p,
                                    const std::vector<double>& budgets, const DistanceOptions& opts = {},
                                    const std::vector<std::vector<int>>& extra_sets = {});

/// d3 curve: the constraint is kept only where |h2 - h1| density <= k.
std::vector<CurvePoint> distance_d3(const TwoCochain& h1, const TwoCochain& h2, double p,
                                    const std::vector<double>& thresholds, double tol = 1e-6);

/// Value of min ||alpha||_p with the constraint dropped on `excised` faces.
double excised_value(const TwoCochain& diff, double p, const std::vector<int>& excised, double tol = 1e-6);

/// d on the source sphere between pullbacks of cochains living on psi.target.
DistanceResult pullback_distance(const VertexMap& psi, const TwoCochain& h1, const TwoCochain& h2, double p,
                                 const DistanceOptions& opts = {});

/// Self-distance, symmetry and triangle checks over cochain triples.
AuditReport metric_audit(const std::vector<std::array<TwoCochain, 3>>& samples, double p,
                         const DistanceOptions& opts = {}, double threshold = 1e-5);

nlohmann::json to_json(const ChargeSet& c);
nlohmann::json to_json(const DistanceResult& r);

}  // namespace wb

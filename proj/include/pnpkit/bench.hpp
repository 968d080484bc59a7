#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pnpkit/instance.hpp"
#include "pnpkit/net.hpp"
#include "pnpkit/ransac.hpp"
#include "pnpkit/refine.hpp"
#include "pnpkit/synth.hpp"

namespace pnpkit {

// Success thresholds.  Rotation is an absolute angle bound in radians; the
// translation bound is relative, scaled by the true translation norm:
// a translation estimate succeeds when |t_hat - t| < t_T * |t|.
struct SuccessCriteria {
  double t_R = M_PI / 180.0;  // radians (default: one degree)
  double t_T = 0.2;           // fraction of the true translation norm

  void validate() const;
  bool rotation_ok(double eps_r) const { return eps_r < t_R; }
  bool translation_ok(double eps_t, double truth_t_norm) const {
    return eps_t < t_T * truth_t_norm;
  }
};

// A pose estimator under test.  Estimators signal failure by throwing; the
// harness records the trial as unsuccessful and moves on.
using Method = std::function<Pose(const ProblemInstance&)>;
using MethodList = std::vector<std::pair<std::string, Method>>;

// Everything the named estimators may need.  `net` must be non-null for the
// learned methods; `learned_lm` is the refiner configuration shipped with the
// weights, `baseline_lm` the plain least-squares refiner used by epnp-lm and
// inside RANSAC hypotheses.
struct MethodContext {
  const NetParams* net = nullptr;
  LMConfig learned_lm = LMConfig::gauss_newton();
  LMConfig baseline_lm = LMConfig::gauss_newton();
  RansacConfig ransac;
};

// Known names: net, pnp-net, epnp, epnp-lm, ransac.  Throws UnknownMethod,
// or SchemaError when a learned method lacks weights.
Method make_method(const std::string& name, const MethodContext& ctx);
std::vector<std::string> known_methods();

struct TrialRecord {
  double eps_r = 0.0;        // rotation error, radians
  double eps_t = 0.0;        // Euclidean translation error, world units
  double truth_t_norm = 0.0;
  bool failed = false;       // estimator threw; errors set to infinity
};

struct OpCount {
  double additions = 0.0;
  double multiplications = 0.0;
  double divisions = 0.0;
  double transcendental = 0.0;  // evaluations, pre-weighted by the configured cost
  double total = 0.0;           // sum of the four fields above
};

struct MethodResult {
  std::string name;
  std::vector<TrialRecord> trials;
  int failures = 0;
  double rotation_success = 0.0;     // fractions in [0, 1]
  double translation_success = 0.0;
  double joint_success = 0.0;
  // Informational cost at the scenario's n under the default counting
  // configuration; ops_known is false for names the counter does not model.
  OpCount ops;
  bool ops_known = false;
};

struct EvalReport {
  ScenarioConfig scenario;
  SuccessCriteria criteria;
  int trials = 0;
  std::vector<MethodResult> methods;
};

// Runs every method on the identical instance stream (trial k is
// make_instance(scenario-with-this-seed, k)) and scores against the
// criteria.  Deterministic for fixed arguments.
EvalReport evaluate(const MethodList& methods, const ScenarioConfig& scenario,
                    const SuccessCriteria& criteria, int trials, std::uint64_t seed);

// One report per fixed outlier count (scenario.outlier_count_fixed swept).
std::vector<EvalReport> sweep_outliers(const MethodList& methods, const ScenarioConfig& scenario,
                                       const SuccessCriteria& criteria,
                                       const std::vector<int>& counts, int trials,
                                       std::uint64_t seed);

// Operation-count model.  Counting rules: one multiply-add is one addition
// plus one multiplication (2 ops); comparisons and branches on data count as
// additions; each transcendental evaluation (sqrt, sin, cos, acos, atan2,
// exp, log) contributes `transcendental_cost` ops to the `transcendental`
// field.  `total` is the plain sum of the four fields.
struct OpCountConfig {
  int m = 10;                        // refiner layers
  int ransac_max_iterations = 200;
  int ransac_subset = 7;
  double ransac_inlier_ratio = 0.8;  // for the expected-iteration variant
  double ransac_confidence = 0.99;
  bool ransac_expected = false;      // false: worst case at max_iterations
  double transcendental_cost = 20.0;
};

// Closed-form deterministic count for a named stage or method at problem
// size n.  Accepts the five method names plus "refine" (the iterative
// refinement stage alone, counted with the robust reweighting kernel
// active).  Throws UnknownMethod.
OpCount count_ops(const std::string& method, int n, const OpCountConfig& cfg);

// Tally built by walking the refiner's actual loop structure (layers,
// points, axis components) and charging each primitive block as it is
// visited, instead of evaluating a formula.  Cross-checks that the closed
// form in count_ops has the loop's affine shape and hides no data
// dependence.  `weighted` selects whether the robust per-point reweighting
// kernel is active (alpha > 0 layers) or skipped (alpha == 0 layers).
OpCount count_refine_instrumented(int n, int m, bool weighted, const OpCountConfig& cfg);

}  // namespace pnpkit

#include "pnpkit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnpkit/epnp.hpp"
#include "pnpkit/errors.hpp"

namespace pnpkit {

void SuccessCriteria::validate() const {
  if (!std::isfinite(t_R) || t_R <= 0.0)
    throw SchemaError("rotation success threshold must be finite and > 0");
  if (!std::isfinite(t_T) || t_T <= 0.0)
    throw SchemaError("translation success threshold must be finite and > 0");
}

std::vector<std::string> known_methods() {
  return {"net", "pnp-net", "epnp", "epnp-lm", "ransac"};
}

Method make_method(const std::string& name, const MethodContext& ctx) {
  // Every estimator sees the focal-normalized instance, so pixel-space
  // tuning constants (inlier thresholds, learned weights) mean the same
  // thing regardless of the source camera.  The learned methods also sort
  // into the canonical input order the network expects.
  if (name == "net" || name == "pnp-net") {
    if (ctx.net == nullptr) throw SchemaError("method '" + name + "' requires network weights");
    const NetParams net = *ctx.net;  // owned copy: outlives the caller's pointer
    if (name == "net")
      return [net](const ProblemInstance& inst) {
        return coarse_to_pose(net_forward(net, preprocess(inst)));
      };
    const LMConfig lm = ctx.learned_lm;
    return [net, lm](const ProblemInstance& inst) {
      const ProblemInstance pre = preprocess(inst);
      return refine(coarse_to_pose(net_forward(net, pre)), pre, lm);
    };
  }
  if (name == "epnp")
    return [](const ProblemInstance& inst) { return epnp_solve(normalize_focal(inst)); };
  if (name == "epnp-lm") {
    const LMConfig lm = ctx.baseline_lm;
    return [lm](const ProblemInstance& inst) { return epnp_lm(normalize_focal(inst), lm); };
  }
  if (name == "ransac") {
    const RansacConfig rc = ctx.ransac;
    const LMConfig lm = ctx.baseline_lm;
    return [rc, lm](const ProblemInstance& inst) {
      return ransac_solve(normalize_focal(inst), rc, lm);
    };
  }
  throw UnknownMethod(name);
}

EvalReport evaluate(const MethodList& methods, const ScenarioConfig& scenario,
                    const SuccessCriteria& criteria, int trials, std::uint64_t seed) {
  criteria.validate();
  if (trials < 1) throw SchemaError("trial count must be >= 1");
  ScenarioConfig sc = scenario;
  sc.seed = seed;
  sc.validate();

  EvalReport report;
  report.scenario = sc;
  report.criteria = criteria;
  report.trials = trials;
  report.methods.resize(methods.size());
  for (std::size_t j = 0; j < methods.size(); ++j) {
    report.methods[j].name = methods[j].first;
    report.methods[j].trials.reserve(static_cast<std::size_t>(trials));
  }

  for (int k = 0; k < trials; ++k) {
    const ProblemInstance inst = make_instance(sc, static_cast<std::uint64_t>(k));
    if (!inst.truth) throw MissingGroundTruth();
    const double tnorm = inst.truth->t.norm();
    for (std::size_t j = 0; j < methods.size(); ++j) {
      TrialRecord rec;
      rec.truth_t_norm = tnorm;
      try {
        const Pose est = methods[j].second(inst);
        rec.eps_r = rotation_error(est, *inst.truth);
        rec.eps_t = translation_error(est, *inst.truth);
      } catch (const Error&) {
        rec.failed = true;
        rec.eps_r = std::numeric_limits<double>::infinity();
        rec.eps_t = std::numeric_limits<double>::infinity();
      }
      report.methods[j].trials.push_back(rec);
    }
  }

  const OpCountConfig ops_cfg;  // defaults; the ops interface offers full control
  for (auto& mr : report.methods) {
    int rot = 0, trans = 0, joint = 0;
    for (const TrialRecord& rec : mr.trials) {
      if (rec.failed) ++mr.failures;
      const bool r_ok = criteria.rotation_ok(rec.eps_r);
      const bool t_ok = criteria.translation_ok(rec.eps_t, rec.truth_t_norm);
      rot += r_ok ? 1 : 0;
      trans += t_ok ? 1 : 0;
      joint += (r_ok && t_ok) ? 1 : 0;
    }
    mr.rotation_success = static_cast<double>(rot) / trials;
    mr.translation_success = static_cast<double>(trans) / trials;
    mr.joint_success = static_cast<double>(joint) / trials;
    try {
      mr.ops = count_ops(mr.name, sc.n, ops_cfg);
      mr.ops_known = true;
    } catch (const UnknownMethod&) {
      mr.ops_known = false;
    }
  }
  return report;
}

std::vector<EvalReport> sweep_outliers(const MethodList& methods, const ScenarioConfig& scenario,
                                       const SuccessCriteria& criteria,
                                       const std::vector<int>& counts, int trials,
                                       std::uint64_t seed) {
  std::vector<EvalReport> reports;
  reports.reserve(counts.size());
  for (int count : counts) {
    if (count < 0 || count > scenario.n)
      throw SchemaError("swept mismatch count must lie in [0, n]");
    ScenarioConfig sc = scenario;
    sc.outlier_count_fixed = count;
    reports.push_back(evaluate(methods, sc, criteria, trials, seed));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Operation counting.
//
// The counts below are arithmetic tallies of this library's implementations,
// with Eigen's small fixed-size products charged at dense textbook cost and
// the iterative linear-algebra kernels (QR, symmetric eigen-decomposition,
// 3x3 SVD) charged by standard flop models stated next to each helper.
// Data-dependent early exits are charged at their non-degenerate common
// path, and data-dependent sizes (RANSAC consensus refits) at their upper
// bound, so every count is a pure function of (method, n, config).
// ---------------------------------------------------------------------------

namespace {

// Mutable tally; `tr` stays in raw evaluations until finalized.
struct Tally {
  double add = 0.0;
  double mul = 0.0;
  double div = 0.0;
  double tr = 0.0;

  Tally& operator+=(const Tally& o) {
    add += o.add;
    mul += o.mul;
    div += o.div;
    tr += o.tr;
    return *this;
  }
  friend Tally operator+(Tally a, const Tally& b) { return a += b; }
  friend Tally operator*(double k, Tally t) {
    t.add *= k;
    t.mul *= k;
    t.div *= k;
    t.tr *= k;
    return t;
  }
};

Tally ops(double add, double mul, double div = 0.0, double tr = 0.0) {
  return Tally{add, mul, div, tr};
}

// k multiply-accumulates, counted as k additions plus k multiplications.
Tally mac(double k) { return ops(k, k); }

// Dense (p x q) * (q x r) product at textbook cost.
Tally matmul(int p, int q, int r) { return mac(static_cast<double>(p) * q * r); }

// One fully-connected layer in -> out: a MAC per weight (folding the bias
// addition into the accumulator count makes this exact), plus one
// comparison per unit when a ReLU follows.
Tally dense_layer(int in, int out, bool relu) {
  Tally t = mac(static_cast<double>(in) * out);
  if (relu) t.add += out;
  return t;
}

// Householder QR factorization of an r x c system plus one right-hand-side
// solve: 2rc^2 MACs to factor, 2rc to apply the reflections, c^2 to
// back-substitute, with c divisions and c column-norm square roots.
Tally qr_solve(int r, int c) {
  return mac(2.0 * r * c * c + 2.0 * r * c + static_cast<double>(c) * c) +
         ops(0, 0, c, c);
}

// Symmetric eigen-decomposition of a p x p matrix: (4/3)p^3 MACs to
// tridiagonalize plus ~30p^2 for the implicit-shift iterations, with 2p
// divisions and 2p square roots.  Rounded so every tally stays integral.
Tally sym_eigen(int p) {
  return mac(std::round(4.0 * p * p * p / 3.0) + 30.0 * p * p) +
         ops(0, 0, 2.0 * p, 2.0 * p);
}

// 3x3 SVD by Jacobi sweeps (bounded iteration): a flat documented charge.
Tally svd3() { return mac(600) + ops(0, 0, 30, 30); }

// One pseudo-random draw: a 64-bit integer mix, charged 5 adds + 5 muls.
Tally rng_draw() { return ops(5, 5); }

// ---- refinement-stage blocks ----

// Rodrigues rotation (squared norm, trig coefficients, skew square, and the
// three-term assembly) followed by the three axis-derivative matrices (the
// shared scalar prefix plus one scale-and-combine assembly per axis).
Tally rotation_eval() {
  const Tally rodrigues = ops(40, 48, 2, 3);
  const Tally derivative_prefix = ops(25, 35, 4, 3);
  const Tally derivative_axis = ops(72, 92);
  return rodrigues + derivative_prefix + 3.0 * derivative_axis;
}

// One correspondence through the projection residual and the 2x6 Jacobian:
// rotate-translate (9 MACs), depth guard, reciprocal depth, scaled image
// coordinates and the two residual rows, then the translation block and one
// rotated-derivative column pair per axis.
Tally residual_point() { return ops(12, 14, 1); }
Tally jacobian_point_extra() { return ops(0, 2) + 3.0 * ops(8, 15); }

// Robust reweighting of one point: residual norm, floor test, the power
// kernel (exp + log), one reciprocal, and the kernel-active test.  With the
// kernel inactive only the test remains.
Tally weight_point(bool weighted) { return weighted ? ops(2, 0, 1, 3) : ops(1, 0); }

// Accumulating one point's two residual rows into the 6x6 normal equations:
// per row, the weight scale (6 muls), the rank-one update (36 MACs), and the
// gradient contribution (7 muls + 6 adds).
Tally normal_accum_point() { return ops(84, 98); }

// Damped solve and parameter step: diagonal damping, a 6x6 LDLT factor and
// solve (p^3/3 + 2p^2 MACs, 2p divisions), the finite check, the normal-
// equation back-check with two vector norms, and the damped update.  The
// implementation escalates the damping only when the normal matrix is
// numerically singular; the count charges the non-degenerate single-attempt
// path (retries are bounded by four and independent of n and m).
Tally lm_step() {
  const Tally damping = ops(6, 6);
  const Tally ldlt = mac(6.0 * 6.0 * 6.0 / 3.0 + 2.0 * 36.0) + ops(0, 0, 12);
  const Tally backcheck = ops(54, 49, 0, 2);
  const Tally step = ops(6, 6);
  return damping + ldlt + backcheck + step;
}

// One unfolded refinement layer at problem size n, and the full m-layer
// stage.  Affine in n for fixed m and proportional to m by construction.
Tally refine_layer(int n, bool weighted) {
  const Tally per_point =
      residual_point() + jacobian_point_extra() + weight_point(weighted) + normal_accum_point();
  return rotation_eval() + static_cast<double>(n) * per_point + lm_step();
}

Tally refine_tally(int n, int m, bool weighted) {
  return static_cast<double>(m) * refine_layer(n, weighted);
}

// ---- initializer blocks ----

// Focal rescale: positivity test, one reciprocal scale, two muls per point.
Tally focal_norm_tally(int n) { return ops(1, 2.0 * n, 1); }

// Canonical ordering: a comparison sort charged at n ceil(log2 n)
// lexicographic comparisons of two scalar fields each.
Tally sort_tally(int n) {
  const double levels = std::ceil(std::log2(static_cast<double>(std::max(n, 2))));
  return ops(2.0 * n * levels, 0);
}

Tally net_forward_tally(int n) {
  Tally t;
  t += dense_layer(5 * n, 20 * n, true);
  t += dense_layer(20 * n, 5 * n, true);
  t += dense_layer(5 * n, 3 * n, true);
  for (int out : {4, 3}) {
    t += dense_layer(3 * n, 2 * n, true);
    for (int h = 0; h < 4; ++h) t += dense_layer(2 * n, 2 * n, true);
    t += dense_layer(2 * n, out, false);
  }
  return t;
}

// Axis-angle decode of the 7-vector network output: vector norm, degeneracy
// and clamp tests, the scale to angle times unit axis, and the canonical
// wrap (second norm).
Tally decode_tally() { return ops(8, 9, 1, 2); }

// ---- closed-form solver blocks ----

// Squared-reprojection scoring of one point inside candidate selection:
// rotate-translate, depth guard, two projected coordinates (a mul and a
// division each), two residual subtractions, and the squared accumulate.
Tally reprojection_point() { return ops(14, 13, 2); }

// Rigid alignment of the two control-point sets (k = 4): the two means, the
// 3x3 cross-covariance, a 3x3 SVD, the rotation product, determinant test,
// translation, and the log map back to axis-angle.
Tally procrustes_tally() {
  Tally t;
  t += ops(24, 0, 6);      // means
  t += ops(60, 36);        // cross-covariance
  t += svd3();
  t += matmul(3, 3, 3);    // compose the rotation
  t += ops(6, 9);          // determinant + reflection test
  t += ops(9, 9);          // translation
  t += ops(10, 4, 2, 2);   // log map
  return t;
}

// The closed-form solver at problem size n (spatial cloud, four control
// points, three combination candidates).  Affine in n: every stage is a
// constant or a per-point loop.
Tally epnp_tally(int n) {
  Tally t;
  // Control-point frame: centroid, covariance, 3x3 eigen-decomposition,
  // principal-direction control points, and one 4x4 QR factor reused to
  // express every point barycentrically (apply + back-substitute per row).
  t += ops(3.0 * n, 0, 3);
  t += ops(12.0 * n, 9.0 * n, 9);
  t += sym_eigen(3) + ops(2, 0, 0, 3);
  t += ops(9, 9);
  t += qr_solve(4, 4);
  t += static_cast<double>(n) * (mac(40) + ops(0, 0, 4));
  // Projective constraint system: fill the 2n x 12 matrix (three scaled
  // entries per point-control pair), form the 12x12 Gram matrix, decompose.
  t += ops(0, 12.0 * n);
  t += matmul(12, 2 * n, 12);
  t += sym_eigen(12);
  // Pairwise world control-point distances (six pairs).
  t += ops(30, 18);
  // Combination-coefficient candidates over one, two, three null directions.
  t += ops(54, 42, 1, 12);
  t += ops(74, 61, 0, 2) + qr_solve(6, 3);
  t += ops(129, 128, 0, 3) + qr_solve(6, 6);
  // Per candidate: ten polish iterations on the pairwise-distance residuals
  // (six pairs, nb combination coefficients), the reconstruction with its
  // depth-sign vote, the rigid alignment, reprojection scoring, and the
  // best-candidate test.
  for (int nb = 1; nb <= 3; ++nb) {
    const Tally polish_iter =
        ops(6.0 * (11.0 * nb + 3.0) + nb, 6.0 * (7.0 * nb + 3.0)) + qr_solve(6, nb);
    t += 10.0 * polish_iter;
    t += mac(12.0 * nb);
    t += static_cast<double>(n) * ops(4, 4);
    t += procrustes_tally();
    t += static_cast<double>(n) * reprojection_point();
    t += ops(1, 0);
  }
  return t;
}

// ---- hypothesize-and-verify ----

// Inlier scoring of one point: project, squared residual, threshold test,
// and the consensus accumulation.
Tally score_point() { return ops(16, 13, 2); }

int expected_iterations(const OpCountConfig& cfg) {
  const double ratio = std::clamp(cfg.ransac_inlier_ratio, 0.0, 1.0);
  const double wk = std::pow(ratio, cfg.ransac_subset);
  if (wk >= 1.0) return 1;
  if (wk <= 0.0) return cfg.ransac_max_iterations;
  const double needed = std::log1p(-cfg.ransac_confidence) / std::log1p(-wk);
  if (!(needed < static_cast<double>(cfg.ransac_max_iterations)))
    return cfg.ransac_max_iterations;
  return std::max(1, static_cast<int>(std::ceil(needed)));
}

Tally ransac_tally(int n, const OpCountConfig& cfg) {
  const int k = cfg.ransac_subset;
  const int iters = cfg.ransac_expected ? expected_iterations(cfg) : cfg.ransac_max_iterations;
  Tally per_iter;
  per_iter += static_cast<double>(k) * rng_draw();           // subset draw
  per_iter += epnp_tally(k) + refine_tally(k, cfg.m, false);  // hypothesis fit
  per_iter += static_cast<double>(n) * score_point();        // consensus scoring
  per_iter += ops(4, 0, 1, 4);  // adaptive-bound bookkeeping, charged every iteration
  // Terminal consensus refit, charged at the full problem size (upper bound).
  return static_cast<double>(iters) * per_iter + epnp_tally(n) + refine_tally(n, cfg.m, false);
}

OpCount finalize(const Tally& t, const OpCountConfig& cfg) {
  OpCount c;
  c.additions = t.add;
  c.multiplications = t.mul;
  c.divisions = t.div;
  c.transcendental = t.tr * cfg.transcendental_cost;
  c.total = c.additions + c.multiplications + c.divisions + c.transcendental;
  return c;
}

void validate_count_config(const OpCountConfig& cfg) {
  if (cfg.m < 1) throw SchemaError("counted layer count must be >= 1");
  if (cfg.ransac_max_iterations < 1) throw SchemaError("counted iteration cap must be >= 1");
  if (cfg.ransac_subset < 4) throw SchemaError("counted subset size must be >= 4");
  if (!(cfg.ransac_inlier_ratio >= 0.0 && cfg.ransac_inlier_ratio <= 1.0))
    throw SchemaError("counted inlier ratio must lie in [0, 1]");
  if (!(cfg.ransac_confidence > 0.0 && cfg.ransac_confidence < 1.0))
    throw SchemaError("counted confidence must lie in (0, 1)");
  if (!(cfg.transcendental_cost >= 0.0))
    throw SchemaError("transcendental cost must be >= 0");
}

}  // namespace

OpCount count_ops(const std::string& method, int n, const OpCountConfig& cfg) {
  if (n < 1) throw SchemaError("counted problem size must be >= 1");
  validate_count_config(cfg);
  Tally t;
  if (method == "net") {
    t = focal_norm_tally(n) + sort_tally(n) + net_forward_tally(n) + decode_tally();
  } else if (method == "refine") {
    t = refine_tally(n, cfg.m, true);
  } else if (method == "pnp-net") {
    t = focal_norm_tally(n) + sort_tally(n) + net_forward_tally(n) + decode_tally() +
        refine_tally(n, cfg.m, true);
  } else if (method == "epnp") {
    t = focal_norm_tally(n) + epnp_tally(n);
  } else if (method == "epnp-lm") {
    t = focal_norm_tally(n) + epnp_tally(n) + refine_tally(n, cfg.m, false);
  } else if (method == "ransac") {
    t = focal_norm_tally(n) + ransac_tally(n, cfg);
  } else {
    throw UnknownMethod(method);
  }
  return finalize(t, cfg);
}

OpCount count_refine_instrumented(int n, int m, bool weighted, const OpCountConfig& cfg) {
  if (n < 1) throw SchemaError("instrumented count needs n >= 1");
  if (m < 1) throw SchemaError("instrumented count needs m >= 1");
  validate_count_config(cfg);
  Tally t;
  for (int layer = 0; layer < m; ++layer) {
    t += ops(40, 48, 2, 3);  // Rodrigues assembly
    t += ops(25, 35, 4, 3);  // derivative scalar prefix + skew square
    for (int k = 0; k < 3; ++k) t += ops(72, 92);  // one derivative matrix
    for (int i = 0; i < n; ++i) {
      t += ops(12, 14, 1);  // projection residual
      t += ops(0, 2);       // translation block of the Jacobian
      for (int k = 0; k < 3; ++k) t += ops(8, 15);  // one axis column pair
      t += weight_point(weighted);
      t += ops(84, 98);  // normal-equation accumulation
    }
    t += lm_step();
  }
  return finalize(t, cfg);
}

}  // namespace pnpkit

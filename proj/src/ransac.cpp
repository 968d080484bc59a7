#include "pnpkit/ransac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnpkit/epnp.hpp"
#include "pnpkit/errors.hpp"
#include "pnpkit/rng.hpp"

namespace pnpkit {

void RansacConfig::validate() const {
  if (subset_size < 4) throw SchemaError("ransac subset size must be >= 4");
  if (max_iterations < 1) throw SchemaError("ransac iteration cap must be >= 1");
  if (!(inlier_threshold > 0)) throw SchemaError("ransac inlier threshold must be > 0");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw SchemaError("ransac confidence must lie in (0, 1)");
}

namespace {

// Per-point residual norms under a hypothesis; degenerate depth marks the
// point as an outlier rather than aborting the hypothesis.
void score_hypothesis(const Pose& pose, const ProblemInstance& inst, double threshold,
                      std::vector<std::uint8_t>& inliers, int& count, double& inlier_err) {
  const Eigen::Matrix3d R = pose.rot.matrix();
  const int n = inst.n();
  inliers.assign(n, 0);
  count = 0;
  inlier_err = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d p = R * inst.corrs[i].a + pose.t;
    if (std::abs(p.z()) < kDepthEps) continue;
    const double du = inst.intrinsics.f * p.x() / p.z() - inst.corrs[i].b.x();
    const double dv = inst.intrinsics.f * p.y() / p.z() - inst.corrs[i].b.y();
    const double err2 = du * du + dv * dv;
    if (err2 <= threshold * threshold) {
      inliers[i] = 1;
      ++count;
      inlier_err += err2;
    }
  }
}

ProblemInstance subset_instance(const ProblemInstance& inst, const std::vector<int>& idx) {
  ProblemInstance sub;
  sub.intrinsics = inst.intrinsics;
  sub.corrs.reserve(idx.size());
  for (int i : idx) sub.corrs.push_back(inst.corrs[i]);
  return sub;
}

// Iterations needed so that drawing one all-inlier subset has probability
// >= confidence, given the observed inlier ratio.
int adaptive_bound(double inlier_ratio, int subset_size, double confidence, int cap) {
  if (inlier_ratio <= 0.0) return cap;
  const double w_k = std::pow(inlier_ratio, subset_size);
  if (w_k >= 1.0) return 1;
  const double denom = std::log1p(-std::min(w_k, 1.0 - 1e-15));
  const double needed = std::log1p(-confidence) / denom;
  if (!(needed < static_cast<double>(cap))) return cap;
  return std::max(1, static_cast<int>(std::ceil(needed)));
}

}  // namespace

Pose ransac_solve(const ProblemInstance& inst, const RansacConfig& cfg,
                  const LMConfig& lm_cfg, RansacReport* report) {
  cfg.validate();
  lm_cfg.validate();
  const int n = inst.n();
  if (n < cfg.subset_size) throw InsufficientPoints(n, cfg.subset_size);

  RansacReport local;
  RansacReport& rep = report ? *report : local;
  rep = RansacReport{};
  rep.inlier_mask.assign(n, 0);

  Rng rng(cfg.seed);
  std::vector<int> order(n);
  Pose best_pose;
  double best_err = std::numeric_limits<double>::infinity();
  int bound = cfg.max_iterations;

  std::vector<std::uint8_t> inliers;
  for (int it = 0; it < bound; ++it) {
    ++rep.iterations;
    // Partial Fisher-Yates draw of subset_size distinct indices.
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = 0; i < cfg.subset_size; ++i) {
      const int j = i + static_cast<int>(rng.uniform_index(n - i));
      std::swap(order[i], order[j]);
    }
    const std::vector<int> idx(order.begin(), order.begin() + cfg.subset_size);

    Pose hyp;
    try {
      hyp = epnp_lm(subset_instance(inst, idx), lm_cfg);
    } catch (const Error&) {
      rep.hypothesis_inlier_counts.push_back(0);
      continue;  // degenerate subset; the draw still counts as an iteration
    }
    int count = 0;
    double err = 0.0;
    score_hypothesis(hyp, inst, cfg.inlier_threshold, inliers, count, err);
    rep.hypothesis_inlier_counts.push_back(count);
    if (count > rep.best_inlier_count ||
        (count == rep.best_inlier_count && rep.valid && err < best_err)) {
      rep.valid = true;
      rep.best_inlier_count = count;
      best_err = err;
      best_pose = hyp;
      rep.inlier_mask = inliers;
      bound = std::min(bound, adaptive_bound(static_cast<double>(count) / n, cfg.subset_size,
                                             cfg.confidence, cfg.max_iterations));
    } else if (!rep.valid) {
      rep.valid = true;  // first usable hypothesis, even with zero inliers
      best_pose = hyp;
      rep.inlier_mask = inliers;
      best_err = err;
    }
  }

  if (!rep.valid) {
    rep.best_inlier_error = 0.0;
    return Pose{};  // flagged identity
  }

  rep.best_inlier_error = best_err;

  // Final refit on the consensus set.
  std::vector<int> consensus;
  for (int i = 0; i < n; ++i)
    if (rep.inlier_mask[i]) consensus.push_back(i);
  if (static_cast<int>(consensus.size()) >= 4) {
    try {
      best_pose = epnp_lm(subset_instance(inst, consensus), lm_cfg);
    } catch (const Error&) {
      // keep the raw hypothesis when the consensus refit degenerates
    }
  }
  return best_pose;
}

}  // namespace pnpkit

#pragma once

// Randomized hypothesize-and-verify: fit candidate poses on random
// correspondence subsets, score them by inlier count, refit on the winner's
// consensus set.

#include <cstdint>
#include <vector>

#include "pnpkit/instance.hpp"
#include "pnpkit/refine.hpp"

namespace pnpkit {

struct RansacConfig {
  int subset_size = 7;
  int max_iterations = 200;
  double inlier_threshold = 3.0;  // pixels, on the per-point residual norm
  double confidence = 0.99;       // adaptive stopping target
  std::uint64_t seed = 0;

  void validate() const;  // throws SchemaError
};

struct RansacReport {
  bool valid = false;  // false when every subset fit failed
  int iterations = 0;
  int best_inlier_count = 0;
  double best_inlier_error = 0.0;            // total squared error over inliers
  std::vector<std::uint8_t> inlier_mask;     // consensus set of the winner
  std::vector<int> hypothesis_inlier_counts;  // one entry per sampled subset
};

// Returns the refit pose of the best hypothesis; identity with
// report->valid == false when no subset produced a usable fit.
Pose ransac_solve(const ProblemInstance& inst, const RansacConfig& cfg,
                  const LMConfig& lm_cfg, RansacReport* report = nullptr);

}  // namespace pnpkit

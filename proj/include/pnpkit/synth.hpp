#pragma once

// Synthetic problem generator: random poses from a box (or Gaussian) prior,
// visible world points sampled in the camera frame, Gaussian 3D/2D noise,
// and two mismatch mechanisms (wrong pairing, spurious detection).

#include <cstdint>
#include <vector>

#include "pnpkit/instance.hpp"
#include "pnpkit/rng.hpp"

namespace pnpkit {

enum class PosePrior { uniform_box, gaussian };

struct ScenarioConfig {
  int n = 9;
  PosePrior pose_prior = PosePrior::uniform_box;
  double t_box_halfwidth = 12.5;  // uniform prior: t per-axis in [-hw, hw]
  double gaussian_sigma = 25.0;   // gaussian prior: t per-axis std
  double theta_min = 0.0;
  double theta_max = 1.5707963267948966;  // pi/2

  // World points are drawn in the camera frame inside
  // [-point_halfwidth, point_halfwidth]^2 x [depth_min, depth_max]
  // and mapped to world coordinates through the inverse pose.
  double point_halfwidth = 10.0;
  double depth_min = 0.1;
  double depth_max = 80.0;

  double sigma3d = 0.05;  // std per world coordinate
  double sigma2d = 1.0;   // std per pixel coordinate
  double f = 800.0;       // generation focal length
  double image_halfwidth = 400.0;

  // Mismatches: count drawn uniformly from {0..outlier_count_max}, or pinned
  // to outlier_count_fixed when >= 0.  outlier_count_max < 0 means floor(n/3).
  int outlier_count_max = -1;
  int outlier_count_fixed = -1;

  std::uint64_t seed = 0;
  int max_resample = 1000;

  int effective_outlier_max() const { return outlier_count_max < 0 ? n / 3 : outlier_count_max; }
  void validate() const;  // throws SchemaError
};

// Pre-noise camera-frame points, for statistical tests of the noise model.
struct SampleDebug {
  std::vector<Eigen::Vector3d> camera_points;
};

Pose sample_pose(const ScenarioConfig& cfg, Rng& rng);

// Pose + noisy visible points; outlier mask present but all zero.  Throws
// ResampleLimitExceeded when no visible draw is found within max_resample.
ProblemInstance sample_instance(const ScenarioConfig& cfg, Rng& rng,
                                SampleDebug* debug = nullptr);

// Replaces the 2D observations of a drawn subset of correspondences:
// alternately the noisy projection of a different in-instance point (wrong
// pairing) and a uniform draw over the image (spurious detection).
// A count of zero leaves the instance untouched.
void inject_outliers(ProblemInstance& inst, Rng& rng, const ScenarioConfig& cfg);

// Instance `index` of the deterministic stream for cfg.seed.
ProblemInstance make_instance(const ScenarioConfig& cfg, std::uint64_t index);

}  // namespace pnpkit

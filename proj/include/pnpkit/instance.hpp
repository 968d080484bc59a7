#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pnpkit/geometry.hpp"

namespace pnpkit {

// Focal length every instance is rescaled to before hitting a solver or the
// network.  Matches the synthetic generator's default camera.
inline constexpr double kFocalConst = 800.0;

// One PnP problem: n correspondences, camera intrinsics, and (when it came
// from the generator or an annotated table) the ground-truth pose plus a mask
// marking which correspondences were corrupted into outliers.
struct ProblemInstance {
  CameraIntrinsics intrinsics;
  std::vector<Correspondence> corrs;
  std::optional<Pose> truth;
  std::optional<std::vector<std::uint8_t>> outlier_mask;

  int n() const { return static_cast<int>(corrs.size()); }
};

// Rescales the image points by f_const / f and sets f = f_const.  The 3D
// points are untouched: scaling the image side leaves the pose that projects
// onto the (rescaled) observations unchanged, which is the point of the
// normalization.  Throws NonPositiveFocal.
ProblemInstance normalize_focal(const ProblemInstance& inst, double f_const = kFocalConst);

// Sorts correspondences lexicographically by (b_x, b_y), breaking ties by
// (a_x, a_y, a_z), and permutes the outlier mask consistently.  Gives the
// network a canonical input ordering; solver results do not depend on it.
ProblemInstance sort_correspondences(const ProblemInstance& inst);

// Convenience composition used in front of the network: normalize then sort.
ProblemInstance preprocess(const ProblemInstance& inst, double f_const = kFocalConst);

}  // namespace pnpkit

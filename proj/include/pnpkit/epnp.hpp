#pragma once

// Closed-form pose from >= 4 correspondences via virtual control points:
// express world points barycentrically in a control-point frame, solve the
// projective constraints for the camera-frame control points through the
// null space of a 2n x 12 system, then rigidly align the two frames.

#include <vector>

#include "pnpkit/instance.hpp"
#include "pnpkit/refine.hpp"

namespace pnpkit {

// Control points (4 spatial, 3 when the cloud is planar) plus the n x k
// barycentric coefficients expressing each world point in that frame.
struct ControlPointFrame {
  std::vector<Eigen::Vector3d> c;
  Eigen::MatrixXd barycentric;  // rows sum to 1
};

// Centroid + principal-direction control points of the world cloud.
// Throws DegenerateConfiguration when the cloud is collinear,
// InsufficientPoints when fewer than 4 correspondences are given.
ControlPointFrame control_point_frame(const std::vector<Correspondence>& corrs);

// Closed-form pose; candidate null-space combinations are scored by total
// squared reprojection error and the best one is returned.
Pose epnp_solve(const ProblemInstance& inst);

// epnp_solve followed by the shared iterative refiner.
Pose epnp_lm(const ProblemInstance& inst, const LMConfig& cfg);

}  // namespace pnpkit

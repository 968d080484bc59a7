#pragma once

// Shared helpers for building deterministic random test instances.

#include <cmath>

#include "pnpkit/instance.hpp"
#include "pnpkit/rng.hpp"

namespace pnpkit::testutil {

inline Pose random_pose(Rng& rng, double theta_max = M_PI / 2) {
  Pose p;
  p.t = Eigen::Vector3d(rng.uniform(-12.5, 12.5), rng.uniform(-12.5, 12.5),
                        rng.uniform(-12.5, 12.5));
  const Eigen::Vector3d axis = rng.unit_sphere();
  p.rot = Rotation(rng.uniform(0.0, theta_max) * axis);
  return p;
}

// Noiseless instance with points drawn in the camera frame (always in front
// of the camera) and mapped to world coordinates through the inverse pose.
inline ProblemInstance exact_instance(Rng& rng, const Pose& pose, int n, double f = 800.0) {
  ProblemInstance inst;
  inst.intrinsics.f = f;
  inst.truth = pose;
  const Eigen::Matrix3d R = pose.rot.matrix();
  for (int i = 0; i < n; ++i) {
    Correspondence c;
    Eigen::Vector3d p;
    do {  // keep only points whose exact projection lands inside the image
      p = Eigen::Vector3d(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                          rng.uniform(0.1, 80.0));
    } while (std::abs(f * p.x() / p.z()) > 400.0 || std::abs(f * p.y() / p.z()) > 400.0);
    c.a = R.transpose() * (p - pose.t);
    // Projecting the stored world point through the model keeps noise-free
    // instances exactly on the measurement manifold.
    c.b = project(R, pose.t, f, c.a, i);
    inst.corrs.push_back(c);
  }
  inst.outlier_mask = std::vector<std::uint8_t>(n, 0);
  return inst;
}

inline Pose perturb_pose(Rng& rng, const Pose& pose, double rot_angle, double trans_dist) {
  Pose out;
  out.t = pose.t + trans_dist * rng.unit_sphere();
  const Eigen::Matrix3d Rp = rotation_matrix(rot_angle * rng.unit_sphere()) * pose.rot.matrix();
  out.rot = Rotation::from_matrix(Rp);
  return out;
}

}  // namespace pnpkit::testutil

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "pnpkit/geometry.hpp"
#include "pnpkit/instance.hpp"

namespace pnpkit {

// One fully connected layer computing y = W x + b, with W shaped out x in.
struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// Weights of the coarse-pose network.  A shared ReLU trunk consumes the
// flattened correspondence vector (a1, b1, ..., an, bn) of length 5n and
// feeds two decoupled ReLU heads: one regressing a 4-dim rotation code,
// one regressing the 3-dim translation.  Head output layers are linear.
struct NetParams {
  int n = 0;                           // correspondence count the net is built for
  std::vector<DenseLayer> trunk;       // 5n -> 20n -> 5n -> 3n
  std::vector<DenseLayer> head_rot;    // 3n -> 2n (x5) -> 4
  std::vector<DenseLayer> head_trans;  // 3n -> 2n (x5) -> 3

  // Throws ShapeMismatch when layer shapes do not chain from input size 5n
  // to the two output sizes, or when any parameter is non-finite.
  void validate() const;
  std::size_t parameter_count() const;
};

// Raw 7-dim network output: translation plus an unnormalized rotation axis
// and a separate angle.  The redundant axis norm is resolved downstream.
struct CoarsePose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d s_raw = Eigen::Vector3d::Zero();
  double theta = 0.0;

  Eigen::Matrix<double, 7, 1> vec() const;
  static CoarsePose from_vec(const Eigen::Matrix<double, 7, 1>& v);
};

// Fan-in-scaled uniform weights, zero biases, reproducible from the seed.
NetParams init_params(std::uint64_t seed, int n);

// Same layer shapes as `params`, every entry zero (gradient accumulator).
NetParams zeros_like(const NetParams& params);

// Deterministic forward pass.  The instance must already be preprocessed
// (normalized focal, sorted); throws ShapeMismatch when inst.n() != params.n.
CoarsePose net_forward(const NetParams& params, const ProblemInstance& inst);

// omega = theta_clamped * s_raw / |s_raw| with theta clamped to [0, pi];
// |s_raw| < 1e-8 maps to the identity rotation.
Pose coarse_to_pose(const CoarsePose& c);

// Exact reverse-mode gradient of <upstream, output-7-vector> with respect to
// every parameter, in a container with the same layout as `params`.  The
// ReLU subgradient at exactly zero is taken as zero.
NetParams net_backward(const NetParams& params, const ProblemInstance& inst,
                       const Eigen::Matrix<double, 7, 1>& upstream);

}  // namespace pnpkit

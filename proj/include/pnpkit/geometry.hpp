#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "pnpkit/errors.hpp"

namespace pnpkit {

// Depth magnitudes below this are treated as degenerate when projecting.
inline constexpr double kDepthEps = 1e-12;

// Angle below which rotation formulas switch to their second-order Taylor
// expansions (the exact formulas divide by theta).
inline constexpr double kSmallAngle = 1e-8;

// Rotation stored as an axis-angle vector omega = theta * s, with the angle
// wrapped onto [0, pi] at construction.  The rotation matrix is 2*pi periodic
// along rays through the origin, so wrapping never changes the rotation the
// vector represents; it only picks the canonical representative.
class Rotation {
 public:
  Rotation() : omega_(Eigen::Vector3d::Zero()) {}
  explicit Rotation(const Eigen::Vector3d& omega) : omega_(canonical(omega)) {}

  static Rotation identity() { return Rotation(); }

  // Log map.  Accurate over the whole angle range, including theta near 0
  // (skew part) and theta near pi (symmetric part).
  static Rotation from_matrix(const Eigen::Matrix3d& R);

  const Eigen::Vector3d& omega() const { return omega_; }
  double angle() const { return omega_.norm(); }
  Eigen::Matrix3d matrix() const;

  static Eigen::Vector3d canonical(const Eigen::Vector3d& omega);

 private:
  Eigen::Vector3d omega_;
};

struct Pose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Rotation rot;

  Pose() = default;
  Pose(const Eigen::Vector3d& t_in, const Rotation& r_in) : t(t_in), rot(r_in) {}
};

struct CameraIntrinsics {
  double f = 800.0;
};

struct Correspondence {
  Eigen::Vector3d a;  // 3D point, world frame
  Eigen::Vector2d b;  // 2D image point, origin at the principal point
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// Rodrigues map for a raw (not necessarily canonical) axis-angle vector, so
// optimizers can treat omega as a free 3-vector.
Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& omega);

// Derivatives dR/d(omega_k), k = 0..2, valid for any omega including the
// small-angle limit.
std::array<Eigen::Matrix3d, 3> rotation_matrix_derivatives(const Eigen::Vector3d& omega);

// Rotation matrix and its three derivatives evaluated together; the refiner
// hoists this per iteration since it is shared by every correspondence.
struct RotationEval {
  Eigen::Matrix3d R;
  std::array<Eigen::Matrix3d, 3> dR;
};
RotationEval eval_rotation(const Eigen::Vector3d& omega);

// Geodesic angle between two rotations, in [0, pi].  Implemented so that it
// is bitwise symmetric in its arguments.
double rotation_distance(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb);
double rotation_distance(const Rotation& ra, const Rotation& rb);

// Pinhole projection b = f * ((R a + t)_xy / (R a + t)_z).  Throws
// DegenerateDepth carrying `index` when |depth| < kDepthEps.
Eigen::Vector2d project(const Eigen::Matrix3d& R, const Eigen::Vector3d& t, double f,
                        const Eigen::Vector3d& a, int index = -1);
Eigen::Vector2d project(const Pose& pose, const CameraIntrinsics& K, const Eigen::Vector3d& a);

// Stacked residuals (prediction minus observation), rows (2i, 2i+1) for
// correspondence i.
Eigen::VectorXd residuals(const Pose& pose, const CameraIntrinsics& K,
                          const std::vector<Correspondence>& corrs);

// Analytic 2n x 6 Jacobian of the residuals; columns ordered
// (t_x, t_y, t_z, omega_x, omega_y, omega_z).
Eigen::MatrixXd jacobian(const Pose& pose, const CameraIntrinsics& K,
                         const std::vector<Correspondence>& corrs);

// Allocation-free combined evaluation used in iteration hot paths.  `r` must
// have size 2n and `J` (if non-null) 2n x 6 before the call.
void residuals_and_jacobian(const RotationEval& rot, const Eigen::Vector3d& t, double f,
                            const std::vector<Correspondence>& corrs, Eigen::VectorXd& r,
                            Eigen::Matrix<double, Eigen::Dynamic, 6>* J);

// Translation gap and rotation geodesic distance between two poses.
double translation_error(const Pose& estimate, const Pose& truth);
double rotation_error(const Pose& estimate, const Pose& truth);

}  // namespace pnpkit

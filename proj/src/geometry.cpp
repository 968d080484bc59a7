#include "pnpkit/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace pnpkit {

Eigen::Vector3d Rotation::canonical(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta <= M_PI) return omega;
  const Eigen::Vector3d s = omega / theta;
  double r = std::fmod(theta, 2.0 * M_PI);
  if (r <= M_PI) return s * r;
  // Angle in (pi, 2*pi): same rotation as angle 2*pi - r about -s.
  return s * (r - 2.0 * M_PI);
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& omega) {
  // R = I + A [w]x + B [w]x^2 with A = sin(th)/th, B = (1 - cos(th))/th^2.
  const double th2 = omega.squaredNorm();
  double A, B;
  if (th2 < kSmallAngle * kSmallAngle) {
    // Second-order Taylor: the dropped terms are O(th^4) <= 1e-32.
    A = 1.0 - th2 / 6.0;
    B = 0.5 - th2 / 24.0;
  } else {
    const double th = std::sqrt(th2);
    A = std::sin(th) / th;
    B = (1.0 - std::cos(th)) / th2;
  }
  const Eigen::Matrix3d M = skew(omega);
  return Eigen::Matrix3d::Identity() + A * M + B * (M * M);
}

std::array<Eigen::Matrix3d, 3> rotation_matrix_derivatives(const Eigen::Vector3d& omega) {
  // Differentiating R = I + A [w]x + B [w]x^2 in w_k:
  //   dR/dw_k = a' w_k [w]x + A [e_k]x + b' w_k [w]x^2 + B ([e_k]x [w]x + [w]x [e_k]x)
  // with a' = dA/dth / th = (th cos th - sin th)/th^3 and
  //      b' = dB/dth / th = (th sin th - 2(1 - cos th))/th^4.
  const double th2 = omega.squaredNorm();
  double A, B, ap, bp;
  if (th2 < kSmallAngle * kSmallAngle) {
    A = 1.0 - th2 / 6.0;
    B = 0.5 - th2 / 24.0;
    ap = -1.0 / 3.0 + th2 / 30.0;
    bp = -1.0 / 12.0 + th2 / 180.0;
  } else {
    const double th = std::sqrt(th2);
    const double s = std::sin(th);
    const double c = std::cos(th);
    A = s / th;
    B = (1.0 - c) / th2;
    ap = (th * c - s) / (th2 * th);
    bp = (th * s - 2.0 * (1.0 - c)) / (th2 * th2);
  }
  const Eigen::Matrix3d M = skew(omega);
  const Eigen::Matrix3d M2 = M * M;
  std::array<Eigen::Matrix3d, 3> dR;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Matrix3d Ek = skew(Eigen::Vector3d::Unit(k));
    dR[k] = (ap * omega[k]) * M + A * Ek + (bp * omega[k]) * M2 + B * (Ek * M + M * Ek);
  }
  return dR;
}

RotationEval eval_rotation(const Eigen::Vector3d& omega) {
  return RotationEval{rotation_matrix(omega), rotation_matrix_derivatives(omega)};
}

Eigen::Matrix3d Rotation::matrix() const { return rotation_matrix(omega_); }

Rotation Rotation::from_matrix(const Eigen::Matrix3d& R) {
  const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(c);
  // v = 2 sin(theta) * s from the antisymmetric part.
  const Eigen::Vector3d v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));

  if (theta < kSmallAngle) {
    // R = I + [w]x + O(th^2): v/2 recovers w to the same order.
    return Rotation(0.5 * v);
  }
  if (theta > M_PI - 1e-3) {
    // Near pi the trace loses angular resolution (acos flattens near -1), but
    // |v| = 2 sin(theta) still determines the gap to pi sharply.
    const double gap = std::asin(std::clamp(0.5 * v.norm(), 0.0, 1.0));
    // sin(theta) is tiny, so v is dominated by noise as a direction.  Use the
    // symmetric part instead: (R + R^T)/2 = c I + (1 - c) s s^T.
    const Eigen::Matrix3d S = 0.5 * (R + R.transpose());
    int i = 0;
    S.diagonal().maxCoeff(&i);
    Eigen::Vector3d s;
    s[i] = std::sqrt(std::max((S(i, i) - c) / (1.0 - c), 0.0));
    const int j = (i + 1) % 3;
    const int k = (i + 2) % 3;
    s[j] = S(i, j) / ((1.0 - c) * s[i]);
    s[k] = S(i, k) / ((1.0 - c) * s[i]);
    s.normalize();
    // s s^T loses the overall sign; take it from the antisymmetric part.  At
    // theta == pi exactly the sign does not matter (both vectors are
    // equivalent), so a zero dot product is fine to leave as-is.
    if (v.dot(s) < 0.0) s = -s;
    return Rotation((M_PI - gap) * s);
  }
  return Rotation((theta / (2.0 * std::sin(theta))) * v);
}

double rotation_distance(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb) {
  // trace(Ra Rb^T) = sum_ij Ra_ij Rb_ij; the elementwise form is bitwise
  // symmetric in (Ra, Rb).
  const double tr = Ra.cwiseProduct(Rb).sum();
  return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

double rotation_distance(const Rotation& ra, const Rotation& rb) {
  return rotation_distance(ra.matrix(), rb.matrix());
}

Eigen::Vector2d project(const Eigen::Matrix3d& R, const Eigen::Vector3d& t, double f,
                        const Eigen::Vector3d& a, int index) {
  const Eigen::Vector3d p = R * a + t;
  if (std::abs(p.z()) < kDepthEps) throw DegenerateDepth(index);
  // Same arithmetic as residuals_and_jacobian, so predictions agree bitwise.
  const double invz = 1.0 / p.z();
  return {f * (p.x() * invz), f * (p.y() * invz)};
}

Eigen::Vector2d project(const Pose& pose, const CameraIntrinsics& K, const Eigen::Vector3d& a) {
  return project(pose.rot.matrix(), pose.t, K.f, a);
}

Eigen::VectorXd residuals(const Pose& pose, const CameraIntrinsics& K,
                          const std::vector<Correspondence>& corrs) {
  const Eigen::Matrix3d R = pose.rot.matrix();
  Eigen::VectorXd r(2 * static_cast<int>(corrs.size()));
  for (int i = 0; i < static_cast<int>(corrs.size()); ++i) {
    const Eigen::Vector2d b = project(R, pose.t, K.f, corrs[i].a, i);
    r[2 * i] = b.x() - corrs[i].b.x();
    r[2 * i + 1] = b.y() - corrs[i].b.y();
  }
  return r;
}

void residuals_and_jacobian(const RotationEval& rot, const Eigen::Vector3d& t, double f,
                            const std::vector<Correspondence>& corrs, Eigen::VectorXd& r,
                            Eigen::Matrix<double, Eigen::Dynamic, 6>* J) {
  const int n = static_cast<int>(corrs.size());
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d p = rot.R * corrs[i].a + t;
    if (std::abs(p.z()) < kDepthEps) throw DegenerateDepth(i);
    const double invz = 1.0 / p.z();
    const double fz = f * invz;
    const double u = f * (p.x() * invz);
    const double v = f * (p.y() * invz);
    r[2 * i] = u - corrs[i].b.x();
    r[2 * i + 1] = v - corrs[i].b.y();
    if (J == nullptr) continue;
    // d(u,v)/dp = [fz 0 -u*invz; 0 fz -v*invz], dp/dt = I, dp/dw_k = dR_k a.
    auto& Jm = *J;
    Jm(2 * i, 0) = fz;
    Jm(2 * i, 1) = 0.0;
    Jm(2 * i, 2) = -u * invz;
    Jm(2 * i + 1, 0) = 0.0;
    Jm(2 * i + 1, 1) = fz;
    Jm(2 * i + 1, 2) = -v * invz;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d q = rot.dR[k] * corrs[i].a;
      Jm(2 * i, 3 + k) = fz * q.x() - u * invz * q.z();
      Jm(2 * i + 1, 3 + k) = fz * q.y() - v * invz * q.z();
    }
  }
}

Eigen::MatrixXd jacobian(const Pose& pose, const CameraIntrinsics& K,
                         const std::vector<Correspondence>& corrs) {
  const int n = static_cast<int>(corrs.size());
  Eigen::VectorXd r(2 * n);
  Eigen::Matrix<double, Eigen::Dynamic, 6> J(2 * n, 6);
  residuals_and_jacobian(eval_rotation(pose.rot.omega()), pose.t, K.f, corrs, r, &J);
  return J;
}

double translation_error(const Pose& estimate, const Pose& truth) {
  return (estimate.t - truth.t).norm();
}

double rotation_error(const Pose& estimate, const Pose& truth) {
  return rotation_distance(estimate.rot, truth.rot);
}

}  // namespace pnpkit

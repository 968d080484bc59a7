#include "pnpkit/epnp.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>

#include "pnpkit/errors.hpp"

namespace pnpkit {

namespace {

// Degeneracy thresholds on the singular values (stds) of the centered cloud,
// relative to the largest spread direction.
constexpr double kRankRelTol = 1e-7;

struct NullBasis {
  // Each column holds camera-frame control-point coordinates stacked as
  // k blocks of 3; columns are ordered by ascending eigenvalue of Mt*M.
  Eigen::MatrixXd v;
  int k;  // number of control points (3 or 4)
};

Eigen::Vector3d block3(const Eigen::VectorXd& x, int j) { return x.segment<3>(3 * j); }

// Pairwise index list for k control points: 6 pairs for k=4, 3 for k=3.
std::vector<std::pair<int, int>> pairs_of(int k) {
  std::vector<std::pair<int, int>> p;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) p.push_back({i, j});
  return p;
}

// Gauss-Newton polish of the combination coefficients beta so that the
// camera control points x = sum_k beta_k v_k reproduce the world
// control-point distances.  Fixed 10 iterations on the pairwise residuals
// ||sum beta w||^2 - d^2.
Eigen::VectorXd polish_betas(const NullBasis& basis, const std::vector<double>& d2,
                             Eigen::VectorXd beta) {
  const auto pr = pairs_of(basis.k);
  const int npair = static_cast<int>(pr.size());
  const int nb = static_cast<int>(beta.size());
  Eigen::VectorXd r(npair);
  Eigen::MatrixXd J(npair, nb);
  for (int it = 0; it < 10; ++it) {
    for (int p = 0; p < npair; ++p) {
      Eigen::Vector3d diff = Eigen::Vector3d::Zero();
      for (int b = 0; b < nb; ++b)
        diff += beta[b] * (block3(basis.v.col(b), pr[p].first) -
                           block3(basis.v.col(b), pr[p].second));
      r[p] = diff.squaredNorm() - d2[p];
      for (int b = 0; b < nb; ++b)
        J(p, b) = 2.0 * diff.dot(block3(basis.v.col(b), pr[p].first) -
                                 block3(basis.v.col(b), pr[p].second));
    }
    const Eigen::VectorXd step = J.colPivHouseholderQr().solve(-r);
    if (!step.allFinite()) break;
    beta += step;
  }
  return beta;
}

// Camera-frame control points for one beta candidate, sign-fixed so that
// the majority of reconstructed point depths are positive.
Eigen::VectorXd candidate_points(const NullBasis& basis, const Eigen::VectorXd& beta,
                                 const Eigen::MatrixXd& bary) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3 * basis.k);
  for (int b = 0; b < beta.size(); ++b) x += beta[b] * basis.v.col(b);
  int pos = 0, neg = 0;
  for (int i = 0; i < bary.rows(); ++i) {
    double z = 0;
    for (int j = 0; j < basis.k; ++j) z += bary(i, j) * x[3 * j + 2];
    (z > 0 ? pos : neg)++;
  }
  if (neg > pos) x = -x;
  return x;
}

// Rigid alignment camera = R * world + t between the two control-point sets
// (orthogonal Procrustes, reflection guarded to keep det(R) = +1).
Pose procrustes(const std::vector<Eigen::Vector3d>& world, const Eigen::VectorXd& cam) {
  const int k = static_cast<int>(world.size());
  Eigen::Vector3d mw = Eigen::Vector3d::Zero(), mc = Eigen::Vector3d::Zero();
  for (int j = 0; j < k; ++j) {
    mw += world[j];
    mc += cam.segment<3>(3 * j);
  }
  mw /= k;
  mc /= k;
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (int j = 0; j < k; ++j)
    H += (cam.segment<3>(3 * j) - mc) * (world[j] - mw).transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
    fix(2, 2) = -1.0;
    R = svd.matrixU() * fix * svd.matrixV().transpose();
  }
  Pose pose;
  pose.rot = Rotation::from_matrix(R);
  pose.t = mc - R * mw;
  return pose;
}

// Total squared reprojection error with a guard against vanishing depth;
// candidates that push points onto the principal plane score infinity.
double reprojection_sq(const Pose& pose, const ProblemInstance& inst) {
  const Eigen::Matrix3d R = pose.rot.matrix();
  double total = 0;
  for (const auto& c : inst.corrs) {
    const Eigen::Vector3d p = R * c.a + pose.t;
    if (std::abs(p.z()) < kDepthEps) return std::numeric_limits<double>::infinity();
    const double u = inst.intrinsics.f * p.x() / p.z() - c.b.x();
    const double v = inst.intrinsics.f * p.y() / p.z() - c.b.y();
    total += u * u + v * v;
  }
  return total;
}

}  // namespace

ControlPointFrame control_point_frame(const std::vector<Correspondence>& corrs) {
  const int n = static_cast<int>(corrs.size());
  if (n < 4) throw InsufficientPoints(n, 4);

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& c : corrs) centroid += c.a;
  centroid /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& c : corrs) cov += (c.a - centroid) * (c.a - centroid).transpose();
  cov /= n;

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);  // ascending
  const Eigen::Vector3d s = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  if (s[1] <= kRankRelTol * s[2])
    throw DegenerateConfiguration("world points are collinear");
  const bool planar = s[0] <= kRankRelTol * s[2];

  ControlPointFrame frame;
  frame.c.push_back(centroid);
  for (int k = 2; k >= (planar ? 1 : 0); --k)
    frame.c.push_back(centroid + s[k] * eig.eigenvectors().col(k));

  const int k = static_cast<int>(frame.c.size());
  Eigen::MatrixXd T(4, k);
  for (int j = 0; j < k; ++j) {
    T.block<3, 1>(0, j) = frame.c[j];
    T(3, j) = 1.0;
  }
  const auto solver = T.colPivHouseholderQr();
  frame.barycentric.resize(n, k);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector4d rhs;
    rhs << corrs[i].a, 1.0;
    frame.barycentric.row(i) = solver.solve(rhs).transpose();
  }
  return frame;
}

Pose epnp_solve(const ProblemInstance& inst) {
  const int n = inst.n();
  const ControlPointFrame frame = control_point_frame(inst.corrs);
  const int k = static_cast<int>(frame.c.size());
  const double f = inst.intrinsics.f;

  // Projective constraints on the camera-frame control points.
  Eigen::MatrixXd M(2 * n, 3 * k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const double a = frame.barycentric(i, j);
      M(2 * i, 3 * j) = a * f;
      M(2 * i, 3 * j + 1) = 0.0;
      M(2 * i, 3 * j + 2) = -a * inst.corrs[i].b.x();
      M(2 * i + 1, 3 * j) = 0.0;
      M(2 * i + 1, 3 * j + 1) = a * f;
      M(2 * i + 1, 3 * j + 2) = -a * inst.corrs[i].b.y();
    }
  }
  const Eigen::MatrixXd MtM = M.transpose() * M;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(MtM);  // ascending

  NullBasis basis;
  basis.k = k;
  const int nv = k == 4 ? 4 : 3;
  basis.v = eig.eigenvectors().leftCols(nv);

  // World control-point pairwise squared distances.
  const auto pr = pairs_of(k);
  std::vector<double> d2;
  for (const auto& [i, j] : pr) d2.push_back((frame.c[i] - frame.c[j]).squaredNorm());

  // Candidate combination coefficients for N = 1, 2 (and 3 when spatial).
  std::vector<Eigen::VectorXd> candidates;
  {
    // N = 1: single null vector, scale from the distance ratio.
    double num = 0, den = 0;
    for (std::size_t p = 0; p < pr.size(); ++p) {
      const Eigen::Vector3d w =
          block3(basis.v.col(0), pr[p].first) - block3(basis.v.col(0), pr[p].second);
      num += w.norm() * std::sqrt(d2[p]);
      den += w.squaredNorm();
    }
    Eigen::VectorXd beta(1);
    beta << (den > 0 ? num / den : 0.0);
    candidates.push_back(beta);
  }
  {
    // N = 2: linear system in (b1^2, b1 b2, b2^2).
    Eigen::MatrixXd L(pr.size(), 3);
    Eigen::VectorXd rhs(pr.size());
    for (std::size_t p = 0; p < pr.size(); ++p) {
      const Eigen::Vector3d w1 =
          block3(basis.v.col(0), pr[p].first) - block3(basis.v.col(0), pr[p].second);
      const Eigen::Vector3d w2 =
          block3(basis.v.col(1), pr[p].first) - block3(basis.v.col(1), pr[p].second);
      L.row(p) << w1.squaredNorm(), 2.0 * w1.dot(w2), w2.squaredNorm();
      rhs[p] = d2[p];
    }
    const Eigen::Vector3d rho = L.colPivHouseholderQr().solve(rhs);
    Eigen::VectorXd beta(2);
    beta[0] = std::sqrt(std::abs(rho[0]));
    beta[1] = std::sqrt(std::abs(rho[2])) * (rho[1] < 0 ? -1.0 : 1.0);
    candidates.push_back(beta);
  }
  if (k == 4) {
    // N = 3: exact 6x6 system in the quadratic monomials.
    Eigen::MatrixXd L(6, 6);
    Eigen::VectorXd rhs(6);
    for (std::size_t p = 0; p < pr.size(); ++p) {
      std::array<Eigen::Vector3d, 3> w;
      for (int b = 0; b < 3; ++b)
        w[b] = block3(basis.v.col(b), pr[p].first) - block3(basis.v.col(b), pr[p].second);
      L.row(p) << w[0].squaredNorm(), 2.0 * w[0].dot(w[1]), w[1].squaredNorm(),
          2.0 * w[0].dot(w[2]), 2.0 * w[1].dot(w[2]), w[2].squaredNorm();
      rhs[p] = d2[p];
    }
    const Eigen::VectorXd rho = L.colPivHouseholderQr().solve(rhs);
    Eigen::VectorXd beta(3);
    beta[0] = std::sqrt(std::abs(rho[0]));
    beta[1] = std::sqrt(std::abs(rho[2])) * (rho[1] < 0 ? -1.0 : 1.0);
    beta[2] = std::sqrt(std::abs(rho[5])) * (rho[3] < 0 ? -1.0 : 1.0);
    candidates.push_back(beta);
  }

  Pose best;
  double best_err = std::numeric_limits<double>::infinity();
  for (auto& beta0 : candidates) {
    const Eigen::VectorXd beta = polish_betas(basis, d2, beta0);
    if (!beta.allFinite()) continue;
    const Eigen::VectorXd x = candidate_points(basis, beta, frame.barycentric);
    const Pose pose = procrustes(frame.c, x);
    const double err = reprojection_sq(pose, inst);
    if (err < best_err) {
      best_err = err;
      best = pose;
    }
  }
  if (!std::isfinite(best_err))
    throw DegenerateConfiguration("no control-point candidate projects in front of the camera");
  return best;
}

Pose epnp_lm(const ProblemInstance& inst, const LMConfig& cfg) {
  return refine(epnp_solve(inst), inst, cfg);
}

}  // namespace pnpkit

#include "pnpkit/synth.hpp"

#include <cmath>

#include "pnpkit/errors.hpp"
#include "pnpkit/geometry.hpp"

namespace pnpkit {

void ScenarioConfig::validate() const {
  if (n < 4) throw SchemaError("scenario needs n >= 4 correspondences");
  if (sigma3d < 0 || sigma2d < 0) throw SchemaError("noise sigmas must be >= 0");
  if (!(f > 0)) throw SchemaError("generation focal length must be > 0");
  if (!(theta_min <= theta_max) || theta_min < 0) throw SchemaError("bad rotation angle range");
  if (!(depth_min > 0 && depth_min < depth_max)) throw SchemaError("bad depth range");
  if (!(point_halfwidth > 0) || !(image_halfwidth > 0))
    throw SchemaError("box half-widths must be > 0");
  if (effective_outlier_max() > n || outlier_count_fixed > n)
    throw SchemaError("outlier count cannot exceed n");
  if (max_resample < 1) throw SchemaError("resample limit must be >= 1");
}

Pose sample_pose(const ScenarioConfig& cfg, Rng& rng) {
  Pose pose;
  for (int k = 0; k < 3; ++k)
    pose.t[k] = cfg.pose_prior == PosePrior::uniform_box
                    ? rng.uniform(-cfg.t_box_halfwidth, cfg.t_box_halfwidth)
                    : rng.normal(0.0, cfg.gaussian_sigma);
  const Eigen::Vector3d axis = rng.unit_sphere();
  pose.rot = Rotation(rng.uniform(cfg.theta_min, cfg.theta_max) * axis);
  return pose;
}

ProblemInstance sample_instance(const ScenarioConfig& cfg, Rng& rng, SampleDebug* debug) {
  cfg.validate();
  const Pose pose = sample_pose(cfg, rng);
  const Eigen::Matrix3d R = pose.rot.matrix();

  ProblemInstance inst;
  inst.intrinsics.f = cfg.f;
  inst.truth = pose;
  inst.corrs.resize(cfg.n);
  inst.outlier_mask = std::vector<std::uint8_t>(cfg.n, 0);
  std::vector<Eigen::Vector3d> cam(cfg.n);

  for (int attempt = 0; attempt < cfg.max_resample; ++attempt) {
    bool ok = true;
    for (int i = 0; i < cfg.n; ++i) {
      cam[i] = Eigen::Vector3d(rng.uniform(-cfg.point_halfwidth, cfg.point_halfwidth),
                               rng.uniform(-cfg.point_halfwidth, cfg.point_halfwidth),
                               rng.uniform(cfg.depth_min, cfg.depth_max));
      Correspondence& c = inst.corrs[i];
      const Eigen::Vector3d a_true = R.transpose() * (cam[i] - pose.t);
      c.a = a_true;
      if (cfg.sigma3d > 0)
        c.a += Eigen::Vector3d(rng.normal(0, cfg.sigma3d), rng.normal(0, cfg.sigma3d),
                               rng.normal(0, cfg.sigma3d));
      // Derive the exact observation by projecting the stored world point
      // through the model itself, so noise-free instances satisfy the
      // measurement equation bitwise rather than up to round-trip rounding.
      cam[i] = R * a_true + pose.t;
      if (std::abs(cam[i].z()) < kDepthEps) {
        ok = false;
        break;
      }
      c.b = project(R, pose.t, cfg.f, a_true, i);
      if (cfg.sigma2d > 0)
        c.b += Eigen::Vector2d(rng.normal(0, cfg.sigma2d), rng.normal(0, cfg.sigma2d));
      // The noisy observation must land inside the image, and the noisy world
      // point must keep strictly positive depth at the true pose.
      if (std::abs(c.b.x()) > cfg.image_halfwidth || std::abs(c.b.y()) > cfg.image_halfwidth ||
          (R * c.a + pose.t).z() < kDepthEps) {
        ok = false;
        break;
      }
    }
    if (ok) {
      if (debug) debug->camera_points = cam;
      return inst;
    }
  }
  throw ResampleLimitExceeded(cfg.max_resample);
}

void inject_outliers(ProblemInstance& inst, Rng& rng, const ScenarioConfig& cfg) {
  if (!inst.truth) throw MissingGroundTruth();
  const int n = inst.n();
  const int cap = std::min(cfg.outlier_count_fixed < 0 ? cfg.effective_outlier_max()
                                                       : cfg.outlier_count_fixed,
                           n);
  const int count = cfg.outlier_count_fixed < 0
                        ? static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cap) + 1))
                        : cap;
  if (count == 0) return;  // consumes no further randomness

  if (!inst.outlier_mask) inst.outlier_mask = std::vector<std::uint8_t>(n, 0);

  // Draw `count` distinct slots (partial Fisher-Yates).
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(n - i));
    std::swap(order[i], order[j]);
  }

  // Alternate mechanisms, wrong pairing first.
  std::vector<int> wrong_match, wrong_sense;
  for (int i = 0; i < count; ++i)
    (i % 2 == 0 ? wrong_match : wrong_sense).push_back(order[i]);

  const std::vector<Correspondence> before = inst.corrs;
  if (wrong_match.size() >= 2) {
    // Cyclic shift of the observed projections among the wrong-pairing slots.
    for (std::size_t i = 0; i < wrong_match.size(); ++i)
      inst.corrs[wrong_match[i]].b = before[wrong_match[(i + 1) % wrong_match.size()]].b;
  } else if (wrong_match.size() == 1) {
    // Single slot: borrow the projection of some other point.
    const int slot = wrong_match[0];
    int other = static_cast<int>(rng.uniform_index(n - 1));
    if (other >= slot) ++other;
    inst.corrs[slot].b = before[other].b;
  }
  for (int slot : wrong_sense)
    inst.corrs[slot].b = Eigen::Vector2d(rng.uniform(-cfg.image_halfwidth, cfg.image_halfwidth),
                                         rng.uniform(-cfg.image_halfwidth, cfg.image_halfwidth));
  for (int i = 0; i < count; ++i) (*inst.outlier_mask)[order[i]] = 1;
}

ProblemInstance make_instance(const ScenarioConfig& cfg, std::uint64_t index) {
  Rng rng(mix_seed(cfg.seed, index));
  ProblemInstance inst = sample_instance(cfg, rng);
  inject_outliers(inst, rng, cfg);
  return inst;
}

}  // namespace pnpkit

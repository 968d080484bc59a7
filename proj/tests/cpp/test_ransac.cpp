#include <doctest.h>

#include <algorithm>

#include "pnpkit/epnp.hpp"
#include "pnpkit/ransac.hpp"
#include "util.hpp"

using namespace pnpkit;
using namespace pnpkit::testutil;

TEST_SUITE_BEGIN("ransac");

TEST_CASE("clean data: full consensus refit equals the direct baseline") {
  Rng rng(70);
  const LMConfig lm = LMConfig::gauss_newton(10);
  int full_consensus = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Pose truth = random_pose(rng);
    ProblemInstance inst = exact_instance(rng, truth, 9);
    for (auto& c : inst.corrs)
      c.b += Eigen::Vector2d(rng.normal(0, 0.3), rng.normal(0, 0.3));
    RansacConfig cfg;
    cfg.seed = 1000 + trial;
    RansacReport rep;
    const Pose est = ransac_solve(inst, cfg, lm, &rep);
    REQUIRE(rep.valid);
    if (rep.best_inlier_count == 9) {
      ++full_consensus;
      const Pose direct = epnp_lm(inst, lm);  // same code path on the same set
      CHECK(est.t == direct.t);
      CHECK(est.rot.omega() == direct.rot.omega());
    }
  }
  CHECK(full_consensus >= 18);  // 0.3 px noise vs 3 px threshold
}

TEST_CASE("two gross mismatches: consensus excludes them and the pose stays accurate") {
  Rng rng(71);
  const LMConfig lm = LMConfig::gauss_newton(10);
  const double tr = 1.0 * M_PI / 180.0;
  int hits = 0, clean_consensus = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const Pose truth = random_pose(rng);
    ProblemInstance inst = exact_instance(rng, truth, 9);
    for (auto& c : inst.corrs) c.b += Eigen::Vector2d(rng.normal(0, 1), rng.normal(0, 1));
    for (int k = 0; k < 2; ++k)
      inst.corrs[k].b = Eigen::Vector2d(rng.uniform(-400, 400), rng.uniform(-400, 400));
    RansacConfig cfg;
    cfg.seed = 2000 + trial;
    RansacReport rep;
    const Pose est = ransac_solve(inst, cfg, lm, &rep);
    REQUIRE(rep.valid);
    if (rotation_error(est, truth) < tr &&
        translation_error(est, truth) < 0.2 * truth.t.norm())
      ++hits;
    if (!rep.inlier_mask[0] && !rep.inlier_mask[1]) ++clean_consensus;
  }
  CHECK(hits >= 190);            // >= 95%: the accuracy reference
  CHECK(clean_consensus >= 190);
}

TEST_CASE("identical seeds give bitwise identical poses") {
  Rng rng(72);
  const Pose truth = random_pose(rng);
  ProblemInstance inst = exact_instance(rng, truth, 9);
  for (auto& c : inst.corrs) c.b += Eigen::Vector2d(rng.normal(0, 1), rng.normal(0, 1));
  inst.corrs[4].b = Eigen::Vector2d(rng.uniform(-400, 400), rng.uniform(-400, 400));
  RansacConfig cfg;
  cfg.seed = 99;
  const LMConfig lm = LMConfig::gauss_newton(10);
  const Pose a = ransac_solve(inst, cfg, lm);
  const Pose b = ransac_solve(inst, cfg, lm);
  CHECK(a.t.x() == b.t.x());
  CHECK(a.t.y() == b.t.y());
  CHECK(a.t.z() == b.t.z());
  CHECK(a.rot.omega() == b.rot.omega());
}

TEST_CASE("winner's inlier count dominates every sampled hypothesis") {
  Rng rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose truth = random_pose(rng);
    ProblemInstance inst = exact_instance(rng, truth, 9);
    for (auto& c : inst.corrs) c.b += Eigen::Vector2d(rng.normal(0, 1), rng.normal(0, 1));
    inst.corrs[0].b = Eigen::Vector2d(rng.uniform(-400, 400), rng.uniform(-400, 400));
    RansacConfig cfg;
    cfg.seed = 3000 + trial;
    RansacReport rep;
    ransac_solve(inst, cfg, LMConfig::gauss_newton(10), &rep);
    REQUIRE(!rep.hypothesis_inlier_counts.empty());
    const int max_seen =
        *std::max_element(rep.hypothesis_inlier_counts.begin(), rep.hypothesis_inlier_counts.end());
    CHECK(rep.best_inlier_count == max_seen);
    CHECK(rep.iterations == static_cast<int>(rep.hypothesis_inlier_counts.size()));
  }
}

TEST_CASE("adaptive stopping ends far below the cap when data are clean") {
  Rng rng(74);
  const Pose truth = random_pose(rng);
  const ProblemInstance inst = exact_instance(rng, truth, 9);  // noiseless
  RansacConfig cfg;
  cfg.seed = 5;
  RansacReport rep;
  ransac_solve(inst, cfg, LMConfig::gauss_newton(10), &rep);
  CHECK(rep.best_inlier_count == 9);
  CHECK(rep.iterations == 1);  // full consensus on the first draw stops immediately
}

TEST_CASE("too few points throw, degenerate geometry flags instead") {
  Rng rng(75);
  const Pose truth = random_pose(rng);
  const ProblemInstance small = exact_instance(rng, truth, 6);
  RansacConfig cfg;
  CHECK_THROWS_AS(ransac_solve(small, cfg, LMConfig::gauss_newton(10)), InsufficientPoints);

  // Collinear cloud: every subset fit fails, result is a flagged identity.
  ProblemInstance line;
  line.intrinsics.f = 800.0;
  const Eigen::Vector3d dir = rng.unit_sphere();
  for (int i = 0; i < 8; ++i) {
    Correspondence c;
    c.a = Eigen::Vector3d(0.3, -0.2, 25.0) + i * 0.5 * dir;
    c.b = Eigen::Vector2d(10.0 * i, 5.0);
    line.corrs.push_back(c);
  }
  RansacReport rep;
  const Pose est = ransac_solve(line, cfg, LMConfig::gauss_newton(10), &rep);
  CHECK_FALSE(rep.valid);
  CHECK(est.t == Eigen::Vector3d::Zero());
  CHECK(est.rot.angle() == 0.0);
}

TEST_SUITE_END();

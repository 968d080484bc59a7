#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <tuple>
#include <vector>

#include "pnpkit/net.hpp"
#include "pnpkit/refine.hpp"
#include "pnpkit/synth.hpp"

namespace pnpkit {

// Coefficients of the four pose-distance terms of the training objective.
// The curriculum multiplies the refined-stage pair during training.
struct LossWeights {
  double t_coarse = 1.0;
  double r_coarse = 1.0;
  double t_refined = 1.0;
  double r_refined = 1.0;
};

struct LossBreakdown {
  double t_coarse = 0.0, r_coarse = 0.0, t_refined = 0.0, r_refined = 0.0;
  double total = 0.0;
};

// total = w1*|t_c - t| + w2*d(R_c, R) + w3*|t_f - t| + w4*d(R_f, R).
// Throws MissingGroundTruth when the instance carries no true pose.
LossBreakdown loss(const ProblemInstance& inst, const Pose& coarse, const Pose& refined,
                   const LossWeights& w);

struct TrainConfig {
  int batch_size = 128;
  long long total_updates = 20000;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Refined-stage loss weight ramps linearly from 0 to 1 between these two
  // fractions of total_updates; it is exactly 0 before the ramp starts.
  double curriculum_start = 0.5;
  double curriculum_end = 0.75;
  LossWeights loss_weights;
  double fd_step = 1e-4;  // step for refined-stage finite differences
  // Refined-stage gradients are estimated on this many samples per batch
  // (the leading ones, fixed order); the coarse-stage gradient always uses
  // the full batch.  Bounds the 2*(7+3m) refine evaluations per probe.
  int fd_probes = 16;
  int refine_layers = 10;  // m of the trained refiner
  long long checkpoint_every = 1000;
  int val_size = 256;  // held-out instances scored at every checkpoint
  std::uint64_t seed = 0;

  void validate() const;
  // Refined-stage multiplier in [0, 1] for a given update index;
  // non-decreasing, exactly 0 before curriculum_start * total_updates.
  double curriculum_weight(long long update) const;
};

struct CheckpointRecord {
  long long update = 0;  // parameter updates applied so far
  // Batch averages; absent at the update-0 record (no batch yet), and the
  // final-stage value is absent while the curriculum keeps that stage off.
  std::optional<double> train_loss_intermediate;
  std::optional<double> train_loss_final;
  double val_loss_intermediate = 0.0;
  double val_loss_final = 0.0;
  double val_joint_success = 0.0;  // refined pose, 1 degree / 0.2 relative
};

struct TrainReport {
  std::vector<CheckpointRecord> checkpoints;
  long long updates = 0;
  // Wall-clock is process-local diagnostics; serialized logs exclude it so
  // identical seeds produce identical artifacts.
  double wall_seconds = 0.0;
};

// Complete optimization state; checkpointing it allows bit-exact resume.
struct TrainState {
  NetParams net;
  // Unconstrained forms of the per-layer refiner schedule, 3 per layer in
  // (alpha, gamma, lambda) order; the constrained value is softplus(u),
  // keeping every hyperparameter strictly positive under every update.
  Eigen::VectorXd hyper_u;
  NetParams adam_m, adam_v;        // first/second moments for net parameters
  Eigen::VectorXd hyper_m, hyper_v;
  long long update = 0;

  // Trained refiner configuration implied by hyper_u.
  LMConfig lm() const;
};

double softplus(double u);
double softplus_inverse(double x);

// Fresh state: fan-in-initialized net for scenario's n, refiner schedule
// started at alpha = 1, gamma = 0.5, lambda = 1e-3 on every layer.
TrainState init_train_state(const TrainConfig& tc, const ScenarioConfig& sc);

// Central-difference sensitivities of the refined pose (t, omega) to the 7
// coarse network outputs and to each per-layer hyperparameter.
struct FdSensitivity {
  Eigen::Matrix<double, 6, 7> d_coarse = Eigen::Matrix<double, 6, 7>::Zero();
  // 3m columns in (alpha_0, gamma_0, lambda_0, alpha_1, ...) order.
  Eigen::Matrix<double, 6, Eigen::Dynamic> d_hyper;
  // True when a perturbed evaluation failed; its column is left zero.
  bool masked = false;
};

FdSensitivity fd_pose_sensitivity(const ProblemInstance& inst, const CoarsePose& coarse,
                                  const LMConfig& cfg, double fd_step);

// Called after each scheduled checkpoint (and once at update 0).
using CheckpointSink = std::function<void(const TrainState&, const CheckpointRecord&)>;

// Runs Adam from state.update to tc.total_updates on the scenario stream.
// Deterministic for fixed (tc, sc, state).  Throws NonFiniteLoss leaving
// `state` at the last finite update (checkpoints already emitted survive).
// `run_until` pauses the run at an earlier update without altering the
// schedule (the curriculum stays pinned to total_updates); a later call with
// the same config resumes the identical trajectory.
TrainReport train(const TrainConfig& tc, const ScenarioConfig& sc, TrainState& state,
                  const CheckpointSink& sink = nullptr, long long run_until = -1);

// Convenience wrapper: fresh state, full run.
std::tuple<NetParams, LMConfig, TrainReport> train(const TrainConfig& tc,
                                                   const ScenarioConfig& sc);

}  // namespace pnpkit

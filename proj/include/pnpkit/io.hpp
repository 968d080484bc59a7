#pragma once

// File formats: the versioned text dataset format, the binary weight
// container (exact round-trip of every parameter, optionally including
// optimizer state for resume), CSV report writers, and the importer that
// maps externally exported correspondence tables into the dataset format.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "pnpkit/bench.hpp"
#include "pnpkit/instance.hpp"
#include "pnpkit/train.hpp"

namespace pnpkit {

// ---- dataset records (line-oriented text, version header, %.17g floats) ----
//
//   pnpkit-dataset 1
//   count <N>
//   instance <k>
//   f <focal>
//   n <points>
//   truth <tx> <ty> <tz> <wx> <wy> <wz>     (omitted when unknown)
//   outliers <m_0> ... <m_{n-1}>            (omitted when unknown)
//   point <ax> <ay> <az> <bx> <by>          (n lines)
//
// Every float is printed with 17 significant digits, so write -> read ->
// write reproduces the file byte for byte.

void write_dataset(std::ostream& out, const std::vector<ProblemInstance>& instances);
std::vector<ProblemInstance> read_dataset(std::istream& in);
void save_dataset(const std::string& path, const std::vector<ProblemInstance>& instances);
std::vector<ProblemInstance> load_dataset(const std::string& path);

// ---- weight container (binary, magic + version) ----
//
// Holds the network, the refiner schedule it was trained with, the input
// normalization focal, and optionally the full optimizer state (moment
// vectors, unconstrained schedule, update counter) so training can resume
// bit-exactly.  Raw IEEE-754 doubles, little-endian byte order.

struct WeightBundle {
  NetParams net;
  LMConfig lm = LMConfig::gauss_newton();
  double f_const = kFocalConst;

  bool has_optimizer = false;
  Eigen::VectorXd hyper_u, hyper_m, hyper_v;  // size 3m when has_optimizer
  NetParams adam_m, adam_v;
  long long update = 0;
};

// Snapshot of a training state, optimizer included.
WeightBundle bundle_from_state(const TrainState& state, double f_const = kFocalConst);

// Rebuilds the training state; throws SchemaError when the bundle carries no
// optimizer payload or its shapes disagree with the network.
TrainState state_from_bundle(const WeightBundle& bundle);

void save_weights(const std::string& path, const WeightBundle& bundle);
WeightBundle load_weights(const std::string& path);

// ---- CSV report writers (schemas documented in the README) ----

// method,trials,failures,rotation_success,translation_success,joint_success,
// ops_total (blank for names the op counter does not model)
void write_eval_csv(std::ostream& out, const EvalReport& report);

// outlier_count,method,trials,failures,rotation_success,translation_success,
// joint_success — one row per (count, method)
void write_sweep_csv(std::ostream& out, const std::vector<EvalReport>& reports);

// method,trial,eps_r,eps_t,truth_t_norm,failed — per-trial records
void write_trials_csv(std::ostream& out, const EvalReport& report);

// method,n,additions,multiplications,divisions,transcendental,total
using OpsRow = std::tuple<std::string, int, OpCount>;
void write_ops_csv(std::ostream& out, const std::vector<OpsRow>& rows);

// update,train_loss_intermediate,train_loss_final,val_loss_intermediate,
// val_loss_final,val_joint_success — optional fields blank; no wall-clock
// column, so logs are bit-reproducible.
void write_train_log_csv(std::ostream& out, const TrainReport& report);

// record,tx,ty,tz,wx,wy,wz,eps_r,eps_t,failed — error columns blank when the
// input record carries no ground truth.
struct PoseRecord {
  long long index = 0;
  Pose pose;
  std::optional<double> eps_r, eps_t;
  bool failed = false;
};
void write_pose_records_csv(std::ostream& out, const std::vector<PoseRecord>& records);

// ---- correspondence-table import ----
//
// Input: comma-separated table with a header line.  Required columns:
// image, point, x, y, z, u, v, f.  Optional columns tx, ty, tz, wx, wy, wz
// (all six or none) attach a ground-truth pose per image.  Unknown column
// names are rejected.  Rows are grouped by image id in first-appearance
// order; f and pose must be constant within an image.
//
// Each image with enough points yields one instance: `pick` points drawn
// without replacement (seeded per image ordinal), plus one extra draw when
// corruption is requested.  The first `corrupt` sampled slots are re-paired:
// slot j takes the original observation of slot j+1, and the last corrupted
// slot takes the extra point's observation — every corrupted 2D point is a
// genuine detection of some other 3D point.  The mask records the slots.

struct ImportOptions {
  int pick = 9;
  int corrupt = 0;
  std::uint64_t seed = 0;

  void validate() const;  // throws SchemaError
};

struct ImportSummary {
  int images_seen = 0;
  int images_skipped = 0;  // fewer points than one instance needs
  int instances = 0;
};

std::vector<ProblemInstance> import_table(std::istream& in, const ImportOptions& options,
                                          ImportSummary* summary = nullptr);

}  // namespace pnpkit

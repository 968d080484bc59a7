#include "pnpkit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "pnpkit/bench.hpp"
#include "pnpkit/errors.hpp"
#include "pnpkit/geometry.hpp"
#include "pnpkit/rng.hpp"

namespace pnpkit {

namespace {

Eigen::Matrix<double, 6, 1> pose_vec(const Pose& p) {
  Eigen::Matrix<double, 6, 1> v;
  v << p.t, p.rot.omega();
  return v;
}

// d|x - target|/dx, flat at the minimum.
Eigen::Vector3d norm_gradient(const Eigen::Vector3d& x, const Eigen::Vector3d& target) {
  const Eigen::Vector3d d = x - target;
  const double n = d.norm();
  return n < 1e-12 ? Eigen::Vector3d::Zero() : Eigen::Vector3d(d / n);
}

// Gradient of the geodesic distance d(R(omega), R_true) in omega, for a
// canonical omega.  The cosine is clamped away from +/-1: at the endpoints
// the distance is not differentiable and the clamp bounds the factor.
Eigen::Vector3d rotation_distance_gradient(const Eigen::Vector3d& omega,
                                           const Eigen::Matrix3d& R_true) {
  const Eigen::Matrix3d R = Rotation(omega).matrix();
  const auto dR = rotation_matrix_derivatives(omega);
  double c = 0.5 * ((R.transpose() * R_true).trace() - 1.0);
  c = std::clamp(c, -1.0 + 1e-9, 1.0 - 1e-9);
  const double dacos = -1.0 / std::sqrt(1.0 - c * c);
  Eigen::Vector3d g;
  for (int k = 0; k < 3; ++k) g[k] = dacos * 0.5 * dR[k].cwiseProduct(R_true).sum();
  return g;
}

// Gradient of w_t*|t_c - t| + w_r*d(R(coarse), R_true) in the 7 raw outputs.
Eigen::Matrix<double, 7, 1> coarse_upstream(const CoarsePose& c, const Pose& truth, double w_t,
                                            double w_r) {
  Eigen::Matrix<double, 7, 1> g = Eigen::Matrix<double, 7, 1>::Zero();
  g.head<3>() = w_t * norm_gradient(c.t, truth.t);
  const double snorm = c.s_raw.norm();
  if (w_r == 0.0 || snorm < 1e-8) return g;  // flat by the degenerate axis rule
  const double theta = std::clamp(c.theta, 0.0, M_PI);
  const Eigen::Vector3d shat = c.s_raw / snorm;
  const Eigen::Vector3d g_omega =
      w_r * rotation_distance_gradient(theta * shat, truth.rot.matrix());
  // omega = theta * s/|s|: d omega/d s = theta (I - s s^T)/|s|, d omega/d theta = s_hat,
  // with the clamp contributing a flat region outside (0, pi).
  g.segment<3>(3) = (theta / snorm) * (g_omega - shat * shat.dot(g_omega));
  g[6] = (c.theta > 0.0 && c.theta < M_PI) ? shat.dot(g_omega) : 0.0;
  return g;
}

// Gradient of w_t*|t - t*| + w_r*d(R(omega), R*) in the refined (t, omega).
Eigen::Matrix<double, 6, 1> refined_upstream(const Pose& refined, const Pose& truth, double w_t,
                                             double w_r) {
  Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
  g.head<3>() = w_t * norm_gradient(refined.t, truth.t);
  if (w_r != 0.0)
    g.tail<3>() = w_r * rotation_distance_gradient(refined.rot.omega(), truth.rot.matrix());
  return g;
}

std::vector<DenseLayer>& chain_of(NetParams& p, int c) {
  return c == 0 ? p.trunk : c == 1 ? p.head_rot : p.head_trans;
}
const std::vector<DenseLayer>& chain_of(const NetParams& p, int c) {
  return c == 0 ? p.trunk : c == 1 ? p.head_rot : p.head_trans;
}

void accumulate(NetParams& acc, const NetParams& g) {
  for (int c = 0; c < 3; ++c) {
    auto& a = chain_of(acc, c);
    const auto& b = chain_of(g, c);
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k].W += b[k].W;
      a[k].b += b[k].b;
    }
  }
}

bool all_finite(const NetParams& p) {
  for (int c = 0; c < 3; ++c)
    for (const DenseLayer& l : chain_of(p, c))
      if (!l.W.allFinite() || !l.b.allFinite()) return false;
  return true;
}

template <typename Mat>
void adam_coeff(Mat& param, Mat& m, Mat& v, const Mat& g, double lr, double b1, double b2,
                double eps, double b1t, double b2t) {
  m = b1 * m + (1.0 - b1) * g;
  v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
  param.array() -= lr * (m.array() / (1.0 - b1t)) / ((v.array() / (1.0 - b2t)).sqrt() + eps);
}

}  // namespace

double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }

double softplus_inverse(double x) {
  if (!(x > 0.0)) throw SchemaError("softplus inverse requires a positive value");
  return x > 30.0 ? x : std::log(std::expm1(x));
}

LossBreakdown loss(const ProblemInstance& inst, const Pose& coarse, const Pose& refined,
                   const LossWeights& w) {
  if (!inst.truth) throw MissingGroundTruth();
  const Pose& truth = *inst.truth;
  LossBreakdown b;
  b.t_coarse = (coarse.t - truth.t).norm();
  b.r_coarse = rotation_distance(coarse.rot, truth.rot);
  b.t_refined = (refined.t - truth.t).norm();
  b.r_refined = rotation_distance(refined.rot, truth.rot);
  b.total = w.t_coarse * b.t_coarse + w.r_coarse * b.r_coarse + w.t_refined * b.t_refined +
            w.r_refined * b.r_refined;
  return b;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw SchemaError("batch_size must be >= 1");
  if (total_updates < 1) throw SchemaError("total_updates must be >= 1");
  if (!(learning_rate > 0)) throw SchemaError("learning_rate must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
    throw SchemaError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0)) throw SchemaError("adam_eps must be > 0");
  if (!(curriculum_start >= 0 && curriculum_start <= curriculum_end && curriculum_end <= 1))
    throw SchemaError("curriculum fractions must satisfy 0 <= start <= end <= 1");
  if (curriculum_start == 0 && curriculum_end == 0)
    throw SchemaError("curriculum must start at weight 0");
  for (double w : {loss_weights.t_coarse, loss_weights.r_coarse, loss_weights.t_refined,
                   loss_weights.r_refined})
    if (!(w >= 0) || !std::isfinite(w)) throw SchemaError("loss weights must be finite and >= 0");
  if (!(fd_step > 0)) throw SchemaError("fd_step must be > 0");
  if (fd_probes < 1) throw SchemaError("fd_probes must be >= 1");
  if (refine_layers < 1) throw SchemaError("refine_layers must be >= 1");
  if (checkpoint_every < 1) throw SchemaError("checkpoint_every must be >= 1");
  if (val_size < 1) throw SchemaError("val_size must be >= 1");
}

double TrainConfig::curriculum_weight(long long update) const {
  const double start = curriculum_start * static_cast<double>(total_updates);
  const double end = curriculum_end * static_cast<double>(total_updates);
  const double u = static_cast<double>(update);
  if (u < start) return 0.0;
  if (u >= end) return 1.0;
  return (u - start) / (end - start);
}

LMConfig TrainState::lm() const {
  if (hyper_u.size() % 3 != 0 || hyper_u.size() == 0)
    throw ShapeMismatch("hyperparameter vector must hold 3 entries per layer");
  const int m = static_cast<int>(hyper_u.size()) / 3;
  LMConfig cfg;
  cfg.m = m;
  cfg.alpha.resize(m);
  cfg.gamma.resize(m);
  cfg.lambda.resize(m);
  for (int j = 0; j < m; ++j) {
    cfg.alpha[j] = softplus(hyper_u[3 * j]);
    cfg.gamma[j] = softplus(hyper_u[3 * j + 1]);
    cfg.lambda[j] = softplus(hyper_u[3 * j + 2]);
  }
  return cfg;
}

TrainState init_train_state(const TrainConfig& tc, const ScenarioConfig& sc) {
  tc.validate();
  sc.validate();
  TrainState st;
  st.net = init_params(tc.seed, sc.n);
  st.hyper_u.resize(3 * tc.refine_layers);
  for (int j = 0; j < tc.refine_layers; ++j) {
    st.hyper_u[3 * j] = softplus_inverse(1.0);
    st.hyper_u[3 * j + 1] = softplus_inverse(0.5);
    st.hyper_u[3 * j + 2] = softplus_inverse(1e-3);
  }
  st.adam_m = zeros_like(st.net);
  st.adam_v = zeros_like(st.net);
  st.hyper_m = Eigen::VectorXd::Zero(st.hyper_u.size());
  st.hyper_v = Eigen::VectorXd::Zero(st.hyper_u.size());
  st.update = 0;
  return st;
}

FdSensitivity fd_pose_sensitivity(const ProblemInstance& inst, const CoarsePose& coarse,
                                  const LMConfig& cfg, double fd_step) {
  if (!(fd_step > 0)) throw SchemaError("fd_step must be > 0");
  FdSensitivity s;
  s.d_hyper = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, 3 * cfg.m);
  const auto run = [&](const CoarsePose& c, const LMConfig& lc) {
    return pose_vec(refine(coarse_to_pose(c), inst, lc));
  };
  const Eigen::Matrix<double, 7, 1> base = coarse.vec();
  for (int k = 0; k < 7; ++k) {
    Eigen::Matrix<double, 7, 1> up = base, dn = base;
    up[k] += fd_step;
    dn[k] -= fd_step;
    try {
      s.d_coarse.col(k) =
          (run(CoarsePose::from_vec(up), cfg) - run(CoarsePose::from_vec(dn), cfg)) /
          (2.0 * fd_step);
    } catch (const Error&) {
      s.d_coarse.col(k).setZero();
      s.masked = true;
    }
  }
  for (int j = 0; j < cfg.m; ++j)
    for (int p = 0; p < 3; ++p) {
      LMConfig up = cfg, dn = cfg;
      std::vector<double>& uv = p == 0 ? up.alpha : p == 1 ? up.gamma : up.lambda;
      std::vector<double>& dv = p == 0 ? dn.alpha : p == 1 ? dn.gamma : dn.lambda;
      uv[j] += fd_step;
      dv[j] -= fd_step;
      try {
        s.d_hyper.col(3 * j + p) = (run(coarse, up) - run(coarse, dn)) / (2.0 * fd_step);
      } catch (const Error&) {
        s.d_hyper.col(3 * j + p).setZero();
        s.masked = true;
      }
    }
  return s;
}

TrainReport train(const TrainConfig& tc, const ScenarioConfig& sc, TrainState& state,
                  const CheckpointSink& sink, long long run_until) {
  tc.validate();
  sc.validate();
  const long long stop_at =
      run_until < 0 ? tc.total_updates : std::min(run_until, tc.total_updates);
  if (state.net.n != sc.n) throw ShapeMismatch("network n does not match the scenario");
  if (state.hyper_u.size() != 3 * static_cast<Eigen::Index>(tc.refine_layers))
    throw ShapeMismatch("hyperparameter vector does not match refine_layers");
  const auto t_begin = std::chrono::steady_clock::now();

  const LossWeights& w = tc.loss_weights;
  const int probes = std::min(tc.fd_probes, tc.batch_size);
  const SuccessCriteria criteria;  // evaluation defaults: 1 degree, 0.2 relative

  // Held-out validation stream, disjoint from the training stream by seed.
  ScenarioConfig vc = sc;
  vc.seed = mix_seed(sc.seed, 0x7665726966);
  std::vector<ProblemInstance> val;
  val.reserve(tc.val_size);
  for (int i = 0; i < tc.val_size; ++i) val.push_back(preprocess(make_instance(vc, i)));

  TrainReport report;
  const auto emit = [&](std::optional<double> train_int, std::optional<double> train_fin) {
    CheckpointRecord rec;
    rec.update = state.update;
    rec.train_loss_intermediate = train_int;
    rec.train_loss_final = train_fin;
    const LMConfig cfg = state.lm();
    double vint = 0.0, vfin = 0.0;
    int hits = 0;
    for (const ProblemInstance& inst : val) {
      const Pose cpose = coarse_to_pose(net_forward(state.net, inst));
      const Pose refined = refine(cpose, inst, cfg);
      const LossBreakdown b = loss(inst, cpose, refined, w);
      vint += w.t_coarse * b.t_coarse + w.r_coarse * b.r_coarse;
      vfin += w.t_refined * b.t_refined + w.r_refined * b.r_refined;
      hits += criteria.rotation_ok(b.r_refined) &&
              criteria.translation_ok(b.t_refined, inst.truth->t.norm());
    }
    rec.val_loss_intermediate = vint / tc.val_size;
    rec.val_loss_final = vfin / tc.val_size;
    rec.val_joint_success = static_cast<double>(hits) / tc.val_size;
    report.checkpoints.push_back(rec);
    if (sink) sink(state, rec);
  };

  if (state.update == 0) emit(std::nullopt, std::nullopt);

  while (state.update < stop_at) {
    const long long u = state.update;
    const double cw = tc.curriculum_weight(u);
    const LMConfig cfg = state.lm();

    NetParams grad = zeros_like(state.net);
    Eigen::VectorXd hgrad = Eigen::VectorXd::Zero(state.hyper_u.size());
    double int_sum = 0.0, fin_sum = 0.0;
    bool fin_active = false;

    for (int i = 0; i < tc.batch_size; ++i) {
      const ProblemInstance inst =
          preprocess(make_instance(sc, static_cast<std::uint64_t>(u) * tc.batch_size + i));
      const Pose& truth = *inst.truth;
      const CoarsePose coarse = net_forward(state.net, inst);
      const Pose cpose = coarse_to_pose(coarse);
      int_sum += w.t_coarse * (cpose.t - truth.t).norm() +
                 w.r_coarse * rotation_distance(cpose.rot, truth.rot);

      Eigen::Matrix<double, 7, 1> upstream =
          coarse_upstream(coarse, truth, w.t_coarse, w.r_coarse) / tc.batch_size;
      if (cw > 0.0 && i < probes) {
        fin_active = true;
        const Pose refined = refine(cpose, inst, cfg);
        fin_sum += w.t_refined * (refined.t - truth.t).norm() +
                   w.r_refined * rotation_distance(refined.rot, truth.rot);
        const Eigen::Matrix<double, 6, 1> g6 =
            refined_upstream(refined, truth, cw * w.t_refined, cw * w.r_refined);
        const FdSensitivity sens = fd_pose_sensitivity(inst, coarse, cfg, tc.fd_step);
        upstream += sens.d_coarse.transpose() * g6 / probes;
        hgrad += sens.d_hyper.transpose() * g6 / probes;
      }
      accumulate(grad, net_backward(state.net, inst, upstream));
    }

    // hgrad holds d(loss)/d(constrained hyperparameter); chain through the
    // softplus reparameterization to get the gradient in u.
    for (Eigen::Index k = 0; k < hgrad.size(); ++k)
      hgrad[k] *= 1.0 / (1.0 + std::exp(-state.hyper_u[k]));

    const double loss_int = int_sum / tc.batch_size;
    const double loss_fin = fin_active ? fin_sum / probes : 0.0;
    if (!std::isfinite(loss_int) || !std::isfinite(loss_fin) || !all_finite(grad) ||
        !hgrad.allFinite())
      throw NonFiniteLoss(u);

    state.update = u + 1;
    const double b1t = std::pow(tc.adam_beta1, static_cast<double>(state.update));
    const double b2t = std::pow(tc.adam_beta2, static_cast<double>(state.update));
    for (int c = 0; c < 3; ++c) {
      auto& pc = chain_of(state.net, c);
      auto& mc = chain_of(state.adam_m, c);
      auto& vcn = chain_of(state.adam_v, c);
      const auto& gc = chain_of(grad, c);
      for (std::size_t k = 0; k < pc.size(); ++k) {
        adam_coeff(pc[k].W, mc[k].W, vcn[k].W, gc[k].W, tc.learning_rate, tc.adam_beta1,
                   tc.adam_beta2, tc.adam_eps, b1t, b2t);
        adam_coeff(pc[k].b, mc[k].b, vcn[k].b, gc[k].b, tc.learning_rate, tc.adam_beta1,
                   tc.adam_beta2, tc.adam_eps, b1t, b2t);
      }
    }
    adam_coeff(state.hyper_u, state.hyper_m, state.hyper_v, hgrad, tc.learning_rate,
               tc.adam_beta1, tc.adam_beta2, tc.adam_eps, b1t, b2t);

    if (state.update % tc.checkpoint_every == 0 || state.update == stop_at)
      emit(loss_int, fin_active ? std::optional<double>(loss_fin) : std::nullopt);
  }

  report.updates = state.update;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return report;
}

std::tuple<NetParams, LMConfig, TrainReport> train(const TrainConfig& tc,
                                                   const ScenarioConfig& sc) {
  TrainState state = init_train_state(tc, sc);
  TrainReport report = train(tc, sc, state);
  return {state.net, state.lm(), report};
}

}  // namespace pnpkit

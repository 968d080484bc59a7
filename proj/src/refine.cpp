#include "pnpkit/refine.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace pnpkit {

LMConfig LMConfig::constant(int m, double alpha, double gamma, double lambda) {
  LMConfig cfg;
  cfg.m = m;
  cfg.alpha.assign(m, alpha);
  cfg.gamma.assign(m, gamma);
  cfg.lambda.assign(m, lambda);
  return cfg;
}

LMConfig LMConfig::gauss_newton(int m) { return constant(m, 0.0, 1.0, 1e-3); }

LMConfig LMConfig::robust(int m, double alpha, double floor) {
  LMConfig cfg = constant(m, alpha, 1.0, 1e-3);
  cfg.weight_floor = floor;
  return cfg;
}

void LMConfig::validate() const {
  if (m < 1) throw SchemaError("refiner layer count must be >= 1");
  if (static_cast<int>(alpha.size()) != m || static_cast<int>(gamma.size()) != m ||
      static_cast<int>(lambda.size()) != m)
    throw SchemaError("refiner schedule vectors must have one entry per layer");
  for (int j = 0; j < m; ++j) {
    if (!std::isfinite(alpha[j]) || alpha[j] < 0) throw SchemaError("alpha must be finite and >= 0");
    if (!std::isfinite(gamma[j]) || gamma[j] < 0) throw SchemaError("gamma must be finite and >= 0");
    if (!std::isfinite(lambda[j]) || lambda[j] < 0)
      throw SchemaError("lambda must be finite and >= 0");
  }
  if (!std::isfinite(weight_floor) || weight_floor <= 0)
    throw SchemaError("weight_floor must be finite and > 0");
}

Eigen::VectorXd irls_weights(const Eigen::VectorXd& residuals, double alpha,
                             double weight_floor) {
  if (residuals.size() % 2 != 0) throw ShapeMismatch("residual vector must have even length");
  const int n = static_cast<int>(residuals.size()) / 2;
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    if (alpha == 0.0) {
      w[i] = 1.0;
      continue;
    }
    const double norm = std::hypot(residuals[2 * i], residuals[2 * i + 1]);
    w[i] = 1.0 / std::pow(std::max(norm, weight_floor), alpha);
  }
  return w;
}

namespace {

struct Workspace {
  Eigen::VectorXd r;
  Eigen::Matrix<double, Eigen::Dynamic, 6> J;
  Eigen::VectorXd w;
};

double weighted_sq_residual(const Eigen::VectorXd& r, const Eigen::VectorXd& w) {
  double s = 0;
  for (int k = 0; k < r.size(); ++k) s += w[k / 2] * r[k] * r[k];
  return s;
}

// One reweighted damped step on the raw (t, omega) 6-vector.  The residuals,
// Jacobian, and weights in `ws` must already be evaluated at `raw`.  Returns
// false (leaving `raw` unchanged) when no finite step could be produced.
bool solve_and_step(Eigen::Matrix<double, 6, 1>& raw, const Workspace& ws, double gamma,
                    double lambda) {
  Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
  for (int k = 0; k < ws.r.size(); ++k) {
    const double wk = ws.w[k / 2];
    H.noalias() += wk * ws.J.row(k).transpose() * ws.J.row(k);
    g.noalias() += (wk * ws.r[k]) * ws.J.row(k).transpose();
  }
  for (int attempt = 0; attempt <= 3; ++attempt) {
    // Escalate the damping 10x per retry; a zero lambda gets a small seed so
    // escalation has something to scale.
    double lam = lambda;
    if (attempt > 0) lam = (lambda > 0 ? lambda : 1e-8) * std::pow(10.0, attempt);
    Eigen::Matrix<double, 6, 6> Hreg = H;
    Hreg.diagonal() += lam * H.diagonal();
    const Eigen::Matrix<double, 6, 1> d = Hreg.ldlt().solve(-g);
    if (!d.allFinite()) continue;
    // LDLT on a singular system can return finite garbage; accept the step
    // only if it actually solves the normal equations.
    const double back_err = (Hreg * d + g).norm();
    if (back_err > 1e-6 * g.norm() + 1e-12) continue;
    raw += gamma * d;
    return true;
  }
  return false;
}

Eigen::Matrix<double, 6, 1> pack(const Pose& pose) {
  Eigen::Matrix<double, 6, 1> raw;
  raw.head<3>() = pose.t;
  raw.tail<3>() = pose.rot.omega();
  return raw;
}

Pose unpack(const Eigen::Matrix<double, 6, 1>& raw) {
  return Pose(raw.head<3>(), Rotation(raw.tail<3>()));
}

}  // namespace

LayerOutcome lm_layer(const Pose& pose, const ProblemInstance& inst, double alpha, double gamma,
                      double lambda, double weight_floor) {
  const int n = inst.n();
  Workspace ws{Eigen::VectorXd(2 * n), Eigen::Matrix<double, Eigen::Dynamic, 6>(2 * n, 6),
               Eigen::VectorXd(n)};
  Eigen::Matrix<double, 6, 1> raw = pack(pose);
  try {
    residuals_and_jacobian(eval_rotation(raw.tail<3>()), raw.head<3>(), inst.intrinsics.f,
                           inst.corrs, ws.r, &ws.J);
  } catch (const DegenerateDepth&) {
    return {pose, true};
  }
  ws.w = irls_weights(ws.r, alpha, weight_floor);
  if (!solve_and_step(raw, ws, gamma, lambda)) return {pose, true};
  return {unpack(raw), false};
}

Pose refine(const Pose& init, const ProblemInstance& inst, const LMConfig& cfg, LMTrace* trace) {
  cfg.validate();
  const int n = inst.n();
  const int m = cfg.m;
  Workspace ws{Eigen::VectorXd(2 * n), Eigen::Matrix<double, Eigen::Dynamic, 6>(2 * n, 6),
               Eigen::VectorXd(n)};
  if (trace) {
    trace->poses.clear();
    trace->weighted_sq_residual.clear();
    trace->weights.clear();
    trace->layer_failed.clear();
    trace->poses.reserve(m + 1);
    trace->weighted_sq_residual.reserve(m + 1);
    trace->weights.reserve(m + 1);
    trace->layer_failed.reserve(m);
  }

  // The iteration runs on the raw 6-vector without re-canonicalizing the
  // rotation between layers: the residual is smooth in the raw vector, and
  // wrapping mid-descent would make finite-difference probes of the whole
  // refine map see chart jumps.  Poses exposed through the trace and the
  // return value are canonicalized by construction.
  Eigen::Matrix<double, 6, 1> raw = pack(init);
  for (int j = 0; j < m; ++j) {
    bool evaluated = false;
    try {
      residuals_and_jacobian(eval_rotation(raw.tail<3>()), raw.head<3>(), inst.intrinsics.f,
                             inst.corrs, ws.r, &ws.J);
      evaluated = true;
    } catch (const DegenerateDepth&) {
      // Flagged below; the pose passes through unchanged.
    }
    bool failed = true;
    if (evaluated) {
      ws.w = irls_weights(ws.r, cfg.alpha[j], cfg.weight_floor);
      if (trace) {
        trace->poses.push_back(unpack(raw));
        trace->weights.push_back(ws.w);
        trace->weighted_sq_residual.push_back(weighted_sq_residual(ws.r, ws.w));
      }
      failed = !solve_and_step(raw, ws, cfg.gamma[j], cfg.lambda[j]);
    } else if (trace) {
      trace->poses.push_back(unpack(raw));
      trace->weights.push_back(Eigen::VectorXd::Zero(n));
      trace->weighted_sq_residual.push_back(std::numeric_limits<double>::infinity());
    }
    if (trace) trace->layer_failed.push_back(failed ? 1 : 0);
  }

  const Pose out = unpack(raw);
  if (trace) {
    // Final entry: residuals at the output pose, weighted with the last
    // layer's alpha.
    trace->poses.push_back(out);
    try {
      residuals_and_jacobian(eval_rotation(raw.tail<3>()), raw.head<3>(), inst.intrinsics.f,
                             inst.corrs, ws.r, nullptr);
      ws.w = irls_weights(ws.r, cfg.alpha[m - 1], cfg.weight_floor);
      trace->weights.push_back(ws.w);
      trace->weighted_sq_residual.push_back(weighted_sq_residual(ws.r, ws.w));
    } catch (const DegenerateDepth&) {
      trace->weights.push_back(Eigen::VectorXd::Zero(n));
      trace->weighted_sq_residual.push_back(std::numeric_limits<double>::infinity());
    }
  }
  return out;
}

}  // namespace pnpkit

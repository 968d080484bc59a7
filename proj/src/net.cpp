#include "pnpkit/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pnpkit/errors.hpp"
#include "pnpkit/rng.hpp"

namespace pnpkit {

namespace {

constexpr double kAxisEps = 1e-8;

void check_chain(const std::vector<DenseLayer>& layers, int in, const std::vector<int>& outs,
                 const char* what) {
  if (layers.size() != outs.size())
    throw ShapeMismatch(std::string(what) + ": wrong layer count");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const DenseLayer& l = layers[k];
    if (l.W.rows() != outs[k] || l.W.cols() != in || l.b.size() != outs[k])
      throw ShapeMismatch(std::string(what) + ": layer " + std::to_string(k) +
                          " shape does not chain");
    if (!l.W.allFinite() || !l.b.allFinite())
      throw ShapeMismatch(std::string(what) + ": non-finite parameters in layer " +
                          std::to_string(k));
    in = outs[k];
  }
}

std::vector<int> trunk_sizes(int n) { return {20 * n, 5 * n, 3 * n}; }

std::vector<int> head_sizes(int n, int out) {
  std::vector<int> s(5, 2 * n);
  s.push_back(out);
  return s;
}

DenseLayer random_layer(Rng& rng, int out, int in) {
  DenseLayer l;
  l.W.resize(out, in);
  const double lim = 1.0 / std::sqrt(static_cast<double>(in));
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) l.W(r, c) = rng.uniform(-lim, lim);
  l.b = Eigen::VectorXd::Zero(out);
  return l;
}

Eigen::VectorXd flatten_input(const ProblemInstance& inst) {
  Eigen::VectorXd x(5 * inst.n());
  for (int i = 0; i < inst.n(); ++i) {
    x.segment<3>(5 * i) = inst.corrs[i].a;
    x.segment<2>(5 * i + 3) = inst.corrs[i].b;
  }
  return x;
}

// Post-activation values for every layer of one chain; index 0 is the input.
struct ChainCache {
  std::vector<Eigen::VectorXd> pre;   // pre-activations, one per layer
  std::vector<Eigen::VectorXd> post;  // post[0] = input, post[k+1] = activation of layer k
};

// Runs a dense chain, ReLU on every layer except (optionally) the last.
Eigen::VectorXd run_chain(const std::vector<DenseLayer>& layers, const Eigen::VectorXd& input,
                          bool linear_last, ChainCache* cache) {
  Eigen::VectorXd h = input;
  if (cache) cache->post.push_back(h);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Eigen::VectorXd pre = layers[k].W * h + layers[k].b;
    h = (linear_last && k + 1 == layers.size()) ? pre : pre.cwiseMax(0.0).eval();
    if (cache) {
      cache->pre.push_back(std::move(pre));
      cache->post.push_back(h);
    }
  }
  return h;
}

// Backpropagates `delta` (gradient at the chain output) through the chain,
// writing parameter gradients and returning the gradient at the chain input.
Eigen::VectorXd backprop_chain(const std::vector<DenseLayer>& layers, const ChainCache& cache,
                               bool linear_last, Eigen::VectorXd delta,
                               std::vector<DenseLayer>& grad) {
  for (int k = static_cast<int>(layers.size()) - 1; k >= 0; --k) {
    if (!(linear_last && k + 1 == static_cast<int>(layers.size())))
      delta = (cache.pre[k].array() > 0.0).select(delta, 0.0);
    grad[k].W += delta * cache.post[k].transpose();
    grad[k].b += delta;
    delta = (layers[k].W.transpose() * delta).eval();
  }
  return delta;
}

void require_n(const NetParams& params, const ProblemInstance& inst) {
  if (inst.n() != params.n)
    throw ShapeMismatch("network built for n = " + std::to_string(params.n) + ", instance has " +
                        std::to_string(inst.n()));
}

}  // namespace

void NetParams::validate() const {
  if (n < 1) throw ShapeMismatch("network needs n >= 1");
  check_chain(trunk, 5 * n, trunk_sizes(n), "trunk");
  check_chain(head_rot, 3 * n, head_sizes(n, 4), "rotation head");
  check_chain(head_trans, 3 * n, head_sizes(n, 3), "translation head");
}

std::size_t NetParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto* chain : {&trunk, &head_rot, &head_trans})
    for (const DenseLayer& l : *chain)
      count += static_cast<std::size_t>(l.W.size()) + static_cast<std::size_t>(l.b.size());
  return count;
}

Eigen::Matrix<double, 7, 1> CoarsePose::vec() const {
  Eigen::Matrix<double, 7, 1> v;
  v << t, s_raw, theta;
  return v;
}

CoarsePose CoarsePose::from_vec(const Eigen::Matrix<double, 7, 1>& v) {
  CoarsePose c;
  c.t = v.head<3>();
  c.s_raw = v.segment<3>(3);
  c.theta = v[6];
  return c;
}

NetParams init_params(std::uint64_t seed, int n) {
  if (n < 1) throw ShapeMismatch("network needs n >= 1");
  Rng rng(mix_seed(seed, 0x6e657470));  // distinct stream per purpose
  NetParams p;
  p.n = n;
  int in = 5 * n;
  for (int out : trunk_sizes(n)) {
    p.trunk.push_back(random_layer(rng, out, in));
    in = out;
  }
  for (int head = 0; head < 2; ++head) {
    auto& chain = head == 0 ? p.head_rot : p.head_trans;
    in = 3 * n;
    for (int out : head_sizes(n, head == 0 ? 4 : 3)) {
      chain.push_back(random_layer(rng, out, in));
      in = out;
    }
  }
  return p;
}

NetParams zeros_like(const NetParams& params) {
  NetParams z;
  z.n = params.n;
  for (const auto* chain : {&params.trunk, &params.head_rot, &params.head_trans}) {
    auto& dst = chain == &params.trunk      ? z.trunk
                : chain == &params.head_rot ? z.head_rot
                                            : z.head_trans;
    for (const DenseLayer& l : *chain)
      dst.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                     Eigen::VectorXd::Zero(l.b.size())});
  }
  return z;
}

CoarsePose net_forward(const NetParams& params, const ProblemInstance& inst) {
  require_n(params, inst);
  const Eigen::VectorXd x = flatten_input(inst);
  const Eigen::VectorXd trunk_out = run_chain(params.trunk, x, /*linear_last=*/false, nullptr);
  const Eigen::VectorXd rot = run_chain(params.head_rot, trunk_out, true, nullptr);
  const Eigen::VectorXd trans = run_chain(params.head_trans, trunk_out, true, nullptr);
  CoarsePose c;
  c.t = trans;
  c.s_raw = rot.head<3>();
  c.theta = rot[3];
  return c;
}

Pose coarse_to_pose(const CoarsePose& c) {
  Pose pose;
  pose.t = c.t;
  const double theta = std::clamp(c.theta, 0.0, M_PI);
  const double norm = c.s_raw.norm();
  pose.rot = norm < kAxisEps ? Rotation() : Rotation(Eigen::Vector3d(theta * c.s_raw / norm));
  return pose;
}

NetParams net_backward(const NetParams& params, const ProblemInstance& inst,
                       const Eigen::Matrix<double, 7, 1>& upstream) {
  require_n(params, inst);
  const Eigen::VectorXd x = flatten_input(inst);

  ChainCache trunk_cache, rot_cache, trans_cache;
  const Eigen::VectorXd trunk_out = run_chain(params.trunk, x, false, &trunk_cache);
  run_chain(params.head_rot, trunk_out, true, &rot_cache);
  run_chain(params.head_trans, trunk_out, true, &trans_cache);

  NetParams grad = zeros_like(params);
  Eigen::VectorXd g_rot(4), g_trans(3);
  g_trans = upstream.head<3>();
  g_rot << upstream.segment<3>(3), upstream[6];

  const Eigen::VectorXd g_trunk_out =
      backprop_chain(params.head_rot, rot_cache, true, g_rot, grad.head_rot) +
      backprop_chain(params.head_trans, trans_cache, true, g_trans, grad.head_trans);
  backprop_chain(params.trunk, trunk_cache, false, g_trunk_out, grad.trunk);
  return grad;
}

}  // namespace pnpkit

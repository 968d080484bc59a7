// Python bindings: geometry, the synthetic generator, the classical and
// learned solvers, the unrolled refiner, evaluation, operation counting, and
// the dataset / weight file formats.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pnpkit/bench.hpp"
#include "pnpkit/epnp.hpp"
#include "pnpkit/errors.hpp"
#include "pnpkit/io.hpp"
#include "pnpkit/ransac.hpp"
#include "pnpkit/refine.hpp"
#include "pnpkit/synth.hpp"
#include "pnpkit/train.hpp"

namespace py = pybind11;
using namespace pnpkit;

namespace {

Eigen::MatrixXd world_points(const ProblemInstance& inst) {
  Eigen::MatrixXd a(inst.n(), 3);
  for (int i = 0; i < inst.n(); ++i) a.row(i) = inst.corrs[static_cast<std::size_t>(i)].a;
  return a;
}

Eigen::MatrixXd image_points(const ProblemInstance& inst) {
  Eigen::MatrixXd b(inst.n(), 2);
  for (int i = 0; i < inst.n(); ++i) b.row(i) = inst.corrs[static_cast<std::size_t>(i)].b;
  return b;
}

ProblemInstance build_instance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double f,
                               const std::optional<Pose>& truth,
                               const std::optional<std::vector<std::uint8_t>>& outlier_mask) {
  if (a.cols() != 3) throw SchemaError("a must have shape (n, 3)");
  if (b.cols() != 2) throw SchemaError("b must have shape (n, 2)");
  if (a.rows() != b.rows()) throw SchemaError("a and b must pair the same number of points");
  if (outlier_mask && static_cast<Eigen::Index>(outlier_mask->size()) != a.rows())
    throw SchemaError("outlier_mask length must equal the point count");
  ProblemInstance inst;
  inst.intrinsics.f = f;
  inst.truth = truth;
  inst.outlier_mask = outlier_mask;
  inst.corrs.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    inst.corrs.push_back({a.row(i).transpose(), b.row(i).transpose()});
  return inst;
}

MethodContext context_from(const WeightBundle* weights, const LMConfig* baseline_lm,
                           const RansacConfig* ransac) {
  MethodContext ctx;
  if (weights) {
    ctx.net = &weights->net;
    ctx.learned_lm = weights->lm;
  }
  if (baseline_lm) ctx.baseline_lm = *baseline_lm;
  if (ransac) ctx.ransac = *ransac;
  return ctx;
}

MethodList methods_from(const std::vector<std::string>& names, const MethodContext& ctx) {
  MethodList methods;
  for (const std::string& name : names) methods.emplace_back(name, make_method(name, ctx));
  return methods;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Perspective-n-Point toolkit: pose solvers (EPnP, RANSAC, learned "
      "initializer + unrolled reweighted refiner), synthetic data, evaluation, "
      "and file formats.";
  m.attr("__version__") = "0.1.0";
  m.attr("FOCAL_CONST") = kFocalConst;

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const SchemaError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const UnknownMethod& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  // ---- geometry ----
  py::class_<Pose>(m, "Pose", "Rigid transform: translation t and axis-angle omega")
      .def(py::init([](const Eigen::Vector3d& t, const Eigen::Vector3d& omega) {
             return Pose(t, Rotation(omega));
           }),
           py::arg("t") = Eigen::Vector3d::Zero().eval(),
           py::arg("omega") = Eigen::Vector3d::Zero().eval())
      .def_property_readonly("t", [](const Pose& p) { return p.t; })
      .def_property_readonly("omega", [](const Pose& p) { return p.rot.omega(); })
      .def_property_readonly("R", [](const Pose& p) { return p.rot.matrix(); })
      .def("__repr__", [](const Pose& p) {
        std::ostringstream out;
        out << "Pose(t=[" << p.t.transpose() << "], omega=[" << p.rot.omega().transpose()
            << "])";
        return out.str();
      });

  m.def("rotation_matrix", &rotation_matrix, py::arg("omega"),
        "Rodrigues map for an axis-angle vector");
  m.def(
      "rotation_distance",
      [](const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) { return rotation_distance(a, b); },
      py::arg("Ra"), py::arg("Rb"), "Geodesic angle between two rotation matrices");
  m.def("rotation_error", &rotation_error, py::arg("estimate"), py::arg("truth"));
  m.def("translation_error", &translation_error, py::arg("estimate"), py::arg("truth"));
  m.def(
      "project",
      [](const Pose& pose, double f, const Eigen::Vector3d& a) {
        return project(pose, CameraIntrinsics{f}, a);
      },
      py::arg("pose"), py::arg("f"), py::arg("a"),
      "Pinhole projection of one world point; raises on degenerate depth");

  // ---- instances ----
  py::class_<ProblemInstance>(m, "ProblemInstance",
                              "n correspondences, intrinsics, optional truth and outlier mask")
      .def(py::init(&build_instance), py::arg("a"), py::arg("b"), py::arg("f") = kFocalConst,
           py::arg("truth") = std::nullopt, py::arg("outlier_mask") = std::nullopt)
      .def_property_readonly("a", &world_points, "world points, shape (n, 3)")
      .def_property_readonly("b", &image_points, "image points, shape (n, 2)")
      .def_property_readonly("f", [](const ProblemInstance& p) { return p.intrinsics.f; })
      .def_property_readonly("truth", [](const ProblemInstance& p) { return p.truth; })
      .def_property_readonly("outlier_mask",
                             [](const ProblemInstance& p) { return p.outlier_mask; })
      .def_property_readonly("n", &ProblemInstance::n)
      .def("__repr__", [](const ProblemInstance& p) {
        std::ostringstream out;
        out << "ProblemInstance(n=" << p.n() << ", f=" << p.intrinsics.f
            << (p.truth ? ", with truth" : "") << ")";
        return out.str();
      });

  m.def("normalize_focal", &normalize_focal, py::arg("instance"),
        py::arg("f_const") = kFocalConst,
        "Rescale image points so the camera focal becomes f_const");
  m.def("sort_correspondences", &sort_correspondences, py::arg("instance"));
  m.def("preprocess", &preprocess, py::arg("instance"), py::arg("f_const") = kFocalConst,
        "normalize_focal followed by the canonical correspondence ordering");

  // ---- synthetic generator ----
  py::enum_<PosePrior>(m, "PosePrior")
      .value("uniform_box", PosePrior::uniform_box)
      .value("gaussian", PosePrior::gaussian);

  py::class_<ScenarioConfig>(m, "ScenarioConfig", "Synthetic problem distribution")
      .def(py::init<>())
      .def_readwrite("n", &ScenarioConfig::n)
      .def_readwrite("pose_prior", &ScenarioConfig::pose_prior)
      .def_readwrite("t_box_halfwidth", &ScenarioConfig::t_box_halfwidth)
      .def_readwrite("gaussian_sigma", &ScenarioConfig::gaussian_sigma)
      .def_readwrite("theta_min", &ScenarioConfig::theta_min)
      .def_readwrite("theta_max", &ScenarioConfig::theta_max)
      .def_readwrite("point_halfwidth", &ScenarioConfig::point_halfwidth)
      .def_readwrite("depth_min", &ScenarioConfig::depth_min)
      .def_readwrite("depth_max", &ScenarioConfig::depth_max)
      .def_readwrite("sigma3d", &ScenarioConfig::sigma3d)
      .def_readwrite("sigma2d", &ScenarioConfig::sigma2d)
      .def_readwrite("f", &ScenarioConfig::f)
      .def_readwrite("image_halfwidth", &ScenarioConfig::image_halfwidth)
      .def_readwrite("outlier_count_max", &ScenarioConfig::outlier_count_max)
      .def_readwrite("outlier_count_fixed", &ScenarioConfig::outlier_count_fixed)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("max_resample", &ScenarioConfig::max_resample);

  m.def("make_instance", &make_instance, py::arg("config"), py::arg("index"),
        "Instance `index` of the deterministic stream for config.seed");

  // ---- refiner ----
  py::class_<LMConfig>(m, "LMConfig", "Unrolled reweighted Levenberg-Marquardt schedule")
      .def_static("constant", &LMConfig::constant, py::arg("m"), py::arg("alpha"),
                  py::arg("gamma"), py::arg("lam"))
      .def_static("gauss_newton", &LMConfig::gauss_newton, py::arg("m") = 10)
      .def_static("robust", &LMConfig::robust, py::arg("m") = 10, py::arg("alpha") = 2.0,
                  py::arg("floor") = 2.0)
      .def_readwrite("m", &LMConfig::m)
      .def_readwrite("alpha", &LMConfig::alpha)
      .def_readwrite("gamma", &LMConfig::gamma)
      .def_readwrite("lam", &LMConfig::lambda)
      .def_readwrite("weight_floor", &LMConfig::weight_floor);

  m.def(
      "refine",
      [](const Pose& init, const ProblemInstance& inst, const LMConfig& cfg) {
        return refine(init, inst, cfg);
      },
      py::arg("init"), py::arg("instance"), py::arg("config"),
      "Apply exactly config.m reweighted damped least-squares layers");

  // ---- classical solvers ----
  m.def("epnp_solve", &epnp_solve, py::arg("instance"),
        "Control-point pose solver (non-iterative)");
  m.def(
      "epnp_lm",
      [](const ProblemInstance& inst, const LMConfig& cfg) { return epnp_lm(inst, cfg); },
      py::arg("instance"), py::arg("config"));

  py::class_<RansacConfig>(m, "RansacConfig")
      .def(py::init<>())
      .def_readwrite("subset_size", &RansacConfig::subset_size)
      .def_readwrite("max_iterations", &RansacConfig::max_iterations)
      .def_readwrite("inlier_threshold", &RansacConfig::inlier_threshold)
      .def_readwrite("confidence", &RansacConfig::confidence)
      .def_readwrite("seed", &RansacConfig::seed);

  m.def(
      "ransac_solve",
      [](const ProblemInstance& inst, const RansacConfig& rc, const LMConfig& lm) {
        return ransac_solve(inst, rc, lm);
      },
      py::arg("instance"), py::arg("config"), py::arg("lm_config"));

  // ---- weights and the learned pipeline ----
  py::class_<WeightBundle>(m, "WeightBundle",
                           "Network + refiner schedule + input normalization focal")
      .def_property_readonly("n", [](const WeightBundle& b) { return b.net.n; })
      .def_property_readonly("lm", [](const WeightBundle& b) { return b.lm; })
      .def_property_readonly("f_const", [](const WeightBundle& b) { return b.f_const; })
      .def_property_readonly("has_optimizer",
                             [](const WeightBundle& b) { return b.has_optimizer; })
      .def_property_readonly("update", [](const WeightBundle& b) { return b.update; });

  m.def("load_weights", &load_weights, py::arg("path"));
  m.def("save_weights", &save_weights, py::arg("path"), py::arg("weights"));
  m.def(
      "init_weights",
      [](std::uint64_t seed, int n, int m_layers) {
        WeightBundle b;
        b.net = init_params(seed, n);
        b.lm = LMConfig::gauss_newton(m_layers);
        return b;
      },
      py::arg("seed"), py::arg("n") = 9, py::arg("m") = 10,
      "Untrained fan-in-initialized weights (for smoke tests and demos)");

  m.def(
      "solve",
      [](const std::string& method, const ProblemInstance& inst, const WeightBundle* weights,
         const LMConfig* baseline_lm, const RansacConfig* ransac) {
        const MethodContext ctx = context_from(weights, baseline_lm, ransac);
        return make_method(method, ctx)(inst);
      },
      py::arg("method"), py::arg("instance"), py::arg("weights") = nullptr,
      py::arg("baseline_lm") = nullptr, py::arg("ransac") = nullptr,
      "Run one named estimator (net, pnp-net, epnp, epnp-lm, ransac) with the "
      "same preprocessing the evaluation harness applies");
  m.def("known_methods", &known_methods);

  // ---- evaluation ----
  py::class_<SuccessCriteria>(m, "SuccessCriteria",
                              "Absolute rotation bound (rad), relative translation bound")
      .def(py::init<>())
      .def_readwrite("t_R", &SuccessCriteria::t_R)
      .def_readwrite("t_T", &SuccessCriteria::t_T);

  py::class_<TrialRecord>(m, "TrialRecord")
      .def_readonly("eps_r", &TrialRecord::eps_r)
      .def_readonly("eps_t", &TrialRecord::eps_t)
      .def_readonly("truth_t_norm", &TrialRecord::truth_t_norm)
      .def_readonly("failed", &TrialRecord::failed);

  py::class_<MethodResult>(m, "MethodResult")
      .def_readonly("name", &MethodResult::name)
      .def_readonly("trials", &MethodResult::trials)
      .def_readonly("failures", &MethodResult::failures)
      .def_readonly("rotation_success", &MethodResult::rotation_success)
      .def_readonly("translation_success", &MethodResult::translation_success)
      .def_readonly("joint_success", &MethodResult::joint_success);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("trials", &EvalReport::trials)
      .def_readonly("methods", &EvalReport::methods);

  m.def(
      "evaluate",
      [](const std::vector<std::string>& names, const ScenarioConfig& sc,
         const SuccessCriteria& criteria, int trials, std::uint64_t seed,
         const WeightBundle* weights, const LMConfig* baseline_lm, const RansacConfig* ransac) {
        const MethodContext ctx = context_from(weights, baseline_lm, ransac);
        return evaluate(methods_from(names, ctx), sc, criteria, trials, seed);
      },
      py::arg("methods"), py::arg("scenario"), py::arg("criteria") = SuccessCriteria{},
      py::arg("trials") = 1000, py::arg("seed") = 0, py::arg("weights") = nullptr,
      py::arg("baseline_lm") = nullptr, py::arg("ransac") = nullptr,
      "Score named methods on one identical instance stream");

  m.def(
      "sweep_outliers",
      [](const std::vector<std::string>& names, const ScenarioConfig& sc,
         const SuccessCriteria& criteria, const std::vector<int>& counts, int trials,
         std::uint64_t seed, const WeightBundle* weights, const LMConfig* baseline_lm,
         const RansacConfig* ransac) {
        const MethodContext ctx = context_from(weights, baseline_lm, ransac);
        return sweep_outliers(methods_from(names, ctx), sc, criteria, counts, trials, seed);
      },
      py::arg("methods"), py::arg("scenario"), py::arg("criteria") = SuccessCriteria{},
      py::arg("counts") = std::vector<int>{0, 1, 2, 3, 4}, py::arg("trials") = 1000,
      py::arg("seed") = 0, py::arg("weights") = nullptr, py::arg("baseline_lm") = nullptr,
      py::arg("ransac") = nullptr);

  // ---- operation counts ----
  py::class_<OpCountConfig>(m, "OpCountConfig")
      .def(py::init<>())
      .def_readwrite("m", &OpCountConfig::m)
      .def_readwrite("ransac_max_iterations", &OpCountConfig::ransac_max_iterations)
      .def_readwrite("ransac_subset", &OpCountConfig::ransac_subset)
      .def_readwrite("ransac_inlier_ratio", &OpCountConfig::ransac_inlier_ratio)
      .def_readwrite("ransac_confidence", &OpCountConfig::ransac_confidence)
      .def_readwrite("ransac_expected", &OpCountConfig::ransac_expected)
      .def_readwrite("transcendental_cost", &OpCountConfig::transcendental_cost);

  py::class_<OpCount>(m, "OpCount")
      .def_readonly("additions", &OpCount::additions)
      .def_readonly("multiplications", &OpCount::multiplications)
      .def_readonly("divisions", &OpCount::divisions)
      .def_readonly("transcendental", &OpCount::transcendental)
      .def_readonly("total", &OpCount::total)
      .def("__repr__", [](const OpCount& c) {
        std::ostringstream out;
        out << "OpCount(total=" << c.total << ")";
        return out.str();
      });

  m.def("count_ops", &count_ops, py::arg("method"), py::arg("n"),
        py::arg("config") = OpCountConfig{});

  // ---- training ----
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("total_updates", &TrainConfig::total_updates)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("curriculum_start", &TrainConfig::curriculum_start)
      .def_readwrite("curriculum_end", &TrainConfig::curriculum_end)
      .def_readwrite("fd_step", &TrainConfig::fd_step)
      .def_readwrite("fd_probes", &TrainConfig::fd_probes)
      .def_readwrite("refine_layers", &TrainConfig::refine_layers)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
      .def_readwrite("val_size", &TrainConfig::val_size)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<CheckpointRecord>(m, "CheckpointRecord")
      .def_readonly("update", &CheckpointRecord::update)
      .def_readonly("train_loss_intermediate", &CheckpointRecord::train_loss_intermediate)
      .def_readonly("train_loss_final", &CheckpointRecord::train_loss_final)
      .def_readonly("val_loss_intermediate", &CheckpointRecord::val_loss_intermediate)
      .def_readonly("val_loss_final", &CheckpointRecord::val_loss_final)
      .def_readonly("val_joint_success", &CheckpointRecord::val_joint_success);

  py::class_<TrainReport>(m, "TrainReport")
      .def_readonly("checkpoints", &TrainReport::checkpoints)
      .def_readonly("updates", &TrainReport::updates);

  m.def(
      "train",
      [](const TrainConfig& tc, const ScenarioConfig& sc) {
        auto [net, lm, report] = train(tc, sc);
        WeightBundle bundle;
        bundle.net = std::move(net);
        bundle.lm = std::move(lm);
        return py::make_tuple(std::move(bundle), std::move(report));
      },
      py::arg("config"), py::arg("scenario"),
      "Fresh full run; returns (weights, report).  Use the command-line tool "
      "for checkpointed or resumable runs.");

  // ---- dataset files ----
  m.def("save_dataset", &save_dataset, py::arg("path"), py::arg("instances"));
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def(
      "import_table",
      [](const std::string& text, int pick, int corrupt, std::uint64_t seed) {
        ImportOptions options;
        options.pick = pick;
        options.corrupt = corrupt;
        options.seed = seed;
        std::istringstream in(text);
        ImportSummary summary;
        std::vector<ProblemInstance> instances = import_table(in, options, &summary);
        py::dict stats;
        stats["images_seen"] = summary.images_seen;
        stats["images_skipped"] = summary.images_skipped;
        stats["instances"] = summary.instances;
        return py::make_tuple(std::move(instances), stats);
      },
      py::arg("text"), py::arg("pick") = 9, py::arg("corrupt") = 0, py::arg("seed") = 0,
      "Map a correspondence table (CSV text) to instances; returns "
      "(instances, stats)");
}

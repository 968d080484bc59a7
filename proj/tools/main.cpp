// Command-line front end.  One binary, six subcommands:
//   generate   synthetic dataset files
//   train      fit the coarse network + refiner schedule, checkpointed
//   solve      per-record pose estimates for a dataset file
//   eval       success-rate report (optionally sweeping outlier counts)
//   bench-ops  operation-count series over a range of problem sizes
//   import     map a correspondence table into the dataset format
//
// Exit codes: 0 success, 1 usage or schema error, 2 file I/O error,
// 3 numerical abort.  Every subcommand's outputs are bit-reproducible for
// fixed flags and inputs.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pnpkit/bench.hpp"
#include "pnpkit/errors.hpp"
#include "pnpkit/io.hpp"
#include "pnpkit/synth.hpp"
#include "pnpkit/train.hpp"

namespace {

using namespace pnpkit;

// ---- small parsers ----------------------------------------------------------

double parse_full_double(const std::string& text, const char* what) {
  const char* s = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw SchemaError(std::string("expected a number for ") + what + ", got '" + text + "'");
  return v;
}

long long parse_full_int(const std::string& text, const char* what) {
  const char* s = text.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(s, &end, 10);
  if (end == s || *end != '\0')
    throw SchemaError(std::string("expected an integer for ") + what + ", got '" + text + "'");
  return v;
}

// "1deg", "0.0175rad", or a bare number (degrees).  Returns radians.
double parse_angle(const std::string& text) {
  std::string body = text;
  double scale = M_PI / 180.0;
  const auto ends_with = [&](const char* suffix) {
    const std::size_t len = std::strlen(suffix);
    return body.size() > len && body.compare(body.size() - len, len, suffix) == 0;
  };
  if (ends_with("deg")) {
    body.resize(body.size() - 3);
  } else if (ends_with("rad")) {
    body.resize(body.size() - 3);
    scale = 1.0;
  }
  return parse_full_double(body, "angle threshold") * scale;
}

// "6..20" or a single "9".
std::pair<int, int> parse_range(const std::string& text) {
  const std::size_t sep = text.find("..");
  long long lo, hi;
  if (sep == std::string::npos) {
    lo = hi = parse_full_int(text, "problem size");
  } else {
    lo = parse_full_int(text.substr(0, sep), "range start");
    hi = parse_full_int(text.substr(sep + 2), "range end");
  }
  if (lo < 1 || hi < lo) throw SchemaError("range must satisfy 1 <= start <= end, got '" + text + "'");
  if (hi - lo > 100000) throw SchemaError("range is implausibly wide: '" + text + "'");
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

std::vector<std::string> split_commas(const std::string& text, const char* what) {
  std::vector<std::string> out;
  std::string cur;
  const auto flush = [&] {
    if (cur.empty()) throw SchemaError(std::string("empty entry in ") + what);
    out.push_back(cur);
    cur.clear();
  };
  for (const char ch : text) {
    if (ch == ',')
      flush();
    else
      cur += ch;
  }
  flush();
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (const std::string& tok : split_commas(text, what))
    out.push_back(static_cast<int>(parse_full_int(tok, what)));
  return out;
}

// Writes through `body` to the path, or to stdout when the path is empty.
void write_text(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  body(out);
  out.flush();
  if (!out) throw IoError("write failure on '" + path + "'");
}

// ---- shared flag groups -------------------------------------------------------

struct ScenarioFlags {
  ScenarioConfig sc;
  std::string pose_prior = "box";
  std::string outliers = "on";

  void attach(CLI::App* cmd) {
    cmd->add_option("--n", sc.n, "correspondences per instance")->capture_default_str();
    cmd->add_option("--pose-prior", pose_prior, "pose prior: box or gaussian")
        ->capture_default_str();
    cmd->add_option("--t-box", sc.t_box_halfwidth, "box prior: translation half-width per axis")
        ->capture_default_str();
    cmd->add_option("--gaussian-sigma", sc.gaussian_sigma,
                    "gaussian prior: translation std per axis")
        ->capture_default_str();
    cmd->add_option("--theta-min", sc.theta_min, "smallest rotation angle (rad)")
        ->capture_default_str();
    cmd->add_option("--theta-max", sc.theta_max, "largest rotation angle (rad)")
        ->capture_default_str();
    cmd->add_option("--point-halfwidth", sc.point_halfwidth,
                    "camera-frame point box half-width (x, y)")
        ->capture_default_str();
    cmd->add_option("--depth-min", sc.depth_min, "camera-frame depth lower bound")
        ->capture_default_str();
    cmd->add_option("--depth-max", sc.depth_max, "camera-frame depth upper bound")
        ->capture_default_str();
    cmd->add_option("--sigma3d", sc.sigma3d, "3D noise std per coordinate")
        ->capture_default_str();
    cmd->add_option("--sigma2d", sc.sigma2d, "2D noise std per pixel coordinate")
        ->capture_default_str();
    cmd->add_option("--f", sc.f, "generation focal length")->capture_default_str();
    cmd->add_option("--image-halfwidth", sc.image_halfwidth, "visibility bound in pixels")
        ->capture_default_str();
    cmd->add_option("--outliers", outliers, "mismatch injection: on or off")
        ->capture_default_str();
    cmd->add_option("--outlier-max", sc.outlier_count_max,
                    "largest drawn mismatch count (-1: n/3)")
        ->capture_default_str();
    cmd->add_option("--outlier-count", sc.outlier_count_fixed,
                    "pin the mismatch count (-1: draw uniformly)")
        ->capture_default_str();
    cmd->add_option("--seed", sc.seed, "scenario stream seed")->capture_default_str();
  }

  ScenarioConfig resolve() const {
    ScenarioConfig out = sc;
    if (pose_prior == "box")
      out.pose_prior = PosePrior::uniform_box;
    else if (pose_prior == "gaussian")
      out.pose_prior = PosePrior::gaussian;
    else
      throw SchemaError("--pose-prior must be 'box' or 'gaussian', got '" + pose_prior + "'");
    if (outliers == "off") {  // overrides --outlier-max / --outlier-count
      out.outlier_count_max = 0;
      out.outlier_count_fixed = -1;
    } else if (outliers != "on") {
      throw SchemaError("--outliers must be 'on' or 'off', got '" + outliers + "'");
    }
    out.validate();
    return out;
  }
};

struct RansacFlags {
  RansacConfig rc;

  void attach(CLI::App* cmd) {
    cmd->add_option("--ransac-iterations", rc.max_iterations, "hypothesis budget")
        ->capture_default_str();
    cmd->add_option("--ransac-subset", rc.subset_size, "points per hypothesis")
        ->capture_default_str();
    cmd->add_option("--ransac-threshold", rc.inlier_threshold,
                    "inlier residual bound in pixels")
        ->capture_default_str();
    cmd->add_option("--ransac-confidence", rc.confidence, "adaptive stopping target")
        ->capture_default_str();
    cmd->add_option("--ransac-seed", rc.seed, "subset sampling seed")->capture_default_str();
  }
};

// Builds the estimator context shared by solve and eval.  The bundle must
// outlive the returned context (it owns the network the context points at).
MethodContext make_context(const WeightBundle* bundle, const RansacFlags& ransac,
                           int lm_layers) {
  if (lm_layers < 1) throw SchemaError("--lm-layers must be >= 1");
  MethodContext ctx;
  ctx.baseline_lm = LMConfig::gauss_newton(lm_layers);
  ctx.ransac = ransac.rc;
  if (bundle) {
    ctx.net = &bundle->net;
    ctx.learned_lm = bundle->lm;
  }
  return ctx;
}

void require_known_method(const std::string& name) {
  const std::vector<std::string> known = known_methods();
  if (std::find(known.begin(), known.end(), name) == known.end()) {
    std::string list;
    for (const std::string& k : known) list += (list.empty() ? "" : ", ") + k;
    throw SchemaError("unknown method '" + name + "' (known: " + list + ")");
  }
}

// ---- generate -----------------------------------------------------------------

struct GenerateOptions {
  ScenarioFlags scenario;
  long long trials = 1000;
  std::string out;
};

void run_generate(const GenerateOptions& opt) {
  if (opt.trials < 1) throw SchemaError("--trials must be >= 1");
  const ScenarioConfig sc = opt.scenario.resolve();
  std::vector<ProblemInstance> instances;
  instances.reserve(static_cast<std::size_t>(opt.trials));
  std::map<int, long long> histogram;
  for (long long k = 0; k < opt.trials; ++k) {
    instances.push_back(make_instance(sc, static_cast<std::uint64_t>(k)));
    int mismatches = 0;
    if (instances.back().outlier_mask)
      for (const std::uint8_t flag : *instances.back().outlier_mask) mismatches += flag;
    ++histogram[mismatches];
  }
  save_dataset(opt.out, instances);
  std::cout << "instances " << opt.trials << "\n";
  std::cout << "outlier histogram:";
  for (const auto& [count, freq] : histogram) std::cout << ' ' << count << ':' << freq;
  std::cout << "\n";
}

// ---- train ----------------------------------------------------------------------

struct TrainOptions {
  ScenarioFlags scenario;
  TrainConfig tc;
  std::string out;
  std::string log;
  std::string resume;
  long long run_until = -1;
};

void run_train(const TrainOptions& opt) {
  const ScenarioConfig sc = opt.scenario.resolve();
  const TrainConfig& tc = opt.tc;
  tc.validate();

  TrainState state;
  if (opt.resume.empty()) {
    state = init_train_state(tc, sc);
  } else {
    state = state_from_bundle(load_weights(opt.resume));
    if (state.net.n != sc.n)
      throw SchemaError("checkpoint was built for n = " + std::to_string(state.net.n) +
                        "; pass --n " + std::to_string(state.net.n));
    if (state.hyper_u.size() != 3LL * tc.refine_layers)
      throw SchemaError("checkpoint refiner has m = " +
                        std::to_string(state.hyper_u.size() / 3) + " layers; pass --layers " +
                        std::to_string(state.hyper_u.size() / 3));
  }

  std::vector<CheckpointRecord> records;
  const CheckpointSink sink = [&](const TrainState& s, const CheckpointRecord& rec) {
    records.push_back(rec);
    save_weights(opt.out, bundle_from_state(s, kFocalConst));
  };
  const auto write_log = [&] {
    if (opt.log.empty()) return;
    TrainReport progress;
    progress.checkpoints = records;
    progress.updates = state.update;
    write_text(opt.log, [&](std::ostream& os) { write_train_log_csv(os, progress); });
  };

  try {
    train(tc, sc, state, sink, opt.run_until);
  } catch (const NonFiniteLoss& e) {
    write_log();
    std::cerr << "error: " << e.what() << "; last checkpoint retained at '" << opt.out << "'\n";
    throw;
  }
  write_log();

  std::cout << "update " << state.update;
  if (!records.empty()) {
    const CheckpointRecord& last = records.back();
    std::cout << " val_loss_intermediate " << last.val_loss_intermediate
              << " val_loss_final " << last.val_loss_final << " val_joint_success "
              << last.val_joint_success;
  }
  std::cout << "\nweights " << opt.out << "\n";
}

// ---- solve ----------------------------------------------------------------------

struct SolveOptions {
  std::string method = "epnp";
  std::string weights;
  std::string in;
  std::string out;
  RansacFlags ransac;
  int lm_layers = 10;
};

void run_solve(const SolveOptions& opt) {
  require_known_method(opt.method);
  WeightBundle bundle;
  const bool have_weights = !opt.weights.empty();
  if (have_weights) bundle = load_weights(opt.weights);
  const MethodContext ctx = make_context(have_weights ? &bundle : nullptr, opt.ransac,
                                         opt.lm_layers);
  const Method method = make_method(opt.method, ctx);

  const std::vector<ProblemInstance> data = load_dataset(opt.in);
  std::vector<PoseRecord> records;
  records.reserve(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    PoseRecord rec;
    rec.index = static_cast<long long>(k);
    try {
      rec.pose = method(data[k]);
      if (data[k].truth) {
        rec.eps_r = rotation_error(rec.pose, *data[k].truth);
        rec.eps_t = translation_error(rec.pose, *data[k].truth);
      }
    } catch (const Error&) {
      rec.failed = true;  // pose stays identity; error columns stay blank
    }
    records.push_back(rec);
  }
  write_text(opt.out, [&](std::ostream& os) { write_pose_records_csv(os, records); });
}

// ---- eval -----------------------------------------------------------------------

struct EvalOptions {
  ScenarioFlags scenario;
  std::string tr = "1deg";
  double tt = 0.2;
  long long trials = 1000;
  std::string methods = "epnp,epnp-lm,ransac";
  std::string weights;
  std::string sweep;
  std::string out;
  std::string trials_out;
  RansacFlags ransac;
  int lm_layers = 10;
};

void run_eval(const EvalOptions& opt) {
  SuccessCriteria criteria;
  criteria.t_R = parse_angle(opt.tr);
  criteria.t_T = opt.tt;
  criteria.validate();
  if (opt.trials < 1) throw SchemaError("--trials must be >= 1");
  const ScenarioConfig sc = opt.scenario.resolve();

  WeightBundle bundle;
  const bool have_weights = !opt.weights.empty();
  if (have_weights) bundle = load_weights(opt.weights);
  const MethodContext ctx = make_context(have_weights ? &bundle : nullptr, opt.ransac,
                                         opt.lm_layers);

  MethodList methods;
  for (const std::string& name : split_commas(opt.methods, "--methods")) {
    require_known_method(name);
    methods.emplace_back(name, make_method(name, ctx));
  }

  if (!opt.sweep.empty()) {
    const std::vector<int> counts = parse_int_list(opt.sweep, "--sweep");
    const std::vector<EvalReport> reports =
        sweep_outliers(methods, sc, criteria, counts, static_cast<int>(opt.trials), sc.seed);
    write_text(opt.out, [&](std::ostream& os) { write_sweep_csv(os, reports); });
    return;
  }
  const EvalReport report =
      evaluate(methods, sc, criteria, static_cast<int>(opt.trials), sc.seed);
  write_text(opt.out, [&](std::ostream& os) { write_eval_csv(os, report); });
  if (!opt.trials_out.empty())
    write_text(opt.trials_out, [&](std::ostream& os) { write_trials_csv(os, report); });
}

// ---- bench-ops --------------------------------------------------------------------

struct BenchOpsOptions {
  std::string n_range = "6..20";
  std::string methods = "net,pnp-net,epnp,epnp-lm,refine,ransac,ransac-expected";
  OpCountConfig cfg;
  std::string out;
};

void run_bench_ops(const BenchOpsOptions& opt) {
  const auto [lo, hi] = parse_range(opt.n_range);
  const std::vector<std::string> names = split_commas(opt.methods, "--methods");
  std::vector<OpsRow> rows;
  for (int n = lo; n <= hi; ++n) {
    for (const std::string& name : names) {
      try {
        if (name == "ransac-expected") {
          OpCountConfig expected = opt.cfg;
          expected.ransac_expected = true;
          rows.emplace_back(name, n, count_ops("ransac", n, expected));
        } else {
          rows.emplace_back(name, n, count_ops(name, n, opt.cfg));
        }
      } catch (const UnknownMethod& e) {
        throw SchemaError(e.what());
      }
    }
  }
  write_text(opt.out, [&](std::ostream& os) { write_ops_csv(os, rows); });
}

// ---- import ----------------------------------------------------------------------

struct CliImportOptions {
  std::string in;
  std::string out;
  ImportOptions map;
};

void run_import(const CliImportOptions& opt) {
  std::ifstream in(opt.in, std::ios::binary);
  if (!in) throw IoError("cannot open '" + opt.in + "' for reading");
  ImportSummary summary;
  const std::vector<ProblemInstance> instances = import_table(in, opt.map, &summary);
  save_dataset(opt.out, instances);
  std::cout << "images " << summary.images_seen << " skipped " << summary.images_skipped
            << " instances " << summary.instances << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perspective-n-Point toolkit: data generation, training, solving, "
               "evaluation, and complexity benchmarking"};
  app.require_subcommand(1);

  GenerateOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("generate", "write a synthetic dataset file");
  gen.scenario.attach(gen_cmd);
  gen_cmd->add_option("--trials", gen.trials, "instances to generate")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "dataset output path")->required();

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "fit the network and refiner schedule");
  tr.scenario.attach(train_cmd);
  train_cmd->add_option("--updates", tr.tc.total_updates, "total parameter updates")
      ->capture_default_str();
  train_cmd->add_option("--batch", tr.tc.batch_size, "instances per update")
      ->capture_default_str();
  train_cmd->add_option("--lr", tr.tc.learning_rate, "Adam step size")->capture_default_str();
  train_cmd->add_option("--curriculum-start", tr.tc.curriculum_start,
                        "refined-loss ramp start (fraction of updates)")
      ->capture_default_str();
  train_cmd->add_option("--curriculum-end", tr.tc.curriculum_end,
                        "refined-loss ramp end (fraction of updates)")
      ->capture_default_str();
  train_cmd->add_option("--fd-step", tr.tc.fd_step, "refined-stage finite-difference step")
      ->capture_default_str();
  train_cmd->add_option("--fd-probes", tr.tc.fd_probes,
                        "batch samples probed for refined-stage gradients")
      ->capture_default_str();
  train_cmd->add_option("--layers", tr.tc.refine_layers, "refiner layers (m)")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tr.tc.checkpoint_every, "updates per checkpoint")
      ->capture_default_str();
  train_cmd->add_option("--val-size", tr.tc.val_size, "held-out validation instances")
      ->capture_default_str();
  train_cmd->add_option("--train-seed", tr.tc.seed, "optimization stream seed")
      ->capture_default_str();
  train_cmd->add_option("--run-until", tr.run_until,
                        "pause after this update (-1: run to completion)")
      ->capture_default_str();
  train_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
  train_cmd->add_option("--log", tr.log, "training-log CSV path");
  train_cmd->add_option("--out", tr.out, "weight container output path")->required();

  SolveOptions sol;
  CLI::App* solve_cmd = app.add_subcommand("solve", "estimate a pose for every record");
  solve_cmd->add_option("--method", sol.method, "net, pnp-net, epnp, epnp-lm, or ransac")
      ->capture_default_str();
  solve_cmd->add_option("--weights", sol.weights, "weight container (required for net/pnp-net)");
  solve_cmd->add_option("--in", sol.in, "dataset input path")->required();
  solve_cmd->add_option("--out", sol.out, "pose-record CSV path (default: stdout)");
  solve_cmd->add_option("--lm-layers", sol.lm_layers, "baseline refiner layers")
      ->capture_default_str();
  sol.ransac.attach(solve_cmd);

  EvalOptions ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "success-rate report on a scenario stream");
  ev.scenario.attach(eval_cmd);
  eval_cmd->add_option("--tr", ev.tr, "rotation threshold, e.g. 1deg or 0.0175rad")
      ->capture_default_str();
  eval_cmd->add_option("--tt", ev.tt, "translation threshold (fraction of |t|)")
      ->capture_default_str();
  eval_cmd->add_option("--trials", ev.trials, "trials per method")->capture_default_str();
  eval_cmd->add_option("--methods", ev.methods, "comma-separated method list")
      ->capture_default_str();
  eval_cmd->add_option("--weights", ev.weights, "weight container (required for net/pnp-net)");
  eval_cmd->add_option("--sweep", ev.sweep,
                       "comma-separated fixed outlier counts (sweep mode)");
  eval_cmd->add_option("--out", ev.out, "report CSV path (default: stdout)");
  eval_cmd->add_option("--trials-out", ev.trials_out, "per-trial record CSV path");
  eval_cmd->add_option("--lm-layers", ev.lm_layers, "baseline refiner layers")
      ->capture_default_str();
  ev.ransac.attach(eval_cmd);

  BenchOpsOptions bo;
  CLI::App* bench_cmd = app.add_subcommand("bench-ops", "operation counts over problem sizes");
  bench_cmd->add_option("--n-range", bo.n_range, "problem sizes, e.g. 6..20 or 9")
      ->capture_default_str();
  bench_cmd->add_option("--methods", bo.methods, "comma-separated method/stage list")
      ->capture_default_str();
  bench_cmd->add_option("--m", bo.cfg.m, "refiner layers")->capture_default_str();
  bench_cmd->add_option("--transcendental-cost", bo.cfg.transcendental_cost,
                        "ops charged per transcendental evaluation")
      ->capture_default_str();
  bench_cmd->add_option("--ransac-iterations", bo.cfg.ransac_max_iterations,
                        "worst-case hypothesis budget")
      ->capture_default_str();
  bench_cmd->add_option("--ransac-subset", bo.cfg.ransac_subset, "points per hypothesis")
      ->capture_default_str();
  bench_cmd->add_option("--inlier-ratio", bo.cfg.ransac_inlier_ratio,
                        "assumed inlier fraction for the expected-iteration count")
      ->capture_default_str();
  bench_cmd->add_option("--confidence", bo.cfg.ransac_confidence,
                        "target confidence for the expected-iteration count")
      ->capture_default_str();
  bench_cmd->add_option("--out", bo.out, "ops CSV path (default: stdout)");

  CliImportOptions imp;
  CLI::App* import_cmd = app.add_subcommand("import", "map a correspondence table to a dataset");
  import_cmd->add_option("--in", imp.in, "correspondence table CSV path")->required();
  import_cmd->add_option("--out", imp.out, "dataset output path")->required();
  import_cmd->add_option("--pick", imp.map.pick, "points kept per image")->capture_default_str();
  import_cmd->add_option("--corrupt", imp.map.corrupt, "leading kept slots re-paired")
      ->capture_default_str();
  import_cmd->add_option("--seed", imp.map.seed, "per-image sampling seed")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) run_generate(gen);
    if (train_cmd->parsed()) run_train(tr);
    if (solve_cmd->parsed()) run_solve(sol);
    if (eval_cmd->parsed()) run_eval(ev);
    if (bench_cmd->parsed()) run_bench_ops(bo);
    if (import_cmd->parsed()) run_import(imp);
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

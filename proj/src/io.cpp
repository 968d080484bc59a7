#include "pnpkit/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>

#include "pnpkit/errors.hpp"
#include "pnpkit/rng.hpp"

namespace pnpkit {
namespace {

// ---- number formatting and parsing -----------------------------------------

// 17 significant digits round-trip any IEEE-754 double exactly, which is what
// makes write -> read -> write byte-identical.
std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, const char* what) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw SchemaError(std::string("expected a number for ") + what + ", got '" + tok + "'");
  return v;
}

long long parse_int(const std::string& tok, const char* what) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(s, &end, 10);
  if (end == s || *end != '\0')
    throw SchemaError(std::string("expected an integer for ") + what + ", got '" + tok + "'");
  return v;
}

std::string require_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok))
    throw SchemaError(std::string("unexpected end of input, expected ") + what);
  return tok;
}

void expect_keyword(std::istream& in, const char* keyword) {
  const std::string tok = require_token(in, keyword);
  if (tok != keyword)
    throw SchemaError(std::string("expected '") + keyword + "', got '" + tok + "'");
}

double require_double(std::istream& in, const char* what) {
  return parse_double(require_token(in, what), what);
}

long long require_int(std::istream& in, const char* what) {
  return parse_int(require_token(in, what), what);
}

}  // namespace

// ---- dataset text format ----------------------------------------------------

void write_dataset(std::ostream& out, const std::vector<ProblemInstance>& instances) {
  out << "pnpkit-dataset 1\n";
  out << "count " << instances.size() << "\n";
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const ProblemInstance& inst = instances[k];
    if (inst.outlier_mask && inst.outlier_mask->size() != inst.corrs.size())
      throw SchemaError("instance " + std::to_string(k) +
                        ": outlier mask length disagrees with correspondence count");
    out << "instance " << k << "\n";
    out << "f " << g17(inst.intrinsics.f) << "\n";
    out << "n " << inst.corrs.size() << "\n";
    if (inst.truth) {
      const Pose& p = *inst.truth;
      const Eigen::Vector3d& w = p.rot.omega();
      out << "truth " << g17(p.t.x()) << ' ' << g17(p.t.y()) << ' ' << g17(p.t.z()) << ' '
          << g17(w.x()) << ' ' << g17(w.y()) << ' ' << g17(w.z()) << "\n";
    }
    if (inst.outlier_mask) {
      out << "outliers";
      for (const std::uint8_t flag : *inst.outlier_mask) out << ' ' << static_cast<int>(flag);
      out << "\n";
    }
    for (const Correspondence& c : inst.corrs) {
      out << "point " << g17(c.a.x()) << ' ' << g17(c.a.y()) << ' ' << g17(c.a.z()) << ' '
          << g17(c.b.x()) << ' ' << g17(c.b.y()) << "\n";
    }
  }
  if (!out) throw IoError("write failure while serializing dataset");
}

std::vector<ProblemInstance> read_dataset(std::istream& in) {
  expect_keyword(in, "pnpkit-dataset");
  const long long version = require_int(in, "format version");
  if (version != 1)
    throw SchemaError("unsupported dataset version " + std::to_string(version));
  expect_keyword(in, "count");
  const long long count = require_int(in, "instance count");
  if (count < 0) throw SchemaError("negative instance count");

  std::vector<ProblemInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long long k = 0; k < count; ++k) {
    expect_keyword(in, "instance");
    const long long idx = require_int(in, "instance index");
    if (idx != k)
      throw SchemaError("instance index " + std::to_string(idx) + " out of order, expected " +
                        std::to_string(k));

    ProblemInstance inst;
    expect_keyword(in, "f");
    inst.intrinsics.f = require_double(in, "focal length");
    if (!(inst.intrinsics.f > 0.0) || !std::isfinite(inst.intrinsics.f))
      throw SchemaError("instance " + std::to_string(k) + ": focal length must be positive");
    expect_keyword(in, "n");
    const long long n = require_int(in, "point count");
    if (n < 1) throw SchemaError("instance " + std::to_string(k) + ": point count must be >= 1");

    std::string tok = require_token(in, "'truth', 'outliers', or 'point'");
    if (tok == "truth") {
      Eigen::Vector3d t, w;
      t.x() = require_double(in, "truth t_x");
      t.y() = require_double(in, "truth t_y");
      t.z() = require_double(in, "truth t_z");
      w.x() = require_double(in, "truth w_x");
      w.y() = require_double(in, "truth w_y");
      w.z() = require_double(in, "truth w_z");
      inst.truth = Pose(t, Rotation(w));
      tok = require_token(in, "'outliers' or 'point'");
    }
    if (tok == "outliers") {
      std::vector<std::uint8_t> mask(static_cast<std::size_t>(n));
      for (long long i = 0; i < n; ++i) {
        const long long flag = require_int(in, "outlier flag");
        if (flag != 0 && flag != 1) throw SchemaError("outlier flags must be 0 or 1");
        mask[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(flag);
      }
      inst.outlier_mask = std::move(mask);
      tok = require_token(in, "'point'");
    }
    inst.corrs.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
      if (i > 0) tok = require_token(in, "'point'");
      if (tok != "point") throw SchemaError("expected 'point', got '" + tok + "'");
      Correspondence c;
      c.a.x() = require_double(in, "point a_x");
      c.a.y() = require_double(in, "point a_y");
      c.a.z() = require_double(in, "point a_z");
      c.b.x() = require_double(in, "point b_x");
      c.b.y() = require_double(in, "point b_y");
      inst.corrs.push_back(c);
    }
    out.push_back(std::move(inst));
  }
  std::string trailing;
  if (in >> trailing)
    throw SchemaError("trailing content after last instance: '" + trailing + "'");
  return out;
}

void save_dataset(const std::string& path, const std::vector<ProblemInstance>& instances) {
  std::ofstream out(path, std::ios::binary);  // binary: newlines exactly as written
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(out, instances);
  out.flush();
  if (!out) throw IoError("write failure on '" + path + "'");
}

std::vector<ProblemInstance> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_dataset(in);
}

// ---- weight container (binary) ----------------------------------------------

namespace {

constexpr char kWeightsMagic[8] = {'p', 'n', 'p', 'k', 'i', 't', 'w', 'b'};
constexpr std::uint32_t kWeightsVersion = 1;
constexpr std::uint32_t kFlagOptimizer = 1u;

void put_bytes(std::ostream& out, const void* p, std::size_t nbytes) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(nbytes));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  put_bytes(out, b, 8);
}

void put_i64(std::ostream& out, long long v) { put_u64(out, static_cast<std::uint64_t>(v)); }

void put_f64(std::ostream& out, double v) {
  static_assert(sizeof(std::uint64_t) == sizeof(double));
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

void get_bytes(std::istream& in, void* p, std::size_t nbytes) {
  if (!in.read(static_cast<char*>(p), static_cast<std::streamsize>(nbytes)))
    throw SchemaError("weight file truncated");
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

long long get_i64(std::istream& in) { return static_cast<long long>(get_u64(in)); }

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  put_u32(out, static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

Eigen::VectorXd get_vector(std::istream& in) {
  const std::uint32_t len = get_u32(in);
  if (len > (1u << 24)) throw SchemaError("implausible vector length in weight file");
  Eigen::VectorXd v(static_cast<Eigen::Index>(len));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get_f64(in);
  return v;
}

void put_chain(std::ostream& out, const std::vector<DenseLayer>& chain) {
  put_u32(out, static_cast<std::uint32_t>(chain.size()));
  for (const DenseLayer& layer : chain) {
    if (layer.b.size() != layer.W.rows())
      throw SchemaError("bias length disagrees with layer row count");
    put_u32(out, static_cast<std::uint32_t>(layer.W.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.W.cols()));
    for (Eigen::Index j = 0; j < layer.W.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.W.rows(); ++i) put_f64(out, layer.W(i, j));
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) put_f64(out, layer.b[i]);
  }
}

std::vector<DenseLayer> get_chain(std::istream& in) {
  const std::uint32_t count = get_u32(in);
  if (count > 1024) throw SchemaError("implausible layer count in weight file");
  std::vector<DenseLayer> chain(count);
  for (DenseLayer& layer : chain) {
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20) ||
        static_cast<std::uint64_t>(rows) * cols > (1ull << 26))
      throw SchemaError("implausible layer shape in weight file");
    layer.W.resize(rows, cols);
    for (Eigen::Index j = 0; j < layer.W.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.W.rows(); ++i) layer.W(i, j) = get_f64(in);
    layer.b.resize(rows);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b[i] = get_f64(in);
  }
  return chain;
}

void put_net_chains(std::ostream& out, const NetParams& net) {
  put_chain(out, net.trunk);
  put_chain(out, net.head_rot);
  put_chain(out, net.head_trans);
}

NetParams get_net_chains(std::istream& in, int n) {
  NetParams net;
  net.n = n;
  net.trunk = get_chain(in);
  net.head_rot = get_chain(in);
  net.head_trans = get_chain(in);
  return net;
}

bool same_shape(const NetParams& a, const NetParams& b) {
  const auto chain_eq = [](const std::vector<DenseLayer>& x, const std::vector<DenseLayer>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].W.rows() != y[i].W.rows() || x[i].W.cols() != y[i].W.cols() ||
          x[i].b.size() != y[i].b.size())
        return false;
    return true;
  };
  return chain_eq(a.trunk, b.trunk) && chain_eq(a.head_rot, b.head_rot) &&
         chain_eq(a.head_trans, b.head_trans);
}

void check_optimizer_shapes(const WeightBundle& bundle) {
  const Eigen::Index want = 3ll * bundle.lm.m;
  if (bundle.hyper_u.size() != want || bundle.hyper_m.size() != want ||
      bundle.hyper_v.size() != want)
    throw SchemaError("optimizer schedule vectors must have 3 entries per refiner layer");
  if (!same_shape(bundle.adam_m, bundle.net) || !same_shape(bundle.adam_v, bundle.net))
    throw SchemaError("optimizer moment shapes disagree with the network");
  if (bundle.update < 0) throw SchemaError("negative update counter");
}

}  // namespace

WeightBundle bundle_from_state(const TrainState& state, double f_const) {
  WeightBundle bundle;
  bundle.net = state.net;
  bundle.lm = state.lm();
  bundle.f_const = f_const;
  bundle.has_optimizer = true;
  bundle.hyper_u = state.hyper_u;
  bundle.hyper_m = state.hyper_m;
  bundle.hyper_v = state.hyper_v;
  bundle.adam_m = state.adam_m;
  bundle.adam_v = state.adam_v;
  bundle.update = state.update;
  return bundle;
}

TrainState state_from_bundle(const WeightBundle& bundle) {
  if (!bundle.has_optimizer)
    throw SchemaError("weight bundle carries no optimizer state, cannot resume from it");
  check_optimizer_shapes(bundle);
  TrainState state;
  state.net = bundle.net;
  state.hyper_u = bundle.hyper_u;
  state.adam_m = bundle.adam_m;
  state.adam_v = bundle.adam_v;
  state.hyper_m = bundle.hyper_m;
  state.hyper_v = bundle.hyper_v;
  state.update = bundle.update;
  return state;
}

void save_weights(const std::string& path, const WeightBundle& bundle) {
  bundle.net.validate();
  bundle.lm.validate();
  if (!(bundle.f_const > 0.0) || !std::isfinite(bundle.f_const))
    throw SchemaError("f_const must be positive and finite");
  if (bundle.has_optimizer) check_optimizer_shapes(bundle);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  put_bytes(out, kWeightsMagic, sizeof kWeightsMagic);
  put_u32(out, kWeightsVersion);
  put_u32(out, bundle.has_optimizer ? kFlagOptimizer : 0u);
  put_u32(out, static_cast<std::uint32_t>(bundle.net.n));
  put_f64(out, bundle.f_const);
  put_net_chains(out, bundle.net);
  put_u32(out, static_cast<std::uint32_t>(bundle.lm.m));
  put_f64(out, bundle.lm.weight_floor);
  for (const std::vector<double>* arr : {&bundle.lm.alpha, &bundle.lm.gamma, &bundle.lm.lambda})
    for (const double v : *arr) put_f64(out, v);
  if (bundle.has_optimizer) {
    put_i64(out, bundle.update);
    put_vector(out, bundle.hyper_u);
    put_vector(out, bundle.hyper_m);
    put_vector(out, bundle.hyper_v);
    put_net_chains(out, bundle.adam_m);
    put_net_chains(out, bundle.adam_v);
  }
  out.flush();
  if (!out) throw IoError("write failure on '" + path + "'");
}

WeightBundle load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  char magic[sizeof kWeightsMagic];
  get_bytes(in, magic, sizeof magic);
  if (std::memcmp(magic, kWeightsMagic, sizeof magic) != 0)
    throw SchemaError("'" + path + "' is not a weight file (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kWeightsVersion)
    throw SchemaError("unsupported weight file version " + std::to_string(version));
  const std::uint32_t flags = get_u32(in);
  if ((flags & ~kFlagOptimizer) != 0u)
    throw SchemaError("weight file carries unknown flags");

  WeightBundle bundle;
  const std::uint32_t n = get_u32(in);
  if (n == 0 || n > (1u << 20)) throw SchemaError("implausible correspondence count");
  bundle.f_const = get_f64(in);
  if (!(bundle.f_const > 0.0) || !std::isfinite(bundle.f_const))
    throw SchemaError("weight file f_const must be positive and finite");
  bundle.net = get_net_chains(in, static_cast<int>(n));

  bundle.lm.m = static_cast<int>(get_u32(in));
  if (bundle.lm.m < 1 || bundle.lm.m > (1 << 20))
    throw SchemaError("implausible refiner layer count");
  bundle.lm.weight_floor = get_f64(in);
  for (std::vector<double>* arr : {&bundle.lm.alpha, &bundle.lm.gamma, &bundle.lm.lambda}) {
    arr->resize(static_cast<std::size_t>(bundle.lm.m));
    for (double& v : *arr) v = get_f64(in);
  }

  bundle.has_optimizer = (flags & kFlagOptimizer) != 0u;
  if (bundle.has_optimizer) {
    bundle.update = get_i64(in);
    bundle.hyper_u = get_vector(in);
    bundle.hyper_m = get_vector(in);
    bundle.hyper_v = get_vector(in);
    bundle.adam_m = get_net_chains(in, static_cast<int>(n));
    bundle.adam_v = get_net_chains(in, static_cast<int>(n));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw SchemaError("trailing bytes after weight payload");

  try {
    bundle.net.validate();
    bundle.lm.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(std::string("invalid weight file contents: ") + e.what());
  }
  if (bundle.has_optimizer) check_optimizer_shapes(bundle);
  return bundle;
}

// ---- CSV writers ------------------------------------------------------------

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << "method,trials,failures,rotation_success,translation_success,joint_success,ops_total\n";
  for (const MethodResult& m : report.methods) {
    out << m.name << ',' << report.trials << ',' << m.failures << ','
        << g17(m.rotation_success) << ',' << g17(m.translation_success) << ','
        << g17(m.joint_success) << ',';
    if (m.ops_known) out << g17(m.ops.total);
    out << '\n';
  }
  if (!out) throw IoError("write failure while serializing evaluation report");
}

void write_sweep_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "outlier_count,method,trials,failures,rotation_success,translation_success,"
         "joint_success\n";
  for (const EvalReport& report : reports) {
    for (const MethodResult& m : report.methods) {
      out << report.scenario.outlier_count_fixed << ',' << m.name << ',' << report.trials << ','
          << m.failures << ',' << g17(m.rotation_success) << ',' << g17(m.translation_success)
          << ',' << g17(m.joint_success) << '\n';
    }
  }
  if (!out) throw IoError("write failure while serializing sweep report");
}

void write_trials_csv(std::ostream& out, const EvalReport& report) {
  out << "method,trial,eps_r,eps_t,truth_t_norm,failed\n";
  for (const MethodResult& m : report.methods) {
    for (std::size_t k = 0; k < m.trials.size(); ++k) {
      const TrialRecord& trial = m.trials[k];
      out << m.name << ',' << k << ',' << g17(trial.eps_r) << ',' << g17(trial.eps_t) << ','
          << g17(trial.truth_t_norm) << ',' << (trial.failed ? 1 : 0) << '\n';
    }
  }
  if (!out) throw IoError("write failure while serializing trial records");
}

void write_ops_csv(std::ostream& out, const std::vector<OpsRow>& rows) {
  out << "method,n,additions,multiplications,divisions,transcendental,total\n";
  for (const OpsRow& row : rows) {
    const OpCount& ops = std::get<2>(row);
    out << std::get<0>(row) << ',' << std::get<1>(row) << ',' << g17(ops.additions) << ','
        << g17(ops.multiplications) << ',' << g17(ops.divisions) << ','
        << g17(ops.transcendental) << ',' << g17(ops.total) << '\n';
  }
  if (!out) throw IoError("write failure while serializing op counts");
}

void write_train_log_csv(std::ostream& out, const TrainReport& report) {
  out << "update,train_loss_intermediate,train_loss_final,val_loss_intermediate,"
         "val_loss_final,val_joint_success\n";
  for (const CheckpointRecord& c : report.checkpoints) {
    out << c.update << ',';
    if (c.train_loss_intermediate) out << g17(*c.train_loss_intermediate);
    out << ',';
    if (c.train_loss_final) out << g17(*c.train_loss_final);
    out << ',' << g17(c.val_loss_intermediate) << ',' << g17(c.val_loss_final) << ','
        << g17(c.val_joint_success) << '\n';
  }
  if (!out) throw IoError("write failure while serializing training log");
}

void write_pose_records_csv(std::ostream& out, const std::vector<PoseRecord>& records) {
  out << "record,tx,ty,tz,wx,wy,wz,eps_r,eps_t,failed\n";
  for (const PoseRecord& r : records) {
    const Eigen::Vector3d& w = r.pose.rot.omega();
    out << r.index << ',' << g17(r.pose.t.x()) << ',' << g17(r.pose.t.y()) << ','
        << g17(r.pose.t.z()) << ',' << g17(w.x()) << ',' << g17(w.y()) << ',' << g17(w.z())
        << ',';
    if (r.eps_r) out << g17(*r.eps_r);
    out << ',';
    if (r.eps_t) out << g17(*r.eps_t);
    out << ',' << (r.failed ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failure while serializing pose records");
}

// ---- correspondence-table import ---------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

SchemaError table_error(long long line_no, const std::string& what) {
  return SchemaError("table line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

void ImportOptions::validate() const {
  if (pick < 1) throw SchemaError("pick must be at least 1");
  if (corrupt < 0 || corrupt > pick)
    throw SchemaError("corrupt must lie in [0, pick]");
}

std::vector<ProblemInstance> import_table(std::istream& in, const ImportOptions& options,
                                          ImportSummary* summary) {
  options.validate();

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("correspondence table is empty");
  const std::vector<std::string> header = split_csv_line(line);

  static constexpr const char* kRequired[] = {"image", "point", "x", "y", "z", "u", "v", "f"};
  static constexpr const char* kPose[] = {"tx", "ty", "tz", "wx", "wy", "wz"};
  const auto is_in = [](const std::string& name, const auto& names) {
    return std::any_of(std::begin(names), std::end(names),
                       [&](const char* c) { return name == c; });
  };

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& name = header[i];
    if (!is_in(name, kRequired) && !is_in(name, kPose))
      throw SchemaError("unknown column '" + name + "' in table header");
    if (!col.emplace(name, i).second)
      throw SchemaError("duplicate column '" + name + "' in table header");
  }
  for (const char* name : kRequired)
    if (!col.count(name))
      throw SchemaError(std::string("missing required column '") + name + "'");
  std::size_t pose_cols = 0;
  for (const char* name : kPose) pose_cols += col.count(name);
  if (pose_cols != 0 && pose_cols != sizeof kPose / sizeof kPose[0])
    throw SchemaError("pose columns must appear as a full set (tx ty tz wx wy wz) or not at all");
  const bool has_pose = pose_cols > 0;

  struct ImageRows {
    std::vector<Correspondence> rows;
    double f = 0.0;
    Eigen::Matrix<double, 6, 1> pose_raw = Eigen::Matrix<double, 6, 1>::Zero();
    std::optional<Pose> pose;
  };
  std::vector<ImageRows> images;
  std::unordered_map<std::string, std::size_t> ordinal;

  long long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw table_error(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(cells.size()));
    const auto cell = [&](const char* name) -> const std::string& { return cells[col.at(name)]; };

    const std::string& image_id = cell("image");
    if (image_id.empty()) throw table_error(line_no, "empty image id");
    const auto [it, fresh] = ordinal.emplace(image_id, images.size());
    if (fresh) images.emplace_back();
    ImageRows& rec = images[it->second];

    Correspondence c;
    c.a.x() = parse_double(cell("x"), "x");
    c.a.y() = parse_double(cell("y"), "y");
    c.a.z() = parse_double(cell("z"), "z");
    c.b.x() = parse_double(cell("u"), "u");
    c.b.y() = parse_double(cell("v"), "v");
    const double f = parse_double(cell("f"), "f");
    if (!(f > 0.0) || !std::isfinite(f))
      throw table_error(line_no, "focal length must be positive");
    if (fresh)
      rec.f = f;
    else if (f != rec.f)
      throw table_error(line_no, "focal length differs within image '" + image_id + "'");

    if (has_pose) {
      Eigen::Matrix<double, 6, 1> p;
      p[0] = parse_double(cell("tx"), "tx");
      p[1] = parse_double(cell("ty"), "ty");
      p[2] = parse_double(cell("tz"), "tz");
      p[3] = parse_double(cell("wx"), "wx");
      p[4] = parse_double(cell("wy"), "wy");
      p[5] = parse_double(cell("wz"), "wz");
      if (fresh) {
        rec.pose_raw = p;
        rec.pose = Pose(p.head<3>(), Rotation(p.tail<3>()));
      } else if ((p.array() != rec.pose_raw.array()).any()) {
        throw table_error(line_no, "pose differs within image '" + image_id + "'");
      }
    }
    rec.rows.push_back(c);
  }

  // One instance per image: `pick` points drawn without replacement, plus a
  // reserve point when corruption is on.  Sampling is seeded by the image's
  // first-appearance ordinal, so adding rows to a later image never changes
  // what an earlier image yields.
  const int need = options.pick + (options.corrupt > 0 ? 1 : 0);
  std::vector<ProblemInstance> out;
  ImportSummary sum;
  sum.images_seen = static_cast<int>(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImageRows& rec = images[i];
    const int avail = static_cast<int>(rec.rows.size());
    if (avail < need) {
      ++sum.images_skipped;
      continue;
    }
    Rng rng(mix_seed(options.seed, i));
    std::vector<int> idx(static_cast<std::size_t>(avail));
    std::iota(idx.begin(), idx.end(), 0);
    for (int j = 0; j < need; ++j) {
      const int r = j + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(avail - j)));
      std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(r)]);
    }

    ProblemInstance inst;
    inst.intrinsics.f = rec.f;
    inst.truth = rec.pose;
    inst.corrs.reserve(static_cast<std::size_t>(options.pick));
    for (int j = 0; j < options.pick; ++j)
      inst.corrs.push_back(rec.rows[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])]);

    std::vector<std::uint8_t> mask(static_cast<std::size_t>(options.pick), 0);
    if (options.corrupt > 0) {
      // Chain re-pairing: corrupted slot j observes the image point that
      // originally belonged to slot j + 1, and the last corrupted slot
      // observes the reserve point.  Every corrupted observation is a genuine
      // detection of some other 3D point, and no observation is duplicated.
      std::vector<Eigen::Vector2d> original;
      original.reserve(inst.corrs.size());
      for (const Correspondence& c : inst.corrs) original.push_back(c.b);
      const Eigen::Vector2d reserve =
          rec.rows[static_cast<std::size_t>(idx[static_cast<std::size_t>(options.pick)])].b;
      for (int j = 0; j < options.corrupt; ++j) {
        inst.corrs[static_cast<std::size_t>(j)].b =
            (j + 1 < options.corrupt) ? original[static_cast<std::size_t>(j + 1)] : reserve;
        mask[static_cast<std::size_t>(j)] = 1;
      }
    }
    inst.outlier_mask = std::move(mask);
    out.push_back(std::move(inst));
    ++sum.instances;
  }
  if (summary) *summary = sum;
  return out;
}

}  // namespace pnpkit

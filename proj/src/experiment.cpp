#include "ewn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ewn/rng.hpp"

namespace fs = std::filesystem;

namespace ewn {

namespace {

std::string fmt(double v) {
  char buf[32];
  snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += fmt(v[i]);
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, sep)) out.push_back(tok);
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::string section;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    kv[section.empty() ? key : section + "." + key] = val;
  }
  ExperimentConfig c;
  auto gets = [&](const std::string& k, std::string& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = it->second;
  };
  auto getd = [&](const std::string& k, double& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = std::stod(it->second);
  };
  auto geti = [&](const std::string& k, auto& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = static_cast<std::decay_t<decltype(dst)>>(std::stoll(it->second));
  };
  gets("name", c.name);
  gets("dataset.kind", c.ds_kind);
  geti("dataset.m", c.ds_m);
  geti("dataset.d", c.ds_d);
  getd("dataset.margin", c.ds_margin);
  geti("dataset.seed", c.ds_seed);
  gets("dataset.path", c.ds_path);
  gets("dataset.images", c.ds_images);
  gets("dataset.labels", c.ds_labels);
  geti("dataset.subset", c.ds_subset);
  geti("dataset.test_m", c.ds_test_m);
  geti("dataset.test_seed", c.ds_test_seed);
  gets("dataset.test_images", c.ds_test_images);
  gets("dataset.test_labels", c.ds_test_labels);
  geti("dataset.test_subset", c.ds_test_subset);
  if (kv.count("network.layer_dims")) {
    c.layer_dims.clear();
    for (auto& t : split(kv["network.layer_dims"], ',')) c.layer_dims.push_back(std::stoi(t));
  }
  if (kv.count("network.activations")) {
    c.activations.clear();
    std::string a = kv["network.activations"];
    if (!trim(a).empty())
      for (auto& t : split(a, ',')) c.activations.push_back(activation_from_string(trim(t)));
  }
  gets("network.frozen", c.frozen);
  if (kv.count("dynamics.kind")) c.dyn = dyn_from_string(kv["dynamics.kind"]);
  gets("dynamics.loss", c.loss);
  if (kv.count("dynamics.sgd")) c.sgd = kv["dynamics.sgd"] == "1" || kv["dynamics.sgd"] == "true";
  if (kv.count("schedule.kind")) {
    std::string k = kv["schedule.kind"];
    if (k == "constant")
      c.sched.kind = LRSchedule::Kind::Constant;
    else if (k == "power_of_loss")
      c.sched.kind = LRSchedule::Kind::PowerOfLoss;
    else
      throw ConfigError("unknown schedule kind: " + k);
  }
  getd("schedule.eta", c.sched.eta);
  getd("schedule.c", c.sched.c);
  getd("schedule.k0", c.sched.k);
  getd("schedule.grow", c.sched.grow);
  getd("schedule.shrink", c.sched.shrink);
  getd("schedule.cap", c.sched.cap);
  gets("init.kind", c.init_kind);
  getd("init.scale", c.init_scale);
  if (kv.count("init.values")) {
    c.init_values.clear();
    std::string v = trim(kv["init.values"]);
    if (!v.empty())
      for (auto& t : split(v, ',')) c.init_values.push_back(std::stod(t));
  }
  gets("init.frozen_values", c.frozen_values);
  geti("run.seed", c.seed);
  getd("run.target_log_loss", c.target_log_loss);
  geti("run.max_steps", c.max_steps);
  getd("run.log_factor", c.log_factor);
  geti("run.log_stride", c.log_stride);
  if (kv.count("run.loss_checkpoints")) {
    c.loss_checkpoints.clear();
    std::string v = trim(kv["run.loss_checkpoints"]);
    if (!v.empty())
      for (auto& t : split(v, ',')) c.loss_checkpoints.push_back(std::stod(t));
  }
  gets("run.log_directions", c.log_directions);
  gets("run.log_loss_vector", c.log_loss_vector);
  gets("run.out", c.out_dir);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "name = " << c.name << "\n";
  o << "[dataset]\n";
  o << "kind = " << c.ds_kind << "\n";
  o << "m = " << c.ds_m << "\n";
  o << "d = " << c.ds_d << "\n";
  o << "margin = " << fmt(c.ds_margin) << "\n";
  o << "seed = " << c.ds_seed << "\n";
  o << "path = " << c.ds_path << "\n";
  o << "images = " << c.ds_images << "\n";
  o << "labels = " << c.ds_labels << "\n";
  o << "subset = " << c.ds_subset << "\n";
  o << "test_m = " << c.ds_test_m << "\n";
  o << "test_seed = " << c.ds_test_seed << "\n";
  o << "test_images = " << c.ds_test_images << "\n";
  o << "test_labels = " << c.ds_test_labels << "\n";
  o << "test_subset = " << c.ds_test_subset << "\n";
  o << "[network]\n";
  o << "layer_dims = " << join_ints(c.layer_dims) << "\n";
  o << "activations = ";
  for (size_t i = 0; i < c.activations.size(); ++i)
    o << (i ? "," : "") << to_string(c.activations[i]);
  o << "\n";
  o << "frozen = " << c.frozen << "\n";
  o << "[dynamics]\n";
  o << "kind = " << to_string(c.dyn) << "\n";
  o << "loss = " << c.loss << "\n";
  o << "sgd = " << (c.sgd ? 1 : 0) << "\n";
  o << "[schedule]\n";
  o << "kind = " << (c.sched.kind == LRSchedule::Kind::Constant ? "constant" : "power_of_loss")
    << "\n";
  o << "eta = " << fmt(c.sched.eta) << "\n";
  o << "c = " << fmt(c.sched.c) << "\n";
  o << "k0 = " << fmt(c.sched.k) << "\n";
  o << "grow = " << fmt(c.sched.grow) << "\n";
  o << "shrink = " << fmt(c.sched.shrink) << "\n";
  o << "cap = " << fmt(c.sched.cap) << "\n";
  o << "[init]\n";
  o << "kind = " << c.init_kind << "\n";
  o << "scale = " << fmt(c.init_scale) << "\n";
  o << "values = " << join_doubles(c.init_values) << "\n";
  o << "frozen_values = " << c.frozen_values << "\n";
  o << "[run]\n";
  o << "seed = " << c.seed << "\n";
  o << "target_log_loss = " << fmt(c.target_log_loss) << "\n";
  o << "max_steps = " << c.max_steps << "\n";
  o << "log_factor = " << fmt(c.log_factor) << "\n";
  o << "log_stride = " << c.log_stride << "\n";
  o << "loss_checkpoints = " << join_doubles(c.loss_checkpoints) << "\n";
  o << "log_directions = " << c.log_directions << "\n";
  o << "log_loss_vector = " << c.log_loss_vector << "\n";
  o << "out = " << c.out_dir << "\n";
  return o.str();
}

void validate(const ExperimentConfig& c) {
  if (c.target_log_loss > 0) throw ConfigError("target log-loss must be <= 0");
  if (c.max_steps <= 0 && c.target_log_loss == 0) throw ConfigError("no stop condition");
  if (c.max_steps <= 0) throw ConfigError("max_steps must be positive");
  if (c.loss != "exp" && c.loss != "xent") throw ConfigError("loss must be exp or xent");
  if (c.frozen != "none" && c.frozen != "output_layer" && c.frozen != "simple_traj")
    throw ConfigError("unknown frozen mode: " + c.frozen);
  if (c.frozen == "simple_traj" &&
      !(c.layer_dims == std::vector<int>{2, 2, 1}))
    throw ConfigError("simple_traj wiring needs layer_dims 2,2,1");
  if (c.init_kind != "fanin_uniform" && c.init_kind != "explicit")
    throw ConfigError("unknown init kind: " + c.init_kind);
  if (c.sched.kind == LRSchedule::Kind::PowerOfLoss &&
      (c.sched.c <= 0 || c.sched.c > 1))
    throw ConfigError("schedule exponent c must lie in (0,1]");
  NetworkSpec spec;
  spec.layer_dims = c.layer_dims;
  spec.activations = c.activations;
  ewn::validate(spec);
}

LabeledSet build_dataset(const ExperimentConfig& c) {
  if (c.ds_kind == "simple_traj") return gen_simple_traj();
  if (c.ds_kind == "xor") return gen_xor();
  if (c.ds_kind == "linsep") return gen_linsep(c.ds_m, c.ds_d, c.ds_margin, c.ds_seed);
  if (c.ds_kind == "digits") return gen_digits(c.ds_m, c.ds_seed);
  if (c.ds_kind == "csv") return load_csv(c.ds_path);
  if (c.ds_kind == "mnist")
    return load_mnist_idx(c.ds_images, c.ds_labels, c.ds_subset, nullptr, c.ds_seed);
  throw ConfigError("unknown dataset kind: " + c.ds_kind);
}

LabeledSet build_test_set(const ExperimentConfig& c) {
  if (c.ds_kind == "digits") return gen_digits(c.ds_test_m > 0 ? c.ds_test_m : 1000, c.ds_test_seed);
  if (c.ds_kind == "mnist")
    return load_mnist_idx(c.ds_test_images, c.ds_test_labels, c.ds_test_subset, nullptr,
                          c.ds_test_seed);
  throw ConfigError("no test split for dataset kind " + c.ds_kind);
}

NetworkSpec build_network(const ExperimentConfig& c) {
  NetworkSpec spec;
  spec.layer_dims = c.layer_dims;
  spec.activations = c.activations;
  size_t P = param_count(spec);
  if (c.frozen == "output_layer") {
    spec.frozen_mask.assign(P, 0);
    size_t last = static_cast<size_t>(spec.layer_dims[spec.n_layers() - 1]) *
                  spec.layer_dims[spec.n_layers()];
    for (size_t i = P - last; i < P; ++i) spec.frozen_mask[i] = 1;
  } else if (c.frozen == "simple_traj") {
    // two parallel paths: hidden unit i reads input i through its own scalar,
    // cross connections pinned to 0, output row pinned to (1, 1)
    spec.frozen_mask = {0, 1, 1, 0, 1, 1};
  }
  ewn::validate(spec);
  return spec;
}

FlatParams build_init(const ExperimentConfig& c, const NetworkSpec& spec) {
  size_t P = param_count(spec);
  FlatParams w(P, 0.0);
  // frozen entries first
  if (c.frozen == "simple_traj") {
    w[1] = w[2] = 0.0;
    w[4] = w[5] = 1.0;
  } else if (c.frozen == "output_layer") {
    size_t last = static_cast<size_t>(spec.layer_dims[spec.n_layers() - 1]) *
                  spec.layer_dims[spec.n_layers()];
    if (c.frozen_values == "rademacher") {
      Rng r(c.seed ^ 0xf70ce11ull);
      for (size_t i = P - last; i < P; ++i) w[i] = r.sign();
    } else {
      auto vals = split(c.frozen_values, ',');
      if (vals.size() != last) throw ConfigError("frozen_values length mismatch");
      for (size_t i = 0; i < last; ++i) w[P - last + i] = std::stod(vals[i]);
    }
  }
  if (c.init_kind == "explicit") {
    size_t vi = 0;
    for (size_t i = 0; i < P; ++i) {
      if (spec.is_frozen(i)) continue;
      if (vi >= c.init_values.size()) throw ConfigError("init values list too short");
      w[i] = c.init_values[vi++];
    }
    if (vi != c.init_values.size()) throw ConfigError("init values list too long");
    return w;
  }
  // fan-in uniform, sampled in flat order
  Rng r(c.seed);
  size_t off = 0;
  for (int l = 0; l < spec.n_layers(); ++l) {
    int n_in = spec.layer_dims[l], n_out = spec.layer_dims[l + 1];
    double a = c.init_scale / std::sqrt(static_cast<double>(n_in));
    for (int i = 0; i < n_in * n_out; ++i) {
      size_t idx = off + i;
      double x = r.uniform(-a, a);  // always draw: stream independent of mask
      if (!spec.is_frozen(idx)) w[idx] = x;
    }
    off += static_cast<size_t>(n_in) * n_out;
  }
  return w;
}

namespace {

struct RowLogger {
  const ExperimentConfig& cfg;
  const NetworkSpec& spec;
  const std::vector<NeuronGroup>& groups;
  int L;
  bool log_dirs, log_p;

  RowLogger(const ExperimentConfig& c, const NetworkSpec& s, const std::vector<NeuronGroup>& g,
            int m, size_t n_params)
      : cfg(c), spec(s), groups(g), L(homogeneity_order(s)) {
    log_dirs = c.log_directions == "on" || (c.log_directions == "auto" && n_params <= 256);
    log_p = c.log_loss_vector == "on" || (c.log_loss_vector == "auto" && m <= 64);
  }

  TrajectoryRow make(const ParamState& st, const LogLossReport& rep, double log_eta) const {
    TrajectoryRow r;
    r.step = st.step_count;
    r.d = st.cum_step;
    r.log_total = rep.log_total;
    r.log_eta = log_eta;
    double wn = 0;
    for (double v : st.w) wn += v * v;
    wn = std::sqrt(wn);
    double mn = *std::min_element(rep.margins.begin(), rep.margins.end());
    r.rho_hat = mn / std::pow(wn, L);
    r.node_wnorm = group_norms(st.w, groups);
    r.node_log_gnorm = group_grad_log_norms(rep, groups);
    r.node_log_a5 = a5_monitor_log(st, groups, rep, log_eta);
    if (log_dirs) {
      r.w_dir.resize(st.w.size());
      for (size_t i = 0; i < st.w.size(); ++i) r.w_dir[i] = st.w[i] / wn;
    }
    if (log_p) r.p = rep.softmax_weights;
    return r;
  }
};

long next_geometric(long step, double factor) {
  double n = 1;
  while (static_cast<long>(std::ceil(n)) <= step) n = std::max(n * factor, n + 1);
  return static_cast<long>(std::ceil(n));
}

}  // namespace

void save_state(const ParamState& st, const LRSchedule& sched, double last_log_total,
                const std::string& rng_state, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const char magic[8] = {'E', 'W', 'N', 'S', 'T', '0', '0', '1'};
  f.write(magic, 8);
  auto w64 = [&](uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  auto wd = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  w64(static_cast<uint64_t>(st.kind));
  w64(st.w.size());
  w64(st.scale.size());
  w64(st.v.size());
  f.write(reinterpret_cast<const char*>(st.w.data()), st.w.size() * 8);
  f.write(reinterpret_cast<const char*>(st.scale.data()), st.scale.size() * 8);
  f.write(reinterpret_cast<const char*>(st.v.data()), st.v.size() * 8);
  w64(static_cast<uint64_t>(st.step_count));
  wd(st.cum_step);
  w64(static_cast<uint64_t>(sched.kind));
  wd(sched.eta);
  wd(sched.c);
  wd(sched.k);
  wd(sched.grow);
  wd(sched.shrink);
  wd(sched.cap);
  wd(last_log_total);
  w64(rng_state.size());
  f.write(rng_state.data(), static_cast<std::streamsize>(rng_state.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

void load_state(ParamState& st, LRSchedule& sched, double& last_log_total, std::string& rng_state,
                const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "EWNST001", 8) != 0)
    throw std::runtime_error(path + ": bad state file header");
  auto r64 = [&]() {
    uint64_t v;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto rd = [&]() {
    double v;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  st.kind = static_cast<DynKind>(r64());
  st.w.resize(r64());
  st.scale.resize(r64());
  st.v.resize(r64());
  f.read(reinterpret_cast<char*>(st.w.data()), st.w.size() * 8);
  f.read(reinterpret_cast<char*>(st.scale.data()), st.scale.size() * 8);
  f.read(reinterpret_cast<char*>(st.v.data()), st.v.size() * 8);
  st.step_count = static_cast<long>(r64());
  st.cum_step = rd();
  sched.kind = static_cast<LRSchedule::Kind>(r64());
  sched.eta = rd();
  sched.c = rd();
  sched.k = rd();
  sched.grow = rd();
  sched.shrink = rd();
  sched.cap = rd();
  last_log_total = rd();
  rng_state.resize(r64());
  f.read(rng_state.data(), static_cast<std::streamsize>(rng_state.size()));
  if (!f) throw std::runtime_error(path + ": truncated state file");
}

RunResult run(const ExperimentConfig& cfg, bool resume) {
  validate(cfg);
  LabeledSet data = build_dataset(cfg);
  NetworkSpec spec = build_network(cfg);
  auto groups = neuron_groups(spec);
  size_t P = param_count(spec);

  FlatParams w0 = build_init(cfg, spec);
  ParamState st = make_state(cfg.dyn == DynKind::AdaptiveUnnorm ? DynKind::AdaptiveUnnorm : cfg.dyn,
                             w0, groups);
  LRSchedule sched = cfg.sched;
  Rng sgd_rng(cfg.seed ^ 0x5bd1e995ull);

  RunResult res;
  res.init_params = w0;
  res.record.n_nodes = static_cast<int>(groups.size());
  res.record.n_params = static_cast<long>(P);
  res.record.n_examples = data.m;
  for (const auto& g : groups) {
    res.record.node_layer.push_back(g.layer);
    res.record.node_begin.push_back(static_cast<long>(g.begin));
    res.record.node_end.push_back(static_cast<long>(g.end));
  }

  bool to_disk = !cfg.out_dir.empty();
  fs::path out(cfg.out_dir);
  uint32_t crossed = 0;
  double prev_log_total = 0;
  if (to_disk) fs::create_directories(out);

  if (resume) {
    if (!to_disk) throw ConfigError("resume needs an output directory");
    std::string rng_state;
    load_state(st, sched, prev_log_total, rng_state, (out / "state_last.bin").string());
    if (!rng_state.empty()) {
      size_t sep = rng_state.find('|');
      crossed = static_cast<uint32_t>(std::stoul(rng_state.substr(0, sep)));
      if (sep != std::string::npos) sgd_rng.restore(rng_state.substr(sep + 1));
    }
    TrajectoryRecord old = read_trajectory_csv((out / "trajectory.csv").string());
    for (auto& r : old.rows)
      if (r.step <= st.step_count) res.record.rows.push_back(std::move(r));
  } else if (to_disk) {
    std::ofstream cf(out / "config.txt");
    cf << serialize_config(cfg);
    save_csv(data, (out / "dataset.csv").string());
    save_state(st, sched, 0.0, "", (out / "state_init.bin").string());
  }

  LossEval ev(spec, data);
  auto compute = [&](const FlatParams& w) {
    return cfg.loss == "exp" ? ev.exp_loss(w) : ev.xent_loss(w);
  };

  RowLogger logger(cfg, spec, groups, data.m, P);
  LogLossReport rep = compute(st.w);
  if (!resume) {
    prev_log_total = rep.log_total;
    res.record.rows.push_back(logger.make(st, rep, sched.log_eta(rep.log_total)));
  }

  auto persist = [&](bool final_too) {
    if (!to_disk) return;
    std::string aux = std::to_string(crossed) + "|" + (cfg.sgd ? sgd_rng.save() : "");
    save_state(st, sched, prev_log_total, aux, (out / "state_last.bin").string());
    write_trajectory_csv(res.record, (out / "trajectory.csv").string());
    if (final_too) save_state(st, sched, prev_log_total, aux, (out / "state_final.bin").string());
  };

  long next_log = cfg.log_stride > 0 ? st.step_count + cfg.log_stride
                                     : next_geometric(st.step_count, cfg.log_factor);
  int rejects = 0;
  long outer = cfg.sgd ? st.step_count / std::max(1, data.m) : st.step_count;
  std::vector<int> order(data.m);
  for (int i = 0; i < data.m; ++i) order[i] = i;

  while (outer < cfg.max_steps && rep.log_total > cfg.target_log_loss) {
    if (!cfg.sgd) {
      double log_eta = sched.log_eta(rep.log_total);
      ParamState cand = st;
      step(cand, spec, groups, rep, log_eta);
      if (!cand.finite()) {
        sched.halve();
        if (++rejects > 30) {
          persist(true);
          throw DivergenceError(cfg.name + ": 30 consecutive rejected steps at step " +
                                std::to_string(st.step_count));
        }
        continue;
      }
      LogLossReport new_rep = compute(cand.w);
      if (!std::isfinite(new_rep.log_total)) {
        sched.halve();
        if (++rejects > 30) {
          persist(true);
          throw DivergenceError(cfg.name + ": 30 consecutive rejected steps at step " +
                                std::to_string(st.step_count));
        }
        continue;
      }
      rejects = 0;
      sched.next(rep.log_total, new_rep.log_total);
      prev_log_total = rep.log_total;
      st = std::move(cand);
      rep = std::move(new_rep);
      outer = st.step_count;
    } else {
      // one epoch: single-example steps in a fresh random order, then the
      // full-batch loss drives the schedule and the log
      sgd_rng.shuffle(order);
      double log_eta = sched.log_eta(rep.log_total);
      for (int i : order) {
        ev.set_subset({i});
        LogLossReport ri = compute(st.w);
        ParamState cand = st;
        step(cand, spec, groups, ri, log_eta);
        if (cand.finite()) st = std::move(cand);
      }
      ev.set_subset({});
      LogLossReport new_rep = compute(st.w);
      if (!std::isfinite(new_rep.log_total)) {
        sched.halve();
        if (++rejects > 30) {
          persist(true);
          throw DivergenceError(cfg.name + ": diverged during SGD epoch");
        }
        continue;
      }
      rejects = 0;
      sched.next(rep.log_total, new_rep.log_total);
      prev_log_total = rep.log_total;
      rep = std::move(new_rep);
      ++outer;
    }

    bool crossing = false;
    for (size_t ci = 0; ci < cfg.loss_checkpoints.size(); ++ci) {
      if (!(crossed & (1u << ci)) && rep.log_total <= cfg.loss_checkpoints[ci]) {
        crossed |= 1u << ci;
        crossing = true;
        res.checkpoint_states.push_back({cfg.loss_checkpoints[ci], st});
        if (to_disk) {
          std::string aux = std::to_string(crossed) + "|" + (cfg.sgd ? sgd_rng.save() : "");
          save_state(st, sched, prev_log_total, aux,
                     (out / ("state_at_" + std::to_string(ci) + ".bin")).string());
        }
      }
    }
    bool done = rep.log_total <= cfg.target_log_loss || outer >= cfg.max_steps;
    if (outer >= next_log || crossing || done) {
      res.record.rows.push_back(logger.make(st, rep, sched.log_eta(rep.log_total)));
      while (next_log <= outer)
        next_log = cfg.log_stride > 0 ? next_log + cfg.log_stride
                                      : next_geometric(next_log, cfg.log_factor);
      if (done || res.record.rows.size() % 64 == 0) persist(done);
    }
  }

  res.final_state = st;
  res.final_log_total = rep.log_total;
  res.steps = st.step_count;
  res.reached_target = rep.log_total <= cfg.target_log_loss;
  if (to_disk) {
    persist(true);
    nlohmann::json meta;
    meta["format_version"] = 1;
    meta["name"] = cfg.name;
    meta["n_nodes"] = res.record.n_nodes;
    meta["n_params"] = res.record.n_params;
    meta["n_examples"] = res.record.n_examples;
    meta["node_layer"] = res.record.node_layer;
    meta["node_begin"] = res.record.node_begin;
    meta["node_end"] = res.record.node_end;
    meta["steps"] = res.steps;
    meta["final_log_total"] = res.final_log_total;
    meta["reached_target"] = res.reached_target;
    meta["dynamics"] = to_string(cfg.dyn);
    meta["loss"] = cfg.loss;
    meta["homogeneity_order"] = homogeneity_order(spec);
    std::ofstream mf(out / "meta.json");
    mf << meta.dump(2) << "\n";
  }
  return res;
}

std::vector<std::string> preset_names() {
  return {"lin-sep-ewn", "lin-sep-swn", "simple-traj", "xor", "rate-sweep", "mnist-prune"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "lin-sep-ewn" || name == "lin-sep-swn") {
    c.ds_kind = "linsep";
    c.ds_m = 20;
    c.ds_d = 2;
    c.ds_margin = 0.6;
    c.ds_seed = 2;
    c.layer_dims = {2, 8, 1};
    c.activations = {Activation::ReLUSquared};
    c.dyn = name == "lin-sep-ewn" ? DynKind::Ewn : DynKind::Swn;
    c.sched = LRSchedule::power_of_loss(0.97, 0.01, 0.01);
    c.init_scale = 0.15;
    c.seed = 2;
    c.target_log_loss = -300;
    c.max_steps = 3000000;
    // the three comparison losses plus a 5-nat grid so the trajectory keeps
    // resolution through the tail
    c.loss_checkpoints = {-200, -250, -300};
    for (double cp = -255; cp >= -295; cp -= 5) c.loss_checkpoints.push_back(cp);
  } else if (name == "simple-traj") {
    c.ds_kind = "simple_traj";
    c.layer_dims = {2, 2, 1};
    c.activations = {Activation::Linear};
    c.frozen = "simple_traj";
    c.dyn = DynKind::Ewn;
    c.sched = LRSchedule::power_of_loss(0.9, 0.01, 0.1);
    c.init_kind = "explicit";
    c.init_values = {1.0, 0.4};
    c.target_log_loss = -50;
    c.max_steps = 200000;
  } else if (name == "xor") {
    c.ds_kind = "xor";
    c.layer_dims = {2, 20, 1};
    c.activations = {Activation::ReLU};
    c.frozen = "output_layer";
    c.dyn = DynKind::Ewn;
    c.sched = LRSchedule::power_of_loss(0.93, 0.01, 0.01);
    c.init_scale = 0.1;
    c.seed = 1;
    c.target_log_loss = -50;
    c.max_steps = 3000000;
  } else if (name == "rate-sweep") {
    // one depth of the sweep; the CLI fans out depths 2..5
    c.ds_kind = "linsep";
    c.ds_m = 20;
    c.ds_d = 2;
    c.ds_margin = 0.6;
    c.ds_seed = 7;
    c.layer_dims = {2, 1, 1};
    c.activations = {Activation::Linear};
    c.dyn = DynKind::Ewn;
    c.sched = LRSchedule::constant(0.001);
    c.target_log_loss = -10000;  // run the full step budget
    c.max_steps = 5000;
    c.log_stride = 10;
  } else if (name == "mnist-prune") {
    c.ds_kind = "digits";
    c.ds_m = 2000;
    c.ds_seed = 3;
    c.ds_test_m = 1000;
    c.ds_test_seed = 4;
    c.layer_dims = {784, 64, 10};
    c.activations = {Activation::ReLU};
    c.dyn = DynKind::Ewn;
    c.loss = "xent";
    c.sched = LRSchedule::power_of_loss(1.0, 0.01, 1.0);
    c.seed = 1;
    c.target_log_loss = -50;
    c.max_steps = 20000;
    c.loss_checkpoints = {-5, -50};
    c.log_directions = "off";
    c.log_loss_vector = "off";
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return c;
}

}  // namespace ewn

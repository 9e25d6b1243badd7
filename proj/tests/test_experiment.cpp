#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ewn/experiment.hpp"
#include "ewn/rng.hpp"

using namespace ewn;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("ewn_exp_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny_run() {
  ExperimentConfig c = preset("simple-traj");
  c.target_log_loss = -10;
  c.max_steps = 5000;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config round trip is byte-identical") {
  for (auto& name : preset_names()) {
    auto cfg = preset(name);
    std::string a = serialize_config(cfg);
    std::string b = serialize_config(parse_config(a));
    CHECK(a == b);
  }
  // randomized configs
  Rng rng(101);
  for (int t = 0; t < 1000; ++t) {
    ExperimentConfig c;
    c.name = "r" + std::to_string(t);
    c.ds_kind = "linsep";
    c.ds_m = 2 + static_cast<int>(rng.below(30));
    c.ds_margin = rng.uniform(0.01, 0.9);
    c.ds_seed = rng.next_u64() % 1000;
    c.layer_dims = {2, 1 + static_cast<int>(rng.below(9)), 1};
    c.activations = {static_cast<Activation>(rng.below(3))};
    c.dyn = static_cast<DynKind>(rng.below(4));
    c.sched = rng.below(2) ? LRSchedule::constant(rng.uniform(1e-4, 1e-2))
                           : LRSchedule::power_of_loss(rng.uniform(0.5, 1.0),
                                                       rng.uniform(1e-3, 1e-2), 0.01);
    c.init_scale = rng.uniform(0.1, 2.0);
    c.seed = rng.next_u64() % 100000;
    c.target_log_loss = -rng.uniform(1, 400);
    c.max_steps = 1 + static_cast<long>(rng.below(1000000));
    c.loss_checkpoints = {-rng.uniform(1, 50), -rng.uniform(50, 100)};
    std::string a = serialize_config(c);
    std::string b = serialize_config(parse_config(a));
    CHECK(a == b);
  }
}

TEST_CASE("config validation errors") {
  auto c = tiny_run();
  c.target_log_loss = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = tiny_run();
  c.loss = "huber";
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = tiny_run();
  c.sched = LRSchedule::power_of_loss(1.5, 0.01, 0.01);
  CHECK_THROWS_AS(validate(c), ConfigError);
  CHECK_THROWS_AS(parse_config("run.seed 3"), ConfigError);
}

TEST_CASE("simple-traj run reaches its target deterministically") {
  auto c = tiny_run();
  auto r1 = run(c);
  auto r2 = run(c);
  CHECK(r1.reached_target);
  CHECK(r1.final_log_total <= -10);
  REQUIRE(r1.record.rows.size() == r2.record.rows.size());
  for (size_t i = 0; i < r1.record.rows.size(); ++i) {
    CHECK(r1.record.rows[i].log_total == r2.record.rows[i].log_total);
    CHECK(r1.record.rows[i].node_wnorm == r2.record.rows[i].node_wnorm);
  }
  CHECK(r1.final_state.w == r2.final_state.w);
}

TEST_CASE("trajectory files round trip and are identical across reruns") {
  auto dir1 = tmpdir("det1"), dir2 = tmpdir("det2");
  auto c = tiny_run();
  c.out_dir = dir1.string();
  run(c);
  c.out_dir = dir2.string();
  run(c);
  CHECK(slurp(dir1 / "trajectory.csv") == slurp(dir2 / "trajectory.csv"));
  CHECK(slurp(dir1 / "config.txt") != "");
  auto rec = read_trajectory_csv((dir1 / "trajectory.csv").string());
  rec.validate();
  CHECK(rec.n_nodes == 2);
  CHECK(rec.rows.size() >= 2);
  CHECK(rec.rows.back().log_total <= -10);
}

TEST_CASE("resume reproduces the uninterrupted run") {
  auto dir_full = tmpdir("resume_full"), dir_part = tmpdir("resume_part");
  auto c = tiny_run();
  c.target_log_loss = -12;
  c.out_dir = dir_full.string();
  auto full = run(c);

  // interrupted run: stop early by step budget, then resume
  auto cp = c;
  cp.out_dir = dir_part.string();
  cp.max_steps = full.steps / 2;
  run(cp);
  cp.max_steps = c.max_steps;
  {
    // resume uses the on-disk config's budget; rewrite it
    std::ofstream f(dir_part / "config.txt");
    f << serialize_config(cp);
  }
  auto resumed = run(cp, true);
  CHECK(resumed.final_log_total == doctest::Approx(full.final_log_total).epsilon(1e-12));
  CHECK(resumed.final_state.w.size() == full.final_state.w.size());
  for (size_t i = 0; i < full.final_state.w.size(); ++i)
    CHECK(resumed.final_state.w[i] == doctest::Approx(full.final_state.w[i]).epsilon(1e-12));
}

TEST_CASE("state files round trip") {
  auto dir = tmpdir("state");
  auto c = tiny_run();
  c.out_dir = dir.string();
  auto r = run(c);
  ParamState st;
  LRSchedule sched;
  double last;
  std::string aux;
  load_state(st, sched, last, aux, (dir / "state_final.bin").string());
  CHECK(st.w == r.final_state.w);
  CHECK(st.step_count == r.final_state.step_count);
  CHECK(st.kind == DynKind::Ewn);
}

TEST_CASE("checkpoint states capture loss crossings") {
  auto c = tiny_run();
  c.target_log_loss = -20;
  c.loss_checkpoints = {-5, -15};
  auto r = run(c);
  REQUIRE(r.checkpoint_states.size() == 2);
  CHECK(r.checkpoint_states[0].first == -5);
  CHECK(r.checkpoint_states[1].first == -15);
  CHECK(r.checkpoint_states[0].second.step_count < r.checkpoint_states[1].second.step_count);
}

TEST_CASE("explicit init values land in the trainable slots") {
  auto c = tiny_run();
  c.init_values = {0.7, 0.3};
  NetworkSpec spec = build_network(c);
  auto w = build_init(c, spec);
  CHECK(w == FlatParams{0.7, 0, 0, 0.3, 1, 1});
  c.init_values = {0.7};
  CHECK_THROWS_AS(build_init(c, spec), ConfigError);
}

TEST_CASE("xor preset network: frozen rademacher output layer") {
  auto c = preset("xor");
  NetworkSpec spec = build_network(c);
  CHECK(spec.frozen_mask.size() == param_count(spec));
  auto w = build_init(c, spec);
  int plus = 0, minus = 0;
  for (size_t i = 40; i < 60; ++i) {
    CHECK(spec.frozen_mask[i] == 1);
    if (w[i] == 1.0) ++plus;
    if (w[i] == -1.0) ++minus;
  }
  CHECK(plus + minus == 20);
  CHECK(plus > 0);
  CHECK(minus > 0);
}

TEST_CASE("divergence raises after repeated rejections") {
  ExperimentConfig c;
  c.name = "diverge";
  c.ds_kind = "simple_traj";
  c.layer_dims = {2, 2, 1};
  c.activations = {Activation::Linear};
  c.frozen = "simple_traj";
  c.dyn = DynKind::Unnorm;
  // negative margin forever: loss explodes under a huge constant rate
  c.init_kind = "explicit";
  c.init_values = {-1e150, -1e150};
  c.sched = LRSchedule::constant(1e300);
  c.target_log_loss = -50;
  c.max_steps = 100000;
  CHECK_THROWS_AS(run(c), DivergenceError);
}

TEST_CASE("sgd epochs decrease the loss deterministically") {
  ExperimentConfig c;
  c.name = "sgd";
  c.ds_kind = "linsep";
  c.ds_m = 10;
  c.ds_margin = 0.3;
  c.ds_seed = 2;
  c.layer_dims = {2, 1};
  c.activations = {};
  c.dyn = DynKind::Ewn;
  c.sgd = true;
  c.sched = LRSchedule::power_of_loss(0.9, 0.01, 0.05);
  c.seed = 3;
  c.target_log_loss = -8;
  c.max_steps = 4000;  // epochs
  auto r1 = run(c);
  auto r2 = run(c);
  CHECK(r1.final_log_total <= -8);
  CHECK(r1.final_log_total == r2.final_log_total);
  CHECK(r1.final_state.w == r2.final_state.w);
}

TEST_CASE("build_dataset covers the generator kinds") {
  auto c = tiny_run();
  CHECK(build_dataset(c).m == 1);
  c.ds_kind = "xor";
  CHECK(build_dataset(c).m == 4);
  c.ds_kind = "linsep";
  c.ds_m = 12;
  CHECK(build_dataset(c).m == 12);
  c.ds_kind = "nope";
  CHECK_THROWS_AS(build_dataset(c), ConfigError);
}

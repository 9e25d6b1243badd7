#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ewn/analysis.hpp"
#include "ewn/datasets.hpp"
#include "ewn/dynamics.hpp"
#include "ewn/trajectory.hpp"

namespace ewn {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Declarative description of one training run.
struct ExperimentConfig {
  std::string name = "run";

  // dataset
  std::string ds_kind = "linsep";  // simple_traj | xor | linsep | digits | mnist | csv
  int ds_m = 20, ds_d = 2;
  double ds_margin = 0.3;
  uint64_t ds_seed = 0;
  std::string ds_path;                      // csv
  std::string ds_images, ds_labels;         // mnist
  int ds_subset = 0;
  int ds_test_m = 0;                        // held-out set (digits/mnist)
  uint64_t ds_test_seed = 1;
  std::string ds_test_images, ds_test_labels;
  int ds_test_subset = 0;

  // network
  std::vector<int> layer_dims = {2, 8, 1};
  std::vector<Activation> activations = {Activation::ReLUSquared};
  std::string frozen = "none";  // none | output_layer | simple_traj

  // dynamics / loss
  DynKind dyn = DynKind::Ewn;
  std::string loss = "exp";  // exp | xent
  bool sgd = false;

  LRSchedule sched = LRSchedule::power_of_loss(0.97, 0.01, 0.01);

  // init
  std::string init_kind = "fanin_uniform";  // fanin_uniform | explicit
  double init_scale = 1.0;
  std::vector<double> init_values;          // trainable params, flat order
  std::string frozen_values = "rademacher";  // rademacher | comma list

  // run control
  uint64_t seed = 1;
  double target_log_loss = -50;
  long max_steps = 1000000;
  double log_factor = 1.05;
  long log_stride = 0;  // when > 0, log every log_stride steps instead
  std::vector<double> loss_checkpoints;
  std::string log_directions = "auto";   // auto | on | off
  std::string log_loss_vector = "auto";  // auto | on | off
  std::string out_dir;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

LabeledSet build_dataset(const ExperimentConfig& cfg);
LabeledSet build_test_set(const ExperimentConfig& cfg);
NetworkSpec build_network(const ExperimentConfig& cfg);

// Initial flat parameter vector: frozen entries filled per the wiring,
// trainable entries from the seeded fan-in rule or the explicit list.
FlatParams build_init(const ExperimentConfig& cfg, const NetworkSpec& spec);

struct RunResult {
  TrajectoryRecord record;
  ParamState final_state;
  FlatParams init_params;
  double final_log_total = 0;
  long steps = 0;
  bool reached_target = false;
  // states captured the first time the loss crossed each checkpoint
  std::vector<std::pair<double, ParamState>> checkpoint_states;
};

// Executes the training loop: loss -> schedule -> step -> log. Deterministic
// per seed. Writes trajectory/meta/state files when cfg.out_dir is set.
// Throws DivergenceError after 30 consecutive rejected steps.
RunResult run(const ExperimentConfig& cfg, bool resume = false);

void save_state(const ParamState& st, const LRSchedule& sched, double last_log_total,
                const std::string& rng_state, const std::string& path);
void load_state(ParamState& st, LRSchedule& sched, double& last_log_total, std::string& rng_state,
                const std::string& path);

// Built-in configurations reproducing the desk-scale experiments.
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

}  // namespace ewn

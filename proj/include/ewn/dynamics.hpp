#pragma once

#include <string>
#include <vector>

#include "ewn/lossland.hpp"
#include "ewn/netcore.hpp"

namespace ewn {

enum class DynKind { Unnorm, Swn, Ewn, AdaptiveUnnorm };

std::string to_string(DynKind k);
DynKind dyn_from_string(const std::string& s);

// Parameter state for one run. w is always the materialized flat vector;
// for Swn/Ewn it is derived from (scale, v) after every step:
//   Ewn: w_u = e^{alpha_u} v_u / ||v_u||, scale stores alpha
//   Swn: w_u = gamma_u  v_u / ||v_u||, scale stores gamma
// Frozen parameters live only in w and never change.
struct ParamState {
  DynKind kind = DynKind::Unnorm;
  FlatParams w;
  std::vector<double> scale;  // one per group (empty for Unnorm/Adaptive)
  std::vector<double> v;      // same layout as w; only group slices meaningful
  long step_count = 0;
  double cum_step = 0;  // d(t) = sum of step sizes so far

  bool finite() const;
};

// Builds the state so that all dynamics start at the same function-space
// point w0: alpha_u = log ||w0_u||, gamma_u = ||w0_u||, v_u = w0_u / ||w0_u||.
ParamState make_state(DynKind kind, const FlatParams& w0, const std::vector<NeuronGroup>& groups);

// Recompute w from (scale, v); exact up to rounding.
void materialize(ParamState& st, const std::vector<NeuronGroup>& groups);

// One discrete step. Learning rates are passed as log(eta) so schedules like
// k/L^c never form eta explicitly; the gradient enters as
// grad_u = e^{report.log_total} * G_u. Updates advance step_count and cum_step.
void ewn_step(ParamState& st, const std::vector<NeuronGroup>& groups, const LogLossReport& rep,
              double log_eta);
void swn_step(ParamState& st, const std::vector<NeuronGroup>& groups, const LogLossReport& rep,
              double log_eta);
void unnorm_step(ParamState& st, const NetworkSpec& spec, const LogLossReport& rep,
                 double log_eta);
void adaptive_unnorm_step(ParamState& st, const std::vector<NeuronGroup>& groups,
                          const LogLossReport& rep, double log_eta);

void step(ParamState& st, const NetworkSpec& spec, const std::vector<NeuronGroup>& groups,
          const LogLossReport& rep, double log_eta);

// log(eta * ||w_u|| * ||grad_{w_u} L||) per group; -inf when a factor is 0.
std::vector<double> a5_monitor_log(const ParamState& st, const std::vector<NeuronGroup>& groups,
                                   const LogLossReport& rep, double log_eta);

// Per-node summary of one accepted step.
struct StepReport {
  std::vector<double> wnorm_before, wnorm_after;
  std::vector<double> log_gnorm;  // log ||grad_{w_u} L||
  std::vector<double> cosine;     // cos(w_u, -grad_{w_u} L)
  bool accepted = false;
};

StepReport make_step_report(const ParamState& before, const ParamState& after,
                            const std::vector<NeuronGroup>& groups, const LogLossReport& rep,
                            double log_eta);

// Learning-rate schedule. PowerOfLoss: eta(t) = k(t) / L^c with k multiplied
// by `grow` after a loss decrease, divided by `shrink` after an increase,
// clamped to cap.
struct LRSchedule {
  enum class Kind { Constant, PowerOfLoss };
  Kind kind = Kind::Constant;
  double eta = 1e-3;  // Constant
  double c = 0.97, k = 0.01, grow = 1.1, shrink = 1.1, cap = 0.01;

  double log_eta(double log_total) const;
  void next(double prev_log_total, double new_log_total);
  void halve();  // rejection backoff

  static LRSchedule constant(double eta);
  static LRSchedule power_of_loss(double c, double k0, double cap);
};

std::vector<double> group_norms(const FlatParams& w, const std::vector<NeuronGroup>& groups);
std::vector<double> group_grad_log_norms(const LogLossReport& rep,
                                         const std::vector<NeuronGroup>& groups);

}  // namespace ewn

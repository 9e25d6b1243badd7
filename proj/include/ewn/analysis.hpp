#pragma once

#include <vector>

#include "ewn/dynamics.hpp"
#include "ewn/lossland.hpp"
#include "ewn/svm.hpp"
#include "ewn/trajectory.hpp"

namespace ewn {

struct DirectionWindow {
  long step_begin = 0, step_end = 0;
  double max_angle = 0;  // max pairwise angle between logged directions
};

// Angular spread of w/||w|| inside logarithmically spaced step windows.
// Shrinking windows indicate the direction limit exists.
std::vector<DirectionWindow> direction_convergence(const TrajectoryRecord& rec,
                                                   double window_factor = 2.0);

// Largest angle between consecutive logged directions in the trailing part
// of the loss scale (rows with -log_total >= tail_frac * max(-log_total)):
// the residual per-interval direction motion at the end of training.
double tail_direction_change(const TrajectoryRecord& rec, double tail_frac = 0.9);

struct SparsityProfile {
  std::vector<int> surviving;         // node ids, growth above threshold
  std::vector<double> growth;         // per node ||w_u(final)|| - ||w_u(first)||
  std::vector<int> layer_counts;      // survivors per layer
  std::vector<int> layer_totals;      // nodes per layer
};

// A node survives when its norm growth exceeds growth_threshold times the
// largest growth. Invariant to relabeling and uniform growth rescaling.
SparsityProfile sparsity_profile(const TrajectoryRecord& rec, double growth_threshold = 0.1);

// EWN: spread of log||w_u|| + log||grad_u L|| over the given nodes at the row
// closest to at_log_loss. SWN: spread of log||w_u|| - log||grad_u L||.
// A small spread is the discrete form of the product/ratio limit laws.
double theorem2_spread(const TrajectoryRecord& rec, DynKind mode,
                       const std::vector<int>& nodes, double at_log_loss);

// cos(w_u, -grad_u) per node at the final state; the gradient direction limit
// is estimated from the last trajectory point.
std::vector<double> final_alignment_cosines(const FlatParams& final_params,
                                            const LogLossReport& final_report,
                                            const std::vector<NeuronGroup>& groups);

struct Corollary1Result {
  std::vector<double> theta;  // materialized linear-net separator, unit norm
  double cos_with_oracle = 0;
  double angle = 0;
  double kkt_residual = 0;  // || theta - sum lambda y x || / ||theta||
  MarginSolution oracle;
};

// Collapses a multilayer linear net to theta = W1^T W2^T ... Wn^T and checks
// direction and KKT conditions against the exact hard-margin solution.
Corollary1Result corollary1_check(const NetworkSpec& spec, const FlatParams& params,
                                  const LabeledSet& set);

struct RateFit {
  double a = 1;         // coefficient on log d
  double b = 0;         // coefficient on log log d
  double residual = 0;  // rms residual of the fit
  int n_points = 0;
};

// Least-squares fit of -log_total against a*log d + b*loglog d + const over
// the trajectory tail (first tail_skip of steps excluded, points with
// log d < min_log_d excluded so the loglog regressor stays bounded).
// fix_a pins a = 1, the form all the rate laws share.
RateFit fit_rate(const TrajectoryRecord& rec, bool fix_a = true, double tail_skip = 0.2,
                 double min_log_d = 0.3);

// Accuracy after zeroing the first-layer neurons with the smallest norm
// growth; one value per requested fraction.
std::vector<double> prune_eval(const NetworkSpec& spec, const FlatParams& trained,
                               const FlatParams& init, const LabeledSet& test,
                               const std::vector<double>& fractions);

double classify_accuracy(const NetworkSpec& spec, const FlatParams& params,
                         const LabeledSet& set);

}  // namespace ewn

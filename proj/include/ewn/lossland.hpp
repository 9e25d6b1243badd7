#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ewn/datasets.hpp"
#include "ewn/netcore.hpp"

namespace ewn {

// Loss in log scale. The central contract: grad L = exp(log_total) * grad_core,
// with grad_core of O(1) scale, so training to losses like e^-300 never forms
// quantities near the underflow boundary.
struct LogLossReport {
  double log_total = 0;                  // log L(w)
  std::vector<double> per_example_log;   // log of each example's loss term
  std::vector<double> softmax_weights;   // p_i = l_i / sum_j l_j
  FlatParams grad_core;                  // G with grad L = e^{log_total} G
  std::vector<double> margins;           // y_i Phi_i, or min_j pairwise margin
};

// Pairwise class weights for cross-entropy, kept in log scale.
// Conceptually M[i][j] = exp(-(Phi_{y_i} - Phi_j)) for j != y_i and 0 at y_i.
struct CrossEntropyWeights {
  int m = 0, k = 0;
  std::vector<double> log_entries;  // m*k; -inf at j == y_i

  double log_at(int i, int j) const { return log_entries[static_cast<size_t>(i) * k + j]; }
  double at(int i, int j) const;  // linear scale (may underflow to 0)
};

// Stateful evaluator so the train loop reuses forward/backward buffers; the
// batch is pushed through each layer in one pass.
class LossEval {
 public:
  LossEval(const NetworkSpec& spec, const LabeledSet& data);
  ~LossEval();

  // l_i = exp(-y_i Phi(w, x_i)); binary labels only.
  LogLossReport exp_loss(const FlatParams& params);
  // l_i = log(1 + sum_{j != y_i} exp(-(Phi_{y_i} - Phi_j))); class labels.
  LogLossReport xent_loss(const FlatParams& params, CrossEntropyWeights* weights = nullptr);

  // restrict evaluation to a subset of example indices (SGD); empty = all
  void set_subset(std::vector<int> idx) { subset_ = std::move(idx); }

  const NetworkSpec& spec() const { return spec_; }
  const LabeledSet& data() const { return data_; }

 private:
  struct Batch;
  const NetworkSpec& spec_;
  const LabeledSet& data_;
  NetEval eval_;
  std::unique_ptr<Batch> batch_;
  std::vector<int> subset_;
  std::vector<double> phi_;  // cached outputs, m x k

  int n_active() const { return subset_.empty() ? data_.m : static_cast<int>(subset_.size()); }
  int example(int a) const { return subset_.empty() ? a : subset_[a]; }
};

LogLossReport exp_loss(const NetworkSpec& spec, const FlatParams& params, const LabeledSet& data);
LogLossReport xent_loss(const NetworkSpec& spec, const FlatParams& params, const LabeledSet& data,
                        CrossEntropyWeights* weights = nullptr);

// min_i y_i Phi / ||w||^L (binary) or min pairwise margin / ||w||^L.
double normalized_margin(const NetworkSpec& spec, const FlatParams& params,
                         const LabeledSet& data);

double logsumexp(std::span<const double> v);

}  // namespace ewn

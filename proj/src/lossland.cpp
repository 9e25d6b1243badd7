#include "ewn/lossland.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ewn {

double logsumexp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double CrossEntropyWeights::at(int i, int j) const {
  double le = log_at(i, j);
  return std::isfinite(le) ? std::exp(le) : 0.0;
}

// Batched forward/backward over the active example set: one pass per layer
// instead of one per example, so the full-batch loop stays cache-friendly.
struct LossEval::Batch {
  const NetworkSpec& spec;
  std::vector<size_t> layer_offset;
  std::vector<std::vector<double>> act;  // act[l]: n x dims[l]
  std::vector<std::vector<double>> pre;  // pre[l]: n x dims[l+1]
  std::vector<double> delta, delta_next;
  int n = 0;

  explicit Batch(const NetworkSpec& s) : spec(s) {
    size_t off = 0;
    for (int l = 0; l < s.n_layers(); ++l) {
      layer_offset.push_back(off);
      off += static_cast<size_t>(s.layer_dims[l]) * s.layer_dims[l + 1];
    }
    act.resize(s.n_layers() + 1);
    pre.resize(s.n_layers());
  }

  void forward(const FlatParams& params, const LabeledSet& data, const std::vector<int>& subset) {
    n = subset.empty() ? data.m : static_cast<int>(subset.size());
    act[0].resize(static_cast<size_t>(n) * spec.input_dim());
    for (int a = 0; a < n; ++a) {
      int i = subset.empty() ? a : subset[a];
      std::copy(data.row(i), data.row(i) + data.d,
                act[0].begin() + static_cast<size_t>(a) * data.d);
    }
    for (int l = 0; l < spec.n_layers(); ++l) {
      int n_in = spec.layer_dims[l], n_out = spec.layer_dims[l + 1];
      const double* W = params.data() + layer_offset[l];
      pre[l].assign(static_cast<size_t>(n) * n_out, 0.0);
      for (int a = 0; a < n; ++a) {
        const double* h = act[l].data() + static_cast<size_t>(a) * n_in;
        double* z = pre[l].data() + static_cast<size_t>(a) * n_out;
        for (int r = 0; r < n_out; ++r) {
          const double* row = W + static_cast<size_t>(r) * n_in;
          double s = 0;
          for (int c = 0; c < n_in; ++c) s += row[c] * h[c];
          z[r] = s;
        }
      }
      if (l + 1 == spec.n_layers()) {
        act[l + 1] = pre[l];
      } else {
        act[l + 1].resize(pre[l].size());
        switch (spec.activations[l]) {
          case Activation::Linear:
            act[l + 1] = pre[l];
            break;
          case Activation::ReLU:
            for (size_t i = 0; i < pre[l].size(); ++i)
              act[l + 1][i] = pre[l][i] > 0 ? pre[l][i] : 0.0;
            break;
          case Activation::ReLUSquared:
            for (size_t i = 0; i < pre[l].size(); ++i) {
              double p = pre[l][i] > 0 ? pre[l][i] : 0.0;
              act[l + 1][i] = p * p;
            }
            break;
        }
      }
    }
  }

  // grad += sum_a sum_j seed[a*k+j] * d Phi_j(x_a) / dw
  void backward(const FlatParams& params, const std::vector<double>& seed,
                std::span<double> grad) {
    int L = spec.n_layers();
    delta = seed;
    for (int l = L - 1; l >= 0; --l) {
      int n_in = spec.layer_dims[l], n_out = spec.layer_dims[l + 1];
      const double* W = params.data() + layer_offset[l];
      double* g = grad.data() + layer_offset[l];
      for (int a = 0; a < n; ++a) {
        const double* h = act[l].data() + static_cast<size_t>(a) * n_in;
        const double* d = delta.data() + static_cast<size_t>(a) * n_out;
        for (int r = 0; r < n_out; ++r) {
          double dr = d[r];
          if (dr == 0.0) continue;
          double* grow = g + static_cast<size_t>(r) * n_in;
          for (int c = 0; c < n_in; ++c) grow[c] += dr * h[c];
        }
      }
      if (l == 0) break;
      delta_next.assign(static_cast<size_t>(n) * n_in, 0.0);
      for (int a = 0; a < n; ++a) {
        const double* d = delta.data() + static_cast<size_t>(a) * n_out;
        double* dn = delta_next.data() + static_cast<size_t>(a) * n_in;
        for (int r = 0; r < n_out; ++r) {
          double dr = d[r];
          if (dr == 0.0) continue;
          const double* row = W + static_cast<size_t>(r) * n_in;
          for (int c = 0; c < n_in; ++c) dn[c] += dr * row[c];
        }
      }
      const double* z = pre[l - 1].data();
      switch (spec.activations[l - 1]) {
        case Activation::Linear:
          break;
        case Activation::ReLU:
          for (size_t i = 0; i < delta_next.size(); ++i)
            if (z[i] <= 0) delta_next[i] = 0.0;
          break;
        case Activation::ReLUSquared:
          for (size_t i = 0; i < delta_next.size(); ++i)
            delta_next[i] *= 2.0 * (z[i] > 0 ? z[i] : 0.0);
          break;
      }
      delta.swap(delta_next);
    }
    if (!spec.frozen_mask.empty())
      for (size_t i = 0; i < grad.size(); ++i)
        if (spec.frozen_mask[i]) grad[i] = 0.0;
  }
};

LossEval::LossEval(const NetworkSpec& spec, const LabeledSet& data)
    : spec_(spec), data_(data), eval_(spec), batch_(new Batch(spec)) {
  phi_.resize(static_cast<size_t>(data.m) * spec.output_dim());
}

LossEval::~LossEval() = default;

LogLossReport LossEval::exp_loss(const FlatParams& params) {
  if (!data_.binary) throw std::invalid_argument("exp_loss: labels must be +1/-1");
  if (spec_.output_dim() != 1) throw std::invalid_argument("exp_loss: scalar output required");
  int n = n_active();
  batch_->forward(params, data_, subset_);
  LogLossReport rep;
  rep.per_example_log.resize(n);
  rep.margins.resize(n);
  const auto& out = batch_->act.back();
  for (int a = 0; a < n; ++a) {
    int i = example(a);
    phi_[i] = out[a];
    double marg = data_.y[i] * out[a];
    rep.margins[a] = marg;
    rep.per_example_log[a] = -marg;
  }
  rep.log_total = logsumexp(rep.per_example_log);
  rep.softmax_weights.resize(n);
  for (int a = 0; a < n; ++a)
    rep.softmax_weights[a] = std::exp(rep.per_example_log[a] - rep.log_total);
  // G = -sum_i p_i y_i grad Phi(x_i)
  rep.grad_core.assign(params.size(), 0.0);
  std::vector<double> seed(n);
  for (int a = 0; a < n; ++a) seed[a] = -rep.softmax_weights[a] * data_.y[example(a)];
  batch_->backward(params, seed, rep.grad_core);
  return rep;
}

LogLossReport LossEval::xent_loss(const FlatParams& params, CrossEntropyWeights* weights) {
  if (data_.binary) throw std::invalid_argument("xent_loss: class-index labels required");
  int k = spec_.output_dim();
  if (k < 2) throw std::invalid_argument("xent_loss: need k >= 2 outputs");
  int n = n_active();
  batch_->forward(params, data_, subset_);
  const auto& out = batch_->act.back();
  LogLossReport rep;
  rep.per_example_log.resize(n);
  rep.margins.resize(n);
  if (weights) {
    weights->m = n;
    weights->k = k;
    weights->log_entries.assign(static_cast<size_t>(n) * k,
                                -std::numeric_limits<double>::infinity());
  }
  std::vector<double> neg_margins(k - 1);
  std::vector<double> log_s(n);
  for (int a = 0; a < n; ++a) {
    int i = example(a);
    if (data_.y[i] < 0 || data_.y[i] >= k)
      throw std::out_of_range("label " + std::to_string(data_.y[i]) + " outside [0," +
                              std::to_string(k) + ")");
    const double* oa = out.data() + static_cast<size_t>(a) * k;
    std::copy(oa, oa + k, phi_.begin() + static_cast<size_t>(i) * k);
    int yi = data_.y[i];
    double mn = std::numeric_limits<double>::infinity();
    int idx = 0;
    for (int j = 0; j < k; ++j) {
      if (j == yi) continue;
      double marg = oa[yi] - oa[j];
      mn = std::min(mn, marg);
      neg_margins[idx++] = -marg;
      if (weights) weights->log_entries[static_cast<size_t>(a) * k + j] = -marg;
    }
    rep.margins[a] = mn;
    // per-example loss log(1 + s), s = sum of exp(neg margins)
    double ls = logsumexp(neg_margins);
    log_s[a] = ls;
    double ll;
    if (ls > 30) {
      ll = std::log(ls + std::log1p(std::exp(-ls)));
    } else if (ls < -30) {
      ll = ls + std::log1p(-0.5 * std::exp(ls));  // log(log1p(e^ls)) ~ ls - e^ls/2
    } else {
      ll = std::log(std::log1p(std::exp(ls)));
    }
    rep.per_example_log[a] = ll;
  }
  rep.log_total = logsumexp(rep.per_example_log);
  rep.softmax_weights.resize(n);
  for (int a = 0; a < n; ++a)
    rep.softmax_weights[a] = std::exp(rep.per_example_log[a] - rep.log_total);
  // grad L = sum_i (1/(1+s_i)) sum_{j!=y_i} e^{-(Phi_yi-Phi_j)} (grad Phi_j - grad Phi_yi),
  // factored as e^{log_total} * G via log pair weights
  //   c_ij = -(Phi_yi - Phi_j) - log(1+s_i) - log_total.
  rep.grad_core.assign(params.size(), 0.0);
  std::vector<double> seed(static_cast<size_t>(n) * k, 0.0);
  for (int a = 0; a < n; ++a) {
    int i = example(a);
    int yi = data_.y[i];
    const double* oa = out.data() + static_cast<size_t>(a) * k;
    double log1ps = log_s[a] > 30 ? log_s[a] : std::log1p(std::exp(std::min(log_s[a], 700.0)));
    double total = 0;
    for (int j = 0; j < k; ++j) {
      if (j == yi) continue;
      double wgt = std::exp(-(oa[yi] - oa[j]) - log1ps - rep.log_total);
      seed[static_cast<size_t>(a) * k + j] = wgt;
      total += wgt;
    }
    seed[static_cast<size_t>(a) * k + yi] = -total;
  }
  batch_->backward(params, seed, rep.grad_core);
  return rep;
}

LogLossReport exp_loss(const NetworkSpec& spec, const FlatParams& params, const LabeledSet& data) {
  LossEval ev(spec, data);
  return ev.exp_loss(params);
}

LogLossReport xent_loss(const NetworkSpec& spec, const FlatParams& params, const LabeledSet& data,
                        CrossEntropyWeights* weights) {
  LossEval ev(spec, data);
  return ev.xent_loss(params, weights);
}

double normalized_margin(const NetworkSpec& spec, const FlatParams& params,
                         const LabeledSet& data) {
  double wn2 = 0;
  for (double v : params) wn2 += v * v;
  if (wn2 <= 0) throw std::invalid_argument("normalized_margin: zero weight vector");
  int L = homogeneity_order(spec);
  NetEval ev(spec);
  double mn = std::numeric_limits<double>::infinity();
  int k = spec.output_dim();
  for (int i = 0; i < data.m; ++i) {
    auto out = ev.forward(params, {data.row(i), static_cast<size_t>(data.d)});
    if (data.binary) {
      mn = std::min(mn, data.y[i] * out[0]);
    } else {
      for (int j = 0; j < k; ++j)
        if (j != data.y[i]) mn = std::min(mn, out[data.y[i]] - out[j]);
    }
  }
  return mn / std::pow(std::sqrt(wn2), L);
}

}  // namespace ewn

#include "ewn/netcore.hpp"

#include <algorithm>
#include <cmath>

namespace ewn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::ReLU: return "relu";
    case Activation::ReLUSquared: return "relu2";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::ReLU;
  if (s == "relu2" || s == "relu_squared") return Activation::ReLUSquared;
  throw std::invalid_argument("unknown activation: " + s);
}

size_t param_count(const NetworkSpec& spec) {
  size_t n = 0;
  for (int l = 0; l + 1 < static_cast<int>(spec.layer_dims.size()); ++l)
    n += static_cast<size_t>(spec.layer_dims[l]) * spec.layer_dims[l + 1];
  return n;
}

void validate(const NetworkSpec& spec) {
  if (spec.layer_dims.size() < 2) throw std::invalid_argument("need at least one weight layer");
  for (size_t i = 0; i < spec.layer_dims.size(); ++i)
    if (spec.layer_dims[i] <= 0) throw ShapeError(static_cast<int>(i), "nonpositive dimension");
  if (spec.activations.size() != spec.layer_dims.size() - 2)
    throw std::invalid_argument("need one activation per hidden layer");
  if (!spec.frozen_mask.empty() && spec.frozen_mask.size() != param_count(spec))
    throw std::invalid_argument("frozen_mask length does not match parameter count");
}

int homogeneity_order(const NetworkSpec& spec) {
  int deg = 1;
  for (auto a : spec.activations) {
    if (a == Activation::ReLUSquared) deg *= 2;
    deg += 1;
  }
  return deg;
}

std::vector<NeuronGroup> neuron_groups(const NetworkSpec& spec) {
  std::vector<NeuronGroup> groups;
  size_t off = 0;
  int id = 0;
  for (int l = 0; l + 1 < static_cast<int>(spec.layer_dims.size()); ++l) {
    int n_in = spec.layer_dims[l], n_out = spec.layer_dims[l + 1];
    for (int r = 0; r < n_out; ++r) {
      size_t row = off + static_cast<size_t>(r) * n_in;
      // trainable span within the row; must be contiguous
      size_t b = row + n_in, e = row;
      for (int c = 0; c < n_in; ++c) {
        if (!spec.is_frozen(row + c)) {
          b = std::min(b, row + c);
          e = row + c + 1;
        }
      }
      if (b >= e) continue;  // fully frozen row: no group
      for (size_t i = b; i < e; ++i)
        if (spec.is_frozen(i))
          throw ShapeError(l, "trainable parameters of a node must be contiguous");
      groups.push_back({id++, b, e, l});
    }
    off += static_cast<size_t>(n_in) * n_out;
  }
  return groups;
}

NetEval::NetEval(const NetworkSpec& spec) : spec_(spec) {
  validate(spec);
  size_t off = 0;
  for (int l = 0; l < spec.n_layers(); ++l) {
    layer_offset_.push_back(off);
    off += static_cast<size_t>(spec.layer_dims[l]) * spec.layer_dims[l + 1];
  }
  act_.resize(spec.n_layers() + 1);
  pre_.resize(spec.n_layers());
  for (int l = 0; l <= spec.n_layers(); ++l) act_[l].resize(spec.layer_dims[l]);
  for (int l = 0; l < spec.n_layers(); ++l) pre_[l].resize(spec.layer_dims[l + 1]);
  int max_dim = *std::max_element(spec.layer_dims.begin(), spec.layer_dims.end());
  delta_.resize(max_dim);
  delta_next_.resize(max_dim);
}

std::span<const double> NetEval::forward(const FlatParams& params, std::span<const double> x) {
  if (params.size() != param_count(spec_))
    throw std::invalid_argument("parameter vector has wrong length");
  if (static_cast<int>(x.size()) != spec_.input_dim())
    throw ShapeError(0, "input has wrong dimension");
  std::copy(x.begin(), x.end(), act_[0].begin());
  for (int l = 0; l < spec_.n_layers(); ++l) {
    int n_in = spec_.layer_dims[l], n_out = spec_.layer_dims[l + 1];
    const double* W = params.data() + layer_offset_[l];
    const double* h = act_[l].data();
    for (int r = 0; r < n_out; ++r) {
      double z = 0;
      const double* row = W + static_cast<size_t>(r) * n_in;
      for (int c = 0; c < n_in; ++c) z += row[c] * h[c];
      pre_[l][r] = z;
    }
    if (l + 1 < spec_.n_layers()) {
      switch (spec_.activations[l]) {
        case Activation::Linear:
          act_[l + 1] = pre_[l];
          break;
        case Activation::ReLU:
          for (int r = 0; r < n_out; ++r) act_[l + 1][r] = pre_[l][r] > 0 ? pre_[l][r] : 0.0;
          break;
        case Activation::ReLUSquared:
          for (int r = 0; r < n_out; ++r) {
            double p = pre_[l][r] > 0 ? pre_[l][r] : 0.0;
            act_[l + 1][r] = p * p;
          }
          break;
      }
    } else {
      act_[l + 1] = pre_[l];
    }
  }
  return act_.back();
}

void NetEval::backward_accumulate(const FlatParams& params, std::span<const double> coeff,
                                  double scale, std::span<double> grad) {
  int L = spec_.n_layers();
  if (static_cast<int>(coeff.size()) != spec_.output_dim())
    throw ShapeError(L - 1, "coefficient vector has wrong dimension");
  for (int j = 0; j < spec_.output_dim(); ++j) delta_[j] = scale * coeff[j];
  for (int l = L - 1; l >= 0; --l) {
    int n_in = spec_.layer_dims[l], n_out = spec_.layer_dims[l + 1];
    const double* W = params.data() + layer_offset_[l];
    const double* h = act_[l].data();
    double* g = grad.data() + layer_offset_[l];
    for (int r = 0; r < n_out; ++r) {
      double dr = delta_[r];
      if (dr != 0.0) {
        double* grow = g + static_cast<size_t>(r) * n_in;
        for (int c = 0; c < n_in; ++c) grow[c] += dr * h[c];
      }
    }
    if (l == 0) break;
    for (int c = 0; c < n_in; ++c) {
      double s = 0;
      for (int r = 0; r < n_out; ++r) s += delta_[r] * W[static_cast<size_t>(r) * n_in + c];
      delta_next_[c] = s;
    }
    // chain through the activation of layer l-1
    switch (spec_.activations[l - 1]) {
      case Activation::Linear:
        for (int c = 0; c < n_in; ++c) delta_[c] = delta_next_[c];
        break;
      case Activation::ReLU:
        for (int c = 0; c < n_in; ++c) delta_[c] = pre_[l - 1][c] > 0 ? delta_next_[c] : 0.0;
        break;
      case Activation::ReLUSquared:
        for (int c = 0; c < n_in; ++c) {
          double p = pre_[l - 1][c] > 0 ? pre_[l - 1][c] : 0.0;
          delta_[c] = 2.0 * p * delta_next_[c];
        }
        break;
    }
  }
  if (!spec_.frozen_mask.empty())
    for (size_t i = 0; i < grad.size(); ++i)
      if (spec_.frozen_mask[i]) grad[i] = 0.0;
}

std::vector<double> forward(const NetworkSpec& spec, const FlatParams& params,
                            std::span<const double> x) {
  NetEval ev(spec);
  auto out = ev.forward(params, x);
  return {out.begin(), out.end()};
}

std::vector<double> jacobian(const NetworkSpec& spec, const FlatParams& params,
                             std::span<const double> x) {
  NetEval ev(spec);
  size_t P = param_count(spec);
  int k = spec.output_dim();
  std::vector<double> J(static_cast<size_t>(k) * P, 0.0);
  std::vector<double> coeff(k, 0.0);
  ev.forward(params, x);
  for (int j = 0; j < k; ++j) {
    coeff.assign(k, 0.0);
    coeff[j] = 1.0;
    ev.backward_accumulate(params, coeff, 1.0, {J.data() + static_cast<size_t>(j) * P, P});
  }
  return J;
}

std::vector<double> gradient(const NetworkSpec& spec, const FlatParams& params,
                             std::span<const double> x) {
  if (spec.output_dim() != 1) throw std::invalid_argument("gradient() needs scalar output");
  return jacobian(spec, params, x);
}

}  // namespace ewn

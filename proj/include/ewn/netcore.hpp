#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ewn {

enum class Activation { Linear, ReLU, ReLUSquared };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// All trainable parameters of a network, flattened layer by layer. Each weight
// matrix is stored row-major, so the incoming weights of one neuron occupy a
// contiguous slice.
using FlatParams = std::vector<double>;

struct ShapeError : std::invalid_argument {
  ShapeError(int layer, const std::string& msg)
      : std::invalid_argument("layer " + std::to_string(layer) + ": " + msg), layer(layer) {}
  int layer;
};

// Bias-free feed-forward network. layer_dims = {input, hidden..., output};
// activations has one entry per hidden layer. frozen_mask, when non-empty,
// marks parameters that never receive updates and report zero gradient.
struct NetworkSpec {
  std::vector<int> layer_dims;
  std::vector<Activation> activations;
  std::vector<uint8_t> frozen_mask;  // empty or one flag per parameter

  int n_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  bool is_frozen(size_t i) const { return !frozen_mask.empty() && frozen_mask[i]; }
};

// Incoming weight vector of one node: the trainable parameters in
// [begin, end) of the flat vector. Rows that are fully frozen have no group.
struct NeuronGroup {
  int node_id;
  size_t begin, end;
  int layer;  // weight matrix index, 0-based

  size_t size() const { return end - begin; }
};

size_t param_count(const NetworkSpec& spec);
void validate(const NetworkSpec& spec);

// Degree L with Phi(lambda*w, x) = lambda^L Phi(w, x): every weight matrix
// adds one, a ReLUSquared activation doubles the degree accumulated so far.
int homogeneity_order(const NetworkSpec& spec);

std::vector<NeuronGroup> neuron_groups(const NetworkSpec& spec);

// Reusable forward/backward evaluator; buffers persist across calls so the
// full-batch loss loop does not allocate.
class NetEval {
 public:
  explicit NetEval(const NetworkSpec& spec);

  // Phi(w, x); returns view into internal buffer valid until the next call.
  std::span<const double> forward(const FlatParams& params, std::span<const double> x);

  // Accumulates scale * d(sum_j coeff[j] * Phi_j)/dw into grad for the point
  // of the preceding forward() call. Frozen entries are left untouched.
  void backward_accumulate(const FlatParams& params, std::span<const double> coeff,
                           double scale, std::span<double> grad);

 private:
  const NetworkSpec& spec_;
  std::vector<size_t> layer_offset_;
  std::vector<std::vector<double>> act_;  // act_[0] = input copy
  std::vector<std::vector<double>> pre_;
  std::vector<double> delta_, delta_next_;
};

std::vector<double> forward(const NetworkSpec& spec, const FlatParams& params,
                            std::span<const double> x);

// Jacobian d Phi_j / d w_i, row-major (output_dim x param_count). Frozen
// entries are zero.
std::vector<double> jacobian(const NetworkSpec& spec, const FlatParams& params,
                             std::span<const double> x);

// Convenience for scalar-output networks.
std::vector<double> gradient(const NetworkSpec& spec, const FlatParams& params,
                             std::span<const double> x);

}  // namespace ewn

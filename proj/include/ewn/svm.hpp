#pragma once

#include <stdexcept>
#include <vector>

#include "ewn/datasets.hpp"

namespace ewn {

struct InseparableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact solution of the no-bias hard-margin problem
//   max_{||w||=1} min_i y_i <w, x_i>.
struct MarginSolution {
  std::vector<double> w_star;        // unit vector
  double margin = 0;                 // min_i y_i <w_star, x_i>
  std::vector<int> support_indices;  // active constraints
  std::vector<double> duals;         // nonnegative, one per support index
};

// d == 2: exact combinatorial search over singleton/pair/label-mixed-triple
// support sets. d > 2: projected gradient on the dual, run to KKT residual
// below 1e-8. Throws InseparableError when no separator exists. The returned
// solution is self-checked against the KKT conditions.
MarginSolution max_margin_oracle(const LabeledSet& set);

}  // namespace ewn

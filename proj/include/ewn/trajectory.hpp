#pragma once

#include <string>
#include <vector>

namespace ewn {

// One logged training step. Optional blocks (w_dir, p) may be empty when the
// run disables them (large nets / large datasets).
struct TrajectoryRow {
  long step = 0;
  double d = 0;  // cumulative step size
  double log_total = 0;
  double rho_hat = 0;
  double log_eta = 0;
  std::vector<double> node_wnorm;
  std::vector<double> node_log_gnorm;
  std::vector<double> node_log_a5;
  std::vector<double> w_dir;  // w / ||w||
  std::vector<double> p;      // loss-vector direction via softmax weights
};

struct TrajectoryRecord {
  int n_nodes = 0;
  long n_params = 0;
  int n_examples = 0;
  std::vector<int> node_layer;          // layer of each node
  std::vector<long> node_begin, node_end;  // flat-param slice of each node
  std::vector<TrajectoryRow> rows;

  void validate() const;  // strictly increasing steps, p sums to 1, norms >= 0
};

void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path);
TrajectoryRecord read_trajectory_csv(const std::string& path);

}  // namespace ewn

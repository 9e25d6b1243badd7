#include "ewn/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ewn {

void TrajectoryRecord::validate() const {
  long prev = -1;
  for (const auto& r : rows) {
    if (r.step <= prev) throw std::logic_error("trajectory steps not strictly increasing");
    prev = r.step;
    for (double n : r.node_wnorm)
      if (n < 0) throw std::logic_error("negative node norm");
    if (!r.p.empty()) {
      double s = 0;
      for (double x : r.p) s += x;
      if (std::fabs(s - 1.0) > 1e-9) throw std::logic_error("softmax weights do not sum to 1");
    }
  }
}

namespace {

void put(std::string& out, double v) {
  char buf[32];
  snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  // header: fixed column order
  std::string h = "step,d,log_total,rho_hat,log_eta";
  for (int u = 0; u < rec.n_nodes; ++u) h += ",wnorm_" + std::to_string(u);
  for (int u = 0; u < rec.n_nodes; ++u) h += ",log_gnorm_" + std::to_string(u);
  for (int u = 0; u < rec.n_nodes; ++u) h += ",log_a5_" + std::to_string(u);
  bool has_dir = !rec.rows.empty() && !rec.rows.front().w_dir.empty();
  bool has_p = !rec.rows.empty() && !rec.rows.front().p.empty();
  if (has_dir)
    for (long i = 0; i < rec.n_params; ++i) h += ",wdir_" + std::to_string(i);
  if (has_p)
    for (int i = 0; i < rec.n_examples; ++i) h += ",p_" + std::to_string(i);
  f << h << "\n";
  std::string line;
  for (const auto& r : rec.rows) {
    line.clear();
    line += std::to_string(r.step);
    line += ',';
    put(line, r.d);
    line += ',';
    put(line, r.log_total);
    line += ',';
    put(line, r.rho_hat);
    line += ',';
    put(line, r.log_eta);
    auto block = [&](const std::vector<double>& v) {
      for (double x : v) {
        line += ',';
        put(line, x);
      }
    };
    block(r.node_wnorm);
    block(r.node_log_gnorm);
    block(r.node_log_a5);
    block(r.w_dir);
    block(r.p);
    f << line << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

TrajectoryRecord read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string header;
  if (!std::getline(f, header)) throw std::runtime_error(path + ": empty");
  TrajectoryRecord rec;
  long n_dir = 0;
  {
    std::istringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.rfind("wnorm_", 0) == 0) rec.n_nodes++;
      if (col.rfind("wdir_", 0) == 0) n_dir++;
      if (col.rfind("p_", 0) == 0) rec.n_examples++;
    }
  }
  rec.n_params = n_dir;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tok;
    TrajectoryRow r;
    auto next = [&]() -> double {
      if (!std::getline(is, tok, ',')) throw std::runtime_error(path + ": short row");
      return std::strtod(tok.c_str(), nullptr);
    };
    r.step = static_cast<long>(next());
    r.d = next();
    r.log_total = next();
    r.rho_hat = next();
    r.log_eta = next();
    auto block = [&](std::vector<double>& v, long n) {
      v.resize(n);
      for (long i = 0; i < n; ++i) v[i] = next();
    };
    block(r.node_wnorm, rec.n_nodes);
    block(r.node_log_gnorm, rec.n_nodes);
    block(r.node_log_a5, rec.n_nodes);
    block(r.w_dir, n_dir);
    block(r.p, rec.n_examples);
    rec.rows.push_back(std::move(r));
  }
  return rec;
}

}  // namespace ewn

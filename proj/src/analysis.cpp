#include "ewn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace ewn {

namespace {

double angle_between(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double c = d / std::sqrt(na * nb);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

std::vector<DirectionWindow> direction_convergence(const TrajectoryRecord& rec,
                                                   double window_factor) {
  if (rec.rows.empty() || rec.rows.front().w_dir.empty())
    throw std::invalid_argument("trajectory has no stored directions");
  std::vector<DirectionWindow> out;
  long lo = std::max(1L, rec.rows.front().step);
  long last = rec.rows.back().step;
  while (lo <= last) {
    long hi = std::max(lo + 1, static_cast<long>(lo * window_factor));
    DirectionWindow w{lo, hi, 0.0};
    std::vector<const TrajectoryRow*> in;
    for (const auto& r : rec.rows)
      if (r.step >= lo && r.step < hi) in.push_back(&r);
    for (size_t i = 0; i < in.size(); ++i)
      for (size_t j = i + 1; j < in.size(); ++j)
        w.max_angle = std::max(w.max_angle, angle_between(in[i]->w_dir, in[j]->w_dir));
    if (!in.empty()) out.push_back(w);
    lo = hi;
  }
  return out;
}

double tail_direction_change(const TrajectoryRecord& rec, double tail_frac) {
  if (rec.rows.empty() || rec.rows.front().w_dir.empty())
    throw std::invalid_argument("trajectory has no stored directions");
  double hmax = 0;
  for (const auto& r : rec.rows) hmax = std::max(hmax, -r.log_total);
  double cut = tail_frac * hmax;
  std::vector<const TrajectoryRow*> tail;
  for (const auto& r : rec.rows)
    if (-r.log_total >= cut) tail.push_back(&r);
  double ang = 0;
  for (size_t i = 1; i < tail.size(); ++i)
    ang = std::max(ang, angle_between(tail[i - 1]->w_dir, tail[i]->w_dir));
  return ang;
}

SparsityProfile sparsity_profile(const TrajectoryRecord& rec, double growth_threshold) {
  if (rec.rows.size() < 2) throw std::invalid_argument("need at least two logged rows");
  SparsityProfile sp;
  const auto& first = rec.rows.front().node_wnorm;
  const auto& last = rec.rows.back().node_wnorm;
  sp.growth.resize(rec.n_nodes);
  double gmax = 0;
  for (int u = 0; u < rec.n_nodes; ++u) {
    sp.growth[u] = last[u] - first[u];
    gmax = std::max(gmax, sp.growth[u]);
  }
  int n_layers = rec.node_layer.empty()
                     ? 1
                     : 1 + *std::max_element(rec.node_layer.begin(), rec.node_layer.end());
  sp.layer_counts.assign(n_layers, 0);
  sp.layer_totals.assign(n_layers, 0);
  for (int u = 0; u < rec.n_nodes; ++u) {
    int l = rec.node_layer.empty() ? 0 : rec.node_layer[u];
    sp.layer_totals[l]++;
    if (gmax > 0 && sp.growth[u] > growth_threshold * gmax) {
      sp.surviving.push_back(u);
      sp.layer_counts[l]++;
    }
  }
  return sp;
}

double theorem2_spread(const TrajectoryRecord& rec, DynKind mode, const std::vector<int>& nodes,
                       double at_log_loss) {
  if (nodes.empty()) throw std::invalid_argument("theorem2_spread: empty node set");
  const TrajectoryRow* best = nullptr;
  double bd = std::numeric_limits<double>::infinity();
  for (const auto& r : rec.rows) {
    double d = std::fabs(r.log_total - at_log_loss);
    if (d < bd) {
      bd = d;
      best = &r;
    }
  }
  double mn = std::numeric_limits<double>::infinity(), mx = -mn;
  for (int u : nodes) {
    double lw = std::log(best->node_wnorm[u]);
    double lg = best->node_log_gnorm[u];
    double v = mode == DynKind::Swn ? lw - lg : lw + lg;
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  return mx - mn;
}

std::vector<double> final_alignment_cosines(const FlatParams& final_params,
                                            const LogLossReport& final_report,
                                            const std::vector<NeuronGroup>& groups) {
  std::vector<double> out(groups.size(), 0.0);
  for (const auto& g : groups) {
    double wn = 0, gn = 0, d = 0;
    for (size_t i = g.begin; i < g.end; ++i) {
      wn += final_params[i] * final_params[i];
      gn += final_report.grad_core[i] * final_report.grad_core[i];
      d += final_params[i] * final_report.grad_core[i];
    }
    out[g.node_id] = (wn > 0 && gn > 0) ? -d / std::sqrt(wn * gn) : 0.0;
  }
  return out;
}

Corollary1Result corollary1_check(const NetworkSpec& spec, const FlatParams& params,
                                  const LabeledSet& set) {
  for (auto a : spec.activations)
    if (a != Activation::Linear)
      throw std::invalid_argument("corollary1_check: linear activations required");
  if (spec.output_dim() != 1) throw std::invalid_argument("corollary1_check: scalar output");
  // theta^T = W_n ... W_1, built by sweeping the layer products
  int d = spec.input_dim();
  std::vector<double> cur;  // current product, rows x d
  int cur_rows = d;
  cur.assign(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) cur[static_cast<size_t>(i) * d + i] = 1.0;
  size_t off = 0;
  for (int l = 0; l < spec.n_layers(); ++l) {
    int n_in = spec.layer_dims[l], n_out = spec.layer_dims[l + 1];
    std::vector<double> nxt(static_cast<size_t>(n_out) * d, 0.0);
    for (int r = 0; r < n_out; ++r)
      for (int c = 0; c < d; ++c) {
        double s = 0;
        for (int q = 0; q < n_in; ++q)
          s += params[off + static_cast<size_t>(r) * n_in + q] * cur[static_cast<size_t>(q) * d + c];
        nxt[static_cast<size_t>(r) * d + c] = s;
      }
    cur = std::move(nxt);
    cur_rows = n_out;
    off += static_cast<size_t>(n_in) * n_out;
  }
  (void)cur_rows;
  Corollary1Result res;
  res.theta.assign(cur.begin(), cur.begin() + d);
  double tn = 0;
  for (double v : res.theta) tn += v * v;
  tn = std::sqrt(tn);
  if (tn <= 0) throw std::invalid_argument("corollary1_check: zero product matrix");
  for (double& v : res.theta) v /= tn;
  res.oracle = max_margin_oracle(set);
  double c = 0;
  for (int i = 0; i < d; ++i) c += res.theta[i] * res.oracle.w_star[i];
  res.cos_with_oracle = c;
  res.angle = std::acos(std::clamp(c, -1.0, 1.0));
  // KKT: theta must be a nonnegative combination of minimum-margin points
  std::vector<double> marg(set.m);
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < set.m; ++i) {
    double s = 0;
    for (int c2 = 0; c2 < d; ++c2) s += res.theta[c2] * set.row(i)[c2];
    marg[i] = set.y[i] * s;
    mn = std::min(mn, marg[i]);
  }
  // candidate support: margins within 10% of the minimum (finite-time iterates
  // keep a small gap between the true support margins); the nonnegative
  // least-squares step zeroes candidates that do not actually carry weight
  std::vector<int> sup;
  for (int i = 0; i < set.m; ++i)
    if (marg[i] <= mn * 1.10 + 1e-9) sup.push_back(i);
  // nonnegative least squares on the support via projected gradient
  int ns = static_cast<int>(sup.size());
  std::vector<double> lam(ns, 0.0), A(static_cast<size_t>(ns) * d);
  for (int a = 0; a < ns; ++a)
    for (int c2 = 0; c2 < d; ++c2) A[static_cast<size_t>(a) * d + c2] = set.y[sup[a]] * set.row(sup[a])[c2];
  double lip = 0;
  for (double v : A) lip += v * v;
  double stepsz = 1.0 / std::max(lip, 1e-12);
  std::vector<double> r(d);
  for (int it = 0; it < 200000; ++it) {
    for (int c2 = 0; c2 < d; ++c2) {
      double s = res.theta[c2];
      for (int a = 0; a < ns; ++a) s -= lam[a] * A[static_cast<size_t>(a) * d + c2];
      r[c2] = s;
    }
    double gmax = 0;
    for (int a = 0; a < ns; ++a) {
      double g = 0;
      for (int c2 = 0; c2 < d; ++c2) g += A[static_cast<size_t>(a) * d + c2] * r[c2];
      double pg = (lam[a] > 0 || g > 0) ? g : 0.0;
      gmax = std::max(gmax, std::fabs(pg));
      lam[a] = std::max(0.0, lam[a] + stepsz * g);
    }
    if (gmax < 1e-12) break;
  }
  double rn = 0;
  for (int c2 = 0; c2 < d; ++c2) {
    double s = res.theta[c2];
    for (int a = 0; a < ns; ++a) s -= lam[a] * A[static_cast<size_t>(a) * d + c2];
    rn += s * s;
  }
  res.kkt_residual = std::sqrt(rn);  // theta is unit norm
  return res;
}

RateFit fit_rate(const TrajectoryRecord& rec, bool fix_a, double tail_skip, double min_log_d) {
  long tmax = rec.rows.back().step;
  double t_cut = tail_skip * tmax;
  std::vector<double> z, u1, u2;  // z = -log_total, u1 = log d, u2 = loglog d
  for (const auto& r : rec.rows) {
    if (r.step < t_cut) continue;
    if (r.d <= 0) continue;
    double ld = std::log(r.d);
    if (ld < min_log_d) continue;
    z.push_back(-r.log_total);
    u1.push_back(ld);
    u2.push_back(std::log(ld));
  }
  int n = static_cast<int>(z.size());
  if (n < 50) throw std::invalid_argument("fit_rate: need at least 50 tail points, have " +
                                          std::to_string(n));
  RateFit fit;
  fit.n_points = n;
  if (fix_a) {
    // z - u1 = C + b*u2
    double su = 0, sz = 0, suu = 0, suz = 0;
    for (int i = 0; i < n; ++i) {
      double zz = z[i] - u1[i];
      su += u2[i];
      sz += zz;
      suu += u2[i] * u2[i];
      suz += u2[i] * zz;
    }
    double den = n * suu - su * su;
    fit.a = 1.0;
    fit.b = (n * suz - su * sz) / den;
    double c0 = (sz - fit.b * su) / n;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
      double e = z[i] - u1[i] - c0 - fit.b * u2[i];
      ss += e * e;
    }
    fit.residual = std::sqrt(ss / n);
  } else {
    // z = C + a*u1 + b*u2: 3x3 normal equations
    double M[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}, rhs[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
      double x[3] = {1.0, u1[i], u2[i]};
      for (int a = 0; a < 3; ++a) {
        rhs[a] += x[a] * z[i];
        for (int b = 0; b < 3; ++b) M[a][b] += x[a] * x[b];
      }
    }
    // gaussian elimination
    for (int c = 0; c < 3; ++c) {
      int p = c;
      for (int r2 = c + 1; r2 < 3; ++r2)
        if (std::fabs(M[r2][c]) > std::fabs(M[p][c])) p = r2;
      std::swap(M[c], M[p]);
      std::swap(rhs[c], rhs[p]);
      for (int r2 = c + 1; r2 < 3; ++r2) {
        double f = M[r2][c] / M[c][c];
        for (int c2 = c; c2 < 3; ++c2) M[r2][c2] -= f * M[c][c2];
        rhs[r2] -= f * rhs[c];
      }
    }
    double sol[3];
    for (int r2 = 2; r2 >= 0; --r2) {
      sol[r2] = rhs[r2];
      for (int c2 = r2 + 1; c2 < 3; ++c2) sol[r2] -= M[r2][c2] * sol[c2];
      sol[r2] /= M[r2][r2];
    }
    fit.a = sol[1];
    fit.b = sol[2];
    double ss = 0;
    for (int i = 0; i < n; ++i) {
      double e = z[i] - sol[0] - fit.a * u1[i] - fit.b * u2[i];
      ss += e * e;
    }
    fit.residual = std::sqrt(ss / n);
  }
  return fit;
}

double classify_accuracy(const NetworkSpec& spec, const FlatParams& params,
                         const LabeledSet& set) {
  NetEval ev(spec);
  int correct = 0;
  int k = spec.output_dim();
  // degenerate all-equal logits fall back to the majority label
  std::map<int, int> counts;
  for (int v : set.y) counts[v]++;
  int majority = counts.begin()->first;
  for (auto& kv : counts)
    if (kv.second > counts[majority]) majority = kv.first;
  for (int i = 0; i < set.m; ++i) {
    auto out = ev.forward(params, {set.row(i), static_cast<size_t>(set.d)});
    int pred;
    if (set.binary) {
      pred = out[0] > 0 ? 1 : (out[0] < 0 ? -1 : majority);
    } else {
      int arg = 0;
      bool all_eq = true;
      for (int j = 1; j < k; ++j) {
        if (out[j] != out[0]) all_eq = false;
        if (out[j] > out[arg]) arg = j;
      }
      pred = all_eq ? majority : arg;
    }
    if (pred == set.y[i]) ++correct;
  }
  return static_cast<double>(correct) / set.m;
}

std::vector<double> prune_eval(const NetworkSpec& spec, const FlatParams& trained,
                               const FlatParams& init, const LabeledSet& test,
                               const std::vector<double>& fractions) {
  auto groups = neuron_groups(spec);
  std::vector<const NeuronGroup*> first_layer;
  for (const auto& g : groups)
    if (g.layer == 0) first_layer.push_back(&g);
  auto norm_of = [](const FlatParams& w, const NeuronGroup& g) {
    double s = 0;
    for (size_t i = g.begin; i < g.end; ++i) s += w[i] * w[i];
    return std::sqrt(s);
  };
  std::vector<std::pair<double, const NeuronGroup*>> ranked;
  for (auto* g : first_layer) ranked.push_back({norm_of(trained, *g) - norm_of(init, *g), g});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> acc;
  for (double f : fractions) {
    int n_prune = static_cast<int>(std::floor(f * first_layer.size() + 1e-12));
    FlatParams w = trained;
    for (int i = 0; i < n_prune; ++i)
      for (size_t j = ranked[i].second->begin; j < ranked[i].second->end; ++j) w[j] = 0.0;
    acc.push_back(classify_accuracy(spec, w, test));
  }
  return acc;
}

}  // namespace ewn

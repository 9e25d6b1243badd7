#include "ewn/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ewn {

namespace {

double dot(const double* a, const double* b, int d) {
  double s = 0;
  for (int i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

// Margins of the scaled problem y_i <w, x_i> >= 1; returns min.
double min_signed_margin(const LabeledSet& set, const std::vector<double>& w) {
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < set.m; ++i) mn = std::min(mn, set.y[i] * dot(w.data(), set.row(i), set.d));
  return mn;
}

struct Candidate {
  std::vector<double> w;  // solves y_i <w,x_i> = 1 on the support
  std::vector<int> support;
  std::vector<double> duals;
  bool ok = false;
};

// Solve the k x k system for duals: w = sum_j lambda_j y_j x_j with the
// support equalities y_i <w, x_i> = 1, i.e. Q lambda = 1 with
// Q_ij = y_i y_j <x_i, x_j>.
bool solve_duals(const LabeledSet& set, const std::vector<int>& sup, std::vector<double>& lam,
                 std::vector<double>& w) {
  int k = static_cast<int>(sup.size()), d = set.d;
  std::vector<double> Q(static_cast<size_t>(k) * k), rhs(k, 1.0);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      Q[a * k + b] = set.y[sup[a]] * set.y[sup[b]] * dot(set.row(sup[a]), set.row(sup[b]), d);
  // Gaussian elimination with partial pivoting
  std::vector<double> A(Q);
  lam = rhs;
  std::vector<int> piv(k);
  for (int i = 0; i < k; ++i) piv[i] = i;
  for (int col = 0; col < k; ++col) {
    int best = col;
    for (int r = col + 1; r < k; ++r)
      if (std::fabs(A[r * k + col]) > std::fabs(A[best * k + col])) best = r;
    if (std::fabs(A[best * k + col]) < 1e-12) return false;
    if (best != col) {
      for (int c = 0; c < k; ++c) std::swap(A[col * k + c], A[best * k + c]);
      std::swap(lam[col], lam[best]);
    }
    for (int r = col + 1; r < k; ++r) {
      double f = A[r * k + col] / A[col * k + col];
      for (int c = col; c < k; ++c) A[r * k + c] -= f * A[col * k + c];
      lam[r] -= f * lam[col];
    }
  }
  for (int r = k - 1; r >= 0; --r) {
    for (int c = r + 1; c < k; ++c) lam[r] -= A[r * k + c] * lam[c];
    lam[r] /= A[r * k + r];
  }
  w.assign(d, 0.0);
  for (int a = 0; a < k; ++a)
    for (int c = 0; c < d; ++c) w[c] += lam[a] * set.y[sup[a]] * set.row(sup[a])[c];
  // verify the equalities actually hold (the triple case can be singular)
  for (int a = 0; a < k; ++a)
    if (std::fabs(set.y[sup[a]] * dot(w.data(), set.row(sup[a]), d) - 1.0) > 1e-8) return false;
  return true;
}

MarginSolution exact_2d(const LabeledSet& set) {
  const double feas_tol = 1e-9;
  MarginSolution best;
  double best_wnorm = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<int>& sup) {
    std::vector<double> lam, w;
    if (!solve_duals(set, sup, lam, w)) return;
    for (double l : lam)
      if (l < -1e-10) return;
    if (min_signed_margin(set, w) < 1.0 - feas_tol) return;
    double wn = std::sqrt(dot(w.data(), w.data(), set.d));
    if (wn < best_wnorm) {
      best_wnorm = wn;
      best.w_star = w;
      best.support_indices = sup;
      best.duals = lam;
    }
  };
  for (int i = 0; i < set.m; ++i) consider({i});
  for (int i = 0; i < set.m; ++i)
    for (int j = i + 1; j < set.m; ++j) consider({i, j});
  for (int i = 0; i < set.m; ++i)
    for (int j = i + 1; j < set.m; ++j)
      for (int k = j + 1; k < set.m; ++k) {
        // only label-mixed triples can be jointly active at the optimum
        if (set.y[i] == set.y[j] && set.y[j] == set.y[k]) continue;
        consider({i, j, k});
      }
  if (!std::isfinite(best_wnorm)) throw InseparableError("no feasible separator: " + set.name);
  double wn = best_wnorm;
  for (double& c : best.w_star) c /= wn;
  for (double& l : best.duals) l /= wn;  // keep w_star = sum duals*y*x
  best.margin = 1.0 / wn;
  return best;
}

MarginSolution dual_ascent(const LabeledSet& set) {
  int m = set.m, d = set.d;
  std::vector<double> K(static_cast<size_t>(m) * m);
  double kmax = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      K[static_cast<size_t>(i) * m + j] = set.y[i] * set.y[j] * dot(set.row(i), set.row(j), d);
      kmax = std::max(kmax, std::fabs(K[static_cast<size_t>(i) * m + j]));
    }
  std::vector<double> lam(m, 1.0 / kmax), g(m);
  double step = 1.0 / (kmax * m);
  for (long it = 0; it < 2000000; ++it) {
    double res = 0;
    for (int i = 0; i < m; ++i) {
      double s = 0;
      for (int j = 0; j < m; ++j) s += K[static_cast<size_t>(i) * m + j] * lam[j];
      g[i] = 1.0 - s;
      double pg = (lam[i] > 0 || g[i] > 0) ? g[i] : 0.0;  // projected gradient
      res = std::max(res, std::fabs(pg));
    }
    if (res < 1e-10 && it > 10) break;
    for (int i = 0; i < m; ++i) lam[i] = std::max(0.0, lam[i] + step * g[i]);
  }
  std::vector<double> w(d, 0.0);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < d; ++c) w[c] += lam[i] * set.y[i] * set.row(i)[c];
  double mn = min_signed_margin(set, w);
  if (mn < 0.5) throw InseparableError("dual ascent found no separator: " + set.name);
  MarginSolution sol;
  double wn = std::sqrt(dot(w.data(), w.data(), d));
  sol.w_star = w;
  for (double& c : sol.w_star) c /= wn;
  sol.margin = mn / wn;
  for (int i = 0; i < m; ++i)
    if (lam[i] > 1e-9 * kmax) {
      sol.support_indices.push_back(i);
      sol.duals.push_back(lam[i] / wn);
    }
  return sol;
}

void self_check(const LabeledSet& set, const MarginSolution& sol) {
  // stationarity: w_star = sum duals * y * x over support
  std::vector<double> r(sol.w_star);
  for (size_t a = 0; a < sol.support_indices.size(); ++a) {
    int i = sol.support_indices[a];
    for (int c = 0; c < set.d; ++c) r[c] -= sol.duals[a] * set.y[i] * set.row(i)[c];
  }
  double rn = std::sqrt(dot(r.data(), r.data(), set.d));
  if (rn > 1e-8) throw std::logic_error("margin oracle: stationarity residual " + std::to_string(rn));
  for (double l : sol.duals)
    if (l < -1e-10) throw std::logic_error("margin oracle: negative dual");
  // complementary slackness: support points sit at the minimum margin
  for (int i : sol.support_indices) {
    double mi = set.y[i] * dot(sol.w_star.data(), set.row(i), set.d);
    if (std::fabs(mi - sol.margin) > 1e-7 * (1 + std::fabs(sol.margin)))
      throw std::logic_error("margin oracle: support point off the margin");
  }
  if (min_signed_margin(set, sol.w_star) < sol.margin - 1e-9)
    throw std::logic_error("margin oracle: infeasible solution");
}

}  // namespace

MarginSolution max_margin_oracle(const LabeledSet& set) {
  if (!set.binary) throw std::invalid_argument("margin oracle needs binary labels");
  if (set.m < 1) throw std::invalid_argument("empty dataset");
  MarginSolution sol = set.d == 2 ? exact_2d(set) : dual_ascent(set);
  self_check(set, sol);
  return sol;
}

}  // namespace ewn

#include "ewn/dynamics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ewn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double slice_norm(const std::vector<double>& v, const NeuronGroup& g) {
  double s = 0;
  for (size_t i = g.begin; i < g.end; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

double slice_dot(const std::vector<double>& a, const std::vector<double>& b,
                 const NeuronGroup& g) {
  double s = 0;
  for (size_t i = g.begin; i < g.end; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::string to_string(DynKind k) {
  switch (k) {
    case DynKind::Unnorm: return "unnorm";
    case DynKind::Swn: return "swn";
    case DynKind::Ewn: return "ewn";
    case DynKind::AdaptiveUnnorm: return "adaptive_unnorm";
  }
  return "?";
}

DynKind dyn_from_string(const std::string& s) {
  if (s == "unnorm") return DynKind::Unnorm;
  if (s == "swn") return DynKind::Swn;
  if (s == "ewn") return DynKind::Ewn;
  if (s == "adaptive_unnorm") return DynKind::AdaptiveUnnorm;
  throw std::invalid_argument("unknown dynamics: " + s);
}

bool ParamState::finite() const {
  for (double x : w)
    if (!std::isfinite(x)) return false;
  for (double x : scale)
    if (!std::isfinite(x)) return false;
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

ParamState make_state(DynKind kind, const FlatParams& w0, const std::vector<NeuronGroup>& groups) {
  ParamState st;
  st.kind = kind;
  st.w = w0;
  if (kind == DynKind::Swn || kind == DynKind::Ewn) {
    st.scale.resize(groups.size());
    st.v.assign(w0.size(), 0.0);
    for (const auto& g : groups) {
      double n = slice_norm(w0, g);
      if (n <= 0) throw std::invalid_argument("node " + std::to_string(g.node_id) +
                                              " has zero norm at initialization");
      st.scale[g.node_id] = kind == DynKind::Ewn ? std::log(n) : n;
      for (size_t i = g.begin; i < g.end; ++i) st.v[i] = w0[i] / n;
    }
  }
  return st;
}

void materialize(ParamState& st, const std::vector<NeuronGroup>& groups) {
  if (st.kind != DynKind::Swn && st.kind != DynKind::Ewn) return;
  for (const auto& g : groups) {
    double n = slice_norm(st.v, g);
    double s = st.kind == DynKind::Ewn ? std::exp(st.scale[g.node_id]) : st.scale[g.node_id];
    for (size_t i = g.begin; i < g.end; ++i) st.w[i] = s * st.v[i] / n;
  }
}

void ewn_step(ParamState& st, const std::vector<NeuronGroup>& groups, const LogLossReport& rep,
              double log_eta) {
  if (st.kind != DynKind::Ewn) throw std::logic_error("ewn_step on non-EWN state");
  const auto& G = rep.grad_core;
  for (const auto& g : groups) {
    double vn = slice_norm(st.v, g);
    double gpar = slice_dot(st.v, G, g) / vn;  // vhat . G
    // eta * e^{alpha} * e^{log_total}, assembled in log scale
    double s = std::exp(log_eta + rep.log_total + st.scale[g.node_id]);
    double alpha_new = st.scale[g.node_id] - s * gpar;
    for (size_t i = g.begin; i < g.end; ++i)
      st.v[i] -= (s / vn) * (G[i] - (st.v[i] / vn) * gpar);
    st.scale[g.node_id] = alpha_new;
  }
  materialize(st, groups);
  st.step_count++;
  st.cum_step += std::exp(log_eta);
}

void swn_step(ParamState& st, const std::vector<NeuronGroup>& groups, const LogLossReport& rep,
              double log_eta) {
  if (st.kind != DynKind::Swn) throw std::logic_error("swn_step on non-SWN state");
  const auto& G = rep.grad_core;
  double s = std::exp(log_eta + rep.log_total);
  for (const auto& g : groups) {
    double vn = slice_norm(st.v, g);
    double gpar = slice_dot(st.v, G, g) / vn;
    double gamma = st.scale[g.node_id];
    st.scale[g.node_id] = gamma - s * gpar;
    for (size_t i = g.begin; i < g.end; ++i)
      st.v[i] -= (s * gamma / vn) * (G[i] - (st.v[i] / vn) * gpar);
  }
  materialize(st, groups);
  st.step_count++;
  st.cum_step += std::exp(log_eta);
}

void unnorm_step(ParamState& st, const NetworkSpec& spec, const LogLossReport& rep,
                 double log_eta) {
  double s = std::exp(log_eta + rep.log_total);
  for (size_t i = 0; i < st.w.size(); ++i)
    if (!spec.is_frozen(i)) st.w[i] -= s * rep.grad_core[i];
  st.step_count++;
  st.cum_step += std::exp(log_eta);
}

void adaptive_unnorm_step(ParamState& st, const std::vector<NeuronGroup>& groups,
                          const LogLossReport& rep, double log_eta) {
  double s = std::exp(log_eta + rep.log_total);
  for (const auto& g : groups) {
    double wn = slice_norm(st.w, g);
    double f = s * wn * wn;
    for (size_t i = g.begin; i < g.end; ++i) st.w[i] -= f * rep.grad_core[i];
  }
  st.step_count++;
  st.cum_step += std::exp(log_eta);
}

void step(ParamState& st, const NetworkSpec& spec, const std::vector<NeuronGroup>& groups,
          const LogLossReport& rep, double log_eta) {
  switch (st.kind) {
    case DynKind::Unnorm: unnorm_step(st, spec, rep, log_eta); break;
    case DynKind::Swn: swn_step(st, groups, rep, log_eta); break;
    case DynKind::Ewn: ewn_step(st, groups, rep, log_eta); break;
    case DynKind::AdaptiveUnnorm: adaptive_unnorm_step(st, groups, rep, log_eta); break;
  }
}

std::vector<double> group_norms(const FlatParams& w, const std::vector<NeuronGroup>& groups) {
  std::vector<double> out(groups.size());
  for (const auto& g : groups) out[g.node_id] = slice_norm(w, g);
  return out;
}

std::vector<double> group_grad_log_norms(const LogLossReport& rep,
                                         const std::vector<NeuronGroup>& groups) {
  std::vector<double> out(groups.size());
  for (const auto& g : groups) {
    double n = slice_norm(rep.grad_core, g);
    out[g.node_id] = n > 0 ? rep.log_total + std::log(n) : kNegInf;
  }
  return out;
}

std::vector<double> a5_monitor_log(const ParamState& st, const std::vector<NeuronGroup>& groups,
                                   const LogLossReport& rep, double log_eta) {
  std::vector<double> out(groups.size());
  auto g_log = group_grad_log_norms(rep, groups);
  for (const auto& g : groups) {
    double wn = slice_norm(st.w, g);
    out[g.node_id] = wn > 0 && std::isfinite(log_eta) && std::isfinite(g_log[g.node_id])
                         ? log_eta + std::log(wn) + g_log[g.node_id]
                         : kNegInf;
  }
  return out;
}

StepReport make_step_report(const ParamState& before, const ParamState& after,
                            const std::vector<NeuronGroup>& groups, const LogLossReport& rep,
                            double log_eta) {
  (void)log_eta;
  StepReport sr;
  sr.wnorm_before = group_norms(before.w, groups);
  sr.wnorm_after = group_norms(after.w, groups);
  sr.log_gnorm = group_grad_log_norms(rep, groups);
  sr.cosine.resize(groups.size());
  for (const auto& g : groups) {
    double wn = slice_norm(before.w, g);
    double gn = slice_norm(rep.grad_core, g);
    double d = slice_dot(before.w, rep.grad_core, g);
    sr.cosine[g.node_id] = (wn > 0 && gn > 0) ? -d / (wn * gn) : 0.0;
  }
  return sr;
}

double LRSchedule::log_eta(double log_total) const {
  if (kind == Kind::Constant) return std::log(eta);
  return std::log(k) - c * log_total;
}

void LRSchedule::next(double prev_log_total, double new_log_total) {
  if (kind == Kind::Constant) return;
  if (new_log_total < prev_log_total)
    k = std::min(k * grow, cap);
  else
    k = k / shrink;
}

void LRSchedule::halve() {
  if (kind == Kind::Constant)
    eta /= 2;
  else
    k /= 2;
}

LRSchedule LRSchedule::constant(double eta) {
  LRSchedule s;
  s.kind = Kind::Constant;
  s.eta = eta;
  return s;
}

LRSchedule LRSchedule::power_of_loss(double c, double k0, double cap) {
  LRSchedule s;
  s.kind = Kind::PowerOfLoss;
  s.c = c;
  s.k = k0;
  s.cap = cap;
  return s;
}

}  // namespace ewn

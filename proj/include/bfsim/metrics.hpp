#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "bfsim/engine.hpp"
#include "bfsim/metrics_power.hpp"

namespace bfsim {

// Eq. (2): G * max - sum, the total idle work at one step.
inline double imbalance(std::span<const double> loads) {
  if (loads.empty()) throw std::invalid_argument("imbalance: need at least one worker");
  double mx = *std::max_element(loads.begin(), loads.end());
  double sum = std::accumulate(loads.begin(), loads.end(), 0.0);
  return static_cast<double>(loads.size()) * mx - sum;
}

inline double avg_imbalance(const std::vector<StepRecord>& steps) {
  if (steps.empty()) throw std::invalid_argument("avg_imbalance: empty step series");
  double acc = 0.0;
  for (const auto& s : steps) acc += imbalance(s.loads);
  return acc / static_cast<double>(steps.size());
}

// Token processing rate: every active request generates one token per step.
inline double throughput(const std::vector<StepRecord>& steps) {
  double tokens = 0.0, elapsed = 0.0;
  for (const auto& s : steps) {
    tokens += static_cast<double>(s.active_count);
    elapsed += s.dt;
  }
  if (elapsed <= 0.0) throw std::invalid_argument("throughput: zero elapsed time");
  return tokens / elapsed;
}

// Mean per-request seconds per output token; incomplete requests excluded.
inline double tpot(const std::vector<RequestTiming>& requests) {
  double acc = 0.0;
  long n = 0;
  for (const auto& r : requests) {
    if (!r.completed) continue;
    acc += (r.finish_clock - r.admit_clock) / static_cast<double>(r.decode_steps);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("tpot: no completed requests");
  return acc / static_cast<double>(n);
}

// u_g = L_g / max load; an all-idle step reports zero utilization everywhere.
inline std::vector<double> utilization(std::span<const double> loads) {
  double mx = loads.empty() ? 0.0 : *std::max_element(loads.begin(), loads.end());
  std::vector<double> u(loads.size(), 0.0);
  if (mx > 0.0)
    for (std::size_t g = 0; g < loads.size(); ++g) u[g] = loads[g] / mx;
  return u;
}

// Discretized energy: sum over steps of dt * sum of per-worker power. The
// step duration stands in for the barrier time kappa_ATT * max load plus
// overhead.
inline double energy(const std::vector<StepRecord>& steps, const PowerModel& model) {
  double e = 0.0;
  for (const auto& s : steps) {
    std::vector<double> u = utilization(s.loads);
    double p = 0.0;
    for (double ug : u) p += power(ug, model);
    e += s.dt * p;
  }
  return e;
}

// Theorem-style lower bound on the energy saving fraction achievable from an
// imbalance improvement factor alpha over a baseline with normalized
// imbalance eta_sum. May be negative (vacuous) for small alpha.
inline double energy_saving_lower_bound(double alpha, double eta_sum,
                                        const PowerModel& model) {
  double c_gamma = (1.0 - model.gamma) * model.p_max + model.gamma * model.p_idle;
  double d_gamma = (1.0 - model.gamma) * (model.p_max - model.p_idle);
  return (1.0 / (model.p_max / eta_sum + c_gamma)) *
         (model.p_idle * (1.0 - 1.0 / alpha) - d_gamma / alpha);
}

// Throughput -> model FLOPs utilization, at ~6 FLOPs per parameter per token.
inline double mfu_from_throughput(double tok_per_sec, double n_params, double peak_flops) {
  if (n_params <= 0.0 || peak_flops <= 0.0)
    throw std::invalid_argument("mfu_from_throughput: inputs must be positive");
  return tok_per_sec * 6.0 * n_params / peak_flops;
}

struct MetricsReport {
  double avg_imbalance = 0.0;
  double throughput = 0.0;  // tokens / sec
  double tpot = 0.0;        // sec / token
  double energy = 0.0;      // joules
  double imb_total = 0.0;
  double total_workload = 0.0;
  double eta_sum = 0.0;
};

inline MetricsReport compute_metrics(const std::vector<StepRecord>& steps,
                                     const std::vector<RequestTiming>& requests,
                                     const PowerModel& model) {
  MetricsReport r;
  r.avg_imbalance = avg_imbalance(steps);
  r.throughput = throughput(steps);
  bool any_completed = std::any_of(requests.begin(), requests.end(),
                                   [](const RequestTiming& t) { return t.completed; });
  r.tpot = any_completed ? tpot(requests) : 0.0;
  r.energy = energy(steps, model);
  for (const auto& s : steps) {
    r.imb_total += imbalance(s.loads);
    for (double l : s.loads) r.total_workload += l;
  }
  r.eta_sum = r.total_workload > 0.0 ? r.imb_total / r.total_workload : 0.0;
  return r;
}

inline MetricsReport compute_metrics(const SimResult& res) {
  return compute_metrics(res.steps, res.requests, res.config.power);
}

// Flat key-value block; field names are the stable external schema.
inline void write_summary(std::ostream& os, const MetricsReport& r) {
  os.precision(17);
  os << "avg_imbalance=" << r.avg_imbalance << "\n"
     << "throughput_tok_s=" << r.throughput << "\n"
     << "tpot_s_tok=" << r.tpot << "\n"
     << "energy_j=" << r.energy << "\n"
     << "eta_sum=" << r.eta_sum << "\n";
}

}  // namespace bfsim

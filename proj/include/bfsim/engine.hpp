#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfsim/metrics_power.hpp"
#include "bfsim/policies.hpp"
#include "bfsim/workload.hpp"

namespace bfsim {

struct SimConfig {
  int workers = 8;              // G
  int batch = 16;               // B
  double overhead = 9.775e-3;   // C, seconds per step
  double per_token = 1.005e-7;  // t_ell, seconds per token
  int horizon = 0;              // H
  PolicyKind policy = PolicyKind::Fcfs;
  long max_steps = 10'000'000;
  std::uint64_t seed = 0;
  PowerModel power;
  long search_limit = 200000;
  LookaheadMode lookahead = LookaheadMode::Perfect;
  double noise_sigma = 0.0;

  void validate() const {
    if (workers < 1 || batch < 1) throw std::invalid_argument("config: workers and batch must be >= 1");
    if (overhead < 0.0 || per_token <= 0.0) throw std::invalid_argument("config: bad time constants");
    if (horizon < 0 || max_steps < 1) throw std::invalid_argument("config: bad horizon or max_steps");
    power.validate();
  }
};

struct StepRecord {
  long k = 0;
  double clock_start = 0.0;
  double dt = 0.0;
  double max_load = 0.0;
  long active_count = 0;
  std::vector<double> loads;
  std::vector<int> admitted;
  std::vector<int> completed;
};

struct RequestTiming {
  int id = 0;
  double arrival_time = 0.0;
  long arrival_step = -1;   // k_i, set on reveal
  long start_step = -1;     // x_i
  double admit_clock = 0.0; // clock at the start of step x_i
  double finish_clock = 0.0;
  long decode_steps = 0;    // o_i
  bool completed = false;
};

struct SimResult {
  std::vector<StepRecord> steps;
  std::vector<RequestTiming> requests;
  bool completed_all = false;
  SimConfig config;

  double total_workload_processed() const {
    double w = 0.0;
    for (const auto& s : steps)
      for (double l : s.loads) w += l;
    return w;
  }
};

// Eq. (1): summed workload of the step each active request is about to
// execute. Entries are (profile, completed steps tau).
inline double worker_load(const std::vector<std::pair<WorkloadProfile, long>>& active) {
  double l = 0.0;
  for (const auto& [profile, tau] : active) {
    if (tau < 0 || tau >= static_cast<long>(profile.length()))
      throw std::logic_error("worker_load: progress out of range");
    l += profile.at(static_cast<std::size_t>(tau));
  }
  return l;
}

// dt = C + t_ell * max load
inline double step_duration(double max_load, const SimConfig& config) {
  if (max_load < 0.0) throw std::invalid_argument("step_duration: negative load");
  return config.overhead + config.per_token * max_load;
}

// Step-indexed simulation state. One simulation owns its state; runs with
// different configs never share anything mutable.
class Simulation {
 public:
  Simulation(const SimConfig& config, const ArrivalInstance& instance)
      : cfg_(config), rng_(config.seed) {
    cfg_.validate();
    reqs_.reserve(instance.requests.size());
    for (std::size_t i = 0; i < instance.requests.size(); ++i) {
      Rq r;
      r.id = static_cast<int>(i);
      r.arrival_time = instance.requests[i].arrival_time;
      r.profile = instance.profile_of(i);
      reqs_.push_back(std::move(r));
    }
    active_.assign(static_cast<std::size_t>(cfg_.workers), {});
  }

  // One step: reveal, assign, load, time, progress, complete.
  StepRecord advance() {
    StepRecord rec;
    rec.k = step_;
    rec.clock_start = clock_;

    // completions from the previous step free their slots now
    for (auto& slots : active_) {
      std::erase_if(slots, [&](int i) { return reqs_[static_cast<std::size_t>(i)].done(); });
    }

    // reveal: first step whose start clock has reached the arrival time
    while (next_undiscovered_ < reqs_.size() &&
           reqs_[next_undiscovered_].arrival_time <= clock_) {
      reqs_[next_undiscovered_].arrival_step = step_;
      waiting_.push_back(static_cast<int>(next_undiscovered_));
      ++next_undiscovered_;
    }

    // policy decision over the waiting queue and current free slots
    Allocation alloc = assign(cfg_.policy, waiting_views(), worker_views(), cfg_.horizon,
                              cfg_.search_limit);
    apply(alloc, rec);

    // loads over all active requests; admitted ones contribute their first entry
    rec.loads.assign(static_cast<std::size_t>(cfg_.workers), 0.0);
    for (std::size_t g = 0; g < active_.size(); ++g)
      for (int i : active_[g]) {
        const Rq& r = reqs_[static_cast<std::size_t>(i)];
        rec.loads[g] += r.profile.at(static_cast<std::size_t>(r.progress));
        ++rec.active_count;
      }
    rec.max_load = 0.0;
    for (double l : rec.loads) rec.max_load = std::max(rec.max_load, l);
    rec.dt = cfg_.overhead + cfg_.per_token * rec.max_load;
    clock_ += rec.dt;

    // progress and completion
    for (auto& slots : active_)
      for (int i : slots) {
        Rq& r = reqs_[static_cast<std::size_t>(i)];
        ++r.progress;
        if (r.done()) {
          r.finish_clock = clock_;
          rec.completed.push_back(r.id);
        }
      }
    ++step_;
    return rec;
  }

  bool all_done() const {
    for (const auto& r : reqs_)
      if (!r.done()) return false;
    return true;
  }

  SimResult run() {
    SimResult res;
    res.config = cfg_;
    while (!all_done() && static_cast<long>(res.steps.size()) < cfg_.max_steps)
      res.steps.push_back(advance());
    res.completed_all = all_done();
    res.requests.reserve(reqs_.size());
    for (const auto& r : reqs_) {
      RequestTiming t;
      t.id = r.id;
      t.arrival_time = r.arrival_time;
      t.arrival_step = r.arrival_step;
      t.start_step = r.start_step;
      t.admit_clock = r.admit_clock;
      t.finish_clock = r.finish_clock;
      t.decode_steps = static_cast<long>(r.profile.length());
      t.completed = r.done();
      res.requests.push_back(t);
    }
    return res;
  }

 private:
  struct Rq {
    int id = 0;
    double arrival_time = 0.0;
    WorkloadProfile profile;
    long arrival_step = -1;
    long start_step = -1;
    int worker = -1;
    long progress = 0;  // tau_i
    double admit_clock = 0.0;
    double finish_clock = 0.0;
    bool done() const { return progress >= static_cast<long>(profile.length()); }
  };

  std::vector<WorkerView> worker_views() const {
    std::vector<WorkerView> views(active_.size());
    int H = cfg_.horizon;
    for (std::size_t g = 0; g < active_.size(); ++g) {
      views[g].cap = cfg_.batch - static_cast<int>(active_[g].size());
      views[g].active_count = static_cast<int>(active_[g].size());
      views[g].future.assign(static_cast<std::size_t>(H) + 1, 0.0);
      for (int i : active_[g]) {
        const Rq& r = reqs_[static_cast<std::size_t>(i)];
        RequestPreview pv = make_preview(r.profile, r.progress, H, cfg_.lookahead,
                                         cfg_.noise_sigma, &rng_);
        for (int h = 0; h <= H; ++h)
          views[g].future[static_cast<std::size_t>(h)] += pv.w[static_cast<std::size_t>(h)];
      }
    }
    return views;
  }

  std::vector<RequestPreview> waiting_views() const {
    std::vector<RequestPreview> views;
    views.reserve(waiting_.size());
    for (int i : waiting_) {
      const Rq& r = reqs_[static_cast<std::size_t>(i)];
      views.push_back(make_preview(r.profile, 0, cfg_.horizon, cfg_.lookahead,
                                   cfg_.noise_sigma, &rng_));
    }
    return views;
  }

  void apply(const Allocation& alloc, StepRecord& rec) {
    std::vector<int> admitted_slots;
    for (auto [wi, g] : alloc.assignments) {
      if (wi < 0 || wi >= static_cast<int>(waiting_.size()) || g < 0 || g >= cfg_.workers)
        throw std::logic_error("policy contract violation: assignment out of range");
      int i = waiting_[static_cast<std::size_t>(wi)];
      if (active_[static_cast<std::size_t>(g)].size() >= static_cast<std::size_t>(cfg_.batch))
        throw std::logic_error("policy contract violation: capacity exceeded");
      Rq& r = reqs_[static_cast<std::size_t>(i)];
      if (r.worker >= 0) throw std::logic_error("policy contract violation: duplicate assignment");
      r.worker = g;
      r.start_step = step_;
      r.admit_clock = clock_;
      active_[static_cast<std::size_t>(g)].push_back(i);
      rec.admitted.push_back(r.id);
      admitted_slots.push_back(wi);
    }
    std::sort(admitted_slots.rbegin(), admitted_slots.rend());
    for (int wi : admitted_slots)
      waiting_.erase(waiting_.begin() + wi);
  }

  SimConfig cfg_;
  std::vector<Rq> reqs_;
  std::vector<std::vector<int>> active_;  // request indices per worker
  std::vector<int> waiting_;              // arrival order
  std::size_t next_undiscovered_ = 0;
  long step_ = 0;
  double clock_ = 0.0;
  mutable std::mt19937_64 rng_;
};

inline SimResult run(const SimConfig& config, const ArrivalInstance& instance) {
  return Simulation(config, instance).run();
}

// Per-step dump: k,clock_start,dt,max_load,active_count,load_0,...,load_{G-1}
inline void write_step_csv(std::ostream& os, const SimResult& res) {
  os << "k,clock_start,dt,max_load,active_count";
  for (int g = 0; g < res.config.workers; ++g) os << ",load_" << g;
  os << "\n";
  os.precision(17);
  for (const auto& s : res.steps) {
    os << s.k << ',' << s.clock_start << ',' << s.dt << ',' << s.max_load << ','
       << s.active_count;
    for (double l : s.loads) os << ',' << l;
    os << "\n";
  }
}

}  // namespace bfsim

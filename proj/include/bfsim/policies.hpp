#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfsim/workload.hpp"

namespace bfsim {

enum class PolicyKind { Fcfs, Jsq, BfioExact, BfioGreedy };

inline PolicyKind policy_from_name(const std::string& name) {
  if (name == "fcfs") return PolicyKind::Fcfs;
  if (name == "jsq") return PolicyKind::Jsq;
  if (name == "bfio-exact") return PolicyKind::BfioExact;
  if (name == "bfio-greedy") return PolicyKind::BfioGreedy;
  throw std::invalid_argument("unknown policy: " + name);
}

inline std::string policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Fcfs: return "fcfs";
    case PolicyKind::Jsq: return "jsq";
    case PolicyKind::BfioExact: return "bfio-exact";
    case PolicyKind::BfioGreedy: return "bfio-greedy";
  }
  return "?";
}

enum class LookaheadMode { Perfect, TruncatedAtH, Noisy };

// One step's assignment decision: (waiting index, worker) pairs.
struct Allocation {
  std::vector<std::pair<int, int>> assignments;

  // assignment vector over waiting order; G encodes "not admitted"
  std::vector<int> as_vector(int n_waiting, int n_workers) const {
    std::vector<int> v(static_cast<std::size_t>(n_waiting), n_workers);
    for (auto [i, g] : assignments) v[static_cast<std::size_t>(i)] = g;
    return v;
  }
};

// Predicted per-step workloads of one request over the window, h = 0..H.
// Entry 0 is the true current-step workload; entries past predicted
// completion are zero.
struct RequestPreview {
  std::vector<double> w;  // length H+1
};

// Snapshot of one worker as seen by a policy.
struct WorkerView {
  int cap = 0;                 // free slots
  int active_count = 0;
  std::vector<double> future;  // h = 0..H: summed predicted load of current actives
};

// Preview for a request at progress tau with true remaining length o - tau.
// Prediction modes only shift the predicted completion step; workload values
// within the predicted lifetime follow the profile.
inline RequestPreview make_preview(const WorkloadProfile& profile, long tau, int H,
                                   LookaheadMode mode = LookaheadMode::Perfect,
                                   double noise_sigma = 0.0,
                                   std::mt19937_64* rng = nullptr) {
  long o = static_cast<long>(profile.length());
  long remaining = o - tau;  // steps still to run, current one included
  long predicted = remaining;
  if (mode == LookaheadMode::Noisy && rng != nullptr && noise_sigma > 0.0) {
    double n = std::normal_distribution<double>(0.0, noise_sigma)(*rng);
    predicted = std::max<long>(1, remaining + std::lround(n));
  } else if (mode == LookaheadMode::TruncatedAtH) {
    predicted = std::max<long>(remaining, static_cast<long>(H) + 1);
  }
  RequestPreview pv;
  pv.w.resize(static_cast<std::size_t>(H) + 1, 0.0);
  pv.w[0] = profile.at(static_cast<std::size_t>(tau));
  for (int h = 1; h <= H; ++h) {
    if (h < predicted) {
      std::size_t j = static_cast<std::size_t>(std::min<long>(tau + h, o - 1));
      pv.w[static_cast<std::size_t>(h)] = profile.at(j);
    }
  }
  return pv;
}

inline long total_caps(const std::vector<WorkerView>& workers) {
  long c = 0;
  for (const auto& w : workers) c += w.cap;
  return c;
}

// Alg. 3: pop the oldest waiting request, place it on the worker with the
// most free slots (ties to the lowest index).
inline Allocation fcfs_assign(int n_waiting, const std::vector<WorkerView>& workers) {
  Allocation alloc;
  std::vector<int> cap(workers.size());
  for (std::size_t g = 0; g < workers.size(); ++g) cap[g] = workers[g].cap;
  long free_total = total_caps(workers);
  for (int i = 0; i < n_waiting && free_total > 0; ++i) {
    int best = -1;
    for (std::size_t g = 0; g < cap.size(); ++g)
      if (best < 0 || cap[g] > cap[static_cast<std::size_t>(best)]) best = static_cast<int>(g);
    alloc.assignments.emplace_back(i, best);
    --cap[static_cast<std::size_t>(best)];
    --free_total;
  }
  return alloc;
}

// Join-shortest-queue on active-request counts; counts update as requests
// are placed.
inline Allocation jsq_assign(int n_waiting, const std::vector<WorkerView>& workers) {
  Allocation alloc;
  std::vector<int> cap(workers.size());
  std::vector<int> count(workers.size());
  for (std::size_t g = 0; g < workers.size(); ++g) {
    cap[g] = workers[g].cap;
    count[g] = workers[g].active_count;
  }
  for (int i = 0; i < n_waiting; ++i) {
    int best = -1;
    for (std::size_t g = 0; g < cap.size(); ++g) {
      if (cap[g] <= 0) continue;
      if (best < 0 || count[g] < count[static_cast<std::size_t>(best)]) best = static_cast<int>(g);
    }
    if (best < 0) break;
    alloc.assignments.emplace_back(i, best);
    --cap[static_cast<std::size_t>(best)];
    ++count[static_cast<std::size_t>(best)];
  }
  return alloc;
}

// Predicted per-worker load vectors for h = 0..H under an allocation.
// Vacated slots are not refilled within the window: no future arrivals are
// assumed.
inline std::vector<std::vector<double>> predict_loads(
    const std::vector<WorkerView>& workers,
    const std::vector<RequestPreview>& waiting,
    const Allocation& alloc, int H) {
  std::size_t G = workers.size();
  std::vector<std::vector<double>> loads(static_cast<std::size_t>(H) + 1,
                                         std::vector<double>(G, 0.0));
  for (int h = 0; h <= H; ++h)
    for (std::size_t g = 0; g < G; ++g)
      loads[static_cast<std::size_t>(h)][g] = workers[g].future[static_cast<std::size_t>(h)];
  for (auto [i, g] : alloc.assignments)
    for (int h = 0; h <= H; ++h)
      loads[static_cast<std::size_t>(h)][static_cast<std::size_t>(g)] +=
          waiting[static_cast<std::size_t>(i)].w[static_cast<std::size_t>(h)];
  return loads;
}

// J = sum over the window of (G * max - sum), Eq. (2) accumulated.
inline double horizon_cost(const std::vector<std::vector<double>>& load_vectors) {
  double j = 0.0;
  for (const auto& v : load_vectors) {
    double mx = 0.0, sum = 0.0;
    for (double x : v) {
      mx = std::max(mx, x);
      sum += x;
    }
    j += static_cast<double>(v.size()) * mx - sum;
  }
  return j;
}

struct SearchLimitExceeded : std::runtime_error {
  SearchLimitExceeded(long limit)
      : std::runtime_error("bfio-exact: feasible allocations exceed search limit " +
                           std::to_string(limit) + "; use bfio-greedy") {}
};

namespace detail {

struct ExactSearch {
  const std::vector<WorkerView>& workers;
  const std::vector<RequestPreview>& waiting;
  int H;
  long U;
  long limit;
  long visited = 0;

  std::vector<int> cap;
  std::vector<int> choice;                  // per waiting index: worker or G
  std::vector<std::vector<double>> loads;   // [h][g], running
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> best_choice;
  bool found = false;

  void add(int i, int g, double sign) {
    for (int h = 0; h <= H; ++h)
      loads[static_cast<std::size_t>(h)][static_cast<std::size_t>(g)] +=
          sign * waiting[static_cast<std::size_t>(i)].w[static_cast<std::size_t>(h)];
  }

  void recurse(int i, long assigned) {
    int n = static_cast<int>(waiting.size());
    long slack = static_cast<long>(n) - i;  // requests still undecided
    if (assigned + slack < U) return;       // cannot reach full utilization
    if (i == n) {
      if (assigned != U) return;
      if (++visited > limit) throw SearchLimitExceeded(limit);
      double c = horizon_cost(loads);
      // first hit wins ties: enumeration order is lexicographic
      if (!found || c < best_cost) {
        found = true;
        best_cost = c;
        best_choice = choice;
      }
      return;
    }
    int G = static_cast<int>(workers.size());
    for (int g = 0; g < G; ++g) {
      if (cap[static_cast<std::size_t>(g)] <= 0 || assigned >= U) continue;
      --cap[static_cast<std::size_t>(g)];
      choice[static_cast<std::size_t>(i)] = g;
      add(i, g, +1.0);
      recurse(i + 1, assigned + 1);
      add(i, g, -1.0);
      ++cap[static_cast<std::size_t>(g)];
    }
    choice[static_cast<std::size_t>(i)] = G;
    recurse(i + 1, assigned);
    choice[static_cast<std::size_t>(i)] = G;
  }
};

}  // namespace detail

// Solves (IO) by exhaustive enumeration. Ties break to the lexicographically
// smallest assignment vector (waiting order, worker index, unassigned last).
inline Allocation bfio_assign_exact(const std::vector<RequestPreview>& waiting,
                                    const std::vector<WorkerView>& workers,
                                    int H, long search_limit = 200000,
                                    double* cost_out = nullptr) {
  long U = std::min<long>(static_cast<long>(waiting.size()), total_caps(workers));
  detail::ExactSearch s{workers, waiting, H, U, search_limit};
  s.cap.resize(workers.size());
  for (std::size_t g = 0; g < workers.size(); ++g) s.cap[g] = workers[g].cap;
  s.choice.assign(waiting.size(), static_cast<int>(workers.size()));
  s.loads.assign(static_cast<std::size_t>(H) + 1, std::vector<double>(workers.size(), 0.0));
  for (int h = 0; h <= H; ++h)
    for (std::size_t g = 0; g < workers.size(); ++g)
      s.loads[static_cast<std::size_t>(h)][g] = workers[g].future[static_cast<std::size_t>(h)];
  s.recurse(0, 0);
  Allocation alloc;
  for (std::size_t i = 0; i < s.best_choice.size(); ++i)
    if (s.best_choice[i] < static_cast<int>(workers.size()))
      alloc.assignments.emplace_back(static_cast<int>(i), s.best_choice[i]);
  if (cost_out) *cost_out = s.found ? s.best_cost : horizon_cost(predict_loads(workers, waiting, {}, H));
  return alloc;
}

// Scalable surrogate for (IO) in two phases. When the pool is deeper than
// the free capacity, candidates are first selected by water-filling: the
// lowest-loaded worker with a free slot receives the largest request that
// fits under the current maximum load (or the smallest request if none
// fits), approximating the subset freedom of (IO). The U(k) selected
// candidates are then sorted by first-step workload descending and each is
// placed on the free-slot worker minimizing the incremental horizon cost.
// Degenerates to LPT at H = 0 when the whole pool is admitted.
inline Allocation bfio_assign_greedy(const std::vector<RequestPreview>& waiting,
                                     const std::vector<WorkerView>& workers, int H) {
  long U = std::min<long>(static_cast<long>(waiting.size()), total_caps(workers));
  std::size_t Gn = workers.size();
  std::vector<int> order;
  if (static_cast<long>(waiting.size()) == U) {
    order.resize(static_cast<std::size_t>(U));
    for (long i = 0; i < U; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
  } else {
    std::vector<double> load(Gn);
    std::vector<int> free_slots(Gn);
    double target = 0.0;
    for (std::size_t g = 0; g < Gn; ++g) {
      load[g] = workers[g].future[0];
      free_slots[g] = workers[g].cap;
      target = std::max(target, load[g]);
    }
    std::vector<int> by_size(waiting.size());
    for (std::size_t i = 0; i < by_size.size(); ++i) by_size[i] = static_cast<int>(i);
    std::stable_sort(by_size.begin(), by_size.end(), [&](int a, int b) {
      return waiting[static_cast<std::size_t>(a)].w[0] <
             waiting[static_cast<std::size_t>(b)].w[0];
    });
    std::vector<bool> used(by_size.size(), false);
    for (long left = U; left > 0; --left) {
      int g = -1;
      for (std::size_t j = 0; j < Gn; ++j)
        if (free_slots[j] > 0 && (g < 0 || load[j] < load[static_cast<std::size_t>(g)]))
          g = static_cast<int>(j);
      if (g < 0) break;
      double deficit = target - load[static_cast<std::size_t>(g)];
      int pick = -1;
      for (int j = static_cast<int>(by_size.size()) - 1; j >= 0; --j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        if (waiting[static_cast<std::size_t>(by_size[static_cast<std::size_t>(j)])].w[0] <=
            deficit) {
          pick = j;
          break;
        }
      }
      if (pick < 0)
        for (std::size_t j = 0; j < by_size.size(); ++j)
          if (!used[j]) {
            pick = static_cast<int>(j);
            break;
          }
      if (pick < 0) break;
      used[static_cast<std::size_t>(pick)] = true;
      int i = by_size[static_cast<std::size_t>(pick)];
      order.push_back(i);
      load[static_cast<std::size_t>(g)] += waiting[static_cast<std::size_t>(i)].w[0];
      target = std::max(target, load[static_cast<std::size_t>(g)]);
      --free_slots[static_cast<std::size_t>(g)];
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return waiting[static_cast<std::size_t>(a)].w[0] > waiting[static_cast<std::size_t>(b)].w[0];
  });

  std::size_t G = workers.size();
  std::vector<int> cap(G);
  std::vector<std::vector<double>> loads(static_cast<std::size_t>(H) + 1,
                                         std::vector<double>(G, 0.0));
  for (std::size_t g = 0; g < G; ++g) {
    cap[g] = workers[g].cap;
    for (int h = 0; h <= H; ++h)
      loads[static_cast<std::size_t>(h)][g] = workers[g].future[static_cast<std::size_t>(h)];
  }

  Allocation alloc;
  for (int i : order) {
    const auto& pv = waiting[static_cast<std::size_t>(i)];
    int best = -1;
    double best_cost = 0.0;
    double best_load = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      if (cap[g] <= 0) continue;
      for (int h = 0; h <= H; ++h)
        loads[static_cast<std::size_t>(h)][g] += pv.w[static_cast<std::size_t>(h)];
      double c = horizon_cost(loads);
      for (int h = 0; h <= H; ++h)
        loads[static_cast<std::size_t>(h)][g] -= pv.w[static_cast<std::size_t>(h)];
      // the max-based cost is often flat across candidate workers; tie-break
      // toward the lowest current load (then lowest index) so equal-cost
      // placements still spread work instead of stacking low-index workers
      double l = loads[0][g];
      if (best < 0 || c < best_cost || (c == best_cost && l < best_load)) {
        best = static_cast<int>(g);
        best_cost = c;
        best_load = l;
      }
    }
    if (best < 0) break;
    alloc.assignments.emplace_back(i, best);
    --cap[static_cast<std::size_t>(best)];
    for (int h = 0; h <= H; ++h)
      loads[static_cast<std::size_t>(h)][static_cast<std::size_t>(best)] +=
          pv.w[static_cast<std::size_t>(h)];
  }
  std::sort(alloc.assignments.begin(), alloc.assignments.end());
  return alloc;
}

inline Allocation assign(PolicyKind policy, const std::vector<RequestPreview>& waiting,
                         const std::vector<WorkerView>& workers, int H,
                         long search_limit = 200000) {
  switch (policy) {
    case PolicyKind::Fcfs: return fcfs_assign(static_cast<int>(waiting.size()), workers);
    case PolicyKind::Jsq: return jsq_assign(static_cast<int>(waiting.size()), workers);
    case PolicyKind::BfioExact: return bfio_assign_exact(waiting, workers, H, search_limit);
    case PolicyKind::BfioGreedy: return bfio_assign_greedy(waiting, workers, H);
  }
  return {};
}

}  // namespace bfsim

#include "bfsim/policies.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

#include "bfsim/oracle.hpp"

using namespace bfsim;

namespace {

WorkerView worker(int cap, int active_count, std::vector<double> future) {
  WorkerView w;
  w.cap = cap;
  w.active_count = active_count;
  w.future = std::move(future);
  return w;
}

RequestPreview preview(std::vector<double> w) {
  RequestPreview p;
  p.w = std::move(w);
  return p;
}

// random step used by the property tests below
struct RandomStep {
  std::vector<WorkerView> workers;
  std::vector<RequestPreview> waiting;
  int H;
};

RandomStep random_step(std::mt19937_64& rng, int max_g = 3, int max_b = 3,
                       int max_wait = 6, int max_h = 2) {
  RandomStep st;
  st.H = static_cast<int>(rng() % (max_h + 1));
  int G = 1 + static_cast<int>(rng() % max_g);
  int n = static_cast<int>(rng() % (max_wait + 1));
  for (int g = 0; g < G; ++g) {
    WorkerView w;
    w.cap = static_cast<int>(rng() % (max_b + 1));
    w.active_count = static_cast<int>(rng() % 3);
    w.future.resize(static_cast<std::size_t>(st.H) + 1);
    for (auto& f : w.future) f = static_cast<double>(rng() % 20);
    st.workers.push_back(w);
  }
  for (int i = 0; i < n; ++i) {
    RequestPreview p;
    p.w.resize(static_cast<std::size_t>(st.H) + 1);
    for (auto& x : p.w) x = static_cast<double>(rng() % 10);
    st.waiting.push_back(p);
  }
  return st;
}

void check_allocation_invariants(const Allocation& a, const RandomStep& st) {
  std::map<int, int> per_worker;
  std::map<int, int> per_request;
  for (auto [i, g] : a.assignments) {
    ASSERT_GE(i, 0);
    ASSERT_LT(i, static_cast<int>(st.waiting.size()));
    ASSERT_GE(g, 0);
    ASSERT_LT(g, static_cast<int>(st.workers.size()));
    ++per_worker[g];
    ++per_request[i];
  }
  for (auto [g, c] : per_worker) EXPECT_LE(c, st.workers[static_cast<std::size_t>(g)].cap);
  for (auto [i, c] : per_request) EXPECT_EQ(c, 1);
  long U = std::min<long>(static_cast<long>(st.waiting.size()), total_caps(st.workers));
  EXPECT_EQ(static_cast<long>(a.assignments.size()), U);
}

}  // namespace

TEST(Fcfs, HandTrace) {
  // caps (2,1): a->w0, b->w0 (tie at (1,1) to w0), c->w1
  auto a = fcfs_assign(3, {worker(2, 0, {0}), worker(1, 0, {0})});
  EXPECT_EQ(a.assignments, (std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {2, 1}}));
}

TEST(Fcfs, EmptyAndFull) {
  EXPECT_TRUE(fcfs_assign(0, {worker(2, 0, {0})}).assignments.empty());
  EXPECT_TRUE(fcfs_assign(3, {worker(0, 0, {0}), worker(0, 0, {0})}).assignments.empty());
}

TEST(Jsq, PicksSmallestActiveCount) {
  auto a = jsq_assign(1, {worker(1, 3, {0}), worker(1, 1, {0})});
  EXPECT_EQ(a.assignments, (std::vector<std::pair<int, int>>{{0, 1}}));
}

TEST(Jsq, TieGoesToLowestIndex) {
  auto a = jsq_assign(1, {worker(1, 2, {0}), worker(1, 2, {0})});
  EXPECT_EQ(a.assignments, (std::vector<std::pair<int, int>>{{0, 0}}));
}

TEST(Jsq, NoCapacity) {
  EXPECT_TRUE(jsq_assign(2, {worker(0, 1, {0}), worker(0, 0, {0})}).assignments.empty());
}

TEST(PredictLoads, WindowCollapseAtH0) {
  std::vector<WorkerView> ws = {worker(1, 0, {4.0}), worker(1, 0, {6.0})};
  std::vector<RequestPreview> wait = {preview({2.0})};
  Allocation a;
  a.assignments = {{0, 0}};
  auto loads = predict_loads(ws, wait, a, 0);
  ASSERT_EQ(loads.size(), 1u);
  EXPECT_EQ(loads[0], (std::vector<double>{6.0, 6.0}));
}

TEST(PredictLoads, ProfileReadout) {
  // one worker, one active request (5,6,7) at tau=0, H=2
  WorkloadProfile p = llm_profile(5, 3);
  RequestPreview pv = make_preview(p, 0, 2);
  EXPECT_EQ(pv.w, (std::vector<double>{5, 6, 7}));
}

TEST(PredictLoads, ZeroAfterPredictedCompletion) {
  // finishes after 1 more step: contributes at h=0,1 then 0 at h=2
  WorkloadProfile p = llm_profile(5, 3);
  RequestPreview pv = make_preview(p, 1, 2);
  EXPECT_EQ(pv.w, (std::vector<double>{6, 7, 0}));
}

TEST(HorizonCost, Examples) {
  EXPECT_DOUBLE_EQ(horizon_cost({{5, 5}, {3, 3}}), 0.0);
  EXPECT_DOUBLE_EQ(horizon_cost({{10, 4}}), 6.0);
  EXPECT_DOUBLE_EQ(horizon_cost({{10, 4}, {8, 8}}), 6.0);
}

TEST(BfioExact, BalancesToZero) {
  // pre-loads (10,4), caps (1,1), waiting {7,1}, H=0 -> 1->w0, 7->w1
  std::vector<WorkerView> ws = {worker(1, 0, {10.0}), worker(1, 0, {4.0})};
  std::vector<RequestPreview> wait = {preview({7.0}), preview({1.0})};
  double cost = -1.0;
  Allocation a = bfio_assign_exact(wait, ws, 0, 200000, &cost);
  EXPECT_EQ(a.assignments, (std::vector<std::pair<int, int>>{{0, 1}, {1, 0}}));
  EXPECT_DOUBLE_EQ(cost, 0.0);
}

TEST(BfioExact, EmptyWaiting) {
  std::vector<WorkerView> ws = {worker(1, 0, {10.0}), worker(1, 0, {4.0})};
  double cost = -1.0;
  Allocation a = bfio_assign_exact({}, ws, 0, 200000, &cost);
  EXPECT_TRUE(a.assignments.empty());
  EXPECT_DOUBLE_EQ(cost, 6.0);  // current imbalance
}

TEST(BfioExact, LexicographicTieBreak) {
  // symmetric workers, identical requests: smallest assignment vector wins
  std::vector<WorkerView> ws = {worker(1, 0, {0.0}), worker(1, 0, {0.0})};
  std::vector<RequestPreview> wait = {preview({3.0}), preview({3.0})};
  Allocation a = bfio_assign_exact(wait, ws, 0);
  EXPECT_EQ(a.assignments, (std::vector<std::pair<int, int>>{{0, 0}, {1, 1}}));
}

TEST(BfioExact, SearchLimit) {
  std::vector<WorkerView> ws(4, worker(4, 0, {0.0}));
  std::vector<RequestPreview> wait(12, preview({1.0}));
  EXPECT_THROW(bfio_assign_exact(wait, ws, 0, 100), SearchLimitExceeded);
}

TEST(BfioGreedy, LptAtH0) {
  std::vector<WorkerView> ws = {worker(1, 0, {0.0}), worker(1, 0, {0.0})};
  std::vector<RequestPreview> wait = {preview({9.0}), preview({3.0})};
  Allocation a = bfio_assign_greedy(wait, ws, 0);
  EXPECT_EQ(a.assignments, (std::vector<std::pair<int, int>>{{0, 0}, {1, 1}}));
}

TEST(BfioGreedy, NeverBeatsExact) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) {
    RandomStep st = random_step(rng);
    Allocation g = bfio_assign_greedy(st.waiting, st.workers, st.H);
    double jg = horizon_cost(predict_loads(st.workers, st.waiting, g, st.H));
    double je = 0.0;
    bfio_assign_exact(st.waiting, st.workers, st.H, 200000, &je);
    EXPECT_GE(jg, je - 1e-9);
  }
}

TEST(Policies, AllocationInvariantsRandomized) {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 10000; ++t) {
    RandomStep st = random_step(rng);
    for (PolicyKind p : {PolicyKind::Fcfs, PolicyKind::Jsq, PolicyKind::BfioExact,
                         PolicyKind::BfioGreedy}) {
      Allocation a = assign(p, st.waiting, st.workers, st.H);
      check_allocation_invariants(a, st);
    }
  }
}

TEST(Policies, FcfsJsqAreSizeAgnostic) {
  std::mt19937_64 rng(67);
  for (int t = 0; t < 500; ++t) {
    RandomStep st = random_step(rng, 4, 3, 8, 1);
    RandomStep permuted = st;
    std::shuffle(permuted.waiting.begin(), permuted.waiting.end(), rng);
    for (PolicyKind p : {PolicyKind::Fcfs, PolicyKind::Jsq}) {
      Allocation a = assign(p, st.waiting, st.workers, st.H);
      Allocation b = assign(p, permuted.waiting, permuted.workers, permuted.H);
      EXPECT_EQ(a.assignments, b.assignments);
    }
  }
}

TEST(Lookahead, NoisyModeClampsAndRounds) {
  std::mt19937_64 rng(3);
  WorkloadProfile p = llm_profile(4, 5);
  for (int t = 0; t < 100; ++t) {
    RequestPreview pv = make_preview(p, 2, 4, LookaheadMode::Noisy, 2.0, &rng);
    ASSERT_EQ(pv.w.size(), 5u);
    EXPECT_DOUBLE_EQ(pv.w[0], 6.0);  // current entry is always exact
    for (double x : pv.w) EXPECT_GE(x, 0.0);
  }
}

TEST(Policies, NameRoundTrip) {
  for (const char* n : {"fcfs", "jsq", "bfio-exact", "bfio-greedy"})
    EXPECT_EQ(policy_name(policy_from_name(n)), n);
  EXPECT_THROW(policy_from_name("round-robin"), std::invalid_argument);
}

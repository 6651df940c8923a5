#include "bfsim/engine.hpp"

#include <gtest/gtest.h>

#include "bfsim/metrics.hpp"

using namespace bfsim;

namespace {

ArrivalInstance make_instance(std::vector<ArrivalRecord> rows,
                              DriftSpec drift = DriftSpec::unit()) {
  ArrivalInstance inst;
  inst.requests = std::move(rows);
  inst.drift = std::move(drift);
  inst.source_order.resize(inst.requests.size());
  std::iota(inst.source_order.begin(), inst.source_order.end(), std::size_t{0});
  return inst;
}

SimConfig small_config(int G, int B, PolicyKind policy = PolicyKind::Fcfs) {
  SimConfig c;
  c.workers = G;
  c.batch = B;
  c.policy = policy;
  return c;
}

}  // namespace

TEST(WorkerLoad, SumsStepAboutToExecute) {
  EXPECT_DOUBLE_EQ(worker_load({{llm_profile(3, 4), 1}, {drift_profile(5, 3, DriftSpec::constant(0.0)), 0}}), 9.0);
  EXPECT_DOUBLE_EQ(worker_load({}), 0.0);
  EXPECT_DOUBLE_EQ(worker_load({{llm_profile(7, 1), 0}}), 7.0);
  EXPECT_THROW(worker_load({{llm_profile(7, 1), 1}}), std::logic_error);
}

TEST(StepDuration, PaperConstants) {
  SimConfig c;
  EXPECT_DOUBLE_EQ(step_duration(0.0, c), 9.775e-3);
  EXPECT_NEAR(step_duration(1e6, c), 0.110275, 1e-12);
  c.per_token = 1e-30;  // effectively constant
  EXPECT_NEAR(step_duration(12345.0, c), c.overhead, 1e-20);
  EXPECT_THROW(step_duration(-1.0, c), std::invalid_argument);
}

TEST(Advance, IdleStep) {
  auto inst = make_instance({{5.0, 3, 2}});  // arrives later
  Simulation sim(small_config(2, 1), inst);
  StepRecord rec = sim.advance();
  EXPECT_EQ(rec.loads, (std::vector<double>{0, 0}));
  EXPECT_DOUBLE_EQ(rec.dt, 9.775e-3);
  EXPECT_TRUE(rec.admitted.empty());
}

TEST(Advance, SingleAdmission) {
  auto inst = make_instance({{0.0, 5, 1}}, DriftSpec::constant(0.0));
  SimConfig c = small_config(1, 1);
  Simulation sim(c, inst);
  StepRecord rec = sim.advance();
  ASSERT_EQ(rec.loads.size(), 1u);
  EXPECT_DOUBLE_EQ(rec.loads[0], 5.0);
  EXPECT_DOUBLE_EQ(rec.dt, c.overhead + 5.0 * c.per_token);
  EXPECT_EQ(rec.admitted, (std::vector<int>{0}));
}

TEST(Advance, SingleStepRequestCompletesSameStep) {
  auto inst = make_instance({{0.0, 7, 1}});
  Simulation sim(small_config(1, 1), inst);
  StepRecord rec = sim.advance();
  EXPECT_EQ(rec.completed, (std::vector<int>{0}));
  EXPECT_TRUE(sim.all_done());
}

TEST(Run, EmptyInstance) {
  ArrivalInstance inst;
  SimResult res = run(small_config(2, 2), inst);
  EXPECT_TRUE(res.steps.empty());
  EXPECT_TRUE(res.completed_all);
}

TEST(Run, SingleRequestHandTrace) {
  auto inst = make_instance({{0.0, 2, 3}});
  SimResult res = run(small_config(1, 1), inst);
  ASSERT_EQ(res.steps.size(), 3u);
  EXPECT_DOUBLE_EQ(res.steps[0].loads[0], 2.0);
  EXPECT_DOUBLE_EQ(res.steps[1].loads[0], 3.0);
  EXPECT_DOUBLE_EQ(res.steps[2].loads[0], 4.0);
  EXPECT_DOUBLE_EQ(res.total_workload_processed(), 9.0);
  EXPECT_TRUE(res.completed_all);
  ASSERT_EQ(res.requests.size(), 1u);
  EXPECT_EQ(res.requests[0].start_step, 0);
  EXPECT_TRUE(res.requests[0].completed);
}

TEST(Run, DeterministicRepeat) {
  auto inst = sample_instance(PrefillDistribution::uniform(16),
                              DecodeDistribution::geometric(0.2), 40.0, 5.0, 77);
  SimConfig c = small_config(3, 2, PolicyKind::BfioGreedy);
  c.seed = 77;
  SimResult a = run(c, inst);
  SimResult b = run(c, inst);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    EXPECT_EQ(a.steps[k].loads, b.steps[k].loads);
    EXPECT_EQ(a.steps[k].dt, b.steps[k].dt);
    EXPECT_EQ(a.steps[k].admitted, b.steps[k].admitted);
  }
}

TEST(Run, MaxStepsGivesPartialResult) {
  auto inst = make_instance({{0.0, 2, 100}});
  SimConfig c = small_config(1, 1);
  c.max_steps = 10;
  SimResult res = run(c, inst);
  EXPECT_EQ(res.steps.size(), 10u);
  EXPECT_FALSE(res.completed_all);
}

TEST(Run, CapacityRespected) {
  auto inst = sample_instance(PrefillDistribution::uniform(8),
                              DecodeDistribution::geometric(0.1), 100.0, 3.0, 5);
  for (PolicyKind p : {PolicyKind::Fcfs, PolicyKind::Jsq, PolicyKind::BfioGreedy}) {
    SimConfig c = small_config(2, 3, p);
    SimResult res = run(c, inst);
    for (const auto& s : res.steps) EXPECT_LE(s.active_count, 2 * 3);
    EXPECT_TRUE(res.completed_all);
  }
}

TEST(Run, WorkloadConservationAcrossPolicies) {
  auto inst = sample_instance(PrefillDistribution::uniform(16),
                              DecodeDistribution::geometric(0.15), 60.0, 4.0, 13);
  double expected = inst.total_workload();
  for (PolicyKind p : {PolicyKind::Fcfs, PolicyKind::Jsq, PolicyKind::BfioGreedy}) {
    SimResult res = run(small_config(4, 4, p), inst);
    ASSERT_TRUE(res.completed_all);
    EXPECT_DOUBLE_EQ(res.total_workload_processed(), expected);
  }
}

TEST(Run, ProgressCompletionStep) {
  // a request admitted at step x completes exactly at step x + o - 1
  auto inst = make_instance({{0.0, 3, 4}, {0.0, 2, 2}});
  SimResult res = run(small_config(2, 1), inst);
  ASSERT_TRUE(res.completed_all);
  for (const auto& r : res.requests) {
    long finish_step = -1;
    for (const auto& s : res.steps)
      for (int id : s.completed)
        if (id == r.id) finish_step = s.k;
    EXPECT_EQ(finish_step, r.start_step + r.decode_steps - 1);
  }
}

TEST(Run, ClockStrictlyIncreases) {
  auto inst = sample_instance(PrefillDistribution::uniform(8),
                              DecodeDistribution::geometric(0.3), 30.0, 2.0, 1);
  SimResult res = run(small_config(2, 2), inst);
  for (std::size_t k = 1; k < res.steps.size(); ++k)
    EXPECT_GT(res.steps[k].clock_start, res.steps[k - 1].clock_start);
}

TEST(Run, StepCsvSchema) {
  auto inst = make_instance({{0.0, 2, 2}});
  SimResult res = run(small_config(2, 1), inst);
  std::ostringstream os;
  write_step_csv(os, res);
  std::string first_line = os.str().substr(0, os.str().find('\n'));
  EXPECT_EQ(first_line, "k,clock_start,dt,max_load,active_count,load_0,load_1");
}

// bfsim: barrier-synchronized sticky-assignment load balancing simulator CLI.
//
// Subcommands: run, compare, sweep-h, sweep-g, iir, validate-trace.
// Exit codes: 0 success, 1 usage/config error, 2 partial completion.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bfsim/engine.hpp"
#include "bfsim/metrics.hpp"
#include "bfsim/oracle.hpp"
#include "bfsim/policies.hpp"
#include "bfsim/workload.hpp"

namespace fs = std::filesystem;
using namespace bfsim;

namespace {

struct ExperimentConfig {
  SimConfig sim;
  std::string policy_name = "fcfs";
  // workload: exactly one of trace / poisson synthetic / overloaded synthetic
  std::string trace;
  std::string mode = "poisson";  // poisson | overloaded
  double rate = 50.0;            // arrivals / sec (poisson)
  double duration = 10.0;        // sec (poisson)
  long steps = 2000;             // measured steps (overloaded)
  long warmup = 200;             // discarded steps (overloaded)
  int prefill_max = 64;
  double geo_p = 0.02;
  double drift = 1.0;            // constant per-step increment
  std::string out = ".";
  bool emit_steps = false;
};

// Flat key=value config file; '#' comments; command-line flags override.
void load_config_file(const std::string& path, std::map<std::string, std::string>& kv) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: missing '=' at line " + std::to_string(lineno));
    auto trim = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t");
      std::size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
}

// Applies file values; keys whose flag was given on the command line are
// skipped, so flags take precedence.
void apply_config_map(const std::map<std::string, std::string>& kv, ExperimentConfig& cfg,
                      const std::function<bool(const std::string&)>& flag_given) {
  static const std::map<std::string, std::string> flag_of = {
      {"workers", "--workers"},       {"batch", "--batch"},
      {"seed", "--seed"},             {"policy", "--policy"},
      {"horizon", "--horizon"},       {"max_steps", "--max-steps"},
      {"trace", "--trace"},           {"mode", "--mode"},
      {"rate", "--rate"},             {"duration", "--duration"},
      {"steps", "--steps"},           {"warmup", "--warmup"},
      {"prefill_max", "--prefill-max"}, {"geo_p", "--geo-p"},
      {"drift", "--drift"},           {"out", "--out"},
      {"emit_steps", "--emit-steps"}};
  for (const auto& [key, val] : kv) {
    auto it = flag_of.find(key);
    if (it != flag_of.end() && flag_given(it->second)) continue;
    if (key == "workers") cfg.sim.workers = std::stoi(val);
    else if (key == "batch") cfg.sim.batch = std::stoi(val);
    else if (key == "seed") cfg.sim.seed = std::stoull(val);
    else if (key == "policy") cfg.policy_name = val;
    else if (key == "horizon") cfg.sim.horizon = std::stoi(val);
    else if (key == "max_steps") cfg.sim.max_steps = std::stol(val);
    else if (key == "overhead") cfg.sim.overhead = std::stod(val);
    else if (key == "per_token") cfg.sim.per_token = std::stod(val);
    else if (key == "search_limit") cfg.sim.search_limit = std::stol(val);
    else if (key == "trace") cfg.trace = val;
    else if (key == "mode") cfg.mode = val;
    else if (key == "rate") cfg.rate = std::stod(val);
    else if (key == "duration") cfg.duration = std::stod(val);
    else if (key == "steps") cfg.steps = std::stol(val);
    else if (key == "warmup") cfg.warmup = std::stol(val);
    else if (key == "prefill_max") cfg.prefill_max = std::stoi(val);
    else if (key == "geo_p") cfg.geo_p = std::stod(val);
    else if (key == "drift") cfg.drift = std::stod(val);
    else if (key == "power.p_idle") cfg.sim.power.p_idle = std::stod(val);
    else if (key == "power.p_max") cfg.sim.power.p_max = std::stod(val);
    else if (key == "power.mfu_sat") cfg.sim.power.mfu_sat = std::stod(val);
    else if (key == "power.gamma") cfg.sim.power.gamma = std::stod(val);
    else if (key == "out") cfg.out = val;
    else if (key == "emit_steps") cfg.emit_steps = (val == "1" || val == "true");
    else throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

struct RunOutput {
  MetricsReport metrics;
  bool completed_all = true;
  std::vector<StepRecord> steps;
};

RunOutput run_one(const ExperimentConfig& cfg, PolicyKind policy, int horizon) {
  RunOutput out;
  SimConfig sim = cfg.sim;
  sim.policy = policy;
  sim.horizon = horizon;
  if (!cfg.trace.empty() || cfg.mode == "poisson") {
    ArrivalInstance inst;
    if (!cfg.trace.empty()) {
      inst = load_trace(cfg.trace);
      inst.drift = DriftSpec::constant(cfg.drift);
    } else {
      inst = sample_instance(PrefillDistribution::uniform(cfg.prefill_max),
                             DecodeDistribution::geometric(cfg.geo_p), cfg.rate,
                             cfg.duration, sim.seed, DriftSpec::constant(cfg.drift));
    }
    SimResult res = run(sim, inst);
    out.completed_all = res.completed_all;
    if (res.steps.empty()) {
      out.metrics = MetricsReport{};
    } else {
      out.metrics = compute_metrics(res);
    }
    out.steps = std::move(res.steps);
  } else if (cfg.mode == "overloaded") {
    OverloadedSpec spec;
    spec.prefill = PrefillDistribution::uniform(cfg.prefill_max);
    spec.decode = DecodeDistribution::geometric(cfg.geo_p);
    spec.drift = DriftSpec::constant(cfg.drift);
    spec.overhead = sim.overhead;
    spec.per_token = sim.per_token;
    std::vector<RequestTiming> timings;
    out.steps = run_overloaded(policy, horizon, sim.workers, sim.batch, cfg.steps,
                               cfg.warmup, spec, sim.seed, sim.search_limit, &timings);
    out.metrics = compute_metrics(out.steps, timings, sim.power);
  } else {
    throw std::runtime_error("config: mode must be 'poisson' or 'overloaded'");
  }
  return out;
}

void write_config_echo(std::ostream& os, const ExperimentConfig& cfg) {
  os << "policy=" << cfg.policy_name << "\n"
     << "seed=" << cfg.sim.seed << "\n"
     << "workers=" << cfg.sim.workers << "\n"
     << "batch=" << cfg.sim.batch << "\n"
     << "horizon=" << cfg.sim.horizon << "\n"
     << "mode=" << (cfg.trace.empty() ? cfg.mode : "trace") << "\n";
}

void write_summary_file(const fs::path& path, const ExperimentConfig& cfg,
                        const MetricsReport& m) {
  std::ofstream os(path);
  write_config_echo(os, cfg);
  write_summary(os, m);
}

int cmd_run(const ExperimentConfig& cfg) {
  PolicyKind policy = policy_from_name(cfg.policy_name);
  RunOutput out = run_one(cfg, policy, cfg.sim.horizon);
  fs::create_directories(cfg.out);
  write_summary_file(fs::path(cfg.out) / "summary.txt", cfg, out.metrics);
  if (cfg.emit_steps) {
    std::ofstream os(fs::path(cfg.out) / "steps.csv");
    os << "k,clock_start,dt,max_load,active_count";
    for (int g = 0; g < cfg.sim.workers; ++g) os << ",load_" << g;
    os << "\n";
    os.precision(17);
    for (const auto& s : out.steps) {
      os << s.k << ',' << s.clock_start << ',' << s.dt << ',' << s.max_load << ','
         << s.active_count;
      for (double l : s.loads) os << ',' << l;
      os << "\n";
    }
  }
  return out.completed_all ? 0 : 2;
}

int cmd_compare(const ExperimentConfig& cfg, const std::vector<std::string>& policies) {
  if (policies.size() < 2) {
    std::cerr << "compare: need at least two policies\n";
    return 1;
  }
  fs::create_directories(cfg.out);
  std::ofstream os(fs::path(cfg.out) / "compare.csv");
  os << "policy,avg_imbalance,throughput,tpot,energy\n";
  os.precision(17);
  bool all_complete = true;
  for (const std::string& name : policies) {
    RunOutput out = run_one(cfg, policy_from_name(name), cfg.sim.horizon);
    all_complete = all_complete && out.completed_all;
    os << name << ',' << out.metrics.avg_imbalance << ',' << out.metrics.throughput << ','
       << out.metrics.tpot << ',' << out.metrics.energy << "\n";
  }
  return all_complete ? 0 : 2;
}

int cmd_sweep_h(const ExperimentConfig& cfg, const std::vector<int>& h_list) {
  PolicyKind policy = policy_from_name(cfg.policy_name);
  fs::create_directories(cfg.out);
  std::ofstream os(fs::path(cfg.out) / "sweep_h.csv");
  os << "H,avg_imbalance,throughput,tpot,energy\n";
  os.precision(17);
  bool all_complete = true;
  for (int h : h_list) {
    RunOutput out = run_one(cfg, policy, h);
    all_complete = all_complete && out.completed_all;
    os << h << ',' << out.metrics.avg_imbalance << ',' << out.metrics.throughput << ','
       << out.metrics.tpot << ',' << out.metrics.energy << "\n";
  }
  return all_complete ? 0 : 2;
}

int cmd_sweep_g(const ExperimentConfig& cfg, const std::vector<int>& g_list) {
  fs::create_directories(cfg.out);
  std::ofstream os(fs::path(cfg.out) / "sweep_g.csv");
  os << "G,policy,avg_imbalance,throughput,tpot,energy,saving_pct\n";
  os.precision(17);
  bool all_complete = true;
  for (int g : g_list) {
    ExperimentConfig c = cfg;
    c.sim.workers = g;
    RunOutput fcfs = run_one(c, PolicyKind::Fcfs, cfg.sim.horizon);
    RunOutput bfio = run_one(c, PolicyKind::BfioGreedy, cfg.sim.horizon);
    all_complete = all_complete && fcfs.completed_all && bfio.completed_all;
    double saving = fcfs.metrics.energy > 0.0
                        ? 100.0 * (fcfs.metrics.energy - bfio.metrics.energy) / fcfs.metrics.energy
                        : 0.0;
    os << g << ",fcfs," << fcfs.metrics.avg_imbalance << ',' << fcfs.metrics.throughput
       << ',' << fcfs.metrics.tpot << ',' << fcfs.metrics.energy << ",0\n";
    os << g << ",bfio-greedy," << bfio.metrics.avg_imbalance << ',' << bfio.metrics.throughput
       << ',' << bfio.metrics.tpot << ',' << bfio.metrics.energy << ',' << saving << "\n";
  }
  return all_complete ? 0 : 2;
}

int cmd_iir(const ExperimentConfig& cfg, const std::vector<int>& b_list,
            const std::vector<int>& g_list, int trials) {
  OverloadedSpec spec;
  spec.prefill = PrefillDistribution::uniform(cfg.prefill_max);
  spec.decode = DecodeDistribution::geometric(cfg.geo_p);
  spec.drift = DriftSpec::constant(cfg.drift);
  spec.overhead = cfg.sim.overhead;
  spec.per_token = cfg.sim.per_token;
  IirEstimate est = estimate_iir(b_list, g_list, spec, trials, cfg.steps, cfg.warmup,
                                 cfg.sim.seed);
  fs::create_directories(cfg.out);
  std::ofstream os(fs::path(cfg.out) / "iir.csv");
  write_iir_csv(os, est);
  return 0;
}

int cmd_validate_trace(const std::string& path) {
  ArrivalInstance inst = load_trace(path);
  std::cout << "trace ok: " << inst.requests.size() << " requests\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"barrier-synchronized load balancing simulator"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string config_path;
  std::vector<std::string> policies;
  std::vector<int> h_list, g_list, b_list;
  int trials = 20;
  std::string trace_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--seed", cfg.sim.seed, "RNG seed");
    sub->add_option("--policy", cfg.policy_name, "fcfs|jsq|bfio-exact|bfio-greedy");
    sub->add_option("--horizon", cfg.sim.horizon, "lookahead window H");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_flag("--emit-steps", cfg.emit_steps, "write per-step CSV");
    sub->add_option("--workers", cfg.sim.workers, "worker count G");
    sub->add_option("--batch", cfg.sim.batch, "per-worker batch capacity B");
    sub->add_option("--trace", cfg.trace, "trace CSV path");
    sub->add_option("--mode", cfg.mode, "poisson|overloaded");
    sub->add_option("--rate", cfg.rate, "Poisson arrival rate (1/s)");
    sub->add_option("--duration", cfg.duration, "arrival window (s)");
    sub->add_option("--steps", cfg.steps, "measured steps (overloaded mode)");
    sub->add_option("--warmup", cfg.warmup, "warm-up steps (overloaded mode)");
    sub->add_option("--prefill-max", cfg.prefill_max, "uniform prefill upper bound");
    sub->add_option("--geo-p", cfg.geo_p, "geometric decode parameter");
    sub->add_option("--drift", cfg.drift, "constant per-step workload increment");
    sub->add_option("--max-steps", cfg.sim.max_steps, "simulation step cap");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "single simulation");
  add_common(run_cmd);
  CLI::App* compare_cmd = app.add_subcommand("compare", "policy comparison on one instance");
  add_common(compare_cmd);
  compare_cmd->add_option("--policies", policies, "policies to compare")->delimiter(',');
  CLI::App* sweep_h_cmd = app.add_subcommand("sweep-h", "horizon sweep");
  add_common(sweep_h_cmd);
  sweep_h_cmd->add_option("--h-list", h_list, "H values")->delimiter(',');
  CLI::App* sweep_g_cmd = app.add_subcommand("sweep-g", "worker-count sweep, FCFS vs BF-IO");
  add_common(sweep_g_cmd);
  sweep_g_cmd->add_option("--g-list", g_list, "G values")->delimiter(',');
  CLI::App* iir_cmd = app.add_subcommand("iir", "imbalance improvement ratio grid");
  add_common(iir_cmd);
  iir_cmd->add_option("--b-list", b_list, "B values")->delimiter(',');
  iir_cmd->add_option("--g-list", g_list, "G values")->delimiter(',');
  iir_cmd->add_option("--trials", trials, "trials per cell");
  CLI::App* validate_cmd = app.add_subcommand("validate-trace", "check a trace file");
  validate_cmd->add_option("path", trace_path, "trace CSV path")->required();

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) {
      CLI::App* active = app.get_subcommands().front();
      std::map<std::string, std::string> kv;
      load_config_file(config_path, kv);
      apply_config_map(kv, cfg, [&](const std::string& flag) {
        const CLI::Option* opt = active->get_option_no_throw(flag);
        return opt != nullptr && opt->count() > 0;
      });
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate_trace(trace_path);
    if (run_cmd->parsed()) return cmd_run(cfg);
    if (compare_cmd->parsed()) return cmd_compare(cfg, policies);
    if (sweep_h_cmd->parsed()) {
      if (h_list.empty()) {
        std::cerr << "sweep-h: --h-list must be nonempty\n";
        return 1;
      }
      return cmd_sweep_h(cfg, h_list);
    }
    if (sweep_g_cmd->parsed()) {
      if (g_list.empty()) {
        std::cerr << "sweep-g: --g-list must be nonempty\n";
        return 1;
      }
      return cmd_sweep_g(cfg, g_list);
    }
    if (iir_cmd->parsed()) {
      if (b_list.empty() || g_list.empty()) {
        std::cerr << "iir: --b-list and --g-list must be nonempty\n";
        return 1;
      }
      return cmd_iir(cfg, b_list, g_list, trials);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

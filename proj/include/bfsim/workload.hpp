#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bfsim {

// Per-step workload sequence of one request. Values are real so fractional
// drift increments are representable; LLM profiles stay exact integers.
struct WorkloadProfile {
  std::vector<double> steps;

  std::size_t length() const { return steps.size(); }
  double at(std::size_t j) const { return steps.at(j); }  // 0-indexed
  double total() const { return std::accumulate(steps.begin(), steps.end(), 0.0); }
};

// Shared per-step workload increment rule. Job-local indexing: the j-th entry
// of a profile is s + sum of the first j-1 increments. A custom list yields 0
// past its end (empty-sum convention).
struct DriftSpec {
  enum class Kind { Constant, Custom };
  Kind kind = Kind::Constant;
  double value = 1.0;
  std::vector<double> increments;
  double delta_max = 1.0;

  static DriftSpec unit() { return DriftSpec{Kind::Constant, 1.0, {}, 1.0}; }
  static DriftSpec constant(double v) { return DriftSpec{Kind::Constant, v, {}, v}; }
  static DriftSpec custom(std::vector<double> deltas) {
    double m = 0.0;
    for (double d : deltas) m = std::max(m, d);
    return DriftSpec{Kind::Custom, 0.0, std::move(deltas), m};
  }

  // delta_t for t >= 1
  double at(std::size_t t) const {
    if (kind == Kind::Constant) return value;
    return t >= 1 && t <= increments.size() ? increments[t - 1] : 0.0;
  }

  void validate() const {
    if (delta_max < 0.0) throw std::invalid_argument("drift: delta_max < 0");
    if (kind == Kind::Constant) {
      if (value < 0.0 || value > delta_max) throw std::invalid_argument("drift: increment out of [0, delta_max]");
      return;
    }
    for (double d : increments)
      if (d < 0.0 || d > delta_max) throw std::invalid_argument("drift: increment out of [0, delta_max]");
  }
};

// (s, s+1, ..., s+o-1): linear KV growth, one token per decode step.
inline WorkloadProfile llm_profile(long s, long o) {
  if (s < 1 || o < 1) throw std::invalid_argument("llm_profile: s and o must be >= 1");
  WorkloadProfile p;
  p.steps.reserve(static_cast<std::size_t>(o));
  for (long j = 0; j < o; ++j) p.steps.push_back(static_cast<double>(s + j));
  return p;
}

// steps[j] = s + sum_{t=1}^{j-1} delta_t (1-indexed j)
inline WorkloadProfile drift_profile(double s, long o, const DriftSpec& drift) {
  if (s < 1 || o < 1) throw std::invalid_argument("drift_profile: s and o must be >= 1");
  drift.validate();
  WorkloadProfile p;
  p.steps.reserve(static_cast<std::size_t>(o));
  double acc = s;
  p.steps.push_back(acc);
  for (long j = 2; j <= o; ++j) {
    acc += drift.at(static_cast<std::size_t>(j - 1));
    p.steps.push_back(acc);
  }
  return p;
}

struct PrefillDistribution {
  enum class Kind { Uniform, Fixed, Empirical };
  Kind kind = Kind::Uniform;
  int s_max = 64;                 // uniform support is {1..s_max}
  int fixed = 1;
  std::vector<int> values;        // empirical

  static PrefillDistribution uniform(int s_max) {
    if (s_max < 1) throw std::invalid_argument("prefill: s_max must be >= 1");
    PrefillDistribution d;
    d.kind = Kind::Uniform;
    d.s_max = s_max;
    return d;
  }
  static PrefillDistribution fixed_value(int s) {
    if (s < 1) throw std::invalid_argument("prefill: fixed value must be >= 1");
    PrefillDistribution d;
    d.kind = Kind::Fixed;
    d.fixed = s;
    d.s_max = s;
    return d;
  }
  static PrefillDistribution empirical(std::vector<int> vs) {
    if (vs.empty()) throw std::invalid_argument("prefill: empty empirical list");
    PrefillDistribution d;
    d.kind = Kind::Empirical;
    d.values = std::move(vs);
    d.s_max = *std::max_element(d.values.begin(), d.values.end());
    for (int v : d.values)
      if (v < 1) throw std::invalid_argument("prefill: empirical value < 1");
    return d;
  }

  int sample(std::mt19937_64& rng) const {
    switch (kind) {
      case Kind::Uniform: return std::uniform_int_distribution<int>(1, s_max)(rng);
      case Kind::Fixed: return fixed;
      case Kind::Empirical:
        return values[std::uniform_int_distribution<std::size_t>(0, values.size() - 1)(rng)];
    }
    return 1;
  }

  double mean() const {
    switch (kind) {
      case Kind::Uniform: return (1.0 + s_max) / 2.0;
      case Kind::Fixed: return fixed;
      case Kind::Empirical:
        return std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    }
    return 0.0;
  }

  double stddev() const {
    switch (kind) {
      case Kind::Uniform: {
        double n = s_max;
        return std::sqrt((n * n - 1.0) / 12.0);
      }
      case Kind::Fixed: return 0.0;
      case Kind::Empirical: {
        double m = mean(), acc = 0.0;
        for (int v : values) acc += (v - m) * (v - m);
        return std::sqrt(acc / values.size());
      }
    }
    return 0.0;
  }

  // sigma_s / s_max, with the non-degeneracy band [kappa0, 1/2]
  double dispersion() const { return stddev() / s_max; }
  bool dispersion_in_range(double kappa0) const {
    double d = dispersion();
    return d >= kappa0 && d <= 0.5 + 1e-12;
  }
};

struct DecodeDistribution {
  enum class Kind { Geometric, Fixed, Empirical };
  Kind kind = Kind::Geometric;
  double p = 0.02;                // geometric success probability, support {1,2,...}
  long fixed = 1;
  std::vector<long> values;

  static DecodeDistribution geometric(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("decode: p must be in (0,1)");
    DecodeDistribution d;
    d.kind = Kind::Geometric;
    d.p = p;
    return d;
  }
  static DecodeDistribution fixed_length(long o) {
    if (o < 1) throw std::invalid_argument("decode: fixed length must be >= 1");
    DecodeDistribution d;
    d.kind = Kind::Fixed;
    d.fixed = o;
    return d;
  }
  static DecodeDistribution empirical(std::vector<long> vs) {
    if (vs.empty()) throw std::invalid_argument("decode: empty empirical list");
    for (long v : vs)
      if (v < 1) throw std::invalid_argument("decode: empirical value < 1");
    DecodeDistribution d;
    d.kind = Kind::Empirical;
    d.values = std::move(vs);
    return d;
  }

  long sample(std::mt19937_64& rng) const {
    switch (kind) {
      case Kind::Geometric:
        return 1 + std::geometric_distribution<long>(p)(rng);
      case Kind::Fixed: return fixed;
      case Kind::Empirical:
        return values[std::uniform_int_distribution<std::size_t>(0, values.size() - 1)(rng)];
    }
    return 1;
  }

  double mean() const {
    switch (kind) {
      case Kind::Geometric: return 1.0 / p;
      case Kind::Fixed: return static_cast<double>(fixed);
      case Kind::Empirical:
        return std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    }
    return 0.0;
  }
};

struct ArrivalRecord {
  double arrival_time = 0.0;  // seconds
  int prefill = 1;
  long decode = 1;
};

struct ArrivalInstance {
  std::vector<ArrivalRecord> requests;  // sorted by arrival_time
  DriftSpec drift = DriftSpec::unit();
  std::uint64_t seed = 0;
  std::string source;
  std::vector<std::size_t> source_order;  // original row index per sorted request

  WorkloadProfile profile_of(std::size_t i) const {
    return drift_profile(requests[i].prefill, requests[i].decode, drift);
  }
  double total_workload() const {
    double w = 0.0;
    for (std::size_t i = 0; i < requests.size(); ++i) w += profile_of(i).total();
    return w;
  }
};

// Poisson arrivals on [0, duration), i.i.d. prefill/decode marks.
inline ArrivalInstance sample_instance(const PrefillDistribution& prefill,
                                       const DecodeDistribution& decode,
                                       double rate, double duration,
                                       std::uint64_t seed,
                                       const DriftSpec& drift = DriftSpec::unit()) {
  if (rate <= 0.0) throw std::invalid_argument("sample_instance: rate must be > 0");
  if (duration <= 0.0) throw std::invalid_argument("sample_instance: duration must be > 0");
  ArrivalInstance inst;
  inst.drift = drift;
  inst.seed = seed;
  inst.source = "synthetic";
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  double t = gap(rng);
  while (t < duration) {
    ArrivalRecord r;
    r.arrival_time = t;
    r.prefill = prefill.sample(rng);
    r.decode = decode.sample(rng);
    inst.requests.push_back(r);
    t += gap(rng);
  }
  inst.source_order.resize(inst.requests.size());
  std::iota(inst.source_order.begin(), inst.source_order.end(), std::size_t{0});
  return inst;
}

// Trace CSV: header "arrival_time,prefill,decode", '#' comments ignored.
inline ArrivalInstance load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_trace: cannot open " + path);
  ArrivalInstance inst;
  inst.source = path;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::vector<std::pair<ArrivalRecord, std::size_t>> rows;
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!header_seen) {
      std::string h = line;
      h.erase(std::remove_if(h.begin(), h.end(), [](char c) { return c == ' ' || c == '\t'; }), h.end());
      if (h != "arrival_time,prefill,decode")
        throw std::runtime_error("load_trace: bad header at line " + std::to_string(lineno));
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::string f0, f1, f2, extra;
    if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2, ','))
      throw std::runtime_error("load_trace: malformed row at line " + std::to_string(lineno));
    if (std::getline(ss, extra, ','))
      throw std::runtime_error("load_trace: too many fields at line " + std::to_string(lineno));
    ArrivalRecord r;
    try {
      r.arrival_time = std::stod(f0);
      r.prefill = std::stoi(f1);
      r.decode = std::stol(f2);
    } catch (const std::exception&) {
      throw std::runtime_error("load_trace: malformed row at line " + std::to_string(lineno));
    }
    if (r.arrival_time < 0.0 || r.prefill < 1 || r.decode < 1)
      throw std::runtime_error("load_trace: invalid values at line " + std::to_string(lineno));
    rows.emplace_back(r, row_index++);
  }
  if (!header_seen && lineno > 0 && row_index == 0) {
    // file of only comments/blank lines counts as an empty data section
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.first.arrival_time < b.first.arrival_time;
  });
  for (auto& [rec, idx] : rows) {
    inst.requests.push_back(rec);
    inst.source_order.push_back(idx);
  }
  return inst;
}

// Def. 1 check at one step: after removing the most numerous single
// prefill-length class, the pool still fills all free slots.
inline bool is_overloaded_at(const std::vector<std::pair<int, long>>& pool,
                             long free_slots, int s_max) {
  if (s_max < 1) throw std::invalid_argument("is_overloaded_at: s_max must be >= 1");
  std::vector<long> count(static_cast<std::size_t>(s_max) + 1, 0);
  for (const auto& [s, o] : pool) {
    if (s >= 1 && s <= s_max) ++count[static_cast<std::size_t>(s)];
  }
  long largest = 0;
  for (int l = 1; l <= s_max; ++l) largest = std::max(largest, count[static_cast<std::size_t>(l)]);
  return static_cast<long>(pool.size()) - largest >= free_slots;
}

}  // namespace bfsim

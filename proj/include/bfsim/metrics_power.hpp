#pragma once

#include <cmath>
#include <stdexcept>

namespace bfsim {

// Sublinear power curve P(u) = P_idle + (P_max - P_idle) * u^gamma, where
// u = mfu / mfu_sat is the utilization fraction within the synchronized phase.
// Defaults are A100 measurements.
struct PowerModel {
  double p_idle = 100.0;   // watts
  double p_max = 400.0;    // watts
  double mfu_sat = 0.45;
  double gamma = 0.7;

  void validate() const {
    if (!(p_idle > 0.0 && p_idle < p_max)) throw std::invalid_argument("power: need 0 < p_idle < p_max");
    if (!(mfu_sat > 0.0 && mfu_sat <= 1.0)) throw std::invalid_argument("power: mfu_sat out of (0,1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("power: gamma out of (0,1)");
  }
};

inline double power(double u, const PowerModel& model) {
  if (u < 0.0 || u > 1.0) throw std::invalid_argument("power: u out of [0,1]");
  return model.p_idle + (model.p_max - model.p_idle) * std::pow(u, model.gamma);
}

}  // namespace bfsim

#pragma once

#include "feemarket/model.hpp"

namespace feemarket {

/// Steady-state expectations over the M/M/1 sojourn W ~ Exp(1 - lambda)
/// with unit service rate:
///   expected_discount = E[exp(-d W)] = (1 - lambda) / (1 + d - lambda)
///   expected_cost     = E[c W]       = c / (1 - lambda)
struct DelayCurveEval {
  double expected_discount = 1.0;
  double expected_cost = 0.0;
  double d_discount = 0.0;
  double d_cost = 0.0;
};

/// Requires 0 <= rate < 1; throws std::domain_error otherwise.
DelayCurveEval eval_delay(double rate, const DelayParams& params);

double mean_sojourn(double rate);

}  // namespace feemarket

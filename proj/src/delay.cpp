#include "feemarket/delay.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace feemarket {

namespace {

void check_stable(double rate, const char* what) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::domain_error(fmt::format("{}: rate {} outside stable range [0, 1)", what, rate));
  }
}

}  // namespace

DelayCurveEval eval_delay(double rate, const DelayParams& params) {
  check_stable(rate, "eval_delay");
  const double d = params.discount_rate;
  const double c = params.linear_cost;
  const double slack = 1.0 - rate;
  const double shifted = 1.0 + d - rate;
  return {
      slack / shifted,
      c / slack,
      -d / (shifted * shifted),
      c / (slack * slack),
  };
}

double mean_sojourn(double rate) {
  check_stable(rate, "mean_sojourn");
  return 1.0 / (1.0 - rate);
}

}  // namespace feemarket

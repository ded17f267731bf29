#pragma once

#include "feemarket/model.hpp"

namespace feemarket {

/// Gross value V(lambda) and marginal value V'(lambda) of a queue's demand.
/// marginal_value is +infinity at lambda = 0 for Isoelastic demand.
struct DemandCurveEval {
  double gross_value = 0.0;
  double marginal_value = 0.0;
};

/// Probability that a valuation exceeds v.
double survival(double v, const DemandFamily& family);

/// Valuation at which the survival probability equals prob, prob in (0, 1].
double inverse_survival(double prob, const DemandFamily& family);

DemandCurveEval eval_demand(double rate, double market_size, const DemandFamily& family);

/// V''(lambda); used by the revenue ascent. Requires 0 < lambda.
double marginal_value_slope(double rate, double market_size, const DemandFamily& family);

/// lambda * V'(lambda), finite at lambda = 0 for every family.
double gross_revenue(double rate, double market_size, const DemandFamily& family);

/// Rate lambda = Lambda * survival(v).
double demand_of_value(double v, double market_size, const DemandFamily& family);

/// Mean valuation E[v] of the family's value law.
double mean_value(const DemandFamily& family);

/// Maps a uniform draw u in (0, 1] to a valuation by inverse transform.
double sample_value(double u, const DemandFamily& family);

}  // namespace feemarket

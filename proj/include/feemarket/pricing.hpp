#pragma once

#include <cstddef>

#include "feemarket/model.hpp"

namespace feemarket {

/// Pigouvian prices supporting a welfare optimum. For a served queue
///   price = -V(lambda) Dbar'(lambda) + lambda Cbar'(lambda) + mu.
/// Unserved queues are priced at their choke price, carried entirely in
/// global_term, so the three components always sum to the price.
PriceSchedule optimal_prices(const SystemSpec& spec, const Allocation& alloc);

/// Small-rate approximation of p_i / p_j for Isoelastic queues sharing d and c:
///   [V_i d/(1+d)^2 + c lambda_i + mu] / [V_j d/(1+d)^2 + c lambda_j + mu].
double approx_price_ratio(std::size_t i, std::size_t j, const SystemSpec& spec, const Allocation& alloc);

/// (lambda_i / Lambda_i) / (lambda_j / Lambda_j).
double limit_price_ratio(std::size_t i, std::size_t j, const SystemSpec& spec, const Allocation& alloc);

}  // namespace feemarket

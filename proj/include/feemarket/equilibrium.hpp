#pragma once

#include <cstddef>
#include <vector>

#include "feemarket/model.hpp"

namespace feemarket {

/// Marginal-user equilibrium of one queue at a posted price.
struct QueueEquilibrium {
  double price = 0.0;
  double rate = 0.0;
  double marginal_value = 0.0;
  bool active = false;
};

/// p(lambda) = V'(lambda) * Dbar(lambda) - Cbar(lambda) for 0 < lambda < min(Lambda, 1).
double price_of_demand(double rate, const QueueSpec& q);

/// The unique equilibrium rate in [0, min(Lambda, 1)) at price p; zero at or
/// above the choke price.
double demand_of_price(double price, const QueueSpec& q);

/// V'(0) * Dbar(0) - Cbar(0); +infinity for Isoelastic demand.
double choke_price(const QueueSpec& q);

QueueEquilibrium equilibrium_at(double price, const QueueSpec& q);

/// Residual of the zero-utility marginal user condition at (rate, price).
double marginal_user_residual(double rate, double price, const QueueSpec& q);

/// Queue indices sorted by decreasing choke price. Isoelastic queues
/// (infinite choke price) come first, ordered by larger market size and
/// then by input index. Throws std::invalid_argument on exact ties among
/// finite choke prices.
std::vector<std::size_t> paper_order(const SystemSpec& spec);

}  // namespace feemarket

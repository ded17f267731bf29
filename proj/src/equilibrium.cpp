#include "feemarket/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "feemarket/delay.hpp"
#include "feemarket/demand.hpp"

namespace feemarket {

namespace {

constexpr int kMaxBisection = 200;

double net_marginal_value(double rate, const QueueSpec& q) {
  const DemandCurveEval v = eval_demand(rate, q.market_size, q.demand);
  const DelayCurveEval t = eval_delay(rate, q.delay);
  if (std::isinf(v.marginal_value)) return kInfinity;
  return v.marginal_value * t.expected_discount - t.expected_cost;
}

}  // namespace

double price_of_demand(double rate, const QueueSpec& q) {
  const double upper = std::min(q.market_size, 1.0);
  if (!(rate > 0.0 && rate < upper)) {
    throw std::domain_error(
        fmt::format("price_of_demand: rate {} outside (0, {}) for queue '{}'", rate, upper, q.name));
  }
  return net_marginal_value(rate, q);
}

double choke_price(const QueueSpec& q) { return net_marginal_value(0.0, q); }

double demand_of_price(double price, const QueueSpec& q) {
  if (price >= choke_price(q)) return 0.0;
  const double cap = q.rate_cap();
  if (net_marginal_value(cap, q) - price >= 0.0) return cap;

  // Residual is strictly decreasing: positive at lo, negative at hi.
  double lo = 0.0;
  double hi = cap;
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (net_marginal_value(mid, q) - price > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

QueueEquilibrium equilibrium_at(double price, const QueueSpec& q) {
  QueueEquilibrium eq;
  eq.price = price;
  eq.rate = demand_of_price(price, q);
  eq.active = eq.rate > 0.0;
  eq.marginal_value = eval_demand(eq.rate, q.market_size, q.demand).marginal_value;
  return eq;
}

double marginal_user_residual(double rate, double price, const QueueSpec& q) {
  return net_marginal_value(rate, q) - price;
}

std::vector<std::size_t> paper_order(const SystemSpec& spec) {
  const std::size_t n = spec.size();
  std::vector<double> chokes(n);
  for (std::size_t i = 0; i < n; ++i) chokes[i] = choke_price(spec.queues[i]);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (chokes[a] != chokes[b]) return chokes[a] > chokes[b];
    if (std::isinf(chokes[a])) return spec.queues[a].market_size > spec.queues[b].market_size;
    return false;
  });
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t a = order[k - 1];
    const std::size_t b = order[k];
    if (std::isfinite(chokes[a]) && chokes[a] == chokes[b]) {
      throw std::invalid_argument(fmt::format(
          "paper_order: queues '{}' and '{}' tie at choke price {}", spec.queues[a].name,
          spec.queues[b].name, chokes[a]));
    }
  }
  return order;
}

}  // namespace feemarket
